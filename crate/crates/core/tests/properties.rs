//! Property tests for the library invariants.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

use spinphonon::bath::{bose_occupation, spectral_density_full, DensityOptions, Flavor, GridSpec};
use spinphonon::embed::{embed_dataset, mode_entropy, roundtrip_check, svd_project, DEFAULT_SV_THRESHOLD};
use spinphonon::gtensor::GTensor;
use spinphonon::ingest::{
    coupling_matrix, fd_gradient, participation_norms, CouplingMatrix, GGradientSet,
    GradientNorm, ModeSet,
};
use spinphonon::spin::{spin_hamiltonian, SpinSystem};
use spinphonon::units::thermal_energy_cm1;

fn matrix3(entries: [f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&entries)
}

prop_compose! {
    fn small_entries()(v in prop::array::uniform9(-0.05f64..0.05)) -> [f64; 9] { v }
}

proptest! {
    #[test]
    fn spin_hamiltonian_is_hermitian(
        entries in small_entries(),
        bx in -5.0f64..5.0,
        by in -5.0f64..5.0,
        bz in -5.0f64..5.0,
    ) {
        let g = GTensor::new(Matrix3::identity() * 2.0 + matrix3(entries));
        let sys = SpinSystem::new(0.5, g, Vector3::new(bx, by, bz)).unwrap();
        let h = spin_hamiltonian(&sys).unwrap();
        let defect = (&h - h.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        prop_assert!(defect < 1e-14);
    }

    #[test]
    fn zeeman_gap_linear_in_field(
        entries in small_entries(),
        bz in 0.1f64..5.0,
        scale in 1.0f64..10.0,
    ) {
        let g = GTensor::new(Matrix3::identity() * 2.0 + matrix3(entries));
        let gap = |b: Vector3<f64>| {
            let sys = SpinSystem::new(0.5, g.clone(), b).unwrap();
            let eig = spin_hamiltonian(&sys).unwrap().symmetric_eigen();
            eig.eigenvalues.max() - eig.eigenvalues.min()
        };
        let b = Vector3::new(0.3, -0.1, bz);
        let g1 = gap(b);
        let g2 = gap(b * scale);
        prop_assert!((g2 - scale * g1).abs() <= 1e-12 * g2.abs());
    }

    #[test]
    fn coupling_linear_in_field_scale(
        seeds in prop::collection::vec(-1e-3f64..1e-3, 9 * 4),
        c in 0.0f64..8.0,
    ) {
        let tensors: Vec<Matrix3<f64>> = seeds
            .chunks(9)
            .map(Matrix3::from_row_slice)
            .collect();
        let grads = GGradientSet { tensors };
        let b = Vector3::new(0.1, 0.4, 0.9);
        let a = coupling_matrix(&grads, b);
        let scaled = coupling_matrix(&grads, b * c);
        let diff = (&scaled.0 - &a.0 * c).abs().max();
        prop_assert!(diff <= 1e-14 * (1.0 + scaled.0.abs().max()));
    }

    #[test]
    fn participation_norms_sign_invariant(
        entries in small_entries(),
        flip in 0usize..9,
    ) {
        let t = matrix3(entries);
        let mut flipped = t;
        flipped[(flip / 3, flip % 3)] = -flipped[(flip / 3, flip % 3)];
        let a = GGradientSet { tensors: vec![t] };
        let b = GGradientSet { tensors: vec![flipped] };
        for norm in [GradientNorm::AbsSum, GradientNorm::Frobenius] {
            prop_assert_eq!(
                participation_norms(&a, norm)[0].to_bits(),
                participation_norms(&b, norm)[0].to_bits()
            );
        }
    }

    #[test]
    fn abs_sum_norm_dominates_frobenius(entries in small_entries()) {
        let grads = GGradientSet { tensors: vec![matrix3(entries)] };
        let l1 = participation_norms(&grads, GradientNorm::AbsSum)[0];
        let fro = participation_norms(&grads, GradientNorm::Frobenius)[0];
        prop_assert!(l1 >= fro - 1e-18);
    }

    #[test]
    fn fd_gradient_antisymmetric(
        p in small_entries(),
        m in small_entries(),
        delta in 1e-4f64..0.1,
    ) {
        let gp = GTensor::new(matrix3(p));
        let gm = GTensor::new(matrix3(m));
        let fwd = fd_gradient(&gp, &gm, delta).unwrap();
        let rev = fd_gradient(&gm, &gp, delta).unwrap();
        prop_assert_eq!(fwd, -rev);
    }

    #[test]
    fn bose_occupation_identities(
        omega in 1.0f64..2000.0,
        temp in 1.0f64..400.0,
    ) {
        let n = bose_occupation(omega, temp).unwrap();
        prop_assert!(n >= 0.0);
        // Detailed balance: (n+1)/n = e^{ħω/k_BT}.
        let x = omega / thermal_energy_cm1(temp);
        if n > 0.0 {
            prop_assert!(((n + 1.0) / n - x.exp()).abs() <= 1e-9 * x.exp());
        }
        // Monotone in temperature.
        let hotter = bose_occupation(omega, temp * 1.5).unwrap();
        prop_assert!(hotter >= n);
    }

    #[test]
    fn mode_entropy_bounds(v in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        let vec = DVector::from_vec(v);
        prop_assume!(vec.norm() > 1e-6);
        let s = mode_entropy(&vec).unwrap();
        prop_assert!(s >= 0.0);
        prop_assert!(s <= (vec.len() as f64).ln() + 1e-12);
        // Scale invariance.
        let s2 = mode_entropy(&(&vec * 3.7)).unwrap();
        prop_assert!((s - s2).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_algebra_holds(
        entries in prop::collection::vec(-1e-3f64..1e-3, 3 * 10),
    ) {
        let m = DMatrix::from_row_slice(3, 10, &entries);
        prop_assume!(m.amax() > 1e-6);
        let out = svd_project(&CouplingMatrix(m), DEFAULT_SV_THRESHOLD).unwrap();
        let p = &out.projectors.p;
        let q = &out.projectors.q;
        let id = DMatrix::<f64>::identity(10, 10);
        prop_assert!((p * p - p).abs().max() < 1e-12);
        prop_assert!((q * q - q).abs().max() < 1e-12);
        prop_assert!((p * q).abs().max() < 1e-12);
        prop_assert!((p + q - id).abs().max() < 1e-12);
        prop_assert!(out.projectors.rank <= 3);
    }

    #[test]
    fn embedding_congruence_holds(
        entries in prop::collection::vec(-1e-3f64..1e-3, 3 * 8),
        freqs in prop::collection::vec(30.0f64..1500.0, 8),
    ) {
        let m = DMatrix::from_row_slice(3, 8, &entries);
        prop_assume!(m.amax() > 1e-6);
        let modes = ModeSet::from_frequencies(freqs);
        let emb = embed_dataset(&CouplingMatrix(m.clone()), &modes, DEFAULT_SV_THRESHOLD).unwrap();
        let report = roundtrip_check(&emb, &modes);
        prop_assert!(report.max_rel_freq_error < 1e-10);
        prop_assert!(report.orthogonality_defect < 1e-12);
        // Coupling-norm preservation per row.
        for alpha in 0..3 {
            let full: f64 = m.row(alpha).iter().map(|x| x * x).sum();
            let proj: f64 = emb.primary_couplings.row(alpha).iter().map(|x| x * x).sum();
            prop_assert!((full - proj).abs() <= 1e-12 * full.max(1e-30));
        }
    }

    #[test]
    fn classical_density_even(
        entries in prop::collection::vec(-1e-3f64..1e-3, 3 * 4),
        freqs in prop::collection::vec(40.0f64..800.0, 4),
        temp in 5.0f64..350.0,
    ) {
        let gc = CouplingMatrix(DMatrix::from_row_slice(3, 4, &entries));
        let modes = ModeSet::from_frequencies(freqs);
        let density = spectral_density_full(
            &gc,
            &modes,
            temp,
            8.0,
            Flavor::Classical,
            &DensityOptions {
                grid: GridSpec { omega_max_cm1: None, n_points: 1024 },
                with_cross: false,
            },
        )
        .unwrap();
        for alpha in 0..3 {
            let max = density.max_abs(alpha);
            for i in 0..density.n_points() {
                let j = density.n_points() - 1 - i;
                prop_assert!((density.sample(alpha, i) - density.sample(alpha, j)).abs() <= 1e-12 * max);
            }
        }
    }
}
