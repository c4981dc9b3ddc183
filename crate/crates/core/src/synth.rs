//! Seeded synthetic datasets for desk-scale testing and benchmarks.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gtensor::GTensor;
use crate::ingest::{Dataset, GGradientSet, Metadata, ModeSet};

/// Parameters of the synthetic generator. Identical specs produce bitwise
/// identical datasets.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_modes: usize,
    /// Frequency band [min, max] in cm⁻¹, sampled uniformly.
    pub freq_min_cm1: f64,
    pub freq_max_cm1: f64,
    /// Standard deviation of gradient tensor entries (dimensionless per unit
    /// dimensionless displacement). Molecular g-tensor gradients are of
    /// order 10⁻³.
    pub grad_sigma: f64,
    pub b_field_tesla: Vector3<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_modes: 50,
            freq_min_cm1: 50.0,
            freq_max_cm1: 1600.0,
            grad_sigma: 1e-3,
            b_field_tesla: Vector3::new(0.0, 0.0, 1.0),
            seed: 42,
        }
    }
}

/// Standard normal deviate via Box-Muller on the stream of `rng`.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate a reproducible synthetic dataset.
pub fn generate(spec: &SynthSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Mildly anisotropic g near the free-electron value.
    let mut g = Matrix3::identity() * 2.0023;
    for i in 0..3 {
        for j in i..3 {
            let d = 0.02 * gaussian(&mut rng);
            g[(i, j)] += d;
            if i != j {
                g[(j, i)] += d;
            }
        }
    }

    let mut freqs: Vec<f64> = (0..spec.n_modes)
        .map(|_| rng.gen_range(spec.freq_min_cm1..spec.freq_max_cm1))
        .collect();
    freqs.sort_by(f64::total_cmp);

    let tensors: Vec<Matrix3<f64>> = (0..spec.n_modes)
        .map(|_| Matrix3::from_fn(|_, _| spec.grad_sigma * gaussian(&mut rng)))
        .collect();

    let mut meta = Metadata {
        source_program: Some("synthetic".to_string()),
        ..Metadata::default()
    };
    meta.extra
        .insert("seed".into(), serde_json::json!(spec.seed));

    Dataset {
        g_tensor: GTensor::new(g),
        b_field_tesla: spec.b_field_tesla,
        modes: ModeSet::from_frequencies(freqs),
        gradients: GGradientSet { tensors },
        meta,
    }
}
