//! Adaptive Dormand-Prince 5(4) integration for linear complex ODE systems
//! dy/dt = L y, with dense output at caller-specified times.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t_s} s (h = {h_s} s); system too stiff, consider rescaling rates")]
    StepUnderflow { t_s: f64, h_s: f64 },
    #[error("step budget of {0} exceeded")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 4th-order weights for the embedded error estimate.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = L y from `t_grid[0]`, returning the state at every grid
/// time (the first entry is `y0` itself). Grid times must be increasing.
pub fn integrate_linear(
    generator: &DMatrix<Complex64>,
    y0: DVector<Complex64>,
    t_grid_s: &[f64],
    options: &OdeOptions,
) -> Result<Vec<DVector<Complex64>>, OdeError> {
    assert!(!t_grid_s.is_empty(), "empty time grid");
    let rhs = |y: &DVector<Complex64>| generator * y;

    let mut outputs = Vec::with_capacity(t_grid_s.len());
    outputs.push(y0.clone());

    let mut t = t_grid_s[0];
    let mut y = y0;
    let mut k1 = rhs(&y);

    // Initial step from the generator scale.
    let gen_scale = generator
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let span = t_grid_s[t_grid_s.len() - 1] - t_grid_s[0];
    let mut h = (0.1 / gen_scale).min(span.max(f64::MIN_POSITIVE));

    let mut steps = 0usize;
    let mut ks: [DVector<Complex64>; 7] = [
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
    ];

    for &t_target in &t_grid_s[1..] {
        assert!(t_target >= t, "time grid must be increasing");
        while t < t_target {
            if steps >= options.max_steps {
                return Err(OdeError::TooManySteps(options.max_steps));
            }
            steps += 1;
            if h < span * 1e-15 {
                return Err(OdeError::StepUnderflow { t_s: t, h_s: h });
            }
            let h_try = h.min(t_target - t);

            ks[0] = k1.clone();
            for stage in 0..6 {
                let mut yi = y.clone();
                for (j, a) in A[stage].iter().enumerate().take(stage + 1) {
                    if *a != 0.0 {
                        yi.axpy(Complex64::new(a * h_try, 0.0), &ks[j], Complex64::new(1.0, 0.0));
                    }
                }
                ks[stage + 1] = rhs(&yi);
            }
            // 5th-order solution is the last stage input (FSAL): y5 = y + h Σ a6j kj.
            let mut y5 = y.clone();
            for (j, a) in A[5].iter().enumerate() {
                if *a != 0.0 {
                    y5.axpy(Complex64::new(a * h_try, 0.0), &ks[j], Complex64::new(1.0, 0.0));
                }
            }
            let mut y4 = y.clone();
            for (j, b) in B4.iter().enumerate() {
                if *b != 0.0 {
                    y4.axpy(Complex64::new(b * h_try, 0.0), &ks[j], Complex64::new(1.0, 0.0));
                }
            }

            // Weighted RMS error norm.
            let mut err_sq = 0.0;
            for i in 0..y.len() {
                let scale =
                    options.atol + options.rtol * y[i].norm().max(y5[i].norm());
                let e = (y5[i] - y4[i]).norm() / scale;
                err_sq += e * e;
            }
            let err = (err_sq / y.len() as f64).sqrt();

            if err <= 1.0 {
                t += h_try;
                y = y5;
                k1 = ks[6].clone();
            }
            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = (h_try * factor).max(f64::MIN_POSITIVE);
        }
        outputs.push(y.clone());
    }
    Ok(outputs)
}
