//! Adaptive embedded Runge-Kutta 4(5) integration (Dormand-Prince pair)
//! with PI step-size control, FSAL, and fourth-order dense output.
//!
//! The integrator is generic over the state dimension so the coupled
//! five-state joint system and scalar auxiliary equations share one core.

use crate::error::{Error, Result};

// Dormand-Prince tableau.
const A: [[f64; 6]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
// Fifth-minus-fourth-order error weights (the seventh entry weights FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Rk45Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Hard cap on the step size; defaults to the span length.
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Cap the step at `h_cap` while the step window overlaps
    /// `[start, end]`; used to resolve short force pulses.
    pub step_cap: Option<StepCap>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepCap {
    pub start: f64,
    pub end: f64,
    pub h_cap: f64,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_max: None,
            max_steps: 50_000_000,
            step_cap: None,
        }
    }
}

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluate the continuous extension at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }

    pub fn y_end(&self) -> [f64; N] {
        self.eval(self.t1)
    }
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub n_rhs_evals: usize,
}

impl<const N: usize> Solution<N> {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map(|s| s.t1).unwrap_or(f64::NAN)
    }

    pub fn final_state(&self) -> [f64; N] {
        self.steps
            .last()
            .map(|s| s.y_end())
            .unwrap_or([f64::NAN; N])
    }

    /// Sample the solution at `t` (must lie inside the integrated span).
    pub fn sample(&self, t: f64) -> [f64; N] {
        let idx = self
            .steps
            .partition_point(|s| s.t1 < t)
            .min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

fn axpy<const N: usize>(y: &mut [f64; N], a: f64, x: &[f64; N]) {
    for i in 0..N {
        y[i] += a * x[i];
    }
}

/// Integrate `rhs` over `t_span` from `y0`, returning all accepted steps with
/// dense output. The right-hand side may fail (e.g. on non-finite state);
/// failures inside trial stages reject that step and shrink it.
pub fn integrate<const N: usize, F>(
    mut rhs: F,
    t_span: (f64, f64),
    y0: [f64; N],
    opts: &Rk45Options,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!(
            "integration span must be increasing, got [{t0}, {t_end}]"
        )));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "tolerances must be positive".into(),
        ));
    }
    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut t = t0;
    let mut y = y0;
    let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
    k[0] = rhs(t, &y)?;
    let mut n_rhs = 1usize;

    let sc = |yv: &[f64; N], yw: &[f64; N], i: usize| {
        opts.abs_tol + opts.rel_tol * yv[i].abs().max(yw[i].abs())
    };

    // Hairer-style initial step estimate.
    let mut h = {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            let s = sc(&y, &y, i);
            d0 += (y[i] / s).powi(2);
            d1 += (k[0][i] / s).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span.max(1.0)
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(h_max);
        let mut y1 = y;
        axpy(&mut y1, h0, &k[0]);
        match rhs(t + h0, &y1) {
            Ok(f1) => {
                n_rhs += 1;
                let mut d2: f64 = 0.0;
                for i in 0..N {
                    let s = sc(&y, &y1, i);
                    d2 += ((f1[i] - k[0][i]) / s).powi(2);
                }
                d2 = (d2 / N as f64).sqrt() / h0;
                let d_max = d1.max(d2);
                let h1 = if d_max <= 1e-15 {
                    (h0 * 1e-3).max(1e-6 * span)
                } else {
                    (0.01 / d_max).powf(0.2)
                };
                (100.0 * h0).min(h1).min(h_max)
            }
            Err(_) => h0 * 1e-2,
        }
    };

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FAC_MIN: f64 = 0.2; // max shrink per step
    const FAC_MAX: f64 = 10.0; // max growth per step
    let mut facold: f64 = 1e-4;

    let mut steps: Vec<DenseStep<N>> = Vec::new();
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut n_steps = 0usize;

    while t < t_end {
        if n_steps >= opts.max_steps {
            return Err(Error::MaxStepsExceeded { t });
        }
        n_steps += 1;

        // Do not step past the end, and resolve short force pulses.
        h = h.min(h_max);
        if let Some(cap) = opts.step_cap {
            if t < cap.start {
                if t + h > cap.start {
                    h = (cap.start - t).max(cap.h_cap.min(h));
                }
            } else if t <= cap.end {
                h = h.min(cap.h_cap);
            }
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if !(h > 0.0) || t + h == t {
            return Err(Error::StepSizeUnderflow {
                t,
                last_state: y.to_vec(),
            });
        }

        // Trial stages; an RHS failure rejects the step.
        let mut failed = false;
        for stage in 1..6 {
            let mut ys = y;
            for (j, a) in A[stage].iter().enumerate().take(stage) {
                axpy(&mut ys, h * a, &k[j]);
            }
            match rhs(t + C[stage] * h, &ys) {
                Ok(f) => k[stage] = f,
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        let mut y_new = y;
        let mut err = f64::INFINITY;
        if !failed {
            n_rhs += 5;
            for (j, b) in B.iter().enumerate() {
                axpy(&mut y_new, h * b, &k[j]);
            }
            match rhs(t + h, &y_new) {
                Ok(f) => {
                    k[6] = f;
                    n_rhs += 1;
                    let mut acc = 0.0;
                    for i in 0..N {
                        let mut e = 0.0;
                        for (j, w) in E.iter().enumerate() {
                            e += w * k[j][i];
                        }
                        let s = sc(&y, &y_new, i);
                        acc += (h * e / s).powi(2);
                    }
                    err = (acc / N as f64).sqrt();
                    if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                        failed = true;
                    }
                }
                Err(_) => failed = true,
            }
        }

        if !failed && err <= 1.0 {
            // Accept: build the dense-output polynomial.
            let mut cont = [[0.0; N]; 5];
            let mut dsum = [0.0; N];
            for (j, d) in D.iter().enumerate() {
                axpy(&mut dsum, *d, &k[j]);
            }
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] = h * dsum[i];
            }
            steps.push(DenseStep {
                t0: t,
                t1: t + h,
                cont,
            });
            n_accepted += 1;

            let fac =
                (err.powf(EXPO1) / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            facold = err.max(1e-4);
            t += h;
            y = y_new;
            k[0] = k[6]; // FSAL
            h /= fac;
        } else {
            n_rejected += 1;
            let fac = if err.is_finite() {
                (err.powf(EXPO1) / SAFE).max(1.0 / FAC_MAX)
            } else {
                2.0
            };
            h /= fac.max(2.0);
        }
    }

    Ok(Solution {
        steps,
        n_accepted,
        n_rejected,
        n_rhs_evals: n_rhs,
    })
}
