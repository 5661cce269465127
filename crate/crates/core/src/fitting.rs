//! Nonlinear least-squares fitting of the constitutive models, the
//! zero-intercept calibration polynomial fit, and goodness-of-fit metrics.

use crate::error::{Error, Result};
use crate::joint_models::{CalibrationPolynomial, DampingModel, LooseningModel, StiffnessModel};

/// Fitted parameters with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Coefficient of determination; NaN when the data variance is zero and
    /// the fit is not exact.
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Zero-variance data is
/// reported as 1 for an (essentially) exact fit and NaN otherwise.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len(), "r_squared length mismatch");
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if ss_tot == 0.0 {
        if ss_res < 1e-30 {
            return 1.0;
        }
        return f64::NAN;
    }
    1.0 - ss_res / ss_tot
}

/// Solve a small dense linear system in place by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot vanishes.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn cost_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

fn project(p: &mut [f64], bounds: Option<(&[f64], &[f64])>) {
    if let Some((lower, upper)) = bounds {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(lower[i], upper[i]);
        }
    }
}

/// Levenberg-Marquardt damped Gauss-Newton over a scalar model `y = f(x, p)`.
///
/// The Jacobian is taken by central finite differences with per-parameter
/// step `max(1e-6 |p|, 1e-8)`. Damping starts at `1e-3 max(diag(J^T J))`,
/// grows tenfold on a rejected step and shrinks tenfold on an accepted one;
/// singular normal equations only increase the damping. The fit is converged
/// after the relative cost decrease or the step norm stays below 1e-12 for
/// three consecutive accepted iterations.
pub fn nlls_fit<F>(
    model: F,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
    bounds: Option<(&[f64], &[f64])>,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "x and y lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < p0.len() {
        return Err(Error::InvalidParameter(format!(
            "need at least as many points ({}) as parameters ({})",
            x.len(),
            p0.len()
        )));
    }
    if let Some((lower, upper)) = bounds {
        if lower.len() != p0.len() || upper.len() != p0.len() {
            return Err(Error::InvalidParameter(
                "bounds must match the parameter count".into(),
            ));
        }
    }
    let n = x.len();
    let np = p0.len();
    let mut p = p0.to_vec();
    project(&mut p, bounds);

    let residuals_at = |p: &[f64]| -> Option<Vec<f64>> {
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let v = model(x[i], p);
            if !v.is_finite() {
                return None;
            }
            r.push(y[i] - v);
        }
        Some(r)
    };

    let mut residuals = residuals_at(&p).ok_or_else(|| {
        Error::NonFiniteModel("model is non-finite at the initial parameters".into())
    })?;
    let mut cost = cost_of(&residuals);

    const MAX_ITERS: usize = 10_000;
    const TOL: f64 = 1e-12;
    let mut lambda: Option<f64> = None;
    let mut quiet_iters = 0usize;
    let mut consecutive_rejects = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..MAX_ITERS {
        iterations += 1;

        // central-difference Jacobian of the residual vector
        let mut jac = vec![vec![0.0; np]; n];
        let mut degenerate = false;
        for j in 0..np {
            let h = (1e-6 * p[j].abs()).max(1e-8);
            let mut p_hi = p.clone();
            let mut p_lo = p.clone();
            p_hi[j] += h;
            p_lo[j] -= h;
            for i in 0..n {
                let f_hi = model(x[i], &p_hi);
                let f_lo = model(x[i], &p_lo);
                if !f_hi.is_finite() || !f_lo.is_finite() {
                    degenerate = true;
                    break;
                }
                jac[i][j] = (f_hi - f_lo) / (2.0 * h);
            }
            if degenerate {
                break;
            }
        }
        if degenerate {
            break;
        }

        // normal equations J^T J and J^T r
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for i in 0..n {
            for a in 0..np {
                jtr[a] += jac[i][a] * residuals[i];
                for b in a..np {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let max_diag = (0..np).fold(0.0f64, |m, i| m.max(jtj[i][i]));
        if max_diag == 0.0 {
            break; // flat model: nothing to improve
        }
        let lam = *lambda.get_or_insert(1e-3 * max_diag);

        // solve (J^T J + lambda I) delta = J^T r, escalating damping on
        // singular systems instead of aborting
        let mut lam_try = lam;
        let delta = loop {
            let mut a = jtj.clone();
            for i in 0..np {
                a[i][i] += lam_try;
            }
            let mut rhs = jtr.clone();
            match solve_dense(&mut a, &mut rhs) {
                Some(d) => break d,
                None => {
                    lam_try *= 10.0;
                    if lam_try > 1e300 {
                        break vec![0.0; np];
                    }
                }
            }
        };
        lambda = Some(lam_try);

        let mut p_new = p.clone();
        for j in 0..np {
            p_new[j] += delta[j];
        }
        project(&mut p_new, bounds);
        let step_norm = p_new
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();

        let accepted = match residuals_at(&p_new) {
            Some(r_new) => {
                let cost_new = cost_of(&r_new);
                if cost_new < cost {
                    let rel_decrease = (cost - cost_new) / cost.max(1e-300);
                    p = p_new;
                    residuals = r_new;
                    cost = cost_new;
                    lambda = Some(lam_try / 10.0);
                    if rel_decrease < TOL || step_norm < TOL {
                        quiet_iters += 1;
                    } else {
                        quiet_iters = 0;
                    }
                    true
                } else {
                    false
                }
            }
            None => false,
        };

        if accepted {
            consecutive_rejects = 0;
            if quiet_iters >= 3 || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            lambda = Some(lam_try * 10.0);
            consecutive_rejects += 1;
            quiet_iters = 0;
            // with the damping this large the step is numerically zero:
            // the iterate is stationary
            if consecutive_rejects >= 25 {
                converged = true;
                break;
            }
        }
    }

    let yhat: Vec<f64> = x.iter().map(|&xi| model(xi, &p)).collect();
    let r2 = r_squared(y, &yhat);
    Ok(FitResult {
        params: p,
        r_squared: r2,
        residuals,
        converged,
        iterations,
    })
}

fn clamped_exp(arg: f64) -> f64 {
    arg.clamp(-700.0, 700.0).exp()
}

/// Fit the logistic coupling-stiffness model to (tension, stiffness) data.
pub fn fit_stiffness_model(tension: &[f64], k: &[f64]) -> Result<(StiffnessModel, FitResult)> {
    if tension.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "stiffness fit needs at least 4 points, got {}",
            tension.len()
        )));
    }
    let model = |t: f64, p: &[f64]| p[0] / (1.0 + clamped_exp(p[1] * (t - p[2])));
    let fit = nlls_fit(model, tension, k, &[1e6, -0.1, 5.0], None)?;
    let m = StiffnessModel::new(fit.params[0], fit.params[1], fit.params[2])?;
    Ok((m, fit))
}

/// Fit the reversed-logistic coupling-damping model to (tension, damping) data.
pub fn fit_damping_model(tension: &[f64], c: &[f64]) -> Result<(DampingModel, FitResult)> {
    if tension.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "damping fit needs at least 4 points, got {}",
            tension.len()
        )));
    }
    let model = |t: f64, p: &[f64]| p[0] - p[1] / (1.0 + clamped_exp(p[2] * t));
    let fit = nlls_fit(model, tension, c, &[2000.0, 2000.0, 0.01], None)?;
    let m = DampingModel::new(fit.params[0], fit.params[1], fit.params[2])?;
    Ok((m, fit))
}

/// Residual space for the loosening-rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaFitSpace {
    /// Residuals on the base-ten exponent; the rate spans several decades,
    /// so this conditions far better.
    #[default]
    Log10,
    /// Residuals on the rate itself, matching the composite form directly.
    Linear,
}

/// Fit the loosening-rate law to per-case identified rates; every rate must
/// be positive (net-loosening cases only).
pub fn fit_gamma_model(
    tension: &[f64],
    gamma: &[f64],
    space: GammaFitSpace,
) -> Result<(LooseningModel, FitResult)> {
    if tension.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "loosening fit needs at least 3 points, got {}",
            tension.len()
        )));
    }
    for (i, &g) in gamma.iter().enumerate() {
        if !(g > 0.0) {
            return Err(Error::NonPositiveGamma { index: i, value: g });
        }
    }
    let p0 = [12.0, 8.0, -0.0035];
    let (fit, params) = match space {
        GammaFitSpace::Log10 => {
            let y: Vec<f64> = gamma.iter().map(|g| g.log10()).collect();
            let model = |t: f64, p: &[f64]| p[0] - p[1] / (1.0 + clamped_exp(p[2] * t));
            let fit = nlls_fit(model, tension, &y, &p0, None)?;
            let params = fit.params.clone();
            (fit, params)
        }
        GammaFitSpace::Linear => {
            let model =
                |t: f64, p: &[f64]| 10f64.powf(p[0] - p[1] / (1.0 + clamped_exp(p[2] * t)));
            let fit = nlls_fit(model, tension, gamma, &p0, None)?;
            let params = fit.params.clone();
            (fit, params)
        }
    };
    let m = LooseningModel::new(params[0], params[1], params[2])?;
    Ok((m, fit))
}

/// Constrained linear least squares on the basis {x, x^2, ..., x^degree}:
/// the fitted polynomial has no constant term, so it vanishes at zero by
/// construction.
pub fn fit_zero_intercept_polynomial(
    x: &[f64],
    y: &[f64],
    degree: usize,
) -> Result<(CalibrationPolynomial, FitResult)> {
    if degree < 1 {
        return Err(Error::InvalidParameter(
            "polynomial degree must be >= 1".into(),
        ));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "x and y lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < degree {
        return Err(Error::InvalidParameter(format!(
            "need at least {degree} points for a degree-{degree} zero-intercept fit"
        )));
    }

    // design matrix columns x^1 .. x^degree, scaled to unit norm for
    // conditioning
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = (1..=degree)
        .map(|d| x.iter().map(|&v| v.powi(d as i32)).collect())
        .collect();
    let mut scales = vec![0.0; degree];
    for (j, col) in cols.iter_mut().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        scales[j] = norm;
        for v in col.iter_mut() {
            *v /= norm;
        }
    }

    let mut ata = vec![vec![0.0; degree]; degree];
    let mut aty = vec![0.0; degree];
    for i in 0..n {
        for a in 0..degree {
            aty[a] += cols[a][i] * y[i];
            for b in a..degree {
                ata[a][b] += cols[a][i] * cols[b][i];
            }
        }
    }
    for a in 0..degree {
        for b in 0..a {
            ata[a][b] = ata[b][a];
        }
    }
    let solution = solve_dense(&mut ata, &mut aty).ok_or(Error::RankDeficient)?;

    let coeffs_ascending: Vec<f64> = solution
        .iter()
        .zip(&scales)
        .map(|(c, s)| c / s)
        .collect();
    // stored highest degree first
    let coeffs: Vec<f64> = coeffs_ascending.iter().rev().copied().collect();
    let poly = CalibrationPolynomial::new(coeffs)?;
    let yhat: Vec<f64> = x.iter().map(|&v| poly.strain_to_tension(v)).collect();
    let residuals: Vec<f64> = y.iter().zip(&yhat).map(|(a, b)| a - b).collect();
    let r2 = r_squared(y, &yhat);
    let fit = FitResult {
        params: poly.coeffs.clone(),
        r_squared: r2,
        residuals,
        converged: true,
        iterations: 1,
    };
    Ok((poly, fit))
}
