//! Derivative-free generalized pattern search and the per-case
//! loosening-rate identification loop that wraps the simulator.

use rayon::prelude::*;

use crate::dynamics::{simulate, tension_change, SimOptions, SystemModel, TensionLaw, TensionWindows};
use crate::error::{Error, Result};
use crate::synth::MeasurementCase;

/// Pattern-search controls. The defaults mirror the identification setup:
/// tolerances tight enough that the mesh test is the effective stop.
#[derive(Debug, Clone, Copy)]
pub struct PatternSearchOptions {
    pub mesh_tolerance: f64,
    pub function_tolerance: f64,
    pub step_tolerance: f64,
    pub max_evals: u64,
    pub max_iters: u64,
    /// Initial mesh size; `None` uses 0.1x the distance from the start to
    /// the upper bound.
    pub initial_mesh: Option<f64>,
    pub expansion: f64,
    pub contraction: f64,
    pub strategy: PollStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PollStrategy {
    /// Accept the first improving poll point (lowest direction index wins).
    #[default]
    FirstImprovement,
    /// Evaluate the full poll and accept the best improving point.
    BestOfPoll,
}

impl Default for PatternSearchOptions {
    fn default() -> Self {
        Self {
            mesh_tolerance: 1e-12,
            function_tolerance: 2.2204e-16,
            step_tolerance: 2.2204e-16,
            max_evals: 10_000_000_000,
            max_iters: 10_000_000_000,
            initial_mesh: None,
            expansion: 2.0,
            contraction: 0.5,
            strategy: PollStrategy::FirstImprovement,
        }
    }
}

impl PatternSearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mesh_tolerance > 0.0
            && self.function_tolerance > 0.0
            && self.step_tolerance > 0.0)
        {
            return Err(Error::InvalidParameter(
                "pattern-search tolerances must be positive".into(),
            ));
        }
        if !(self.expansion > 1.0 && self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need expansion > 1 > contraction > 0, got {} and {}",
                self.expansion, self.contraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub evaluations: u64,
    pub iterations: u64,
}

/// Generalized pattern search over a box. Polls the 2n coordinate
/// directions scaled by the current mesh, expands the mesh on success and
/// contracts it on failure. Objective values that are non-finite reject the
/// poll point. The result never leaves the bounds and never exceeds the
/// starting objective.
pub fn pattern_search<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &PatternSearchOptions,
) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty search space".into()));
    }
    if lower.len() != n || upper.len() != n {
        return Err(Error::InvalidParameter(
            "bounds must match the dimension of x0".into(),
        ));
    }
    for i in 0..n {
        if !(lower[i] <= x0[i] && x0[i] <= upper[i]) {
            return Err(Error::InvalidParameter(format!(
                "x0[{i}] = {} outside [{}, {}]",
                x0[i], lower[i], upper[i]
            )));
        }
    }

    let mut x = x0.to_vec();
    let mut evals: u64 = 0;
    let mut eval = |p: &[f64], evals: &mut u64| -> f64 {
        *evals += 1;
        objective(p)
    };
    let f0 = eval(&x, &mut evals);
    if !f0.is_finite() {
        return Err(Error::NonFiniteModel(
            "objective is non-finite at the starting point".into(),
        ));
    }
    let mut f_best = f0;

    let mut mesh = opts.initial_mesh.unwrap_or_else(|| {
        let span = upper
            .iter()
            .zip(x0)
            .map(|(u, x)| (u - x).abs())
            .fold(0.0f64, f64::max);
        0.1 * if span > 0.0 { span } else { 1.0 }
    });

    let mut iterations: u64 = 0;
    while iterations < opts.max_iters && evals < opts.max_evals {
        iterations += 1;
        if mesh < opts.mesh_tolerance {
            break;
        }

        let mut best_candidate: Option<(Vec<f64>, f64)> = None;
        for dim in 0..n {
            for sign in [1.0, -1.0] {
                let mut candidate = x.clone();
                candidate[dim] = (candidate[dim] + sign * mesh).clamp(lower[dim], upper[dim]);
                if candidate[dim] == x[dim] {
                    continue; // clipped onto the current point
                }
                let f = eval(&candidate, &mut evals);
                if f.is_finite() && f < f_best {
                    match opts.strategy {
                        PollStrategy::FirstImprovement => {
                            best_candidate = Some((candidate, f));
                            break;
                        }
                        PollStrategy::BestOfPoll => {
                            // deterministic tie-break: strictly better only,
                            // earliest direction wins ties
                            if best_candidate.as_ref().map_or(true, |(_, fb)| f < *fb) {
                                best_candidate = Some((candidate, f));
                            }
                        }
                    }
                }
                if evals >= opts.max_evals {
                    break;
                }
            }
            if matches!(opts.strategy, PollStrategy::FirstImprovement)
                && best_candidate.is_some()
            {
                break;
            }
            if evals >= opts.max_evals {
                break;
            }
        }

        match best_candidate {
            Some((candidate, f)) => {
                let improvement = f_best - f;
                let step: f64 = candidate
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                x = candidate;
                f_best = f;
                mesh *= opts.expansion;
                if improvement < opts.function_tolerance || step < opts.step_tolerance {
                    break;
                }
            }
            None => {
                mesh *= opts.contraction;
            }
        }
    }

    Ok(SearchOutcome {
        x,
        objective: f_best,
        evaluations: evals,
        iterations,
    })
}

/// Options for the per-case loosening-rate identification.
#[derive(Debug, Clone, Copy)]
pub struct GammaIdentifyOptions {
    pub search: PatternSearchOptions,
    /// Starting point and box for the constant rate.
    pub gamma_initial: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    /// Search in a signed-log transform of the rate instead of the raw
    /// value. Off by default; the raw-space search follows the identified
    /// setup directly.
    pub log_transform: bool,
    pub windows: TensionWindows,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GammaIdentifyOptions {
    fn default() -> Self {
        Self {
            search: PatternSearchOptions::default(),
            gamma_initial: 1e8,
            gamma_lower: -1e10,
            gamma_upper: 1e10,
            log_transform: false,
            windows: TensionWindows::default(),
            rel_tol: 1e-8,
            abs_tol: 1e-10,
        }
    }
}

/// Identified constant loosening rate for one measurement case.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaIdentification {
    pub case_id: String,
    /// Positive = net loosening, negative = net tightening.
    pub gamma: f64,
    /// Final absolute difference between simulated and measured final
    /// tensions (N).
    pub objective_final: f64,
    pub evaluations: u64,
}

fn signed_log(g: f64) -> f64 {
    g.signum() * (1.0 + g.abs()).log10()
}

fn signed_log_inv(u: f64) -> f64 {
    u.signum() * (10f64.powf(u.abs()) - 1.0)
}

/// Identify the constant loosening rate that reproduces the measured change
/// in tension for one case: each objective evaluation simulates the case
/// with a candidate rate and compares final-window tension means.
pub fn identify_gamma(
    case: &MeasurementCase,
    sys: &SystemModel,
    opts: &GammaIdentifyOptions,
) -> Result<GammaIdentification> {
    let windows = opts.windows;
    let t0_tension = case.tension.mean_over(windows.initial.0, windows.initial.1)?;
    let target_final = case.tension.mean_over(windows.final_.0, windows.final_.1)?;
    let t_end = windows.final_.1;

    let sim_opts = SimOptions {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        output_dt: Some(1.0 / case.tension.sample_rate()),
        include_steps: false,
        max_steps: 20_000_000,
    };

    let objective = |gamma: f64| -> f64 {
        let candidate = sys.with_tension_law(TensionLaw::Constant(gamma));
        match simulate(&candidate, &case.force, t0_tension, (0.0, t_end), &sim_opts) {
            Ok(traj) => match tension_change(&traj, &windows) {
                Ok((_init, t_final, _delta)) => (t_final - target_final).abs(),
                Err(_) => f64::NAN,
            },
            // a failed simulation rejects this poll point
            Err(_) => f64::NAN,
        }
    };

    let outcome = if opts.log_transform {
        let x0 = [signed_log(opts.gamma_initial)];
        let lo = [signed_log(opts.gamma_lower)];
        let hi = [signed_log(opts.gamma_upper)];
        pattern_search(|u| objective(signed_log_inv(u[0])), &x0, &lo, &hi, &opts.search)?
    } else {
        pattern_search(
            |g| objective(g[0]),
            &[opts.gamma_initial],
            &[opts.gamma_lower],
            &[opts.gamma_upper],
            &opts.search,
        )?
    };

    let gamma = if opts.log_transform {
        signed_log_inv(outcome.x[0])
    } else {
        outcome.x[0]
    };
    Ok(GammaIdentification {
        case_id: case.case_id.clone(),
        gamma,
        objective_final: outcome.objective,
        evaluations: outcome.evaluations,
    })
}

/// Per-case outcome of a batch identification; failures are isolated.
#[derive(Debug)]
pub struct CaseOutcome {
    pub case_id: String,
    pub preload_n: f64,
    pub result: Result<GammaIdentification>,
}

/// Identify every case independently (in parallel), preserving order.
/// Failures are reported per case without aborting the batch.
pub fn batch_identify(
    cases: &[MeasurementCase],
    sys: &SystemModel,
    opts: &GammaIdentifyOptions,
) -> Vec<CaseOutcome> {
    cases
        .par_iter()
        .map(|case| CaseOutcome {
            case_id: case.case_id.clone(),
            preload_n: case.preload_n,
            result: identify_gamma(case, sys, opts),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum_found_to_tight_tolerance() {
        let out = pattern_search(
            |x| (x[0] - 3.0) * (x[0] - 3.0),
            &[0.0],
            &[-10.0],
            &[10.0],
            &PatternSearchOptions::default(),
        )
        .unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-9, "x* = {}", out.x[0]);
    }

    #[test]
    fn nonsmooth_minimum_found() {
        let opts = PatternSearchOptions::default();
        let out = pattern_search(|x| x[0].abs(), &[5.0], &[-10.0], &[10.0], &opts).unwrap();
        assert!(out.x[0].abs() < 1e-6, "x* = {}", out.x[0]);
    }

    #[test]
    fn rastrigin_converges_to_a_stationary_mesh_point() {
        // local search: from a start near a local minimum the poll settles
        // there; verify stationarity by probing the converged neighborhood
        let rastrigin =
            |x: f64| 10.0 + x * x - 10.0 * (2.0 * std::f64::consts::PI * x).cos();
        let out = pattern_search(
            |x| rastrigin(x[0]),
            &[2.8],
            &[-5.12],
            &[5.12],
            &PatternSearchOptions::default(),
        )
        .unwrap();
        let f_star = rastrigin(out.x[0]);
        for probe in [-1e-6, 1e-6] {
            assert!(
                rastrigin(out.x[0] + probe) >= f_star - 1e-9,
                "not stationary at {}",
                out.x[0]
            );
        }
    }

    #[test]
    fn search_never_leaves_bounds_or_worsens() {
        let objective = |x: &[f64]| (x[0] + 20.0).powi(2); // minimum outside the box
        let out =
            pattern_search(objective, &[5.0], &[-10.0], &[10.0], &PatternSearchOptions::default())
                .unwrap();
        assert!(out.x[0] >= -10.0 && out.x[0] <= 10.0);
        assert!((out.x[0] + 10.0).abs() < 1e-9, "should sit on the bound");
        assert!(out.objective <= objective(&[5.0]));
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let res = pattern_search(
            |_x| f64::NAN,
            &[0.0],
            &[-1.0],
            &[1.0],
            &PatternSearchOptions::default(),
        );
        assert!(matches!(res, Err(Error::NonFiniteModel(_))));
    }

    #[test]
    fn non_finite_poll_points_are_rejected_not_fatal() {
        // objective is NaN left of the start; the minimum is on the right
        let out = pattern_search(
            |x| {
                if x[0] < 0.0 {
                    f64::NAN
                } else {
                    (x[0] - 1.0).powi(2)
                }
            },
            &[0.5],
            &[-10.0],
            &[10.0],
            &PatternSearchOptions::default(),
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-7, "x* = {}", out.x[0]);
    }

    #[test]
    fn best_of_poll_is_deterministic_and_agrees_on_convex_problems() {
        let mut opts = PatternSearchOptions::default();
        opts.strategy = PollStrategy::BestOfPoll;
        let out = pattern_search(
            |x| (x[0] - 3.0) * (x[0] - 3.0),
            &[0.0],
            &[-10.0],
            &[10.0],
            &opts,
        )
        .unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn multidimensional_poll_reaches_the_minimum() {
        let out = pattern_search(
            |x| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &PatternSearchOptions::default(),
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-8);
        assert!((out.x[1] + 2.0).abs() < 1e-8);
    }

    fn reference_frozen_system() -> SystemModel {
        use crate::dynamics::OscillatorParams;
        use crate::joint_models::{DampingModel, StiffnessModel};
        SystemModel {
            lo: OscillatorParams::new(8.625, 8963.6, 8.2).unwrap(),
            so: OscillatorParams::new(0.9888, 91800.0, 2.696).unwrap(),
            stiffness_model: StiffnessModel::new(9.763e5, -0.0608, 2.003).unwrap(),
            damping_model: DampingModel::new(1853.0, 1717.4, -0.00922).unwrap(),
            tension_law: TensionLaw::Frozen,
        }
    }

    fn synth_constant_gamma_case(gamma: f64, preload: f64, case_id: &str) -> MeasurementCase {
        use crate::synth::{impulse_force, synth_case, NoiseSpec, SynthOptions, TestType};
        let truth = reference_frozen_system().with_tension_law(TensionLaw::Constant(gamma));
        let opts = SynthOptions {
            duration_s: 8.5,
            pretrigger_s: 0.5,
            accel_rate_hz: 4800.0,
            tension_rate_hz: 4800.0,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
        };
        let impulse = impulse_force(1200.0, 0.002, 0.5, 4800.0).unwrap();
        synth_case(
            &truth,
            preload,
            &impulse,
            &NoiseSpec::clean(33),
            &opts,
            TestType::Loosening,
            case_id,
        )
        .unwrap()
    }

    #[test]
    fn flat_objective_case_is_governed_by_the_objective() {
        // zero force, constant tension: every candidate rate reproduces the
        // final tension exactly, so the search ends wherever it stands with
        // the objective at (numerical) zero
        use crate::dynamics::ForceSignal;
        use crate::sigproc::TimeSeries;
        use crate::synth::TestType;
        let n = (8.5 * 4800.0) as usize;
        let case = MeasurementCase {
            case_id: "flat".into(),
            test_type: TestType::Loosening,
            force: ForceSignal::zero(),
            accel_lo: TimeSeries::new(0.0, 1.0 / 4800.0, vec![0.0; n]).unwrap(),
            accel_so: TimeSeries::new(0.0, 1.0 / 4800.0, vec![0.0; n]).unwrap(),
            tension: TimeSeries::new(0.0, 1.0 / 4800.0, vec![500.0; n]).unwrap(),
            preload_n: 500.0,
            accel_rate_hz: 4800.0,
            tension_rate_hz: 4800.0,
        };
        let sys = reference_frozen_system();
        let opts = GammaIdentifyOptions::default();
        let id = identify_gamma(&case, &sys, &opts).unwrap();
        assert!(
            id.objective_final <= opts.search.function_tolerance,
            "objective = {:e}",
            id.objective_final
        );
    }

    #[test]
    fn tightening_case_recovers_negative_rate() {
        let truth_gamma = -1e4;
        let case = synth_constant_gamma_case(truth_gamma, 400.0, "tightening");
        let t0 = case.tension.mean_over(0.0, 0.4).unwrap();
        let t_final = case.tension.mean_over(2.0, 8.0).unwrap();
        assert!(t_final > t0, "case should tighten: {t0} -> {t_final}");
        let id = identify_gamma(
            &case,
            &reference_frozen_system(),
            &GammaIdentifyOptions::default(),
        )
        .unwrap();
        assert!(id.gamma < 0.0, "gamma = {}", id.gamma);
        assert!(
            ((id.gamma - truth_gamma) / truth_gamma).abs() < 0.01,
            "gamma = {}",
            id.gamma
        );
    }

    #[test]
    fn batch_matches_single_runs_and_isolates_failures() {
        use crate::sigproc::TimeSeries;
        let cases = vec![
            synth_constant_gamma_case(2e6, 150.0, "batch-a"),
            synth_constant_gamma_case(5e5, 600.0, "batch-b"),
            // corrupt case: tension record too short for the final window
            {
                let mut broken = synth_constant_gamma_case(1e6, 300.0, "batch-broken");
                broken.tension =
                    TimeSeries::new(0.0, 1.0 / 4800.0, broken.tension.values[..4800].to_vec())
                        .unwrap();
                broken
            },
        ];
        let sys = reference_frozen_system();
        let opts = GammaIdentifyOptions::default();
        let outcomes = batch_identify(&cases, &sys, &opts);
        assert_eq!(outcomes.len(), 3);
        assert_eq!(outcomes[0].case_id, "batch-a");
        // batch results are identical to single-case runs
        for idx in [0usize, 1] {
            let single = identify_gamma(&cases[idx], &sys, &opts).unwrap();
            let batch = outcomes[idx].result.as_ref().unwrap();
            assert_eq!(batch.gamma, single.gamma);
            assert_eq!(batch.objective_final, single.objective_final);
        }
        assert!(outcomes[2].result.is_err(), "corrupt case must fail alone");
    }

    #[test]
    fn signed_log_transform_round_trips() {
        for g in [-1e10, -5e6, -1.0, 0.0, 1.0, 5e6, 1e10] {
            let u = signed_log(g);
            let back = signed_log_inv(u);
            assert!(
                (back - g).abs() <= 1e-9 * g.abs().max(1.0),
                "{g} -> {u} -> {back}"
            );
        }
    }
}
