//! The batch commands: calibrate, identify-modal, fit-models,
//! identify-gamma, simulate, synth. Each is an ordinary function so the
//! pipeline is scriptable from tests as well as from the binary.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::JobConfig;
use super::io;
use crate::dynamics::{simulate, tension_change, ForceSignal, SimOptions, TensionLaw};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_damping_model, fit_gamma_model, fit_stiffness_model, fit_zero_intercept_polynomial,
    GammaFitSpace,
};
use crate::identify::batch_identify;
use crate::joint_models::CalibrationPolynomial;
use crate::modal::{
    coupling_damping_from_zeta, coupling_stiffness_from_frequency, estimate_modal,
    inversion_from_damped_estimate,
};
use crate::sigproc::{accel_to_displacement, align_by_peak, decimate, resample_onto, TimeSeries};
use crate::synth::{impulse_force, synth_campaign, MeasurementCase, NoiseSpec, TestType};

/// Calibration output written to `calibration.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    /// Polynomial coefficients, highest degree first, zero constant term.
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
    pub n_points: usize,
    pub alignment_offset_s: f64,
}

/// Align the strain record to the force record by their first peaks,
/// resample the strain onto the force time base, and fit the degree-3
/// zero-intercept calibration polynomial (force as a function of strain).
pub fn cmd_calibrate(
    strain_csv: &Path,
    force_csv: &Path,
    out_dir: &Path,
) -> Result<CalibrationReport> {
    let (f_times, f_values) = io::read_two_column_csv(force_csv)?;
    let (s_times, s_values) = io::read_two_column_csv(strain_csv)?;
    let force = TimeSeries::from_nonuniform(&f_times, &f_values)?;
    let strain = TimeSeries::from_nonuniform(&s_times, &s_values)?;

    let offset = align_by_peak(&force, &strain)?;
    let strain_on_force = resample_onto(&strain, offset, &force)?;

    let (poly, fit) = fit_zero_intercept_polynomial(&strain_on_force.values, &force.values, 3)?;
    let report = CalibrationReport {
        coeffs: poly.coeffs.clone(),
        r_squared: fit.r_squared,
        n_points: force.len(),
        alignment_offset_s: offset,
    };
    let text = toml::to_string_pretty(&report).map_err(|e| Error::Toml(e.to_string()))?;
    io::atomic_write(&out_dir.join("calibration.toml"), text.as_bytes())?;
    Ok(report)
}

/// Read a calibration file back into a polynomial.
pub fn read_calibration(path: &Path) -> Result<CalibrationPolynomial> {
    #[derive(serde::Deserialize)]
    struct Raw {
        coeffs: Vec<f64>,
    }
    let text = std::fs::read_to_string(path)?;
    let raw: Raw =
        toml::from_str(&text).map_err(|e| Error::Toml(format!("{}: {e}", path.display())))?;
    CalibrationPolynomial::new(raw.coeffs)
}

/// First-mode identification of one conditioned coupled-low case.
pub fn identify_modal_case(case: &MeasurementCase, config: &JobConfig) -> Result<io::ModalRow> {
    let windows = config.windows.tension_windows();
    let preload = case
        .tension
        .mean_over(windows.initial.0, windows.initial.1)
        .unwrap_or(case.preload_n);

    // condition: decimate to the tension rate, then integrate twice to
    // displacement with the coupled-test cutoff
    let factor = (case.accel_rate_hz / case.tension_rate_hz).round() as usize;
    let accel = decimate(&case.accel_lo, factor.max(1))?;
    let (_vel, disp) = accel_to_displacement(&accel, config.filters.coupled_cutoff_hz)?;

    // analyze past the impact and the conditioning filters' transient so
    // neither pretrigger noise nor the transient seeds the peak list
    let disp = match case.force.nonzero_support() {
        Some((t_on, _)) => disp.trimmed_from(t_on + config.modal.transient_guard_s)?,
        None => disp,
    };

    let est = estimate_modal(&disp, &config.modal_options())?;
    let lo = config.corrected_lo()?;
    let so = config.corrected_so()?;
    let omega1 = 2.0 * std::f64::consts::PI * est.f1_hz;

    // The peak-based estimates measure the damped eigenvalue; refine the
    // undamped closed-form inversions through the damped map.
    let mut warnings: Vec<&str> = Vec::new();
    let (k_c, c_c) = match inversion_from_damped_estimate(&lo, &so, est.f1_hz, est.zeta1) {
        Ok(inv) => {
            if !inv.admissible {
                warnings.push("negative-coupling-damping");
            }
            (inv.k_c, inv.c_c)
        }
        Err(_) => {
            // fall back to the undamped closed forms, flagging the rows
            let k_c = match coupling_stiffness_from_frequency(&lo, &so, omega1) {
                Ok(k) => k,
                Err(Error::SingularInversion(_)) => {
                    warnings.push("singular-stiffness-inversion");
                    f64::NAN
                }
                Err(Error::OutOfRange(_)) => {
                    warnings.push("frequency-outside-band");
                    f64::NAN
                }
                Err(e) => return Err(e),
            };
            let c_c = if k_c.is_finite() {
                warnings.push("undamped-inversion-fallback");
                match coupling_damping_from_zeta(&lo, &so, k_c, est.zeta1, omega1) {
                    Ok(inv) => {
                        if !inv.admissible {
                            warnings.push("negative-coupling-damping");
                        }
                        inv.c_c
                    }
                    Err(Error::SingularInversion(_)) => {
                        warnings.push("singular-damping-inversion");
                        f64::NAN
                    }
                    Err(e) => return Err(e),
                }
            } else {
                f64::NAN
            };
            (k_c, c_c)
        }
    };

    Ok(io::ModalRow {
        preload_n: preload,
        f1_hz: est.f1_hz,
        zeta1: est.zeta1,
        k_c_npm: k_c,
        c_c_nspm: c_c,
        warnings: warnings.join(";"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub processed: usize,
    pub failed: usize,
}

/// Run modal identification over every coupled-low case in the manifest.
/// Per-case failures are flagged in the table; the batch continues.
pub fn cmd_identify_modal(
    manifest: &Path,
    config: &JobConfig,
    out_dir: &Path,
) -> Result<BatchSummary> {
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries: Vec<io::ManifestEntry> = io::read_manifest(manifest)?
        .into_iter()
        .filter(|e| e.test_type == TestType::CoupledLow)
        .collect();

    let rows: Vec<io::ModalRow> = entries
        .par_iter()
        .map(|entry| {
            let run = || -> Result<io::ModalRow> {
                let case = io::read_case(dir, entry)?;
                identify_modal_case(&case, config)
            };
            run().unwrap_or_else(|e| io::ModalRow {
                preload_n: entry.preload_n,
                f1_hz: f64::NAN,
                zeta1: f64::NAN,
                k_c_npm: f64::NAN,
                c_c_nspm: f64::NAN,
                warnings: format!("failed: {e}"),
            })
        })
        .collect();

    let failed = rows.iter().filter(|r| r.warnings.starts_with("failed")).count();
    io::write_modal_csv(&out_dir.join("modal.csv"), &rows)?;
    Ok(BatchSummary {
        processed: rows.len(),
        failed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub stiffness_r_squared: f64,
    pub damping_r_squared: f64,
    pub gamma_r_squared: Option<f64>,
    pub rows_used: usize,
    pub rows_dropped: usize,
}

/// Fit the constitutive models from the modal table (and the loosening-rate
/// table when given) and write a complete model config plus a fit report.
/// Rows carrying warnings are dropped unless `keep_warnings` is set.
pub fn cmd_fit_models(
    modal_csv: &Path,
    gamma_csv: Option<&Path>,
    config: &JobConfig,
    out_dir: &Path,
    keep_warnings: bool,
) -> Result<FitReport> {
    let rows = io::read_modal_csv(modal_csv)?;
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{}: empty modal table",
            modal_csv.display()
        )));
    }
    let total = rows.len();
    let usable: Vec<&io::ModalRow> = rows
        .iter()
        .filter(|r| {
            (keep_warnings || r.warnings.is_empty())
                && r.k_c_npm.is_finite()
                && r.c_c_nspm.is_finite()
        })
        .collect();
    if usable.len() < 4 {
        return Err(Error::Validation(format!(
            "only {} usable modal rows after filtering; need at least 4",
            usable.len()
        )));
    }

    let t: Vec<f64> = usable.iter().map(|r| r.preload_n).collect();
    let k: Vec<f64> = usable.iter().map(|r| r.k_c_npm).collect();
    let c: Vec<f64> = usable.iter().map(|r| r.c_c_nspm).collect();
    let (stiffness, k_fit) = fit_stiffness_model(&t, &k)?;
    let (damping, c_fit) = fit_damping_model(&t, &c)?;

    let mut out_config = config.clone();
    out_config.stiffness_model = Some(stiffness);
    out_config.damping_model = Some(damping);

    let mut gamma_r2 = None;
    if let Some(path) = gamma_csv {
        let gamma_rows = io::read_gamma_csv(path)?;
        let ok_rows: Vec<&io::GammaRow> =
            gamma_rows.iter().filter(|r| r.status == "ok").collect();
        if ok_rows.is_empty() {
            return Err(Error::Validation(format!(
                "{}: no successful identifications in the table",
                path.display()
            )));
        }
        for (i, row) in ok_rows.iter().enumerate() {
            if !(row.gamma > 0.0) {
                return Err(Error::NonPositiveGamma {
                    index: i,
                    value: row.gamma,
                });
            }
        }
        let gt: Vec<f64> = ok_rows.iter().map(|r| r.preload_n).collect();
        let gv: Vec<f64> = ok_rows.iter().map(|r| r.gamma).collect();
        let (loosening, g_fit) = fit_gamma_model(&gt, &gv, GammaFitSpace::Log10)?;
        out_config.loosening_model = Some(loosening);
        gamma_r2 = Some(g_fit.r_squared);
    }

    let report = FitReport {
        stiffness_r_squared: k_fit.r_squared,
        damping_r_squared: c_fit.r_squared,
        gamma_r_squared: gamma_r2,
        rows_used: usable.len(),
        rows_dropped: total - usable.len(),
    };
    io::atomic_write(
        &out_dir.join("model.toml"),
        out_config.to_toml()?.as_bytes(),
    )?;
    let report_text = toml::to_string_pretty(&report).map_err(|e| Error::Toml(e.to_string()))?;
    io::atomic_write(&out_dir.join("fit_report.toml"), report_text.as_bytes())?;
    Ok(report)
}

/// Identify the constant loosening rate for every loosening case in the
/// manifest, using the stiffness and damping models from the config.
pub fn cmd_identify_gamma(
    manifest: &Path,
    config: &JobConfig,
    out_dir: &Path,
) -> Result<BatchSummary> {
    let sys = config.system_model(TensionLaw::Frozen)?;
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries: Vec<io::ManifestEntry> = io::read_manifest(manifest)?
        .into_iter()
        .filter(|e| e.test_type == TestType::Loosening)
        .collect();
    if entries.is_empty() {
        return Err(Error::Validation(
            "manifest contains no loosening cases".into(),
        ));
    }

    let cases: Vec<Result<MeasurementCase>> = entries
        .par_iter()
        .map(|entry| io::read_case(dir, entry))
        .collect();
    let mut loaded = Vec::new();
    let mut rows = Vec::new();
    for (entry, case) in entries.iter().zip(cases) {
        match case {
            Ok(c) => loaded.push(c),
            Err(e) => rows.push(io::GammaRow {
                case_id: entry.case_id.clone(),
                preload_n: entry.preload_n,
                gamma: f64::NAN,
                objective_n: f64::NAN,
                evals: 0,
                status: format!("failed: {e}"),
            }),
        }
    }

    let opts = config.gamma_identify_options();
    let outcomes = batch_identify(&loaded, &sys, &opts);
    for outcome in outcomes {
        match outcome.result {
            Ok(id) => rows.push(io::GammaRow {
                case_id: id.case_id,
                preload_n: outcome.preload_n,
                gamma: id.gamma,
                objective_n: id.objective_final,
                evals: id.evaluations,
                status: "ok".into(),
            }),
            Err(e) => rows.push(io::GammaRow {
                case_id: outcome.case_id,
                preload_n: outcome.preload_n,
                gamma: f64::NAN,
                objective_n: f64::NAN,
                evals: 0,
                status: format!("failed: {e}"),
            }),
        }
    }
    rows.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    io::write_gamma_csv(&out_dir.join("gamma.csv"), &rows)?;
    Ok(BatchSummary {
        processed: rows.len(),
        failed,
    })
}

/// What to simulate: a stored case (measured force and tension) or a
/// synthetic impulse at a given preload.
pub enum SimulateInput<'a> {
    Case {
        manifest: &'a Path,
        case_id: &'a str,
    },
    Impulse {
        amplitude_n: f64,
        width_s: f64,
        preload_n: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub t_initial_n: f64,
    pub t_final_n: f64,
    pub delta_n: f64,
    /// Present when simulating a stored case.
    pub measured_final_n: Option<f64>,
    pub percent_error_final_tension: Option<f64>,
}

/// Simulate the full identified model and emit the trajectory plus the
/// tension-change report; for a stored case also the percent error of the
/// final tension against the measurement.
pub fn cmd_simulate(
    config: &JobConfig,
    input: SimulateInput<'_>,
    out_dir: &Path,
) -> Result<SimulationReport> {
    let sys = config.system_model_with_loosening()?;
    let windows = config.windows.tension_windows();
    let t_end = windows.final_.1;
    let sim_opts = SimOptions {
        rel_tol: config.solver.rel_tol,
        abs_tol: config.solver.abs_tol,
        output_dt: Some(1.0 / config.synth.tension_rate_hz),
        include_steps: false,
        max_steps: 50_000_000,
    };

    let (force, t0_tension, measured_final, label): (ForceSignal, f64, Option<f64>, String) =
        match input {
            SimulateInput::Case { manifest, case_id } => {
                let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
                let entry = io::read_manifest(manifest)?
                    .into_iter()
                    .find(|e| e.case_id == case_id)
                    .ok_or_else(|| {
                        Error::Validation(format!("case '{case_id}' not found in manifest"))
                    })?;
                let case = io::read_case(dir, &entry)?;
                let t0 = case
                    .tension
                    .mean_over(windows.initial.0, windows.initial.1)?;
                let measured = case.tension.mean_over(windows.final_.0, windows.final_.1)?;
                (case.force, t0, Some(measured), case.case_id)
            }
            SimulateInput::Impulse {
                amplitude_n,
                width_s,
                preload_n,
            } => {
                if !(preload_n >= 0.0) {
                    return Err(Error::Validation("preload must be non-negative".into()));
                }
                let force = impulse_force(
                    amplitude_n,
                    width_s,
                    config.synth.pretrigger_s,
                    config.synth.accel_rate_hz,
                )?;
                (force, preload_n, None, "impulse".to_string())
            }
        };

    let traj = simulate(&sys, &force, t0_tension, (0.0, t_end), &sim_opts)?;
    let (t_initial, t_final, delta) = tension_change(&traj, &windows)?;
    let percent = measured_final.map(|m| 100.0 * ((t_final - m) / m).abs());

    io::write_trajectory_csv(&out_dir.join(format!("{label}_trajectory.csv")), &traj)?;
    let report = SimulationReport {
        t_initial_n: t_initial,
        t_final_n: t_final,
        delta_n: delta,
        measured_final_n: measured_final,
        percent_error_final_tension: percent,
    };
    let text = toml::to_string_pretty(&report).map_err(|e| Error::Toml(e.to_string()))?;
    io::atomic_write(&out_dir.join(format!("{label}_report.toml")), text.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub coupled_cases: usize,
    pub loosening_cases: usize,
}

/// Generate the synthetic campaign described by the config: a coupled-low
/// sweep and a loosening sweep, written as case files plus a manifest.
pub fn cmd_synth(config: &JobConfig, out_dir: &Path) -> Result<SynthSummary> {
    let truth = config.system_model_with_loosening()?;
    if config.synth.coupled.preloads_n.is_empty() && config.synth.loosening.preloads_n.is_empty() {
        return Err(Error::Validation(
            "synth config requests zero cases".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let noise = config.noise_spec();

    let mut entries = Vec::new();
    let mut n_coupled = 0usize;
    let mut n_loosening = 0usize;

    if !config.synth.coupled.preloads_n.is_empty() {
        let cases = synth_campaign(
            &truth,
            TestType::CoupledLow,
            &config.synth.coupled.preloads_n,
            &[config.synth.coupled.amplitude_n],
            config.synth.impulse_width_s,
            &noise,
            &config.synth_options(config.synth.coupled.duration_s),
        )?;
        n_coupled = cases.len();
        let written: Vec<Result<io::ManifestEntry>> = cases
            .par_iter()
            .map(|case| io::write_case(out_dir, case))
            .collect();
        for (i, entry) in written.into_iter().enumerate() {
            let mut entry = entry?;
            entry.seed = noise.seed.wrapping_add(i as u64);
            entries.push(entry);
        }
    }

    if !config.synth.loosening.preloads_n.is_empty() {
        let loosening_noise = NoiseSpec {
            seed: noise.seed.wrapping_add(100_000),
            ..noise
        };
        let cases = synth_campaign(
            &truth,
            TestType::Loosening,
            &config.synth.loosening.preloads_n,
            &[config.synth.loosening.amplitude_n],
            config.synth.impulse_width_s,
            &loosening_noise,
            &config.synth_options(config.synth.loosening.duration_s),
        )?;
        n_loosening = cases.len();
        let written: Vec<Result<io::ManifestEntry>> = cases
            .par_iter()
            .map(|case| io::write_case(out_dir, case))
            .collect();
        for (i, entry) in written.into_iter().enumerate() {
            let mut entry = entry?;
            entry.seed = loosening_noise.seed.wrapping_add(i as u64);
            entries.push(entry);
        }
    }

    io::write_manifest(&io::manifest_path(out_dir), &entries)?;
    Ok(SynthSummary {
        coupled_cases: n_coupled,
        loosening_cases: n_loosening,
    })
}
