//! Synthetic measurement cases: half-sine hammer impulses, simulated
//! accelerations and tension records at the acquisition rates, and optional
//! seeded noise. These stand in for the physical rig so every stage of the
//! identification pipeline can be verified round-trip.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    eom_rhs, rk45, simulate, ForceSignal, OscillatorParams, SimOptions, SystemModel,
};
use crate::error::{Error, Result};
use crate::sigproc::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestType {
    /// Free decay of a single oscillator, bolt absent.
    Uncoupled,
    /// Low-amplitude impact on the coupled system; tension unchanged.
    CoupledLow,
    /// High-amplitude impact intended to change the bolt tension.
    Loosening,
}

impl TestType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestType::Uncoupled => "uncoupled",
            TestType::CoupledLow => "coupled-low",
            TestType::Loosening => "loosening",
        }
    }
}

impl std::str::FromStr for TestType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncoupled" => Ok(TestType::Uncoupled),
            "coupled-low" => Ok(TestType::CoupledLow),
            "loosening" => Ok(TestType::Loosening),
            other => Err(Error::Validation(format!("unknown test type '{other}'"))),
        }
    }
}

/// One experiment record: the force input, both acceleration channels at
/// the fast rate, and the bolt tension at the slow rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCase {
    pub case_id: String,
    pub test_type: TestType,
    pub force: ForceSignal,
    pub accel_lo: TimeSeries,
    pub accel_so: TimeSeries,
    pub tension: TimeSeries,
    /// Nominal preload (N).
    pub preload_n: f64,
    pub accel_rate_hz: f64,
    pub tension_rate_hz: f64,
}

/// Gaussian noise level for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseLevel {
    /// Fixed rms in the channel's units.
    Absolute(f64),
    /// Rms as a fraction of the clean channel's own scale (signal rms for
    /// accelerations, deviation about the mean for tension).
    Relative(f64),
}

impl NoiseLevel {
    fn rms_for(&self, clean: &[f64]) -> f64 {
        match *self {
            NoiseLevel::Absolute(rms) => rms,
            NoiseLevel::Relative(frac) => {
                let n = clean.len().max(1) as f64;
                let mean = clean.iter().sum::<f64>() / n;
                let var = clean.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                // the mean-square about the mean captures both oscillatory
                // signals (mean ~ 0) and drifting tension records
                frac * var.sqrt()
            }
        }
    }

    fn value(&self) -> f64 {
        match *self {
            NoiseLevel::Absolute(v) | NoiseLevel::Relative(v) => v,
        }
    }
}

/// Additive measurement noise, deterministic per seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise on each acceleration channel (m/s^2 when absolute).
    pub accel: NoiseLevel,
    /// Noise on the tension channel (N when absolute).
    pub tension: NoiseLevel,
    /// Ambient tone (Hz, amplitude in m/s^2) added to both accelerations.
    pub ambient_tone: Option<(f64, f64)>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean(seed: u64) -> Self {
        Self {
            accel: NoiseLevel::Absolute(0.0),
            tension: NoiseLevel::Absolute(0.0),
            ambient_tone: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.accel.value() < 0.0 || self.tension.value() < 0.0 {
            return Err(Error::InvalidParameter(
                "noise levels must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Record layout and solver settings for synthetic cases. Defaults mirror
/// the acquisition setup: 30.5 s records, 0.5 s pretrigger, 19200 Hz force
/// and acceleration sampling, 4800 Hz tension sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub duration_s: f64,
    pub pretrigger_s: f64,
    pub accel_rate_hz: f64,
    pub tension_rate_hz: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            duration_s: 30.5,
            pretrigger_s: 0.5,
            accel_rate_hz: 19200.0,
            tension_rate_hz: 4800.0,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
        }
    }
}

impl SynthOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.pretrigger_s >= 0.0) {
            return Err(Error::InvalidParameter(
                "record duration must be positive and pretrigger non-negative".into(),
            ));
        }
        if !(self.accel_rate_hz > 0.0 && self.tension_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "sample rates must be positive".into(),
            ));
        }
        let ratio = self.accel_rate_hz / self.tension_rate_hz;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "acceleration rate must be an integer multiple of the tension rate, got \
                 ratio {ratio}"
            )));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        (self.accel_rate_hz / self.tension_rate_hz).round() as usize
    }
}

/// Half-sine hammer pulse `A sin(pi (t - t0) / w)` on `[t0, t0 + w]`,
/// sampled at `fs` with one zero sample padded on each side.
pub fn impulse_force(amplitude: f64, width: f64, t0: f64, fs: f64) -> Result<ForceSignal> {
    if !(width > 0.0 && fs > 0.0) {
        return Err(Error::InvalidParameter(
            "impulse width and sample rate must be positive".into(),
        ));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidParameter(
            "impulse amplitude must be non-negative".into(),
        ));
    }
    let dt = 1.0 / fs;
    let n = (width / dt).ceil() as usize + 3;
    let start = t0 - dt;
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let t = start + i as f64 * dt;
        let v = if t >= t0 && t <= t0 + width {
            amplitude * (std::f64::consts::PI * (t - t0) / width).sin()
        } else {
            0.0
        };
        times.push(t);
        values.push(v);
    }
    ForceSignal::new(times, values)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = (rng.next_u64() as f64 + 1.0) / (u64::MAX as f64 + 2.0);
    let u2 = rng.next_u64() as f64 / u64::MAX as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn channel_rng(seed: u64, channel: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(channel.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn add_noise(series: &mut TimeSeries, rms: f64, tone: Option<(f64, f64)>, rng: &mut ChaCha8Rng) {
    if rms > 0.0 {
        for v in series.values.iter_mut() {
            *v += rms * gaussian(rng);
        }
    }
    if let Some((f, amp)) = tone {
        for i in 0..series.len() {
            let t = series.time(i);
            series.values[i] += amp * (2.0 * std::f64::consts::PI * f * t).sin();
        }
    }
}

/// Simulate one coupled-system case and sample it like the acquisition
/// hardware would: accelerations from the equations of motion at the fast
/// rate, tension at the slow rate, independent Gaussian noise per channel.
pub fn synth_case(
    truth: &SystemModel,
    preload_n: f64,
    impulse: &ForceSignal,
    noise: &NoiseSpec,
    opts: &SynthOptions,
    test_type: TestType,
    case_id: impl Into<String>,
) -> Result<MeasurementCase> {
    opts.validate()?;
    noise.validate()?;
    let dt_fast = 1.0 / opts.accel_rate_hz;
    let sim = SimOptions {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        output_dt: Some(dt_fast),
        include_steps: false,
        max_steps: 50_000_000,
    };
    let traj = simulate(truth, impulse, preload_n, (0.0, opts.duration_s), &sim)?;

    // accelerations from the right-hand side, exact within solver tolerance
    let n = traj.len();
    let mut accel_lo = Vec::with_capacity(n);
    let mut accel_so = Vec::with_capacity(n);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let d = eom_rhs(truth, *t, s, impulse)?;
        accel_lo.push(d.v_lo);
        accel_so.push(d.v_so);
    }
    let mut accel_lo = TimeSeries::new(0.0, dt_fast, accel_lo)?;
    let mut accel_so = TimeSeries::new(0.0, dt_fast, accel_so)?;

    let stride = opts.stride();
    let tension_values: Vec<f64> = traj
        .states
        .iter()
        .step_by(stride)
        .map(|s| s.tension)
        .collect();
    let mut tension = TimeSeries::new(0.0, dt_fast * stride as f64, tension_values)?;

    let accel_lo_rms = noise.accel.rms_for(&accel_lo.values);
    let accel_so_rms = noise.accel.rms_for(&accel_so.values);
    let tension_rms = noise.tension.rms_for(&tension.values);
    add_noise(
        &mut accel_lo,
        accel_lo_rms,
        noise.ambient_tone,
        &mut channel_rng(noise.seed, 1),
    );
    add_noise(
        &mut accel_so,
        accel_so_rms,
        noise.ambient_tone,
        &mut channel_rng(noise.seed, 2),
    );
    add_noise(&mut tension, tension_rms, None, &mut channel_rng(noise.seed, 3));

    Ok(MeasurementCase {
        case_id: case_id.into(),
        test_type,
        force: impulse.clone(),
        accel_lo,
        accel_so,
        tension,
        preload_n,
        accel_rate_hz: opts.accel_rate_hz,
        tension_rate_hz: opts.tension_rate_hz,
    })
}

/// Which oscillator an uncoupled test excites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncoupledTarget {
    Lo,
    So,
}

/// Simulate one uncoupled (bolt absent) free-decay case of a single
/// oscillator. The response lands on the impacted oscillator's acceleration
/// channel; the other channel and the tension record are zero.
pub fn synth_uncoupled_case(
    osc: &OscillatorParams,
    impulse: &ForceSignal,
    noise: &NoiseSpec,
    opts: &SynthOptions,
    target: UncoupledTarget,
    case_id: impl Into<String>,
) -> Result<MeasurementCase> {
    opts.validate()?;
    noise.validate()?;
    osc.validate()?;
    let dt_fast = 1.0 / opts.accel_rate_hz;
    let (mass, stiffness, damping) = (osc.mass, osc.stiffness, osc.damping);
    let sol = rk45::integrate(
        |t, y: &[f64; 2]| {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t });
            }
            let f = impulse.value_at(t);
            Ok([y[1], (f - damping * y[1] - stiffness * y[0]) / mass])
        },
        (0.0, opts.duration_s),
        [0.0, 0.0],
        &rk45::Rk45Options {
            rel_tol: opts.rel_tol,
            abs_tol: opts.abs_tol,
            step_cap: impulse.nonzero_support().and_then(|(lo, hi)| {
                impulse.min_spacing().map(|dt| rk45::StepCap {
                    start: lo,
                    end: hi,
                    h_cap: dt,
                })
            }),
            ..Default::default()
        },
    )?;

    let n = (opts.duration_s / dt_fast).round() as usize + 1;
    let mut accel = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 * dt_fast).min(opts.duration_s);
        let y = sol.sample(t);
        accel.push((impulse.value_at(t) - damping * y[1] - stiffness * y[0]) / mass);
    }
    let mut live = TimeSeries::new(0.0, dt_fast, accel)?;
    let silent = TimeSeries::new(0.0, dt_fast, vec![0.0; n])?;
    let live_rms = noise.accel.rms_for(&live.values);
    add_noise(
        &mut live,
        live_rms,
        noise.ambient_tone,
        &mut channel_rng(noise.seed, 1),
    );
    let stride = opts.stride();
    let tension = TimeSeries::new(
        0.0,
        dt_fast * stride as f64,
        vec![0.0; n.div_ceil(stride)],
    )?;

    let (accel_lo, accel_so) = match target {
        UncoupledTarget::Lo => (live, silent),
        UncoupledTarget::So => (silent, live),
    };
    Ok(MeasurementCase {
        case_id: case_id.into(),
        test_type: TestType::Uncoupled,
        force: impulse.clone(),
        accel_lo,
        accel_so,
        tension,
        preload_n: 0.0,
        accel_rate_hz: opts.accel_rate_hz,
        tension_rate_hz: opts.tension_rate_hz,
    })
}

/// Generate a cartesian sweep of cases over preloads and impact amplitudes.
/// Case ids are deterministic and each case derives its noise seed from the
/// base seed plus its index.
pub fn synth_campaign(
    truth: &SystemModel,
    test_type: TestType,
    preloads_n: &[f64],
    amplitudes_n: &[f64],
    impulse_width_s: f64,
    noise: &NoiseSpec,
    opts: &SynthOptions,
) -> Result<Vec<MeasurementCase>> {
    if preloads_n.is_empty() {
        return Err(Error::InvalidParameter("empty preload grid".into()));
    }
    if amplitudes_n.is_empty() {
        return Err(Error::InvalidParameter("empty amplitude grid".into()));
    }
    let grid: Vec<(usize, f64, f64)> = preloads_n
        .iter()
        .flat_map(|&p| amplitudes_n.iter().map(move |&a| (p, a)))
        .enumerate()
        .map(|(i, (p, a))| (i, p, a))
        .collect();
    grid.par_iter()
        .map(|&(index, preload, amplitude)| {
            let impulse = impulse_force(
                amplitude,
                impulse_width_s,
                opts.pretrigger_s,
                opts.accel_rate_hz,
            )?;
            let case_noise = NoiseSpec {
                seed: noise.seed.wrapping_add(index as u64),
                ..*noise
            };
            let case_id = format!("{}-{index:03}", test_type.as_str());
            synth_case(truth, preload, &impulse, &case_noise, opts, test_type, case_id)
        })
        .collect()
}
