//! Measurement conditioning: uniformly sampled series, cumulative
//! trapezoidal integration, zero-phase Butterworth filtering, the
//! acceleration-to-displacement chain, decimation, and peak alignment.

mod butter;

pub use butter::{FilterKind, FilterSpec, SosFilter};

use crate::error::{Error, Result};

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Time of the first sample (s).
    pub t0: f64,
    /// Sample interval (s), strictly positive.
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time series needs finite t0 and dt > 0, got t0 = {t0}, dt = {dt}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "time series values must be finite".into(),
            ));
        }
        Ok(Self { t0, dt, values })
    }

    /// Linearly resample a non-uniformly sampled signal onto a uniform grid.
    /// The grid spacing is the median of the input spacings.
    pub fn from_nonuniform(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "times and values lengths differ: {} vs {}",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::SignalTooShort {
                len: times.len(),
                needed: 2,
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "times must be strictly increasing".into(),
            ));
        }
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dt = gaps[gaps.len() / 2];
        let t0 = times[0];
        let n = ((times[times.len() - 1] - t0) / dt).floor() as usize + 1;
        let resampled = (0..n)
            .map(|i| interp_linear(times, values, t0 + i as f64 * dt))
            .collect();
        TimeSeries::new(t0, dt, resampled)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        if self.values.is_empty() {
            self.t0
        } else {
            self.time(self.len() - 1)
        }
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Mean of the samples with times in `[ta, tb]`. The series must cover
    /// the window.
    pub fn mean_over(&self, ta: f64, tb: f64) -> Result<f64> {
        let eps = 0.5 * self.dt;
        if self.is_empty() || self.t0 > ta + eps || self.t_end() < tb - eps {
            return Err(Error::InsufficientCoverage {
                needed: (ta, tb),
                available: (self.t0, self.t_end()),
            });
        }
        let i0 = ((ta - self.t0) / self.dt).ceil().max(0.0) as usize;
        let i1 = (((tb - self.t0) / self.dt).floor() as usize).min(self.len() - 1);
        if i1 < i0 {
            return Err(Error::InsufficientCoverage {
                needed: (ta, tb),
                available: (self.t0, self.t_end()),
            });
        }
        let slice = &self.values[i0..=i1];
        Ok(slice.iter().sum::<f64>() / slice.len() as f64)
    }

    /// Sub-series starting at the first sample with time >= `t_start`.
    pub fn trimmed_from(&self, t_start: f64) -> Result<TimeSeries> {
        let i0 = ((t_start - self.t0) / self.dt).ceil().max(0.0) as usize;
        if i0 >= self.len() {
            return Err(Error::InsufficientCoverage {
                needed: (t_start, t_start),
                available: (self.t0, self.t_end()),
            });
        }
        TimeSeries::new(self.time(i0), self.dt, self.values[i0..].to_vec())
    }
}

/// Linear interpolation with constant extension beyond the support.
fn interp_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    if t >= times[times.len() - 1] {
        return values[values.len() - 1];
    }
    let j = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[j - 1], times[j]);
    let w = (t - t0) / (t1 - t0);
    values[j - 1] * (1.0 - w) + values[j] * w
}

/// Cumulative trapezoidal integral; the first output sample is zero.
pub fn cumtrapz(x: &TimeSeries) -> Result<TimeSeries> {
    if x.len() < 2 {
        return Err(Error::SignalTooShort {
            len: x.len(),
            needed: 2,
        });
    }
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in x.values.windows(2) {
        acc += x.dt * 0.5 * (w[0] + w[1]);
        out.push(acc);
    }
    TimeSeries::new(x.t0, x.dt, out)
}

/// Acceleration to (velocity, displacement): high-pass, integrate, high-pass,
/// integrate, high-pass, all zero-phase third-order Butterworth at `cutoff_hz`.
pub fn accel_to_displacement(a: &TimeSeries, cutoff_hz: f64) -> Result<(TimeSeries, TimeSeries)> {
    let spec = FilterSpec::highpass(3, cutoff_hz, a.sample_rate());
    let hp = SosFilter::design(&spec)?;
    let a_f = hp.filtfilt(a)?;
    let v = hp.filtfilt(&cumtrapz(&a_f)?)?;
    let d = hp.filtfilt(&cumtrapz(&v)?)?;
    Ok((v, d))
}

/// Anti-aliased downsampling by an integer factor: zero-phase order-8
/// Butterworth low-pass at 0.8x the new Nyquist, then stride.
pub fn decimate(x: &TimeSeries, factor: usize) -> Result<TimeSeries> {
    if factor < 1 {
        return Err(Error::InvalidParameter(
            "decimation factor must be >= 1".into(),
        ));
    }
    let fs = x.sample_rate();
    let cutoff = 0.8 * (fs / factor as f64) / 2.0;
    let lp = SosFilter::design(&FilterSpec::lowpass(8, cutoff, fs))?;
    let filtered = lp.filtfilt(x)?;
    let values = filtered.values.iter().step_by(factor).copied().collect();
    TimeSeries::new(x.t0, x.dt * factor as f64, values)
}

/// Time offset that makes the global maxima of `a` and `b` coincide
/// (positive when `b` peaks earlier than `a`).
pub fn align_by_peak(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    Ok(peak_time(a)? - peak_time(b)?)
}

/// Shift `b` forward by `offset` seconds, then linearly resample it onto the
/// sample grid of `target`.
pub fn resample_onto(b: &TimeSeries, offset: f64, target: &TimeSeries) -> Result<TimeSeries> {
    let times: Vec<f64> = b.times().iter().map(|t| t + offset).collect();
    let values = (0..target.len())
        .map(|i| interp_linear(&times, &b.values, target.time(i)))
        .collect();
    TimeSeries::new(target.t0, target.dt, values)
}

/// Time of the global maximum, refined by a three-point parabola where the
/// maximum is interior.
fn peak_time(x: &TimeSeries) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::SignalTooShort {
            len: x.len(),
            needed: 2,
        });
    }
    let (mut i_max, mut v_max) = (0usize, f64::NEG_INFINITY);
    let mut v_min = f64::INFINITY;
    for (i, &v) in x.values.iter().enumerate() {
        if v > v_max {
            v_max = v;
            i_max = i;
        }
        if v < v_min {
            v_min = v;
        }
    }
    if v_max == v_min {
        return Err(Error::FlatSignal);
    }
    let mut t = x.time(i_max);
    if i_max > 0 && i_max + 1 < x.len() {
        let (ym, y0, yp) = (
            x.values[i_max - 1],
            x.values[i_max],
            x.values[i_max + 1],
        );
        let denom = ym - 2.0 * y0 + yp;
        if denom.abs() > 0.0 {
            let delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            t += delta * x.dt;
        }
    }
    Ok(t)
}
