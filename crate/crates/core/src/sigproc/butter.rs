//! Butterworth filter design as a cascade of second-order sections and
//! zero-phase forward-backward filtering.
//!
//! Design follows the classic route: analog prototype poles, low-pass or
//! high-pass transform of the prewarped cutoff, bilinear transform, and
//! pole-zero pairing into biquads. Cascaded sections keep the recursion
//! well conditioned at small cutoff/sample-rate ratios where a single
//! high-order direct form is not.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    HighPass,
    LowPass,
}

#[derive(Debug, Clone, Copy)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub kind: FilterKind,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub fn highpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self {
            order,
            cutoff_hz,
            kind: FilterKind::HighPass,
            sample_rate_hz,
        }
    }

    pub fn lowpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self {
            order,
            cutoff_hz,
            kind: FilterKind::LowPass,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidParameter("filter order must be >= 1".into()));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must satisfy 0 < fc < fs/2; got fc = {} Hz, fs = {} Hz",
                self.cutoff_hz, self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// One biquad stage, `a0` normalized to 1.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a1 + self.a2)
    }

    fn response_at(&self, z_inv: Complex64) -> Complex64 {
        let num = Complex64::new(self.b[0], 0.0)
            + z_inv * (Complex64::new(self.b[1], 0.0) + z_inv * self.b[2]);
        let den =
            Complex64::new(1.0, 0.0) + z_inv * (Complex64::new(self.a1, 0.0) + z_inv * self.a2);
        num / den
    }
}

/// Cascade of second-order sections plus the design metadata needed for
/// zero-phase filtering.
#[derive(Debug, Clone)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    order: usize,
    sample_rate_hz: f64,
}

impl SosFilter {
    /// Design a Butterworth filter: analog prototype, frequency prewarping,
    /// bilinear transform. The magnitude at the cutoff is exactly 1/sqrt(2).
    pub fn design(spec: &FilterSpec) -> Result<SosFilter> {
        spec.validate()?;
        let n = spec.order;
        let fs = spec.sample_rate_hz;
        let warped = 2.0 * fs * (PI * spec.cutoff_hz / fs).tan();

        // Analog Butterworth prototype: poles on the unit circle, left half-plane.
        let proto: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = PI * (2 * k + 1) as f64 / (2 * n) as f64 + PI / 2.0;
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();

        // Frequency transform of the prototype (gain of the Butterworth
        // prototype is 1 and the product of its negated poles is 1).
        let (zeros_a, poles_a, gain_a): (Vec<Complex64>, Vec<Complex64>, f64) = match spec.kind {
            FilterKind::LowPass => {
                let p: Vec<Complex64> = proto.iter().map(|&pk| pk * warped).collect();
                (Vec::new(), p, warped.powi(n as i32))
            }
            FilterKind::HighPass => {
                let p: Vec<Complex64> = proto.iter().map(|&pk| warped / pk).collect();
                (vec![Complex64::new(0.0, 0.0); n], p, 1.0)
            }
        };

        // Bilinear transform with gain matching at z -> infinity samples.
        let fs2 = 2.0 * fs;
        let bil = |s: Complex64| (fs2 + s) / (fs2 - s);
        let mut zeros_d: Vec<Complex64> = zeros_a.iter().map(|&z| bil(z)).collect();
        let poles_d: Vec<Complex64> = poles_a.iter().map(|&p| bil(p)).collect();
        let mut num = Complex64::new(1.0, 0.0);
        for &z in &zeros_a {
            num *= fs2 - z;
        }
        let mut den = Complex64::new(1.0, 0.0);
        for &p in &poles_a {
            den *= fs2 - p;
        }
        let gain_d = gain_a * (num / den).re;
        // Degree deficit maps to zeros at z = -1.
        while zeros_d.len() < poles_d.len() {
            zeros_d.push(Complex64::new(-1.0, 0.0));
        }

        // Pair poles into sections. Butterworth poles are distinct: one real
        // pole for odd orders, the rest conjugate pairs.
        let mut reals: Vec<f64> = Vec::new();
        let mut pairs: Vec<Complex64> = Vec::new();
        for &p in &poles_d {
            if p.im.abs() < 1e-12 * p.re.abs().max(1.0) {
                reals.push(p.re);
            } else if p.im > 0.0 {
                pairs.push(p);
            }
        }

        let mut sections: Vec<Biquad> = Vec::new();
        let mut zi = zeros_d.into_iter();
        for r in reals {
            let z = zi.next().expect("zero available for real pole");
            sections.push(Biquad {
                b: [1.0, -z.re, 0.0],
                a1: -r,
                a2: 0.0,
            });
        }
        for p in pairs {
            let z1 = zi.next().expect("zero available for pole pair");
            let z2 = zi.next().expect("zero available for pole pair");
            let zs = (z1 + z2).re;
            let zp = (z1 * z2).re;
            sections.push(Biquad {
                b: [1.0, -zs, zp],
                a1: -2.0 * p.re,
                a2: p.norm_sqr(),
            });
        }
        for b in sections[0].b.iter_mut() {
            *b *= gain_d;
        }

        Ok(SosFilter {
            sections,
            order: n,
            sample_rate_hz: fs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Magnitude of the single-pass frequency response at `f_hz`.
    pub fn magnitude_at(&self, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.sample_rate_hz;
        let z_inv = Complex64::new(w.cos(), -w.sin());
        self.sections
            .iter()
            .map(|s| s.response_at(z_inv).norm())
            .product()
    }

    /// Single forward pass with steady-state initial conditions for the
    /// first input sample, direct form II transposed per section.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut level = y[0];
        for s in &self.sections {
            let h1 = s.dc_gain();
            // steady state for a constant input `level`
            let y_ss = h1 * level;
            let mut s2 = s.b[2] * level - s.a2 * y_ss;
            let mut s1 = (s.b[1] + s.b[2]) * level - (s.a1 + s.a2) * y_ss;
            for v in y.iter_mut() {
                let x_n = *v;
                let y_n = s.b[0] * x_n + s1;
                s1 = s.b[1] * x_n - s.a1 * y_n + s2;
                s2 = s.b[2] * x_n - s.a2 * y_n;
                *v = y_n;
            }
            level = y_ss;
        }
        y
    }

    /// Zero-phase filtering: forward pass, reverse, second pass, reverse.
    /// Edge transients are mitigated by odd-symmetric reflection padding of
    /// 3x the filter order.
    pub fn filtfilt(&self, x: &TimeSeries) -> Result<TimeSeries> {
        let values = self.filtfilt_slice(&x.values)?;
        TimeSeries::new(x.t0, x.dt, values)
    }

    pub fn filtfilt_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let padlen = 3 * self.order;
        if x.len() <= padlen {
            return Err(Error::SignalTooShort {
                len: x.len(),
                needed: padlen,
            });
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        for i in 0..padlen {
            ext.push(2.0 * x[0] - x[padlen - i]);
        }
        ext.extend_from_slice(x);
        for i in 0..padlen {
            ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
        }

        let mut y = self.forward(&ext);
        y.reverse();
        let mut y = self.forward(&y);
        y.reverse();
        Ok(y[padlen..padlen + n].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn highpass_cutoff_magnitude_is_half_power() {
        let hp = SosFilter::design(&FilterSpec::highpass(3, 2.0, 4800.0)).unwrap();
        let mag = hp.magnitude_at(2.0);
        assert!(
            (mag - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4,
            "|H(fc)| = {mag}"
        );
    }

    #[test]
    fn highpass_dc_is_nulled_and_passband_flat() {
        let hp = SosFilter::design(&FilterSpec::highpass(3, 2.0, 4800.0)).unwrap();
        assert!(hp.magnitude_at(0.0) < 1e-12);
        let passband = hp.magnitude_at(200.0);
        assert!((passband - 1.0).abs() < 1e-6, "|H(100 fc)| = {passband}");
    }

    #[test]
    fn cutoff_at_or_above_nyquist_is_rejected() {
        assert!(SosFilter::design(&FilterSpec::highpass(3, 2400.0, 4800.0)).is_err());
        assert!(SosFilter::design(&FilterSpec::highpass(3, 3000.0, 4800.0)).is_err());
    }

    #[test]
    fn filtfilt_is_zero_phase_on_passband_tone() {
        let fs = 1000.0;
        let fc = 2.0;
        let f = 10.0 * fc;
        let hp = SosFilter::design(&FilterSpec::highpass(3, fc, fs)).unwrap();
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let y = hp.filtfilt_slice(&x).unwrap();
        // cross-correlation over interior samples peaks at lag zero
        let lo = n / 4;
        let hi = 3 * n / 4;
        let corr = |lag: i64| -> f64 {
            (lo..hi)
                .map(|i| x[i] * y[(i as i64 + lag) as usize])
                .sum::<f64>()
        };
        let c0 = corr(0);
        for lag in [-3i64, -2, -1, 1, 2, 3] {
            assert!(corr(lag) < c0, "lag {lag} correlation not below lag 0");
        }
    }

    #[test]
    fn filtfilt_rejects_constant_signal() {
        let fs = 1000.0;
        let hp = SosFilter::design(&FilterSpec::highpass(3, 2.0, fs)).unwrap();
        let x = vec![5.0; 6000];
        let y = hp.filtfilt_slice(&x).unwrap();
        // after the transient region the output is a negligible fraction of the input
        let interior = &y[1500..4500];
        let max = interior.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(max < 5.0 * 1e-6, "residual = {max}");
    }

    #[test]
    fn filtfilt_applies_squared_magnitude_at_cutoff() {
        let fs = 1000.0;
        let fc = 5.0;
        let hp = SosFilter::design(&FilterSpec::highpass(3, fc, fs)).unwrap();
        let n = 20000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * fc * i as f64 / fs).sin()).collect();
        let y = hp.filtfilt_slice(&x).unwrap();
        let interior = &y[n / 4..3 * n / 4];
        let amp = interior.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!((amp - 0.5).abs() < 0.005, "amplitude ratio = {amp}");
    }

    #[test]
    fn filtfilt_too_short_signal_errors() {
        let hp = SosFilter::design(&FilterSpec::highpass(3, 2.0, 100.0)).unwrap();
        assert!(hp.filtfilt_slice(&[1.0; 9]).is_err());
        assert!(hp.filtfilt_slice(&[1.0; 10]).is_ok());
    }

    #[test]
    fn filtfilt_symmetric_input_time_reversal_invariance() {
        let fs = 500.0;
        let hp = SosFilter::design(&FilterSpec::highpass(3, 3.0, fs)).unwrap();
        let n = 2001;
        // even-symmetric pulse about the record center
        let x: Vec<f64> = (0..n)
            .map(|i| (-((i as f64 - 1000.0) / 60.0).powi(2)).exp())
            .collect();
        let y = hp.filtfilt_slice(&x).unwrap();
        let mut xr = x.clone();
        xr.reverse();
        let mut yr = hp.filtfilt_slice(&xr).unwrap();
        yr.reverse();
        // symmetric up to rounding noise amplified through the recursive
        // sections (poles close to the unit circle at this cutoff ratio)
        for i in 0..n {
            assert!((y[i] - yr[i]).abs() < 1e-7, "asymmetry at {i}");
        }
    }

    #[test]
    fn lowpass_design_dc_unity() {
        let lp = SosFilter::design(&FilterSpec::lowpass(8, 1920.0, 19200.0)).unwrap();
        assert!((lp.magnitude_at(0.0) - 1.0).abs() < 1e-10);
        let mag_fc = lp.magnitude_at(1920.0);
        assert!((mag_fc - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }
}
