//! Tension-dependent constitutive models of the bolted interface: the
//! force-strain calibration polynomial, logistic coupling stiffness,
//! reversed-logistic coupling damping, and the loosening-rate law.
//!
//! All evaluators are pure, accept any finite tension (including transiently
//! negative values probed by adaptive steppers), and saturate smoothly at
//! extreme arguments instead of overflowing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic arguments are clamped here before exponentiation; the modeled
/// functions are bounded, so saturation is the correct limit behavior.
const EXP_CLAMP: f64 = 700.0;

fn clamped_exp(arg: f64) -> f64 {
    arg.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// Bolt calibration polynomial mapping strain to tension (N). Coefficients
/// are ordered highest degree first; the constant term is structurally
/// absent so zero strain maps to exactly zero force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPolynomial {
    pub coeffs: Vec<f64>,
}

impl CalibrationPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let p = Self { coeffs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "calibration polynomial needs at least one coefficient".into(),
            ));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "calibration coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluate the polynomial in nested form.
    pub fn strain_to_tension(&self, strain: f64) -> f64 {
        let mut acc = 0.0;
        for &c in &self.coeffs {
            acc = acc * strain + c;
        }
        acc * strain
    }
}

/// Logistic coupling-stiffness model `k_c(T) = k_I / (1 + exp(alpha (T - beta)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessModel {
    /// Stiffness plateau (N/m).
    pub k_i: f64,
    /// Logistic rate (1/N); fits on this rig come out negative.
    pub alpha: f64,
    /// Logistic center (N).
    pub beta: f64,
}

impl StiffnessModel {
    pub fn new(k_i: f64, alpha: f64, beta: f64) -> Result<Self> {
        let m = Self { k_i, alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_i > 0.0) || !self.k_i.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stiffness plateau must be positive and finite, got {}",
                self.k_i
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(
                "stiffness model rate and center must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Coupling stiffness at the given tension (N/m).
    pub fn stiffness(&self, tension: f64) -> f64 {
        self.k_i / (1.0 + clamped_exp(self.alpha * (tension - self.beta)))
    }
}

/// Reversed-logistic coupling-damping model `c_c(T) = c_D - c_I / (1 + exp(eta T))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingModel {
    /// Offset (Ns/m).
    pub c_d: f64,
    /// Depth (Ns/m).
    pub c_i: f64,
    /// Logistic rate (1/N).
    pub eta: f64,
}

impl DampingModel {
    pub fn new(c_d: f64, c_i: f64, eta: f64) -> Result<Self> {
        let m = Self { c_d, c_i, eta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c_d.is_finite() || !self.c_i.is_finite() || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(
                "damping model parameters must be finite".into(),
            ));
        }
        // The high-tension plateau is c_D - c_I; a negative plateau is not a
        // physical damper.
        if self.c_d - self.c_i < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "damping plateau c_D - c_I = {} is negative",
                self.c_d - self.c_i
            )));
        }
        Ok(())
    }

    /// Coupling damping at the given tension (Ns/m).
    pub fn damping(&self, tension: f64) -> f64 {
        self.c_d - self.c_i / (1.0 + clamped_exp(self.eta * tension))
    }
}

/// Loosening-rate law `gamma(T) = 10^(gamma_d - gamma_I / (1 + exp(rho T)))`.
/// The result is a strictly positive power of ten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooseningModel {
    /// log10 offset of the rate exponent.
    pub gamma_d: f64,
    /// log10 depth of the rate exponent.
    pub gamma_i: f64,
    /// Logistic rate (1/N).
    pub rho: f64,
}

impl LooseningModel {
    pub fn new(gamma_d: f64, gamma_i: f64, rho: f64) -> Result<Self> {
        let m = Self {
            gamma_d,
            gamma_i,
            rho,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma_d.is_finite() || !self.gamma_i.is_finite() || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(
                "loosening model parameters must be finite".into(),
            ));
        }
        // Both saturated exponents must stay representable as powers of ten.
        let hi = self.gamma_d.max(self.gamma_d - self.gamma_i);
        let lo = self.gamma_d.min(self.gamma_d - self.gamma_i);
        if hi > 300.0 || lo < -300.0 {
            return Err(Error::InvalidParameter(format!(
                "loosening exponent range [{lo}, {hi}] exceeds representable powers of ten"
            )));
        }
        Ok(())
    }

    /// Loosening-rate coefficient at the given tension; always positive.
    pub fn rate(&self, tension: f64) -> f64 {
        let exponent = self.gamma_d - self.gamma_i / (1.0 + clamped_exp(self.rho * tension));
        10f64.powf(exponent)
    }
}
