use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};

/// Physical and semiclassical constants of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Semiclassical parameter ε.
    pub eps: f64,
    /// Coupling weight ω. Zero switches the electrostatic term off.
    pub omega: f64,
    /// Charge constant q.
    pub q: f64,
    /// Nonlinearity exponent, 4 < p < 6.
    pub p: f64,
    /// Cutoff radius of the photography map.
    pub r: f64,
}

impl Params {
    pub fn new(eps: f64, omega: f64, q: f64, p: f64, r: f64) -> Result<Self> {
        let params = Params { eps, omega, q, p, r };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 4.0 && self.p < 6.0) {
            return Err(SmsError::ExponentOutOfRange(self.p));
        }
        let positive = [("eps", self.eps), ("q", self.q), ("r", self.r)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SmsError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(SmsError::InvalidParams(format!("omega must be non-negative, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }
}
