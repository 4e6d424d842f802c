use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Polyconvex Ogden-type density with a compression barrier.
    Ogden,
    /// Quadratic displacement-gradient regularizer (thin-plate type).
    Simplified,
}

/// Coefficients `a1..a4` of the Ogden density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OgdenCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

/// Closed-form coefficients making `W(𝟙) = 0`, `DW(𝟙) = 0` and the second
/// variation at the identity equal to `λ/2 (tr B)² + μ |sym B|²`.
pub fn ogden_coeffs(lambda: f64, mu: f64, q: f64, r: f64, s: f64) -> Result<OgdenCoeffs> {
    if !(q >= 1.0 && r >= 1.0 && s > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "Ogden exponents need q >= 1, r >= 1, s > 0 (got q={q}, r={r}, s={s})"
        )));
    }
    let c = OgdenCoeffs {
        a1: libm::pow(2.0, -q) * mu / q,
        a2: (lambda + mu - mu * q - mu * s) / (r * r + r * s),
        a3: (lambda + mu - mu * q + mu * r) / (r * s + s * s),
        a4: (mu * (q * q - r * s - q * (1.0 + r - s)) - lambda * q) / (q * r * s),
    };
    if ![c.a1, c.a2, c.a3, c.a4].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameters("Ogden coefficients are not finite".into()));
    }
    if !(c.a1 > 0.0 && c.a2 > 0.0 && c.a3 > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "Ogden coefficients a1={}, a2={}, a3={} must be positive",
            c.a1, c.a2, c.a3
        )));
    }
    Ok(c)
}

/// All model constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    pub model: Model,
    pub lambda: f64,
    pub mu: f64,
    /// Weight of the higher-order term.
    pub gamma: f64,
    /// Matching weight; the matching term is scaled by `1/δ`.
    pub delta: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// Even derivative order of the higher-order term.
    pub m: usize,
    /// Simplified model only: add the constant `2|D|` so the density term
    /// equals `∫ DΦ:DΦ` instead of `∫ |D(Φ - 𝟙)|²`.
    pub identity_offset: bool,
    /// Per-channel matching weights; empty means all ones.
    pub channel_weights: Vec<f64>,
}

impl MaterialParams {
    /// Full model with `m = 4`.
    pub fn ogden(lambda: f64, mu: f64, q: f64, r: f64, s: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = MaterialParams {
            model: Model::Ogden,
            lambda,
            mu,
            gamma,
            delta,
            q,
            r,
            s,
            m: 4,
            identity_offset: false,
            channel_weights: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Simplified model with `m = 2`.
    pub fn simplified(gamma: f64, delta: f64) -> Result<Self> {
        let p = MaterialParams {
            model: Model::Simplified,
            lambda: 1.0,
            mu: 0.5,
            gamma,
            delta,
            q: 1.5,
            r: 1.5,
            s: 0.5,
            m: 2,
            identity_offset: false,
            channel_weights: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_order(mut self, m: usize) -> Result<Self> {
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    pub fn with_channel_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.channel_weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || !self.m.is_multiple_of(2) {
            return Err(Error::InvalidParameters(format!("order m must be even and >= 2, got {}", self.m)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameters(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameters(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.channel_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameters("channel weights must be positive".into()));
        }
        if self.model == Model::Ogden {
            if !(self.lambda > 0.0 && self.mu > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "lambda and mu must be positive, got {} and {}",
                    self.lambda, self.mu
                )));
            }
            ogden_coeffs(self.lambda, self.mu, self.q, self.r, self.s)?;
        }
        Ok(())
    }

    #[inline]
    pub fn channel_weight(&self, c: usize) -> f64 {
        self.channel_weights.get(c).copied().unwrap_or(1.0)
    }
}
