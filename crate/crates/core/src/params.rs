//! Structural data `{p, N}` and the configurable family of structural
//! constants.
//!
//! The constants are existence-level quantities; they are carried as
//! parameters and echoed into every report. The flux is the prototype
//! `|ξ|^{p-2} ξ`, so the ellipticity and growth constants are both 1.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    /// Decay rate in the exponential term of the envelope, in (0, 1).
    pub gamma: f64,
    /// Coefficient of the power-law tail `R_o^{ε/(p-2)}`.
    pub bar_gamma: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_star: f64,
    pub gamma_3: f64,
    /// Spreading constant, in (0, 1).
    pub nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    pub p: f64,
    pub dim: usize,
    pub constants: StructureConstants,
    /// When set, `gamma_star` is tied to `gamma_1^{p-2}`.
    pub derived: bool,
}

impl StructureParams {
    /// Default constants: `γ₁ = 2`, `γ₂ = 2`, `γ_* = γ₁^{p-2}`, `γ̄ = 1`,
    /// `ν = 1/2`, and `γ = 1/(2 γ₂ ln(1/c̄))`, `γ₃ = 1/γ` with `c̄` from
    /// [`crate::wiener::choose_c_bar`].
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        Self::with_gammas(p, dim, 2.0, 2.0)
    }

    /// Derived-mode constants for the given `γ₁`, `γ₂`.
    pub fn with_gammas(p: f64, dim: usize, gamma_1: f64, gamma_2: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p must exceed 2, got {p}")));
        }
        if !(gamma_2 > 1.0) {
            return Err(Error::invalid(format!("gamma_2 must exceed 1, got {gamma_2}")));
        }
        let (_, c_bar) = crate::wiener::choose_c_bar_raw(p, gamma_2);
        let gamma = 1.0 / (2.0 * gamma_2 * (1.0 / c_bar).ln());
        let params = StructureParams {
            p,
            dim,
            constants: StructureConstants {
                gamma,
                bar_gamma: 1.0,
                gamma_1,
                gamma_2,
                gamma_star: gamma_1.powf(p - 2.0),
                gamma_3: 1.0 / gamma,
                nu: 0.5,
            },
            derived: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.constants;
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::invalid(format!("p must exceed 2, got {}", self.p)));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid(format!("N must be 1 or 2, got {}", self.dim)));
        }
        let checks = [
            ("gamma", c.gamma > 0.0 && c.gamma < 1.0),
            ("bar_gamma", c.bar_gamma >= 0.0),
            ("gamma_1", c.gamma_1 > 1.0),
            ("gamma_2", c.gamma_2 > 1.0),
            ("gamma_star", c.gamma_star > 1.0),
            ("gamma_3", c.gamma_3 > 1.0),
            ("nu", c.nu > 0.0 && c.nu < 1.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(format!("structural constant {name} out of range")));
            }
        }
        if self.derived {
            let expect = c.gamma_1.powf(self.p - 2.0);
            if (c.gamma_star - expect).abs() > 1e-12 * expect {
                return Err(Error::invalid(format!(
                    "derived mode requires gamma_star = gamma_1^(p-2) = {expect}, got {}",
                    c.gamma_star
                )));
            }
        }
        Ok(())
    }

    /// Exponent `1/(p-1)` turning `δ` into the amplitude `A = δ^{1/(p-1)}`.
    pub fn amplitude_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }
}
