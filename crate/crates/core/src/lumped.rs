//! Lumped electromechanical model of a piezoelectric insert.
//!
//! Below the insert's own resonances the scalar constitutive law reduces to
//!
//! ```text
//! F_p = K_E * u + alpha * V
//! Q   = alpha * u - C0 * V
//! ```
//!
//! so electrically the insert is a velocity-controlled current source
//! `alpha * du/dt` in parallel with the clamped capacitance `C0`.

use crate::error::{Error, Result};

/// Material constants and electrode geometry of a plate-shaped insert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialGeometry {
    /// Piezoelectric stress coefficient e (C/m²).
    pub e_coeff: f64,
    /// Permittivity at constant strain (F/m).
    pub eps_s: f64,
    /// Elastic stiffness at constant field (Pa).
    pub c_e: f64,
    /// Electrode surface (m²).
    pub area: f64,
    /// Distance between electrodes (m).
    pub t_p: f64,
    /// Insert width along the strain direction (m).
    pub w_p: f64,
}

impl MaterialGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_s", self.eps_s),
            ("c_e", self.c_e),
            ("area", self.area),
            ("t_p", self.t_p),
            ("w_p", self.w_p),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "geometry field {name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !(self.e_coeff.is_finite() && self.e_coeff >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "geometry field e_coeff must be finite and >= 0, got {}",
                self.e_coeff
            )));
        }
        Ok(())
    }
}

/// Lumped parameters of the insert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiezoParams {
    /// Clamped capacitance (F).
    pub c0: f64,
    /// Force factor (N/V, equivalently C/m).
    pub alpha: f64,
    /// Short-circuit stiffness (N/m).
    pub k_e: f64,
    /// Leakage resistance across the electrodes (ohm); `f64::INFINITY` for none.
    pub r_leak: f64,
}

impl PiezoParams {
    /// Fixture parameter set used throughout the tests and example scenarios.
    ///
    /// Only `c0` corresponds to a measured insert; `alpha` and `k_e` are
    /// implementer-chosen placeholders since power ratios cancel them.
    pub const REFERENCE: PiezoParams = PiezoParams {
        c0: 41.8e-9,
        alpha: 1e-3,
        k_e: 1e5,
        r_leak: f64::INFINITY,
    };

    pub fn new(c0: f64, alpha: f64, k_e: f64) -> Result<Self> {
        let p = PiezoParams {
            c0,
            alpha,
            k_e,
            r_leak: f64::INFINITY,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_leakage(mut self, r_leak: f64) -> Self {
        self.r_leak = r_leak;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidInput(format!("c0 must be > 0, got {}", self.c0)));
        }
        if !(self.k_e.is_finite() && self.k_e > 0.0) {
            return Err(Error::InvalidInput(format!("k_e must be > 0, got {}", self.k_e)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.r_leak > 0.0) || self.r_leak.is_nan() {
            return Err(Error::InvalidInput(format!(
                "r_leak must be > 0 or infinite, got {}",
                self.r_leak
            )));
        }
        Ok(())
    }

    /// Leakage conductance, zero when there is no leakage path.
    pub(crate) fn leak_conductance(&self) -> f64 {
        if self.r_leak.is_infinite() {
            0.0
        } else {
            1.0 / self.r_leak
        }
    }

    /// Source current `alpha * u_dot` (A).
    pub fn current(&self, u_dot: f64) -> f64 {
        self.alpha * u_dot
    }

    /// Outgoing electrode charge `alpha * u - c0 * v` (C).
    pub fn charge(&self, u: f64, v: f64) -> f64 {
        self.alpha * u - self.c0 * v
    }

    /// Force on the structure `k_e * u + alpha * v` (N). Diagnostic only.
    pub fn reaction_force(&self, u: f64, v: f64) -> f64 {
        self.k_e * u + self.alpha * v
    }

    /// Peak open-circuit voltage for a displacement amplitude `u_m`.
    pub fn open_circuit_voltage(&self, u_m: f64) -> f64 {
        self.alpha * u_m / self.c0
    }
}

/// Lumped parameters from material constants and geometry. Leakage starts out infinite.
pub fn derive_lumped(geom: &MaterialGeometry) -> Result<PiezoParams> {
    geom.validate()?;
    Ok(PiezoParams {
        c0: geom.eps_s * geom.area / geom.t_p,
        alpha: geom.e_coeff * geom.area / geom.t_p,
        k_e: geom.c_e * geom.area / geom.w_p,
        r_leak: f64::INFINITY,
    })
}

pub fn piezo_current(params: &PiezoParams, u_dot: f64) -> f64 {
    params.current(u_dot)
}

pub fn electrode_charge(params: &PiezoParams, u: f64, v: f64) -> f64 {
    params.charge(u, v)
}

pub fn reaction_force(params: &PiezoParams, u: f64, v: f64) -> f64 {
    params.reaction_force(u, v)
}
