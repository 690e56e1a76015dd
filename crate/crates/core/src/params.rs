//! Physical parameter sets with the reference values as defaults.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::rheology::RheologyParams;

/// How the ocean drag on sea ice enters the momentum equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OceanDragMode {
    /// Quadratic law `C_o rho_o |v_o - v| (v_o - v)`.
    Quadratic,
    /// Linearized law `rho_o C_o_bar (v_o - v)`.
    Linearized,
}

/// Drag coefficients and densities for the momentum equation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DragParams {
    /// Ocean drag coefficient (dimensionless).
    pub c_o: f64,
    /// Atmospheric drag coefficient (dimensionless).
    pub c_a: f64,
    /// Sea-ice density (kg/m^3).
    pub rho: f64,
    /// Ocean density (kg/m^3).
    pub rho_o: f64,
    /// Atmosphere density (kg/m^3).
    pub rho_a: f64,
    /// Iceberg density (kg/m^3).
    pub rho_b: f64,
    /// Sea-ice coefficient of resistance (dimensionless).
    pub c_i: f64,
    /// Ocean drag law.
    pub ocean_drag_mode: OceanDragMode,
    /// Linearization constant C_o_bar (m/s), used in linearized mode.
    pub c_o_bar: f64,
}

impl Default for DragParams {
    fn default() -> Self {
        DragParams {
            c_o: 5e-4,
            c_a: 2.5e-4,
            rho: 900.0,
            rho_o: 1025.0,
            rho_a: 1.3,
            rho_b: 900.0,
            c_i: 1.0,
            ocean_drag_mode: OceanDragMode::Quadratic,
            // C_o times the reference ocean speed of 0.05 m/s.
            c_o_bar: 5e-4 * 0.05,
        }
    }
}

impl DragParams {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("c_o", self.c_o),
            ("c_a", self.c_a),
            ("rho", self.rho),
            ("rho_o", self.rho_o),
            ("rho_a", self.rho_a),
            ("rho_b", self.rho_b),
            ("c_i", self.c_i),
            ("c_o_bar", self.c_o_bar),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::config(format!(
                    "drag parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Full physical parameter set shared by the sea-ice and iceberg models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhysParams {
    pub rheology: RheologyParams,
    pub drag: DragParams,
    /// Ocean body (keel) drag coefficient for icebergs.
    pub c_vo: f64,
    /// Atmospheric body (sail) drag coefficient for icebergs.
    pub c_va: f64,
    /// Whether the discrete point drag carries the concentration factor.
    pub drag_includes_concentration: bool,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            rheology: RheologyParams::default(),
            drag: DragParams::default(),
            c_vo: 0.85,
            c_va: 0.4,
            drag_includes_concentration: false,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.rheology.validate()?;
        self.drag.validate()?;
        for (name, v) in [("c_vo", self.c_vo), ("c_va", self.c_va)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::config(format!(
                    "parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}
