//! Discrete sea-ice fields and boundary data.
//!
//! Velocity lives on mesh nodes, concentration `a` and mean thickness `h` on
//! cell centers. Homogeneous Dirichlet conditions pin the velocity to zero on
//! every boundary node.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::mesh::{basis_eval, Mesh};

/// Sea-ice prognostic fields at one time level.
#[derive(Clone, Debug)]
pub struct SeaIceState {
    /// Nodal velocity (m/s), zero on boundary nodes.
    pub v: Vec<[f64; 2]>,
    /// Cell-centered concentration, in [0, 1].
    pub a: Vec<f64>,
    /// Cell-centered mean thickness (m), nonnegative.
    pub h: Vec<f64>,
    /// Simulation time (s).
    pub t: f64,
}

impl SeaIceState {
    /// Uniform initial state: `a = a0`, `h = h0`, ice at rest.
    pub fn uniform(mesh: &Mesh, a0: f64, h0: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&a0) || !a0.is_finite() {
            return Err(SimError::config(format!(
                "initial concentration a0 must lie in [0, 1], got {a0}"
            )));
        }
        if !(h0 >= 0.0) || !h0.is_finite() {
            return Err(SimError::config(format!(
                "initial thickness h0 must be nonnegative, got {h0}"
            )));
        }
        Ok(SeaIceState {
            v: vec![[0.0, 0.0]; mesh.n_nodes()],
            a: vec![a0; mesh.n_cells()],
            h: vec![h0; mesh.n_cells()],
            t: 0.0,
        })
    }

    /// Force the Dirichlet condition v = 0 on every boundary node.
    pub fn apply_velocity_bc(&mut self, mesh: &Mesh) {
        for (node, v) in self.v.iter_mut().enumerate() {
            if mesh.is_boundary_node(node) {
                *v = [0.0, 0.0];
            }
        }
    }
}

/// External forcing fields, constant per scenario.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Forcing {
    /// Ocean velocity (m/s).
    pub v_ocean: [f64; 2],
    /// Near-surface atmospheric velocity (m/s).
    pub v_atmos: [f64; 2],
    /// Whether the Coriolis and sea-surface-slope terms are active.
    pub coriolis_enabled: bool,
    /// Coriolis parameter (1/s).
    pub coriolis_f: f64,
}

impl Forcing {
    pub fn validate(&self) -> Result<(), SimError> {
        let all = [
            self.v_ocean[0],
            self.v_ocean[1],
            self.v_atmos[0],
            self.v_atmos[1],
            self.coriolis_f,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(SimError::config("forcing contains non-finite values"));
        }
        Ok(())
    }
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing {
            v_ocean: [0.05, 0.0],
            v_atmos: [0.0, 0.0],
            coriolis_enabled: false,
            coriolis_f: 1.46e-4,
        }
    }
}

/// Tracer values prescribed on inflow boundary faces.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundaryData {
    pub a_in: f64,
    pub h_in: f64,
}

impl BoundaryData {
    pub fn new(a_in: f64, h_in: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&a_in) {
            return Err(SimError::config(format!(
                "inflow concentration a_in must lie in [0, 1], got {a_in}"
            )));
        }
        if !(h_in >= 0.0) {
            return Err(SimError::config(format!(
                "inflow thickness h_in must be nonnegative, got {h_in}"
            )));
        }
        Ok(BoundaryData { a_in, h_in })
    }
}

/// Bilinear interpolation of a nodal vector field at a physical point.
pub fn interp_node_field(
    mesh: &Mesh,
    field: &[[f64; 2]],
    p: [f64; 2],
) -> Result<[f64; 2], SimError> {
    let (cell, local) = mesh.locate_point(p)?;
    let (values, _) = basis_eval(local);
    let nodes = mesh.cell_nodes(cell);
    let mut out = [0.0, 0.0];
    for (phi, node) in values.iter().zip(nodes) {
        out[0] += phi * field[node][0];
        out[1] += phi * field[node][1];
    }
    Ok(out)
}
