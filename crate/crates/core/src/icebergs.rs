//! Lagrangian iceberg particles: forces, explicit Euler updates, grounding.

use serde::{Deserialize, Serialize};

use crate::mesh::Rect;
use crate::params::PhysParams;
use crate::state::Forcing;

/// Rectangular shallow-water area in which icebergs ground.
pub type GroundingRegion = Rect;

/// A disk-shaped iceberg particle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IcebergParticle {
    pub id: usize,
    /// Center position (m).
    pub position: [f64; 2],
    /// Velocity (m/s); zero while grounded.
    pub velocity: [f64; 2],
    /// Radius (m).
    pub radius: f64,
    /// Height (m).
    pub height: f64,
    /// Grounded icebergs are immobile but keep exerting drag on the ice.
    pub grounded: bool,
    /// Icebergs that left the domain are excluded from all dynamics.
    pub exited: bool,
}

impl IcebergParticle {
    pub fn new(id: usize, position: [f64; 2], radius: f64, height: f64) -> Self {
        IcebergParticle {
            id,
            position,
            velocity: [0.0, 0.0],
            radius,
            height,
            grounded: false,
            exited: false,
        }
    }

    /// Active icebergs take part in the coupling; exited ones do not.
    pub fn is_active(&self) -> bool {
        !self.exited
    }
}

/// Iceberg mass `M = rho_b h_p pi r_p^2` (kg).
pub fn iceberg_mass(berg: &IcebergParticle, rho_b: f64) -> f64 {
    rho_b * berg.height * std::f64::consts::PI * berg.radius * berg.radius
}

/// Total force on a free iceberg (N).
///
/// Sums the Coriolis and sea-surface terms (zero with Coriolis disabled), the
/// ocean and atmospheric drag with the body-drag corrections, and the sea-ice
/// resistance evaluated with the local ice velocity and concentration.
pub fn iceberg_forces(
    berg: &IcebergParticle,
    v_ice: [f64; 2],
    a_ice: f64,
    forcing: &Forcing,
    params: &PhysParams,
) -> [f64; 2] {
    let pi = std::f64::consts::PI;
    let d = &params.drag;
    let r = berg.radius;
    let area = pi * r * r;
    let mut force = [0.0, 0.0];

    if forcing.coriolis_enabled {
        let m = iceberg_mass(berg, d.rho_b);
        let f = forcing.coriolis_f;
        // F_c = M f k x v_b, F_sh = M f k x v_o.
        force[0] += -m * f * berg.velocity[1] - m * f * forcing.v_ocean[1];
        force[1] += m * f * berg.velocity[0] + m * f * forcing.v_ocean[0];
    }

    // Ocean drag toward the ocean velocity.
    let rel_o = [
        forcing.v_ocean[0] - berg.velocity[0],
        forcing.v_ocean[1] - berg.velocity[1],
    ];
    let mag_o = (rel_o[0] * rel_o[0] + rel_o[1] * rel_o[1]).sqrt();
    let c_ocean = area * d.rho_o * (d.c_o + berg.height / r * params.c_vo);
    force[0] += c_ocean * mag_o * rel_o[0];
    force[1] += c_ocean * mag_o * rel_o[1];

    // Atmospheric drag from the wind field alone.
    let va = forcing.v_atmos;
    let mag_a = (va[0] * va[0] + va[1] * va[1]).sqrt();
    let c_atmos = area * d.rho_a * (d.c_a + berg.height / r * params.c_va);
    force[0] += c_atmos * mag_a * va[0];
    force[1] += c_atmos * mag_a * va[1];

    // Sea-ice resistance toward the local ice velocity.
    let rel_i = [v_ice[0] - berg.velocity[0], v_ice[1] - berg.velocity[1]];
    let mag_i = (rel_i[0] * rel_i[0] + rel_i[1] * rel_i[1]).sqrt();
    let c_ice = a_ice * d.rho * d.c_i * r * berg.height;
    force[0] += c_ice * mag_i * rel_i[0];
    force[1] += c_ice * mag_i * rel_i[1];

    force
}

/// Events emitted by the particle update.
#[derive(Clone, Debug, PartialEq)]
pub enum BergEvent {
    Grounded { id: usize, position: [f64; 2] },
    Exited { id: usize, position: [f64; 2] },
}

/// One explicit Euler step for every free iceberg, followed by the grounding
/// and domain-exit checks.
///
/// `sample_ice` returns the interpolated sea-ice velocity and the containing
/// cell's concentration at a point. Grounding is permanent and tested on the
/// disk center only.
pub fn step_icebergs(
    bergs: &mut [IcebergParticle],
    dt: f64,
    sample_ice: impl Fn([f64; 2]) -> ([f64; 2], f64),
    forcing: &Forcing,
    region: Option<&GroundingRegion>,
    params: &PhysParams,
    domain_extent: [f64; 2],
) -> Vec<BergEvent> {
    let mut events = Vec::new();
    for berg in bergs.iter_mut() {
        if berg.exited || berg.grounded {
            continue;
        }
        let (v_ice, a_ice) = sample_ice(berg.position);
        let force = iceberg_forces(berg, v_ice, a_ice, forcing, params);
        let m = iceberg_mass(berg, params.drag.rho_b);
        berg.velocity[0] += dt / m * force[0];
        berg.velocity[1] += dt / m * force[1];
        berg.position[0] += dt * berg.velocity[0];
        berg.position[1] += dt * berg.velocity[1];

        let inside = berg.position[0] >= 0.0
            && berg.position[0] <= domain_extent[0]
            && berg.position[1] >= 0.0
            && berg.position[1] <= domain_extent[1];
        if !inside {
            berg.exited = true;
            berg.velocity = [0.0, 0.0];
            events.push(BergEvent::Exited { id: berg.id, position: berg.position });
            continue;
        }
        if let Some(rect) = region {
            if rect.contains(berg.position) {
                berg.grounded = true;
                berg.velocity = [0.0, 0.0];
                events.push(BergEvent::Grounded { id: berg.id, position: berg.position });
            }
        }
    }
    events
}
