//! Shared fixtures for the solver benchmarks.

use bergfast_core::{Forcing, IcebergParticle, Mesh, PhysParams, SeaIceState};

pub const KM: f64 = 1000.0;

/// A mid-size problem: 64x64 cells with two grounded icebergs and a mildly
/// perturbed velocity field.
pub fn fixture() -> (Mesh, SeaIceState, Vec<IcebergParticle>, Forcing, PhysParams) {
    let mesh = Mesh::uniform([512.0 * KM, 512.0 * KM], 8.0 * KM).unwrap();
    let mut state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
    for (n, v) in state.v.iter_mut().enumerate() {
        if !mesh.is_boundary_node(n) {
            let p = mesh.node_pos(n);
            *v = [
                0.04 + 0.005 * (p[1] / (512.0 * KM)),
                0.002 * (p[0] / (512.0 * KM)),
            ];
        }
    }
    let mut bergs = vec![
        IcebergParticle::new(0, [158.0 * KM, 158.0 * KM], 1000.0, 200.0),
        IcebergParticle::new(1, [158.0 * KM, 154.0 * KM], 1000.0, 200.0),
    ];
    for b in &mut bergs {
        b.grounded = true;
    }
    (mesh, state, bergs, Forcing::default(), PhysParams::default())
}
