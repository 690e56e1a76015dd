//! Donor-cell upwind transport of the cell-centered tracers.
//!
//! Face normal velocities average the two end-node velocities of each face.
//! Faces on the domain boundary copy the normal velocity of the parallel face
//! one cell inward: the no-slip walls would otherwise pin every boundary flux
//! to zero and starve the upstream cells that the inflow data is meant to
//! feed.

use crate::error::SimError;
use crate::mesh::Mesh;
use crate::state::{BoundaryData, SeaIceState};

/// Identifies one face of the cell grid.
///
/// Vertical faces sit at constant x between horizontally adjacent cells
/// (`i` in `0..=nx`, `j` in `0..ny`); horizontal faces at constant y
/// (`i` in `0..nx`, `j` in `0..=ny`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    Vertical { i: usize, j: usize },
    Horizontal { i: usize, j: usize },
}

/// Normal velocity on a face: the mean of the normal velocity component at
/// the face's two end nodes, with boundary faces copying the first interior
/// parallel face.
pub fn face_normal_velocity(mesh: &Mesh, v: &[[f64; 2]], face: Face) -> f64 {
    let (nx, ny) = (mesh.n_cells_x(), mesh.n_cells_y());
    match face {
        Face::Vertical { i, j } => {
            let i_eff = if i == 0 {
                1
            } else if i == nx {
                nx - 1
            } else {
                i
            };
            0.5 * (v[mesh.node_id(i_eff, j)][0] + v[mesh.node_id(i_eff, j + 1)][0])
        }
        Face::Horizontal { i, j } => {
            let j_eff = if j == 0 {
                1
            } else if j == ny {
                ny - 1
            } else {
                j
            };
            0.5 * (v[mesh.node_id(i, j_eff)][1] + v[mesh.node_id(i + 1, j_eff)][1])
        }
    }
}

/// Per-face normal velocities and tracer fluxes.
///
/// A shared face carries a single flux value: what leaves one cell enters its
/// neighbor. Fluxes are cell-integrated rates (tracer * m^2 / s).
#[derive(Clone, Debug)]
pub struct FaceFluxes {
    /// Vertical faces, indexed `j * (nx + 1) + i`.
    pub u_vertical: Vec<f64>,
    pub flux_a_vertical: Vec<f64>,
    pub flux_h_vertical: Vec<f64>,
    /// Horizontal faces, indexed `j * nx + i`.
    pub u_horizontal: Vec<f64>,
    pub flux_a_horizontal: Vec<f64>,
    pub flux_h_horizontal: Vec<f64>,
}

/// Compute donor-cell fluxes for every face.
///
/// Inflow boundary faces (normal velocity pointing into the domain) carry the
/// prescribed inflow values; outflow faces carry the interior cell value.
pub fn compute_face_fluxes(
    mesh: &Mesh,
    v: &[[f64; 2]],
    a: &[f64],
    h: &[f64],
    boundary: &BoundaryData,
) -> FaceFluxes {
    let (nx, ny) = (mesh.n_cells_x(), mesh.n_cells_y());
    let res = mesh.resolution();

    let mut u_vertical = vec![0.0; (nx + 1) * ny];
    let mut flux_a_vertical = vec![0.0; (nx + 1) * ny];
    let mut flux_h_vertical = vec![0.0; (nx + 1) * ny];
    for j in 0..ny {
        for i in 0..=nx {
            let u = face_normal_velocity(mesh, v, Face::Vertical { i, j });
            // Donor cell: the upwind side supplies the tracer.
            let (a_up, h_up) = if u >= 0.0 {
                if i == 0 {
                    (boundary.a_in, boundary.h_in)
                } else {
                    let c = mesh.cell_id(i - 1, j);
                    (a[c], h[c])
                }
            } else if i == nx {
                (boundary.a_in, boundary.h_in)
            } else {
                let c = mesh.cell_id(i, j);
                (a[c], h[c])
            };
            let k = j * (nx + 1) + i;
            u_vertical[k] = u;
            flux_a_vertical[k] = u * res * a_up;
            flux_h_vertical[k] = u * res * h_up;
        }
    }

    let mut u_horizontal = vec![0.0; nx * (ny + 1)];
    let mut flux_a_horizontal = vec![0.0; nx * (ny + 1)];
    let mut flux_h_horizontal = vec![0.0; nx * (ny + 1)];
    for j in 0..=ny {
        for i in 0..nx {
            let u = face_normal_velocity(mesh, v, Face::Horizontal { i, j });
            let (a_up, h_up) = if u >= 0.0 {
                if j == 0 {
                    (boundary.a_in, boundary.h_in)
                } else {
                    let c = mesh.cell_id(i, j - 1);
                    (a[c], h[c])
                }
            } else if j == ny {
                (boundary.a_in, boundary.h_in)
            } else {
                let c = mesh.cell_id(i, j);
                (a[c], h[c])
            };
            let k = j * nx + i;
            u_horizontal[k] = u;
            flux_a_horizontal[k] = u * res * a_up;
            flux_h_horizontal[k] = u * res * h_up;
        }
    }

    FaceFluxes {
        u_vertical,
        flux_a_vertical,
        flux_h_vertical,
        u_horizontal,
        flux_a_horizontal,
        flux_h_horizontal,
    }
}

/// Advance the tracers one donor-cell step and return the updated fields.
///
/// Errors on CFL violations and on tracers that go negative beyond round-off
/// before the final clamp to `a` in [0, 1] and `h >= 0`.
pub fn upwind_step(
    mesh: &Mesh,
    state: &SeaIceState,
    v: &[[f64; 2]],
    dt: f64,
    boundary: &BoundaryData,
) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let (nx, ny) = (mesh.n_cells_x(), mesh.n_cells_y());
    let res = mesh.resolution();
    let fluxes = compute_face_fluxes(mesh, v, &state.a, &state.h, boundary);

    // CFL check over all faces.
    let mut max_u = 0.0f64;
    let mut worst_face = Face::Vertical { i: 0, j: 0 };
    for j in 0..ny {
        for i in 0..=nx {
            let u = fluxes.u_vertical[j * (nx + 1) + i].abs();
            if u > max_u {
                max_u = u;
                worst_face = Face::Vertical { i, j };
            }
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let u = fluxes.u_horizontal[j * nx + i].abs();
            if u > max_u {
                max_u = u;
                worst_face = Face::Horizontal { i, j };
            }
        }
    }
    let cfl = max_u * dt / res;
    if cfl > 1.0 {
        return Err(SimError::CflViolation {
            face: format!("{worst_face:?}"),
            speed: max_u,
            cfl,
            dt_max: res / max_u,
        });
    }

    let area = mesh.cell_area();
    let mut a_new = state.a.clone();
    let mut h_new = state.h.clone();
    for j in 0..ny {
        for i in 0..nx {
            let c = mesh.cell_id(i, j);
            let kw = j * (nx + 1) + i;
            let ke = j * (nx + 1) + i + 1;
            let ks = j * nx + i;
            let kn = (j + 1) * nx + i;
            let net_a = fluxes.flux_a_vertical[kw] - fluxes.flux_a_vertical[ke]
                + fluxes.flux_a_horizontal[ks]
                - fluxes.flux_a_horizontal[kn];
            let net_h = fluxes.flux_h_vertical[kw] - fluxes.flux_h_vertical[ke]
                + fluxes.flux_h_horizontal[ks]
                - fluxes.flux_h_horizontal[kn];
            a_new[c] += dt / area * net_a;
            h_new[c] += dt / area * net_h;
            if a_new[c] < -1e-12 || h_new[c] < -1e-12 {
                return Err(SimError::InternalConsistency(format!(
                    "tracer went negative in cell ({i}, {j}): a = {:.3e}, h = {:.3e}",
                    a_new[c], h_new[c]
                )));
            }
            a_new[c] = a_new[c].clamp(0.0, 1.0);
            h_new[c] = h_new[c].max(0.0);
        }
    }
    Ok((a_new, h_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const KM: f64 = 1000.0;

    fn uniform_v(mesh: &Mesh, v: [f64; 2]) -> Vec<[f64; 2]> {
        vec![v; mesh.n_nodes()]
    }

    #[test]
    fn face_velocity_on_uniform_field() {
        let mesh = Mesh::uniform([64.0 * KM, 64.0 * KM], 16.0 * KM).unwrap();
        let v = uniform_v(&mesh, [0.05, 0.0]);
        let u = face_normal_velocity(&mesh, &v, Face::Vertical { i: 2, j: 1 });
        assert_eq!(u, 0.05);
        let w = face_normal_velocity(&mesh, &v, Face::Horizontal { i: 1, j: 2 });
        assert_eq!(w, 0.0);
    }

    #[test]
    fn face_velocity_averages_end_nodes() {
        let mesh = Mesh::uniform([64.0 * KM, 64.0 * KM], 16.0 * KM).unwrap();
        let mut v = uniform_v(&mesh, [0.0, 0.0]);
        v[mesh.node_id(2, 1)] = [0.1, 0.0];
        // End nodes of face (2, 1): nodes (2,1) and (2,2).
        let u = face_normal_velocity(&mesh, &v, Face::Vertical { i: 2, j: 1 });
        assert_relative_eq!(u, 0.05, max_relative = 1e-14);
    }

    #[test]
    fn zero_velocity_leaves_tracers_unchanged() {
        let mesh = Mesh::uniform([64.0 * KM, 64.0 * KM], 16.0 * KM).unwrap();
        let state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
        let v = uniform_v(&mesh, [0.0, 0.0]);
        let boundary = BoundaryData::new(0.5, 1.0).unwrap();
        let (a, h) = upwind_step(&mesh, &state, &v, 600.0, &boundary).unwrap();
        assert_eq!(a, state.a);
        assert_eq!(h, state.h);
    }

    #[test]
    fn constant_state_is_preserved_under_uniform_flow() {
        let mesh = Mesh::uniform([64.0 * KM, 64.0 * KM], 16.0 * KM).unwrap();
        let state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
        let v = uniform_v(&mesh, [0.05, 0.0]);
        let boundary = BoundaryData::new(0.5, 1.0).unwrap();
        let (a, h) = upwind_step(&mesh, &state, &v, 600.0, &boundary).unwrap();
        for c in 0..mesh.n_cells() {
            assert_relative_eq!(a[c], 0.5, max_relative = 1e-14);
            assert_relative_eq!(h[c], 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_cell_pulse_splits_per_donor_cell_formula() {
        // One step at CFL 0.5: the pulse cell keeps half, the downstream
        // neighbor gains half.
        let mesh = Mesh::uniform([8.0, 2.0], 1.0).unwrap();
        let mut state = SeaIceState::uniform(&mesh, 0.0, 0.0).unwrap();
        let pulse = mesh.cell_id(3, 0);
        state.h[pulse] = 1.0;
        let u = 0.25;
        let dt = 2.0; // CFL = u dt / res = 0.5
        let v = uniform_v(&mesh, [u, 0.0]);
        let boundary = BoundaryData::new(0.0, 0.0).unwrap();
        let (_, h) = upwind_step(&mesh, &state, &v, dt, &boundary).unwrap();
        assert_relative_eq!(h[pulse], 0.5, max_relative = 1e-14);
        assert_relative_eq!(h[mesh.cell_id(4, 0)], 0.5, max_relative = 1e-14);
        let total: f64 = h.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn cfl_violation_names_face_and_suggests_dt() {
        let mesh = Mesh::uniform([8.0, 8.0], 1.0).unwrap();
        let state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
        let v = uniform_v(&mesh, [0.5, 0.0]);
        let boundary = BoundaryData::new(0.5, 1.0).unwrap();
        let err = upwind_step(&mesh, &state, &v, 10.0, &boundary).unwrap_err();
        match err {
            SimError::CflViolation { dt_max, .. } => {
                assert_relative_eq!(dt_max, 2.0, max_relative = 1e-12)
            }
            other => panic!("expected CFL violation, got {other}"),
        }
    }

    #[test]
    fn conservation_up_to_boundary_flux() {
        let mesh = Mesh::uniform([32.0 * KM, 32.0 * KM], 8.0 * KM).unwrap();
        let mut state = SeaIceState::uniform(&mesh, 0.4, 1.0).unwrap();
        // Non-uniform thickness and a sheared velocity field.
        for (c, h) in state.h.iter_mut().enumerate() {
            *h = 0.5 + 0.1 * (c as f64 % 5.0);
        }
        let mut v = vec![[0.0, 0.0]; mesh.n_nodes()];
        for n in 0..mesh.n_nodes() {
            let p = mesh.node_pos(n);
            v[n] = [
                0.04 + 0.01 * (p[1] / 32.0 / KM),
                0.005 * (p[0] / 32.0 / KM),
            ];
        }
        let boundary = BoundaryData::new(0.4, 1.0).unwrap();
        let dt = 600.0;
        let fluxes = compute_face_fluxes(&mesh, &v, &state.a, &state.h, &boundary);
        let (nx, ny) = (mesh.n_cells_x(), mesh.n_cells_y());
        let mut boundary_net_h = 0.0;
        for j in 0..ny {
            boundary_net_h += fluxes.flux_h_vertical[j * (nx + 1)];
            boundary_net_h -= fluxes.flux_h_vertical[j * (nx + 1) + nx];
        }
        for i in 0..nx {
            boundary_net_h += fluxes.flux_h_horizontal[i];
            boundary_net_h -= fluxes.flux_h_horizontal[ny * nx + i];
        }
        let (_, h_new) = upwind_step(&mesh, &state, &v, dt, &boundary).unwrap();
        let total_before: f64 = state.h.iter().sum::<f64>() * mesh.cell_area();
        let total_after: f64 = h_new.iter().sum::<f64>() * mesh.cell_area();
        let change = total_after - total_before;
        let expected = dt * boundary_net_h;
        assert!(
            (change - expected).abs() <= 1e-10 * total_before.abs(),
            "change {change:.6e} vs boundary flux {expected:.6e}"
        );
    }

    #[test]
    fn inflow_feeds_upstream_cells() {
        // With outflow everywhere on the right and inflow on the left, the
        // constant state must persist instead of draining.
        let mesh = Mesh::uniform([64.0 * KM, 64.0 * KM], 16.0 * KM).unwrap();
        let mut state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
        // Flow field as the momentum solve would give it: zero on walls,
        // uniform inside.
        let mut v = vec![[0.0, 0.0]; mesh.n_nodes()];
        for n in 0..mesh.n_nodes() {
            if !mesh.is_boundary_node(n) {
                v[n] = [0.05, 0.0];
            }
        }
        let boundary = BoundaryData::new(0.5, 1.0).unwrap();
        for _ in 0..50 {
            let (a, h) = upwind_step(&mesh, &state, &v, 600.0, &boundary).unwrap();
            state.a = a;
            state.h = h;
        }
        // The left column is fed by the inflow; concentrations stay near a0.
        let left = mesh.cell_id(0, 2);
        assert!(state.a[left] > 0.45, "upstream cell drained to {}", state.a[left]);
    }

    proptest! {
        /// Divergence-free fields keep tracers within their initial bounds.
        #[test]
        fn max_principle_for_uniform_flow(u in -0.04f64..0.04, w in -0.04f64..0.04) {
            let mesh = Mesh::uniform([32.0 * KM, 32.0 * KM], 8.0 * KM).unwrap();
            let mut state = SeaIceState::uniform(&mesh, 0.5, 1.0).unwrap();
            for (c, a) in state.a.iter_mut().enumerate() {
                *a = 0.2 + 0.05 * (c % 9) as f64;
            }
            let v = vec![[u, w]; mesh.n_nodes()];
            let boundary = BoundaryData::new(0.3, 1.0).unwrap();
            let (a, _) = upwind_step(&mesh, &state, &v, 600.0, &boundary).unwrap();
            let lo = state.a.iter().cloned().fold(f64::INFINITY, f64::min).min(0.3);
            let hi = state.a.iter().cloned().fold(0.0f64, f64::max).max(0.3);
            for &ai in &a {
                prop_assert!(ai >= lo - 1e-12 && ai <= hi + 1e-12);
            }
        }
    }
}
