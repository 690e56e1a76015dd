//! Finite-element assembly and implicit solve of the sea-ice momentum
//! equation, including the subgrid iceberg point drag.
//!
//! The implicit Euler step is solved by a damped Newton iteration: a few
//! Picard sweeps with frozen viscosity and drag magnitude, then full Newton
//! with a halving line search. Boundary rows carry the Dirichlet identity;
//! the iceberg drag is evaluated explicitly at the previous velocity by
//! default.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::icebergs::IcebergParticle;
use crate::linsolve::{bicgstab, BandedLu, CsrMatrix, Ilu0, SparsityPattern};
use crate::mesh::{basis_eval, Mesh, QuadratureRule};
use crate::params::{OceanDragMode, PhysParams};
use crate::rheology::{delta, ice_strength, strain_rate, stress, stress_tangent, viscosity};
use crate::state::{Forcing, SeaIceState};

/// Thickness floor applied to the mass-like terms of the assembly only, so
/// the system stays nonsingular where the ice vanishes.
pub const H_FLOOR: f64 = 1e-6;

/// Linearization used for one Newton-type iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearizationMode {
    /// Freeze viscosity and drag magnitudes at the current iterate.
    Picard,
    /// Include the viscosity and quadratic-drag derivatives.
    Newton,
}

/// Linear solver backing each Newton step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    /// ILU(0)-preconditioned BiCGSTAB.
    Bicgstab,
    /// Banded LU factorization (no pivoting).
    Direct,
}

/// Nonlinear and linear solver settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative tolerance against the residual at the initial iterate.
    pub tol_rel: f64,
    /// Absolute tolerance as a force density (N/m^2); the total tolerance
    /// scales with cell area and the number of unknowns.
    pub tol_abs_density: f64,
    pub max_iters: usize,
    /// Picard sweeps before switching to Newton mode.
    pub n_picard: usize,
    /// Maximum step halvings per line search.
    pub max_line_search: usize,
    pub linear_solver: LinearSolverKind,
    /// Relative residual target for each linear solve.
    pub lin_tol_rel: f64,
    pub lin_max_iters: usize,
    /// Evaluate the iceberg drag at the current Newton iterate instead of
    /// the previous time level.
    pub berg_drag_semi_implicit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-8,
            tol_abs_density: 1e-8,
            max_iters: 100,
            n_picard: 5,
            max_line_search: 8,
            linear_solver: LinearSolverKind::Bicgstab,
            lin_tol_rel: 1e-10,
            lin_max_iters: 1000,
            berg_drag_semi_implicit: false,
        }
    }
}

impl SolverConfig {
    /// Total absolute residual tolerance for a given mesh.
    pub fn tol_abs(&self, mesh: &Mesh) -> f64 {
        let n_dofs = 2.0 * mesh.n_nodes() as f64;
        self.tol_abs_density * mesh.cell_area() * n_dofs.sqrt()
    }
}

/// Convergence report for one momentum solve.
#[derive(Clone, Debug)]
pub struct NonlinearSolveReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// Linear iteration count per Newton step (1 for direct solves).
    pub linear_iters: Vec<usize>,
    /// Tolerance the residual was measured against.
    pub tolerance: f64,
}

/// Point-drag force of one iceberg distributed to the containing cell.
#[derive(Clone, Copy, Debug)]
pub struct PointDragContribution {
    pub cell: usize,
    pub nodes: [usize; 4],
    pub weights: [f64; 4],
    /// Total point force on the sea ice (N).
    pub force: [f64; 2],
    /// Set when the iceberg diameter reaches the cell size, violating the
    /// subgrid assumption.
    pub subgrid_violation: bool,
}

/// Evaluate the discrete iceberg drag at one particle.
///
/// The force `c_i rho_b pi r^2 |v_b - v_h(x_p)| (v_b - v_h(x_p))` acts on the
/// ice and is distributed to the four cell nodes with the bilinear weights at
/// the iceberg center, so the distributed force sums to the point force
/// exactly.
pub fn point_drag(
    mesh: &Mesh,
    berg: &IcebergParticle,
    v_eval: &[[f64; 2]],
    a_cells: &[f64],
    params: &PhysParams,
) -> Result<PointDragContribution, SimError> {
    let (cell, local) = mesh.locate_point(berg.position)?;
    let (weights, _) = basis_eval(local);
    let nodes = mesh.cell_nodes(cell);
    let mut v_h = [0.0, 0.0];
    for (w, n) in weights.iter().zip(nodes) {
        v_h[0] += w * v_eval[n][0];
        v_h[1] += w * v_eval[n][1];
    }
    let rel = [berg.velocity[0] - v_h[0], berg.velocity[1] - v_h[1]];
    let mag = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
    let mut coeff =
        params.drag.c_i * params.drag.rho_b * std::f64::consts::PI * berg.radius * berg.radius;
    if params.drag_includes_concentration {
        coeff *= a_cells[cell];
    }
    Ok(PointDragContribution {
        cell,
        nodes,
        weights,
        force: [coeff * mag * rel[0], coeff * mag * rel[1]],
        subgrid_violation: 2.0 * berg.radius >= mesh.resolution(),
    })
}

fn check_finite(name: &'static str, values: impl IntoIterator<Item = f64>) -> Result<(), SimError> {
    for v in values {
        if v.is_nan() {
            return Err(SimError::PoisonedState(name));
        }
    }
    Ok(())
}

fn validate_fields(
    state: &SeaIceState,
    v_trial: &[[f64; 2]],
    v_old: &[[f64; 2]],
    forcing: &Forcing,
) -> Result<(), SimError> {
    check_finite("v_trial", v_trial.iter().flatten().copied())?;
    check_finite("v_old", v_old.iter().flatten().copied())?;
    check_finite("a", state.a.iter().copied())?;
    check_finite("h", state.h.iter().copied())?;
    check_finite(
        "forcing",
        [
            forcing.v_ocean[0],
            forcing.v_ocean[1],
            forcing.v_atmos[0],
            forcing.v_atmos[1],
        ],
    )?;
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-quadrature-point basis tables; identical in every cell on the uniform
/// mesh.
struct QpTables {
    /// Quadrature weight times cell area.
    w_area: Vec<f64>,
    phi: Vec<[f64; 4]>,
    /// Physical-space shape gradients.
    grad: Vec<[[f64; 2]; 4]>,
}

impl QpTables {
    fn new(mesh: &Mesh, rule: &QuadratureRule) -> Self {
        let res = mesh.resolution();
        let mut w_area = Vec::with_capacity(rule.points.len());
        let mut phi = Vec::with_capacity(rule.points.len());
        let mut grad = Vec::with_capacity(rule.points.len());
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let (v, g_local) = basis_eval(*q);
            w_area.push(w * mesh.cell_area());
            phi.push(v);
            let mut g = [[0.0; 2]; 4];
            for i in 0..4 {
                g[i] = [g_local[i][0] / res, g_local[i][1] / res];
            }
            grad.push(g);
        }
        QpTables { w_area, phi, grad }
    }
}

const SKIP: u32 = u32::MAX;

/// Momentum system bound to one mesh: sparsity pattern, scatter map, and
/// reusable matrix storage.
pub struct MomentumSolver {
    pattern: Arc<SparsityPattern>,
    /// CSR value index for each cell-local (row dof, col dof) pair;
    /// `u32::MAX` marks entries eliminated by the Dirichlet rows/columns.
    scatter: Vec<[u32; 64]>,
    qp: QpTables,
}

impl MomentumSolver {
    pub fn new(mesh: &Mesh) -> Self {
        let n_dofs = 2 * mesh.n_nodes();
        let (nx, ny) = (mesh.n_nodes_x(), mesh.n_nodes_y());

        let mut rows: Vec<Vec<usize>> = Vec::with_capacity(n_dofs);
        for j in 0..ny {
            for i in 0..nx {
                let node = mesh.node_id(i, j);
                if mesh.is_boundary_node(node) {
                    rows.push(vec![2 * node]);
                    rows.push(vec![2 * node + 1]);
                    continue;
                }
                let mut cols = Vec::with_capacity(18);
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let ni = (i as i64 + di) as usize;
                        let nj = (j as i64 + dj) as usize;
                        let neigh = mesh.node_id(ni, nj);
                        if mesh.is_boundary_node(neigh) {
                            continue; // Dirichlet columns are eliminated
                        }
                        cols.push(2 * neigh);
                        cols.push(2 * neigh + 1);
                    }
                }
                cols.sort_unstable();
                rows.push(cols.clone());
                rows.push(cols);
            }
        }
        let pattern = Arc::new(SparsityPattern::from_rows(rows));

        let mut scatter = Vec::with_capacity(mesh.n_cells());
        for cell in 0..mesh.n_cells() {
            let nodes = mesh.cell_nodes(cell);
            let mut map = [SKIP; 64];
            for (li, &ni) in nodes.iter().enumerate() {
                if mesh.is_boundary_node(ni) {
                    continue;
                }
                for ci in 0..2 {
                    let row = 2 * ni + ci;
                    for (lj, &nj) in nodes.iter().enumerate() {
                        if mesh.is_boundary_node(nj) {
                            continue;
                        }
                        for cj in 0..2 {
                            let col = 2 * nj + cj;
                            let pos = pattern
                                .find(row, col)
                                .expect("cell coupling missing from pattern");
                            map[(2 * li + ci) * 8 + 2 * lj + cj] = pos as u32;
                        }
                    }
                }
            }
            scatter.push(map);
        }

        MomentumSolver {
            pattern,
            scatter,
            qp: QpTables::new(mesh, &QuadratureRule::default()),
        }
    }

    pub fn pattern(&self) -> Arc<SparsityPattern> {
        Arc::clone(&self.pattern)
    }

    /// Precompute the iceberg drag contributions against `v_eval`.
    fn drag_contributions(
        &self,
        mesh: &Mesh,
        bergs: &[IcebergParticle],
        v_eval: &[[f64; 2]],
        a_cells: &[f64],
        params: &PhysParams,
    ) -> Result<Vec<PointDragContribution>, SimError> {
        bergs
            .iter()
            .filter(|b| b.is_active())
            .map(|b| point_drag(mesh, b, v_eval, a_cells, params))
            .collect()
    }

    /// Residual of the implicit Euler step at `v_trial`, with the iceberg
    /// drag taken from precomputed contributions.
    #[allow(clippy::too_many_arguments)]
    fn residual_into(
        &self,
        mesh: &Mesh,
        state: &SeaIceState,
        v_trial: &[[f64; 2]],
        v_old: &[[f64; 2]],
        dt: f64,
        forcing: &Forcing,
        drag: &[PointDragContribution],
        params: &PhysParams,
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|r| *r = 0.0);
        let qp = &self.qp;
        let d = &params.drag;
        let f_atmos = {
            let va = forcing.v_atmos;
            let mag = (va[0] * va[0] + va[1] * va[1]).sqrt();
            [d.c_a * d.rho_a * mag * va[0], d.c_a * d.rho_a * mag * va[1]]
        };

        for cell in 0..mesh.n_cells() {
            let nodes = mesh.cell_nodes(cell);
            let a = state.a[cell];
            let h = state.h[cell];
            let h_mass = h.max(H_FLOOR);
            let p_strength = ice_strength(h, a, &params.rheology);
            let mass = d.rho * h_mass / dt;

            let mut vt = [[0.0; 2]; 4];
            let mut vo = [[0.0; 2]; 4];
            for (l, &n) in nodes.iter().enumerate() {
                vt[l] = v_trial[n];
                vo[l] = v_old[n];
            }

            for (q, &w) in qp.w_area.iter().enumerate() {
                let phi = &qp.phi[q];
                let grad = &qp.grad[q];

                let mut v_q = [0.0, 0.0];
                let mut v_old_q = [0.0, 0.0];
                let mut grad_v = [[0.0; 2]; 2];
                for l in 0..4 {
                    for c in 0..2 {
                        v_q[c] += phi[l] * vt[l][c];
                        v_old_q[c] += phi[l] * vo[l][c];
                        grad_v[c][0] += vt[l][c] * grad[l][0];
                        grad_v[c][1] += vt[l][c] * grad[l][1];
                    }
                }

                let eps = strain_rate(grad_v);
                let delta_q = delta(&eps, params.rheology.delta_min);
                let zeta = viscosity(p_strength, delta_q);
                let sigma = stress(&eps, zeta, p_strength);

                let mut f_body = f_atmos;
                match d.ocean_drag_mode {
                    OceanDragMode::Quadratic => {
                        let rel = [forcing.v_ocean[0] - v_q[0], forcing.v_ocean[1] - v_q[1]];
                        let mag = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
                        f_body[0] += d.c_o * d.rho_o * mag * rel[0];
                        f_body[1] += d.c_o * d.rho_o * mag * rel[1];
                    }
                    OceanDragMode::Linearized => {
                        f_body[0] += d.rho_o * d.c_o_bar * (forcing.v_ocean[0] - v_q[0]);
                        f_body[1] += d.rho_o * d.c_o_bar * (forcing.v_ocean[1] - v_q[1]);
                    }
                }
                if forcing.coriolis_enabled {
                    // f_c = -rho h f k x v, f_sh = rho h f k x v_o.
                    let rhf = d.rho * h_mass * forcing.coriolis_f;
                    f_body[0] += rhf * (v_q[1] - forcing.v_ocean[1]);
                    f_body[1] += rhf * (forcing.v_ocean[0] - v_q[0]);
                }

                for (l, &n) in nodes.iter().enumerate() {
                    for c in 0..2 {
                        let mut r = mass * (v_q[c] - v_old_q[c]) * phi[l];
                        r += sigma[c][0] * grad[l][0] + sigma[c][1] * grad[l][1];
                        r -= f_body[c] * phi[l];
                        out[2 * n + c] += w * r;
                    }
                }
            }
        }

        for contrib in drag {
            for (w, n) in contrib.weights.iter().zip(contrib.nodes) {
                out[2 * n] -= w * contrib.force[0];
                out[2 * n + 1] -= w * contrib.force[1];
            }
        }

        // Dirichlet rows replace whatever accumulated.
        for node in 0..mesh.n_nodes() {
            if mesh.is_boundary_node(node) {
                out[2 * node] = v_trial[node][0];
                out[2 * node + 1] = v_trial[node][1];
            }
        }
    }

    /// Assemble the linearized operator at `v_trial` into `matrix`.
    #[allow(clippy::too_many_arguments)]
    fn jacobian_into(
        &self,
        mesh: &Mesh,
        state: &SeaIceState,
        v_trial: &[[f64; 2]],
        dt: f64,
        forcing: &Forcing,
        bergs: &[IcebergParticle],
        params: &PhysParams,
        mode: LinearizationMode,
        semi_implicit_drag: bool,
        matrix: &mut CsrMatrix,
    ) {
        matrix.values.iter_mut().for_each(|v| *v = 0.0);
        let qp = &self.qp;
        let d = &params.drag;
        let freeze_zeta = mode == LinearizationMode::Picard;

        for cell in 0..mesh.n_cells() {
            let nodes = mesh.cell_nodes(cell);
            let a = state.a[cell];
            let h = state.h[cell];
            let h_mass = h.max(H_FLOOR);
            let p_strength = ice_strength(h, a, &params.rheology);
            let mass = d.rho * h_mass / dt;
            let map = &self.scatter[cell];

            let mut vt = [[0.0; 2]; 4];
            for (l, &n) in nodes.iter().enumerate() {
                vt[l] = v_trial[n];
            }

            let mut local = [0.0f64; 64];
            for (q, &w) in qp.w_area.iter().enumerate() {
                let phi = &qp.phi[q];
                let grad = &qp.grad[q];

                let mut v_q = [0.0, 0.0];
                let mut grad_v = [[0.0; 2]; 2];
                for l in 0..4 {
                    for c in 0..2 {
                        v_q[c] += phi[l] * vt[l][c];
                        grad_v[c][0] += vt[l][c] * grad[l][0];
                        grad_v[c][1] += vt[l][c] * grad[l][1];
                    }
                }
                let eps = strain_rate(grad_v);
                let delta_q = delta(&eps, params.rheology.delta_min);
                let zeta = viscosity(p_strength, delta_q);

                // Minus the velocity derivative of the body forces.
                let mut vel_block = [[0.0f64; 2]; 2];
                match d.ocean_drag_mode {
                    OceanDragMode::Quadratic => {
                        let rel = [forcing.v_ocean[0] - v_q[0], forcing.v_ocean[1] - v_q[1]];
                        let mag = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
                        let c = d.c_o * d.rho_o;
                        vel_block[0][0] = c * mag;
                        vel_block[1][1] = c * mag;
                        if mode == LinearizationMode::Newton && mag > 0.0 {
                            for r in 0..2 {
                                for s in 0..2 {
                                    vel_block[r][s] += c * rel[r] * rel[s] / mag;
                                }
                            }
                        }
                    }
                    OceanDragMode::Linearized => {
                        vel_block[0][0] = d.rho_o * d.c_o_bar;
                        vel_block[1][1] = d.rho_o * d.c_o_bar;
                    }
                }
                if forcing.coriolis_enabled {
                    let rhf = d.rho * h_mass * forcing.coriolis_f;
                    vel_block[0][1] += -rhf;
                    vel_block[1][0] += rhf;
                }

                for lj in 0..4 {
                    for cj in 0..2 {
                        let mut dir = [[0.0; 2]; 2];
                        dir[cj][0] = grad[lj][0];
                        dir[cj][1] = grad[lj][1];
                        let dsigma = stress_tangent(&eps, zeta, delta_q, dir, freeze_zeta);
                        for li in 0..4 {
                            for ci in 0..2 {
                                let mut val =
                                    dsigma[ci][0] * grad[li][0] + dsigma[ci][1] * grad[li][1];
                                val += vel_block[ci][cj] * phi[lj] * phi[li];
                                if ci == cj {
                                    val += mass * phi[lj] * phi[li];
                                }
                                local[(2 * li + ci) * 8 + 2 * lj + cj] += w * val;
                            }
                        }
                    }
                }
            }
            for (k, &idx) in map.iter().enumerate() {
                if idx != SKIP {
                    matrix.values[idx as usize] += local[k];
                }
            }
            local.iter_mut().for_each(|v| *v = 0.0);
        }

        if semi_implicit_drag {
            self.add_drag_jacobian(mesh, state, v_trial, bergs, params, mode, matrix);
        }

        // Dirichlet rows: unit diagonal (off-diagonals were never assembled).
        for node in 0..mesh.n_nodes() {
            if mesh.is_boundary_node(node) {
                for c in 0..2 {
                    let row = 2 * node + c;
                    matrix.values[matrix.pattern.diag[row]] = 1.0;
                }
            }
        }
    }

    fn add_drag_jacobian(
        &self,
        mesh: &Mesh,
        state: &SeaIceState,
        v_trial: &[[f64; 2]],
        bergs: &[IcebergParticle],
        params: &PhysParams,
        mode: LinearizationMode,
        matrix: &mut CsrMatrix,
    ) {
        for berg in bergs.iter().filter(|b| b.is_active()) {
            let Ok(c) = point_drag(mesh, berg, v_trial, &state.a, params) else {
                continue;
            };
            let mut v_h = [0.0, 0.0];
            for (w, n) in c.weights.iter().zip(c.nodes) {
                v_h[0] += w * v_trial[n][0];
                v_h[1] += w * v_trial[n][1];
            }
            let rel = [berg.velocity[0] - v_h[0], berg.velocity[1] - v_h[1]];
            let mag = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
            let mut coeff = params.drag.c_i
                * params.drag.rho_b
                * std::f64::consts::PI
                * berg.radius
                * berg.radius;
            if params.drag_includes_concentration {
                coeff *= state.a[c.cell];
            }
            let mut block = [[coeff * mag, 0.0], [0.0, coeff * mag]];
            if mode == LinearizationMode::Newton && mag > 0.0 {
                for r in 0..2 {
                    for s in 0..2 {
                        block[r][s] += coeff * rel[r] * rel[s] / mag;
                    }
                }
            }
            for (wi, ni) in c.weights.iter().zip(c.nodes) {
                if mesh.is_boundary_node(ni) {
                    continue;
                }
                for (wj, nj) in c.weights.iter().zip(c.nodes) {
                    if mesh.is_boundary_node(nj) {
                        continue;
                    }
                    for r in 0..2 {
                        for s in 0..2 {
                            if let Some(pos) = matrix.pattern.find(2 * ni + r, 2 * nj + s) {
                                matrix.values[pos] += wi * wj * block[r][s];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Solve one implicit Euler momentum step starting from `v_old`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &self,
        mesh: &Mesh,
        state: &SeaIceState,
        v_old: &[[f64; 2]],
        dt: f64,
        forcing: &Forcing,
        bergs: &[IcebergParticle],
        params: &PhysParams,
        cfg: &SolverConfig,
    ) -> Result<(Vec<[f64; 2]>, NonlinearSolveReport), SimError> {
        if !(dt > 0.0) {
            return Err(SimError::config(format!("time step must be positive, got {dt}")));
        }
        validate_fields(state, v_old, v_old, forcing)?;
        let n_dofs = 2 * mesh.n_nodes();

        let mut v: Vec<[f64; 2]> = v_old.to_vec();
        for (node, vi) in v.iter_mut().enumerate() {
            if mesh.is_boundary_node(node) {
                *vi = [0.0, 0.0];
            }
        }

        // Explicit drag: frozen at the previous velocity for the whole solve.
        let frozen_drag = if cfg.berg_drag_semi_implicit {
            Vec::new()
        } else {
            self.drag_contributions(mesh, bergs, v_old, &state.a, params)?
        };
        let drag_for = |v_now: &[[f64; 2]]| -> Result<Vec<PointDragContribution>, SimError> {
            if cfg.berg_drag_semi_implicit {
                self.drag_contributions(mesh, bergs, v_now, &state.a, params)
            } else {
                Ok(frozen_drag.clone())
            }
        };

        let mut residual = vec![0.0; n_dofs];
        let drag0 = drag_for(&v)?;
        self.residual_into(mesh, state, &v, v_old, dt, forcing, &drag0, params, &mut residual);
        let mut res_norm = norm(&residual);
        let tol = cfg.tol_abs(mesh) + cfg.tol_rel * res_norm;

        let mut matrix = CsrMatrix::zeros(self.pattern());
        let mut delta_v = vec![0.0; n_dofs];
        let mut rhs = vec![0.0; n_dofs];
        let mut linear_iters = Vec::new();
        let mut iterations = 0;

        while res_norm > tol && iterations < cfg.max_iters {
            let mode = if iterations < cfg.n_picard {
                LinearizationMode::Picard
            } else {
                LinearizationMode::Newton
            };
            self.jacobian_into(
                mesh,
                state,
                &v,
                dt,
                forcing,
                bergs,
                params,
                mode,
                cfg.berg_drag_semi_implicit,
                &mut matrix,
            );
            for i in 0..n_dofs {
                rhs[i] = -residual[i];
            }
            delta_v.iter_mut().for_each(|x| *x = 0.0);
            match cfg.linear_solver {
                LinearSolverKind::Bicgstab => {
                    let ilu = Ilu0::factor(&matrix)?;
                    let kr = bicgstab(
                        &matrix,
                        &rhs,
                        &mut delta_v,
                        &ilu,
                        cfg.lin_tol_rel,
                        cfg.lin_max_iters,
                    );
                    if !kr.converged {
                        log::warn!(
                            "linear solve stalled at relative residual {:.2e}",
                            kr.relative_residual
                        );
                    }
                    linear_iters.push(kr.iterations);
                }
                LinearSolverKind::Direct => {
                    let lu = BandedLu::factor(&matrix)?;
                    lu.solve(&rhs, &mut delta_v);
                    linear_iters.push(1);
                }
            }

            // Line search: halve the update until the residual decreases.
            let mut alpha = 1.0;
            let mut best: Option<(f64, Vec<[f64; 2]>, Vec<f64>, f64)> = None;
            for _ in 0..=cfg.max_line_search {
                let mut v_new = v.clone();
                for (node, vi) in v_new.iter_mut().enumerate() {
                    vi[0] += alpha * delta_v[2 * node];
                    vi[1] += alpha * delta_v[2 * node + 1];
                }
                let drag_new = drag_for(&v_new)?;
                let mut r_new = vec![0.0; n_dofs];
                self.residual_into(
                    mesh, state, &v_new, v_old, dt, forcing, &drag_new, params, &mut r_new,
                );
                let n_new = norm(&r_new);
                if best.as_ref().is_none_or(|(bn, ..)| n_new < *bn) {
                    best = Some((n_new, v_new, r_new, alpha));
                }
                if n_new < res_norm {
                    break;
                }
                alpha *= 0.5;
            }
            let (n_best, v_best, r_best, _) = best.expect("line search produced no candidate");
            iterations += 1;
            if n_best >= res_norm {
                // No descent in the whole line search; report the best seen.
                v = v_best;
                res_norm = n_best;
                break;
            }
            v = v_best;
            residual = r_best;
            res_norm = n_best;
        }

        for (node, vi) in v.iter_mut().enumerate() {
            if mesh.is_boundary_node(node) {
                *vi = [0.0, 0.0];
            }
        }
        let converged = res_norm <= tol;
        Ok((
            v,
            NonlinearSolveReport {
                iterations,
                residual_norm: res_norm,
                converged,
                linear_iters,
                tolerance: tol,
            },
        ))
    }
}

/// Assemble the nonlinear residual of the implicit Euler step at `v_trial`.
///
/// The iceberg drag is evaluated explicitly against `v_old`. Rows of boundary
/// nodes carry the Dirichlet residual `v_trial - 0`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_residual(
    mesh: &Mesh,
    state: &SeaIceState,
    v_trial: &[[f64; 2]],
    v_old: &[[f64; 2]],
    dt: f64,
    forcing: &Forcing,
    bergs: &[IcebergParticle],
    params: &PhysParams,
) -> Result<Vec<f64>, SimError> {
    validate_fields(state, v_trial, v_old, forcing)?;
    let solver = MomentumSolver::new(mesh);
    let drag = solver.drag_contributions(mesh, bergs, v_old, &state.a, params)?;
    let mut out = vec![0.0; 2 * mesh.n_nodes()];
    solver.residual_into(mesh, state, v_trial, v_old, dt, forcing, &drag, params, &mut out);
    Ok(out)
}

/// Assemble the linearized operator at `v_trial`.
///
/// Picard mode freezes the viscosity and drag magnitudes; Newton mode adds
/// their derivatives. Boundary rows are identity.
#[allow(clippy::too_many_arguments)]
pub fn assemble_jacobian(
    mesh: &Mesh,
    state: &SeaIceState,
    v_trial: &[[f64; 2]],
    dt: f64,
    forcing: &Forcing,
    bergs: &[IcebergParticle],
    params: &PhysParams,
    mode: LinearizationMode,
    semi_implicit_drag: bool,
) -> Result<CsrMatrix, SimError> {
    validate_fields(state, v_trial, v_trial, forcing)?;
    let solver = MomentumSolver::new(mesh);
    let mut matrix = CsrMatrix::zeros(solver.pattern());
    solver.jacobian_into(
        mesh,
        state,
        v_trial,
        dt,
        forcing,
        bergs,
        params,
        mode,
        semi_implicit_drag,
        &mut matrix,
    );
    Ok(matrix)
}

/// One-shot momentum solve; builds the system for the mesh and solves the
/// implicit Euler step. Long runs should hold a [`MomentumSolver`] instead.
#[allow(clippy::too_many_arguments)]
pub fn solve_momentum(
    mesh: &Mesh,
    state: &SeaIceState,
    v_old: &[[f64; 2]],
    dt: f64,
    forcing: &Forcing,
    bergs: &[IcebergParticle],
    params: &PhysParams,
    cfg: &SolverConfig,
) -> Result<(Vec<[f64; 2]>, NonlinearSolveReport), SimError> {
    MomentumSolver::new(mesh).solve(mesh, state, v_old, dt, forcing, bergs, params, cfg)
}
