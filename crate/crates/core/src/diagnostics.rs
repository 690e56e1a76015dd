//! Runtime diagnostics: the drag-dissipation functional of the grounded
//! icebergs, its forcing bound, field probes, and CSV output.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::icebergs::IcebergParticle;
use crate::mesh::{Mesh, Rect};
use crate::params::{DragParams, PhysParams};
use crate::state::{interp_node_field, Forcing, SeaIceState};

/// How the functional evaluates the velocity over an iceberg footprint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    /// Cube of the L2 norm of the velocity over the iceberg disk, sampled on
    /// a fixed 16-point polar stencil.
    ContinuousNorm,
    /// `a c_i rho_b pi r^2 |v_h(x_p)|^3`, consistent with the discrete point
    /// drag.
    DiscretePoint,
}

/// One diagnostics row.
#[derive(Clone, Debug)]
pub struct DiagnosticsRecord {
    /// Time (s).
    pub t: f64,
    /// Functional integrand at `t` (W).
    pub phi_increment: f64,
    /// Left-endpoint time integral of the increment (J).
    pub phi_cumulative: f64,
    /// Cumulative bound right-hand side, including the initial kinetic term.
    pub bound_rhs: f64,
    /// Newton iterations spent on this step's momentum solve.
    pub newton_iters: usize,
    pub converged: bool,
    pub residual_norm: f64,
    /// Nonlinear tolerance the solve was accepted against.
    pub solver_tolerance: f64,
    /// Named region integrals, when requested.
    pub region_integrals: Vec<(String, f64)>,
}

/// Functional integrand at one instant: the cubic drag dissipation summed
/// over grounded icebergs.
pub fn phi_increment(
    mesh: &Mesh,
    state: &SeaIceState,
    bergs: &[IcebergParticle],
    params: &PhysParams,
    mode: PhiMode,
) -> f64 {
    let mut total = 0.0;
    for berg in bergs.iter().filter(|b| b.is_active() && b.grounded) {
        let Ok((cell, _)) = mesh.locate_point(berg.position) else {
            continue;
        };
        let a = state.a[cell];
        let coeff = a * params.drag.c_i * params.drag.rho_b;
        match mode {
            PhiMode::DiscretePoint => {
                let v = interp_node_field(mesh, &state.v, berg.position).unwrap_or([0.0, 0.0]);
                let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
                total += coeff
                    * std::f64::consts::PI
                    * berg.radius
                    * berg.radius
                    * speed
                    * speed
                    * speed;
            }
            PhiMode::ContinuousNorm => {
                total += coeff * disk_l2_squared(mesh, &state.v, berg).powf(1.5);
            }
        }
    }
    total
}

/// `int_{disk} |v|^2 dx` on the 16-point polar stencil: four Gauss points in
/// the squared-radius variable crossed with four azimuths.
fn disk_l2_squared(mesh: &Mesh, v: &[[f64; 2]], berg: &IcebergParticle) -> f64 {
    // Gauss-Legendre on [0, 1] for s = (r / r_p)^2; dA = (pi r_p^2 / 4) ds
    // per azimuth quadrant.
    const S_PTS: [f64; 4] = [
        0.069_431_844_202_973_71,
        0.330_009_478_207_571_87,
        0.669_990_521_792_428_1,
        0.930_568_155_797_026_3,
    ];
    const S_WTS: [f64; 4] = [
        0.173_927_422_568_726_92,
        0.326_072_577_431_273_05,
        0.326_072_577_431_273_05,
        0.173_927_422_568_726_92,
    ];
    let extent = mesh.extent();
    let area = std::f64::consts::PI * berg.radius * berg.radius;
    let mut integral = 0.0;
    for (s, w) in S_PTS.iter().zip(S_WTS) {
        let r = berg.radius * s.sqrt();
        for k in 0..4 {
            let theta = k as f64 * std::f64::consts::FRAC_PI_2;
            let p = [
                (berg.position[0] + r * theta.cos()).clamp(0.0, extent[0]),
                (berg.position[1] + r * theta.sin()).clamp(0.0, extent[1]),
            ];
            let vi = interp_node_field(mesh, v, p).unwrap_or([0.0, 0.0]);
            integral += 0.25 * w * area * (vi[0] * vi[0] + vi[1] * vi[1]);
        }
    }
    integral
}

/// Per-second increment of the stability-bound right-hand side:
/// `1 / (2 rho_o c_o_bar) * ||R||^2` over the domain, with
/// `R = f_sh + f_a + rho_o c_o_bar v_o` constant in space.
///
/// `h_ref` enters only through the sea-surface term and is irrelevant with
/// Coriolis disabled.
pub fn stability_bound_increment(
    forcing: &Forcing,
    drag: &DragParams,
    h_ref: f64,
    domain_area: f64,
) -> Result<f64, SimError> {
    if !(drag.c_o_bar > 0.0) {
        return Err(SimError::config(format!(
            "linearized drag constant c_o_bar must be positive, got {}",
            drag.c_o_bar
        )));
    }
    let mut r_vec = [
        drag.rho_o * drag.c_o_bar * forcing.v_ocean[0],
        drag.rho_o * drag.c_o_bar * forcing.v_ocean[1],
    ];
    let va = forcing.v_atmos;
    let mag_a = (va[0] * va[0] + va[1] * va[1]).sqrt();
    r_vec[0] += drag.c_a * drag.rho_a * mag_a * va[0];
    r_vec[1] += drag.c_a * drag.rho_a * mag_a * va[1];
    if forcing.coriolis_enabled {
        let rhf = drag.rho * h_ref * forcing.coriolis_f;
        r_vec[0] += -rhf * forcing.v_ocean[1];
        r_vec[1] += rhf * forcing.v_ocean[0];
    }
    let r_sq = r_vec[0] * r_vec[0] + r_vec[1] * r_vec[1];
    Ok(r_sq / (2.0 * drag.rho_o * drag.c_o_bar) * domain_area)
}

/// Initial kinetic term of the bound: `int rho h |v(0)|^2 dx` with the
/// cell-wise tracer fields and nodal velocities averaged per cell.
pub fn initial_energy(mesh: &Mesh, state: &SeaIceState, rho: f64) -> f64 {
    let mut total = 0.0;
    for cell in 0..mesh.n_cells() {
        let nodes = mesh.cell_nodes(cell);
        let mut v_sq = 0.0;
        for n in nodes {
            v_sq += 0.25 * (state.v[n][0] * state.v[n][0] + state.v[n][1] * state.v[n][1]);
        }
        total += rho * state.h[cell] * v_sq * mesh.cell_area();
    }
    total
}

/// Sample a cell field along the horizontal line at `y`; rows are chosen with
/// the same lower tie-break as point location.
pub fn cross_section_cell(
    mesh: &Mesh,
    field: &[f64],
    y: f64,
) -> Result<Vec<(f64, f64)>, SimError> {
    if !(0.0..=mesh.extent()[1]).contains(&y) {
        return Err(SimError::OutOfDomain(0.0, y));
    }
    let res = mesh.resolution();
    let mut j = (y / res).floor() as usize;
    if j as f64 * res == y && j > 0 {
        j -= 1;
    }
    if j >= mesh.n_cells_y() {
        j = mesh.n_cells_y() - 1;
    }
    Ok((0..mesh.n_cells_x())
        .map(|i| {
            let c = mesh.cell_id(i, j);
            ((i as f64 + 0.5) * res, field[c])
        })
        .collect())
}

/// Sample one component of a nodal field along the node row nearest to `y`.
pub fn cross_section_node(
    mesh: &Mesh,
    field: &[[f64; 2]],
    y: f64,
    component: usize,
) -> Result<Vec<(f64, f64)>, SimError> {
    if !(0.0..=mesh.extent()[1]).contains(&y) {
        return Err(SimError::OutOfDomain(0.0, y));
    }
    let res = mesh.resolution();
    let j = ((y / res + 0.5).floor() as usize).min(mesh.n_nodes_y() - 1);
    Ok((0..mesh.n_nodes_x())
        .map(|i| {
            let n = mesh.node_id(i, j);
            (i as f64 * res, field[n][component])
        })
        .collect())
}

/// Integrate a cell field over an axis-aligned rectangle, exact for the
/// uniform grid including partial cell overlaps.
pub fn region_integral(mesh: &Mesh, field: &[f64], rect: &Rect) -> Result<f64, SimError> {
    let extent = mesh.extent();
    if rect.area() <= 0.0 {
        return Err(SimError::config("region rectangle is empty"));
    }
    if rect.lower[0] < 0.0
        || rect.lower[1] < 0.0
        || rect.upper[0] > extent[0]
        || rect.upper[1] > extent[1]
    {
        return Err(SimError::config(format!(
            "region rectangle ({}, {})-({}, {}) extends outside the domain",
            rect.lower[0], rect.lower[1], rect.upper[0], rect.upper[1]
        )));
    }
    let res = mesh.resolution();
    let i0 = (rect.lower[0] / res).floor() as usize;
    let i1 = ((rect.upper[0] / res).ceil() as usize).min(mesh.n_cells_x());
    let j0 = (rect.lower[1] / res).floor() as usize;
    let j1 = ((rect.upper[1] / res).ceil() as usize).min(mesh.n_cells_y());
    let mut total = 0.0;
    for j in j0..j1 {
        let y0 = j as f64 * res;
        let dy = (rect.upper[1].min(y0 + res) - rect.lower[1].max(y0)).max(0.0);
        if dy == 0.0 {
            continue;
        }
        for i in i0..i1 {
            let x0 = i as f64 * res;
            let dx = (rect.upper[0].min(x0 + res) - rect.lower[0].max(x0)).max(0.0);
            if dx > 0.0 {
                total += field[mesh.cell_id(i, j)] * dx * dy;
            }
        }
    }
    Ok(total)
}

fn fmt(x: f64) -> String {
    format!("{x:.9e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.display().to_string(), source }
}

/// Writes the per-run output directory: snapshot CSVs on a configurable
/// cadence plus append-only particle and diagnostics series.
pub struct OutputWriter {
    dir: PathBuf,
    diagnostics: BufWriter<File>,
    particles: BufWriter<File>,
}

impl OutputWriter {
    pub fn create(dir: &Path) -> Result<Self, SimError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let diag_path = dir.join("diagnostics.csv");
        let mut diagnostics = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&diag_path)
                .map_err(io_err(&diag_path))?,
        );
        diagnostics
            .write_all(b"t_s,phi_inc,phi_cum,bound_rhs,newton_iters\n")
            .map_err(io_err(&diag_path))?;
        let part_path = dir.join("particles.csv");
        let mut particles = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&part_path)
                .map_err(io_err(&part_path))?,
        );
        particles
            .write_all(b"t_s,id,x_m,y_m,vbx_ms,vby_ms,grounded\n")
            .map_err(io_err(&part_path))?;
        Ok(OutputWriter { dir: dir.to_path_buf(), diagnostics, particles })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Store the resolved configuration next to the outputs.
    pub fn write_config_copy(&self, contents: &str) -> Result<(), SimError> {
        let path = self.dir.join("config.toml");
        std::fs::write(&path, contents).map_err(io_err(&path))
    }

    /// Write the nodal velocity and cell tracer snapshots for one step.
    pub fn write_snapshot(
        &mut self,
        mesh: &Mesh,
        state: &SeaIceState,
        step: usize,
    ) -> Result<(), SimError> {
        let path = self.dir.join(format!("fields_{step}.csv"));
        let mut f = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        f.write_all(b"x_m,y_m,vx_ms,vy_ms\n").map_err(io_err(&path))?;
        for n in 0..mesh.n_nodes() {
            let p = mesh.node_pos(n);
            writeln!(
                f,
                "{},{},{},{}",
                fmt(p[0]),
                fmt(p[1]),
                fmt(state.v[n][0]),
                fmt(state.v[n][1])
            )
            .map_err(io_err(&path))?;
        }
        f.flush().map_err(io_err(&path))?;

        let path = self.dir.join(format!("tracers_{step}.csv"));
        let mut f = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        f.write_all(b"x_m,y_m,a,h\n").map_err(io_err(&path))?;
        for c in 0..mesh.n_cells() {
            let p = mesh.cell_center(c);
            writeln!(
                f,
                "{},{},{},{}",
                fmt(p[0]),
                fmt(p[1]),
                fmt(state.a[c]),
                fmt(state.h[c])
            )
            .map_err(io_err(&path))?;
        }
        f.flush().map_err(io_err(&path))
    }

    /// Append one particle row per active iceberg.
    pub fn append_particles(
        &mut self,
        t: f64,
        bergs: &[IcebergParticle],
    ) -> Result<(), SimError> {
        let path = self.dir.join("particles.csv");
        for b in bergs.iter().filter(|b| b.is_active()) {
            writeln!(
                self.particles,
                "{},{},{},{},{},{},{}",
                fmt(t),
                b.id,
                fmt(b.position[0]),
                fmt(b.position[1]),
                fmt(b.velocity[0]),
                fmt(b.velocity[1]),
                u8::from(b.grounded)
            )
            .map_err(io_err(&path))?;
        }
        self.particles.flush().map_err(io_err(&path))
    }

    /// Append one diagnostics row.
    pub fn append_diagnostics(&mut self, record: &DiagnosticsRecord) -> Result<(), SimError> {
        let path = self.dir.join("diagnostics.csv");
        writeln!(
            self.diagnostics,
            "{},{},{},{},{}",
            fmt(record.t),
            fmt(record.phi_increment),
            fmt(record.phi_cumulative),
            fmt(record.bound_rhs),
            record.newton_iters
        )
        .map_err(io_err(&path))?;
        self.diagnostics.flush().map_err(io_err(&path))
    }
}

/// Write a full output bundle for one step: snapshot files, particle rows,
/// and the diagnostics row.
pub fn write_outputs(
    writer: &mut OutputWriter,
    mesh: &Mesh,
    state: &SeaIceState,
    bergs: &[IcebergParticle],
    record: &DiagnosticsRecord,
    step: usize,
) -> Result<(), SimError> {
    writer.write_snapshot(mesh, state, step)?;
    writer.append_particles(record.t, bergs)?;
    writer.append_diagnostics(record)
}
