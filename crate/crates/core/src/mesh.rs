//! Uniform quadrilateral mesh with bilinear shape functions.
//!
//! The domain is a rectangle split into square cells of edge `resolution`.
//! Velocity unknowns live on nodes, tracers on cell centers. Connectivity is
//! implicit from (i, j) indexing; node and cell coordinate tables are
//! precomputed for assembly and output.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Relative slack when checking that the resolution divides the extent.
const DIVISIBILITY_TOL: f64 = 1e-9;

/// Axis-aligned rectangle given by its lower-left and upper-right corners (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Rect {
    /// Build a rectangle, rejecting ill-ordered corners.
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self, SimError> {
        if !(lower[0] < upper[0] && lower[1] < upper[1]) {
            return Err(SimError::config(format!(
                "rectangle corners are not well-ordered: lower ({}, {}), upper ({}, {})",
                lower[0], lower[1], upper[0], upper[1]
            )));
        }
        Ok(Rect { lower, upper })
    }

    /// Closed-set containment test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.lower[0] && p[0] <= self.upper[0] && p[1] >= self.lower[1] && p[1] <= self.upper[1]
    }

    pub fn area(&self) -> f64 {
        (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])
    }
}

/// Uniform quadrilateral mesh of a rectangular domain.
#[derive(Clone, Debug)]
pub struct Mesh {
    extent: [f64; 2],
    resolution: f64,
    n_cells: [usize; 2],
    nodes: Vec<[f64; 2]>,
    cells: Vec<[usize; 4]>,
    boundary_node: Vec<bool>,
}

impl Mesh {
    /// Build the uniform mesh, requiring the resolution to divide both extents.
    pub fn uniform(extent: [f64; 2], resolution: f64) -> Result<Self, SimError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(SimError::config(format!(
                "mesh resolution must be positive, got {resolution}"
            )));
        }
        let mut n_cells = [0usize; 2];
        for (axis, name) in [(0, "x"), (1, "y")] {
            let ext = extent[axis];
            if !(ext > 0.0) || !ext.is_finite() {
                return Err(SimError::config(format!(
                    "domain extent_{name} must be positive, got {ext}"
                )));
            }
            let n = (ext / resolution).round();
            if n < 1.0 || (n * resolution - ext).abs() > DIVISIBILITY_TOL * ext {
                return Err(SimError::config(format!(
                    "resolution {resolution} m does not divide extent_{name} = {ext} m"
                )));
            }
            n_cells[axis] = n as usize;
        }
        // Snap the extent so node coordinates and point location agree exactly.
        let extent = [n_cells[0] as f64 * resolution, n_cells[1] as f64 * resolution];

        let (nx, ny) = (n_cells[0], n_cells[1]);
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary_node = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * resolution, j as f64 * resolution]);
                boundary_node.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let node_id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                // Counterclockwise: SW, SE, NE, NW.
                cells.push([
                    node_id(i, j),
                    node_id(i + 1, j),
                    node_id(i + 1, j + 1),
                    node_id(i, j + 1),
                ]);
            }
        }
        Ok(Mesh {
            extent,
            resolution,
            n_cells,
            nodes,
            cells,
            boundary_node,
        })
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn n_cells_x(&self) -> usize {
        self.n_cells[0]
    }

    pub fn n_cells_y(&self) -> usize {
        self.n_cells[1]
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells[0] * self.n_cells[1]
    }

    pub fn n_nodes_x(&self) -> usize {
        self.n_cells[0] + 1
    }

    pub fn n_nodes_y(&self) -> usize {
        self.n_cells[1] + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes_x() * self.n_nodes_y()
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_nodes_x() && j < self.n_nodes_y());
        j * self.n_nodes_x() + i
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_cells[0] && j < self.n_cells[1]);
        j * self.n_cells[0] + i
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.n_cells[0], cell / self.n_cells[0])
    }

    pub fn node_pos(&self, node: usize) -> [f64; 2] {
        self.nodes[node]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// The four node ids of a cell, counterclockwise from the SW corner.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        self.cells[cell]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_node[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_node
    }

    /// Cell center coordinates.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_coords(cell);
        [
            (i as f64 + 0.5) * self.resolution,
            (j as f64 + 0.5) * self.resolution,
        ]
    }

    /// Locate the cell containing `p` and the local coordinates within it.
    ///
    /// Points exactly on a shared edge or vertex are assigned to the cell with
    /// the lower index, so particles sitting on grid lines resolve
    /// deterministically.
    pub fn locate_point(&self, p: [f64; 2]) -> Result<(usize, [f64; 2]), SimError> {
        let mut idx = [0usize; 2];
        let mut local = [0.0f64; 2];
        for axis in 0..2 {
            let x = p[axis];
            if !(0.0..=self.extent[axis]).contains(&x) || x.is_nan() {
                return Err(SimError::OutOfDomain(p[0], p[1]));
            }
            let t = x / self.resolution;
            let mut i = t.floor() as usize;
            if i as f64 * self.resolution == x && i > 0 {
                // On a grid line: take the lower cell, local coordinate 1.
                i -= 1;
                local[axis] = 1.0;
            } else {
                if i >= self.n_cells[axis] {
                    i = self.n_cells[axis] - 1;
                }
                local[axis] = (x - i as f64 * self.resolution) / self.resolution;
            }
            idx[axis] = i;
        }
        Ok((self.cell_id(idx[0], idx[1]), local))
    }

    /// Map local coordinates in a cell back to physical coordinates.
    pub fn reference_map(&self, cell: usize, local: [f64; 2]) -> [f64; 2] {
        let (i, j) = self.cell_coords(cell);
        [
            (i as f64 + local[0]) * self.resolution,
            (j as f64 + local[1]) * self.resolution,
        ]
    }
}

/// Evaluate the four bilinear shape functions and their local-coordinate
/// gradients at `(xi, eta)` in the reference cell `[0,1]^2`.
///
/// Ordering matches [`Mesh::cell_nodes`]: SW, SE, NE, NW.
pub fn basis_eval(local: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let [xi, eta] = local;
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&xi) && (-1e-12..=1.0 + 1e-12).contains(&eta));
    let values = [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ];
    let gradients = [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ];
    (values, gradients)
}

/// Tensor-product Gauss quadrature on the reference cell `[0,1]^2`.
///
/// Weights sum to one; the default 2x2 rule integrates products of bilinear
/// functions exactly.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point Gauss rule per axis, `1 <= n <= 5`.
    pub fn tensor_gauss(n: usize) -> Self {
        let (pts, wts) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (i, &xi) in pts.iter().enumerate() {
            for (j, &eta) in pts.iter().enumerate() {
                points.push([xi, eta]);
                weights.push(wts[i] * wts[j]);
            }
        }
        QuadratureRule { points, weights }
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::tensor_gauss(2)
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Nodes/weights on [-1, 1], mapped by x -> (x + 1)/2, w -> w/2.
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0_f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0 / 5.0_f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0 / 5.0_f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0 / 5.0_f64).sqrt()).sqrt();
            let wa = (18.0 + 30.0_f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0_f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0 / 7.0_f64).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0 / 7.0_f64).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70.0_f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70.0_f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        _ => panic!("tensor_gauss supports 1..=5 points per axis, got {n}"),
    };
    (
        nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights.iter().map(|w| 0.5 * w).collect(),
    )
}
