//! Sparse linear algebra for the momentum solves.
//!
//! The linearized momentum systems are sparse with a fixed 9-node stencil, so
//! a CSR matrix with a precomputed pattern, an ILU(0) preconditioner for
//! BiCGSTAB, and a banded LU direct solver cover every mesh at desk scale.

use std::sync::Arc;

use crate::error::SimError;

/// Immutable sparsity pattern with sorted column indices per row.
#[derive(Clone, Debug)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    /// Index of the diagonal entry within each row.
    pub diag: Vec<usize>,
}

impl SparsityPattern {
    /// Build a pattern from per-row sorted column lists; every row must
    /// contain its diagonal.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, cols) in rows.iter().enumerate() {
            debug_assert!(cols.windows(2).all(|w| w[0] < w[1]), "columns must be sorted");
            let start = col_idx.len();
            col_idx.extend_from_slice(cols);
            let d = cols.iter().position(|&c| c == i).expect("diagonal missing");
            diag.push(start + d);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { n, row_ptr, col_idx, diag }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry (row, col) in the value array, if present.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|p| lo + p)
    }
}

/// CSR matrix over a shared pattern.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub pattern: Arc<SparsityPattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        CsrMatrix { pattern, values: vec![0.0; nnz] }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.n {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Maximum relative asymmetry over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                let a_ji = self.get(j, i);
                worst = worst.max((self.values[k] - a_ji).abs() / scale);
            }
        }
        worst
    }
}

/// ILU(0) factors stored on the same pattern as the matrix.
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
    values: Vec<f64>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SimError> {
        let p = &a.pattern;
        let mut values = a.values.clone();
        for i in 0..p.n {
            for kk in p.row_ptr[i]..p.diag[i] {
                let k = p.col_idx[kk];
                let dk = values[p.diag[k]];
                if dk == 0.0 {
                    return Err(SimError::InternalConsistency(format!(
                        "ILU(0) zero pivot at row {k}"
                    )));
                }
                let lik = values[kk] / dk;
                values[kk] = lik;
                for jj in (p.diag[k] + 1)..p.row_ptr[k + 1] {
                    let j = p.col_idx[jj];
                    if let Some(pos) = p.find(i, j) {
                        values[pos] -= lik * values[jj];
                    }
                }
            }
            if values[p.diag[i]] == 0.0 {
                return Err(SimError::InternalConsistency(format!(
                    "ILU(0) zero pivot at row {i}"
                )));
            }
        }
        Ok(Ilu0 {
            row_ptr: p.row_ptr.clone(),
            col_idx: p.col_idx.clone(),
            diag: p.diag.clone(),
            values,
        })
    }

    /// Solve M z = r with the incomplete factors.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        // Forward: L has unit diagonal.
        for i in 0..n {
            let mut acc = r[i];
            for k in self.row_ptr[i]..self.diag[i] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc;
        }
        // Backward with U.
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc / self.values[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a Krylov solve.
#[derive(Clone, Copy, Debug)]
pub struct KrylovResult {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Right-preconditioned BiCGSTAB. `x` carries the initial guess and returns
/// the solution; convergence is relative to `||b||`.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &Ilu0,
    rtol: f64,
    max_iters: usize,
) -> KrylovResult {
    let n = a.n();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|xi| *xi = 0.0);
        return KrylovResult { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let tol = rtol * b_norm;

    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm(&r) <= tol {
        return KrylovResult { iterations: 0, relative_residual: norm(&r) / b_norm, converged: true };
    }

    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for iter in 1..=max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break; // breakdown; return best iterate
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        a.matvec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho_new / denom;
        // s = r - alpha v (reuse r)
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm(&r) <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return KrylovResult {
                iterations: iter,
                relative_residual: norm(&r) / b_norm,
                converged: true,
            };
        }
        precond.apply(&r, &mut s_hat);
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &r) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
        }
        for i in 0..n {
            r[i] -= omega * t[i];
        }
        let rn = norm(&r);
        if rn <= tol {
            return KrylovResult { iterations: iter, relative_residual: rn / b_norm, converged: true };
        }
        if omega.abs() < 1e-300 {
            break;
        }
        rho = rho_new;
    }

    // True residual for the report.
    let mut res = vec![0.0; n];
    a.matvec(x, &mut res);
    for i in 0..n {
        res[i] = b[i] - res[i];
    }
    let rel = norm(&res) / b_norm;
    KrylovResult { iterations: max_iters, relative_residual: rel, converged: rel <= rtol }
}

/// Banded LU factorization without pivoting.
///
/// The momentum operators are block-diagonally dominant, so pivot growth is
/// not a concern at desk scale; a vanishing pivot is reported as an error.
pub struct BandedLu {
    n: usize,
    band: usize,
    /// Row-major storage: entry (i, j) sits at `ab[i][j - i + band]`.
    ab: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SimError> {
        let p = &a.pattern;
        let n = p.n;
        let mut band = 0usize;
        for i in 0..n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                band = band.max(i.abs_diff(j));
            }
        }
        let width = 2 * band + 1;
        let mut ab = vec![0.0; n * width];
        for i in 0..n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                ab[i * width + (j + band - i)] = a.values[k];
            }
        }
        // In-place LU: L below, U on/above the diagonal.
        for k in 0..n {
            let piv = ab[k * width + band];
            if piv.abs() < 1e-300 {
                return Err(SimError::InternalConsistency(format!(
                    "banded LU zero pivot at row {k}"
                )));
            }
            let i_max = (k + band).min(n - 1);
            for i in (k + 1)..=i_max {
                let lik = ab[i * width + (k + band - i)] / piv;
                ab[i * width + (k + band - i)] = lik;
                if lik != 0.0 {
                    let j_max = (k + band).min(n - 1);
                    for j in (k + 1)..=j_max {
                        let u_kj = ab[k * width + (j + band - k)];
                        if u_kj != 0.0 {
                            ab[i * width + (j + band - i)] -= lik * u_kj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { n, band, ab })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (n, band) = (self.n, self.band);
        let width = 2 * band + 1;
        x.copy_from_slice(b);
        for i in 0..n {
            let k_min = i.saturating_sub(band);
            let mut acc = x[i];
            for k in k_min..i {
                acc -= self.ab[i * width + (k + band - i)] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let j_max = (i + band).min(n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=j_max {
                acc -= self.ab[i * width + (j + band - i)] * x[j];
            }
            x[i] = acc / self.ab[i * width + band];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random diagonally dominant matrix on a banded pattern.
    fn test_matrix(pattern: &Arc<SparsityPattern>, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CsrMatrix::zeros(Arc::clone(pattern));
        for i in 0..pattern.n {
            let mut off_sum = 0.0;
            for k in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
                if pattern.col_idx[k] != i {
                    let v = rng.gen::<f64>() * 2.0 - 1.0;
                    a.values[k] = v;
                    off_sum += v.abs();
                }
            }
            a.values[pattern.diag[i]] = off_sum + 1.0 + rng.gen::<f64>();
        }
        a
    }

    fn banded_pattern(n: usize, half: usize) -> Arc<SparsityPattern> {
        let rows = (0..n)
            .map(|i| {
                (i.saturating_sub(half)..=(i + half).min(n - 1)).collect::<Vec<_>>()
            })
            .collect();
        Arc::new(SparsityPattern::from_rows(rows))
    }

    #[test]
    fn banded_lu_solves_against_matvec() {
        let pat = banded_pattern(50, 3);
        let a = test_matrix(&pat, 1);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 50];
        a.matvec(&x_true, &mut b);
        let lu = BandedLu::factor(&a).unwrap();
        let mut x = vec![0.0; 50];
        lu.solve(&b, &mut x);
        for i in 0..50 {
            assert!((x[i] - x_true[i]).abs() < 1e-11, "entry {i}");
        }
    }

    #[test]
    fn bicgstab_matches_direct_solve() {
        let pat = banded_pattern(200, 4);
        let a = test_matrix(&pat, 2);
        let x_true: Vec<f64> = (0..200).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let mut b = vec![0.0; 200];
        a.matvec(&x_true, &mut b);

        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = vec![0.0; 200];
        let res = bicgstab(&a, &b, &mut x, &ilu, 1e-12, 500);
        assert!(res.converged, "rel residual {:.3e}", res.relative_residual);

        let lu = BandedLu::factor(&a).unwrap();
        let mut x_direct = vec![0.0; 200];
        lu.solve(&b, &mut x_direct);
        for i in 0..200 {
            assert!((x[i] - x_direct[i]).abs() < 1e-8, "entry {i}: {} vs {}", x[i], x_direct[i]);
        }
    }

    #[test]
    fn bicgstab_zero_rhs_returns_zero() {
        let pat = banded_pattern(20, 2);
        let a = test_matrix(&pat, 3);
        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = vec![1.0; 20];
        let res = bicgstab(&a, &vec![0.0; 20], &mut x, &ilu, 1e-12, 100);
        assert!(res.converged);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_start_converges_immediately() {
        let pat = banded_pattern(40, 2);
        let a = test_matrix(&pat, 4);
        let x_true: Vec<f64> = (0..40).map(|i| 1.0 + i as f64).collect();
        let mut b = vec![0.0; 40];
        a.matvec(&x_true, &mut b);
        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = x_true.clone();
        let res = bicgstab(&a, &b, &mut x, &ilu, 1e-10, 100);
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn asymmetry_detects_symmetric_matrix() {
        let pat = banded_pattern(30, 2);
        let mut a = test_matrix(&pat, 5);
        // Symmetrize.
        for i in 0..30 {
            for k in pat.row_ptr[i]..pat.row_ptr[i + 1] {
                let j = pat.col_idx[k];
                if j > i {
                    let v = a.values[k];
                    let kj = pat.find(j, i).unwrap();
                    a.values[kj] = v;
                }
            }
        }
        assert!(a.asymmetry() < 1e-15);
    }
}
