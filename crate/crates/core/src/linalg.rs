//! Dense factorizations and a restarted GMRES for the assembled systems.
//!
//! Matrices are passed row-major, as produced by
//! [`OperatorBlock`](crate::operator::OperatorBlock).

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, Par};

use crate::{BdieError, Result};

pub fn to_mat(nrows: usize, ncols: usize, data: &[f64]) -> Mat<f64> {
    assert_eq!(data.len(), nrows * ncols);
    Mat::from_fn(nrows, ncols, |i, j| data[i * ncols + j])
}

fn one_norm(n: usize, data: &[f64]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| data[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization with partial pivoting, run sequentially so results do
/// not depend on the thread count.
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    n: usize,
    norm1: f64,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseLu {{ n: {}, norm1: {} }}", self.n, self.norm1)
    }
}

impl DenseLu {
    pub fn new(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(BdieError::Solver(format!(
                "matrix with {} entries is not {n} x {n}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BdieError::Solver("matrix has non-finite entries".into()));
        }
        faer::set_global_parallelism(Par::Seq);
        let lu = to_mat(n, n, data).partial_piv_lu();
        let norm1 = one_norm(n, data);
        let u = lu.U();
        let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
        let pmax = pivots.iter().cloned().fold(0.0, f64::max);
        let pmin = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        if n > 0 && !(pmin > (n as f64) * f64::EPSILON * pmax) {
            return Err(BdieError::Solver(format!(
                "singular factorization: pivot ratio {:.3e}",
                if pmax > 0.0 { pmin / pmax } else { 0.0 }
            )));
        }
        Ok(Self { lu, n, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve_transpose(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Hager–Higham estimate of `‖A‖₁ ‖A⁻¹‖₁` (a lower bound that is
    /// usually within a small factor of the true value).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            let ny: f64 = y.iter().map(|v| v.abs()).sum();
            if ny <= est {
                break;
            }
            est = ny;
            let s: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&s);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        // alternative probe guarding against unlucky sign patterns
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0))
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est) * self.norm1
    }
}

/// Singular values of a row-major matrix in nonincreasing order.
pub fn singular_values(nrows: usize, ncols: usize, data: &[f64]) -> Result<Vec<f64>> {
    faer::set_global_parallelism(Par::Seq);
    to_mat(nrows, ncols, data)
        .singular_values()
        .map_err(|e| BdieError::Solver(format!("SVD did not converge: {e:?}")))
}

pub fn smallest_singular_value(nrows: usize, ncols: usize, data: &[f64]) -> Result<f64> {
    let s = singular_values(nrows, ncols, data)?;
    Ok(s.last().copied().unwrap_or(0.0))
}

/// Row-major dense matrix-vector product.
pub fn matvec(nrows: usize, ncols: usize, data: &[f64], x: &[f64]) -> Vec<f64> {
    (0..nrows)
        .map(|i| data[i * ncols..(i + 1) * ncols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖Ax - b‖ / ‖b‖`, or `‖Ax‖` when `b = 0`.
pub fn relative_residual(nrows: usize, ncols: usize, data: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let ax = matvec(nrows, ncols, data, x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Restarted GMRES(m) with modified Gram-Schmidt and Givens rotations.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    tol: f64,
    max_iterations: usize,
) -> GmresOutcome {
    let n = b.len();
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let m = restart.max(1).min(n.max(1));
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        if beta / nb <= tol || total >= max_iterations {
            return GmresOutcome {
                x,
                iterations: total,
                relative_residual: beta / nb,
                converged: beta / nb <= tol,
            };
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let hik: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d > 0.0 {
                cs[k] = h[k][k] / d;
                sn[k] = h[k + 1][k] / d;
            } else {
                cs[k] = 1.0;
                sn[k] = 0.0;
            }
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() / nb <= tol || hn == 0.0 || total >= max_iterations {
                break;
            }
            v.push(w.iter().map(|t| t / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
    }
}
