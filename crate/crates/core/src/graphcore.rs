//! Graph mathematics on dense, fully connected graphs: the symmetric
//! normalized Laplacian, its spectral rescaling and the Chebyshev basis used
//! by spectral convolutions.

use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Node features paired with a symmetric weighted adjacency matrix.
#[derive(Debug, Clone)]
pub struct DenseGraph {
    pub x: Tensor,
    pub adj: Tensor,
}

impl DenseGraph {
    pub fn new(x: Tensor, adj: Tensor) -> Result<Self> {
        let n = x.rows();
        if adj.shape() != (n, n) {
            return Err(Error::Shape {
                op: "dense_graph",
                lhs: x.shape(),
                rhs: adj.shape(),
            });
        }
        check_symmetric(&adj)?;
        check_row_sums(&adj)?;
        Ok(DenseGraph { x, adj })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }
}

pub fn check_symmetric(a: &Tensor) -> Result<()> {
    let (n, m) = a.shape();
    if n != m {
        return Err(Error::Graph(format!("adjacency must be square, got {n}x{m}")));
    }
    let d = a.data();
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i * n + j] != d[j * n + i] {
                return Err(Error::Graph(format!(
                    "adjacency is not symmetric at ({i}, {j}): {} vs {}",
                    d[i * n + j],
                    d[j * n + i]
                )));
            }
        }
    }
    Ok(())
}

fn check_row_sums(a: &Tensor) -> Result<()> {
    let n = a.cols();
    for (i, row) in a.data().chunks(n).enumerate() {
        let s: f64 = row.iter().sum();
        if !(s > 0.0) {
            return Err(Error::Graph(format!(
                "node {i} has row sum {s}; degree must be positive (isolated node without self-loop)"
            )));
        }
    }
    Ok(())
}

/// `L = I - D^{-1/2} A D^{-1/2}` with `D_ii = sum_j a_ij`. Differentiable
/// with respect to `A`.
///
/// Entries are formed as `a_ij / sqrt(d_i d_j)`, so a node whose only edge
/// is its self-loop gets a diagonal entry of exactly zero.
pub fn normalized_laplacian(a: &Tensor) -> Result<Tensor> {
    check_symmetric(a)?;
    check_row_sums(a)?;
    let n = a.rows();
    let deg = a.sum_cols();
    let normalized = a.div(&deg.matmul(&deg.transpose())?.sqrt())?;
    Tensor::identity(n).sub(&normalized)
}

/// How the largest Laplacian eigenvalue used for rescaling is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMaxMode {
    /// Use 2, the upper bound of the normalized Laplacian spectrum.
    #[default]
    Fixed2,
    /// Estimate by power iteration on each graph.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMax {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate collapsed to zero (e.g. `L = 0`); callers substitute 2.
    pub degenerate: bool,
}

/// Dominant eigenvalue of a symmetric matrix by power iteration with a
/// Rayleigh-quotient estimate. The value is read from the tensor without
/// entering the differentiation graph.
///
/// The start vector is all-ones plus a small deterministic ramp, normalized.
/// The ramp keeps the start from coinciding with the constant eigenvector of
/// regular graphs.
pub fn lambda_max(l: &Tensor, tol: f64, max_iter: usize) -> LambdaMax {
    let n = l.rows();
    let m = l.data();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i + 1) as f64 / n as f64).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let w: Vec<f64> = m.chunks(n).map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return LambdaMax {
                value: 0.0,
                iterations: it,
                converged: true,
                degenerate: true,
            };
        }
        v = w.into_iter().map(|x| x / norm).collect();
        if it > 1 && (rayleigh - estimate).abs() < tol * estimate.abs().max(1.0) {
            return LambdaMax {
                value: rayleigh,
                iterations: it,
                converged: true,
                degenerate: false,
            };
        }
        estimate = rayleigh;
    }
    log::warn!("lambda_max: power iteration did not converge in {max_iter} iterations");
    LambdaMax {
        value: estimate,
        iterations: max_iter,
        converged: false,
        degenerate: false,
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Largest eigenvalue to rescale by, per `mode`, with the degenerate case
/// mapped to 2.
pub fn spectral_bound(l: &Tensor, mode: LambdaMaxMode) -> f64 {
    match mode {
        LambdaMaxMode::Fixed2 => 2.0,
        LambdaMaxMode::Power => {
            let est = lambda_max(l, 1e-6, 100);
            if est.degenerate || est.value <= 1e-8 {
                2.0
            } else {
                est.value
            }
        }
    }
}

/// `L~ = (2 / lambda_max) L - I`, mapping the spectrum into `[-1, 1]`.
/// A `lambda_max` at or below `1e-8` is replaced by 2.
pub fn scale_laplacian(l: &Tensor, lambda_max: f64) -> Result<Tensor> {
    let lambda = if lambda_max <= 1e-8 { 2.0 } else { lambda_max };
    l.scale(2.0 / lambda).sub(&Tensor::identity(l.rows()))
}

/// Chebyshev basis `[T_0(L~) X, ..., T_{K-1}(L~) X]` by the three-term
/// recurrence `Z_k = 2 L~ Z_{k-1} - Z_{k-2}`.
pub fn cheb_basis(l_scaled: &Tensor, x: &Tensor, k: usize) -> Result<Vec<Tensor>> {
    if k < 1 {
        return Err(Error::Invalid("cheb_basis: order K must be at least 1".into()));
    }
    if l_scaled.rows() != l_scaled.cols() || l_scaled.cols() != x.rows() {
        return Err(Error::Shape {
            op: "cheb_basis",
            lhs: l_scaled.shape(),
            rhs: x.shape(),
        });
    }
    let mut basis = Vec::with_capacity(k);
    basis.push(x.clone());
    if k > 1 {
        basis.push(l_scaled.matmul(x)?);
    }
    for i in 2..k {
        let next = l_scaled.matmul(&basis[i - 1])?.scale(2.0).sub(&basis[i - 2])?;
        basis.push(next);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn laplacian_of_single_edge() {
        let l = normalized_laplacian(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(l.to_vec(), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_of_complete_graph_with_loops() {
        let l = normalized_laplacian(&m(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_close(&l.to_vec(), &[0.5, -0.5, -0.5, 0.5], 1e-15);
    }

    #[test]
    fn laplacian_of_self_looped_node() {
        for w in [1.0, 0.37, 3.1e-3] {
            let l = normalized_laplacian(&m(&[&[w]])).unwrap();
            assert_eq!(l.to_vec(), vec![0.0]);
        }
        let l = normalized_laplacian(&m(&[&[0.3, 0.0], &[0.0, 0.7]])).unwrap();
        assert_eq!(l.to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn laplacian_rejects_isolated_node() {
        let err = normalized_laplacian(&m(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap_err();
        assert!(err.to_string().contains("row sum"), "{err}");
    }

    #[test]
    fn laplacian_rejects_asymmetric() {
        assert!(normalized_laplacian(&m(&[&[1.0, 0.5], &[0.4, 1.0]])).is_err());
    }

    #[test]
    fn lambda_max_of_diagonal() {
        let est = lambda_max(&m(&[&[0.3, 0.0], &[0.0, 1.7]]), 1e-6, 100);
        assert!((est.value - 1.7).abs() < 1e-6, "{est:?}");
        assert!(est.converged && !est.degenerate);
    }

    #[test]
    fn lambda_max_of_path_laplacian() {
        let est = lambda_max(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1e-6, 100);
        assert!((est.value - 2.0).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn lambda_max_of_zero_is_degenerate() {
        let l = m(&[&[0.0]]);
        let est = lambda_max(&l, 1e-6, 100);
        assert!(est.degenerate);
        assert_eq!(est.value, 0.0);
        assert_eq!(spectral_bound(&l, LambdaMaxMode::Power), 2.0);
    }

    #[test]
    fn scaling_by_two() {
        let s = scale_laplacian(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 2.0).unwrap();
        assert_eq!(s.to_vec(), vec![0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn scaling_degenerate_gives_minus_identity() {
        let s = scale_laplacian(&Tensor::zeros(2, 2), 0.0).unwrap();
        assert_eq!(s.to_vec(), vec![-1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn chebyshev_second_order_on_diagonal() {
        let l = m(&[&[0.5, 0.0], &[0.0, -1.0]]);
        let x = m(&[&[1.0], &[1.0]]);
        let z = cheb_basis(&l, &x, 3).unwrap();
        assert_eq!(z.len(), 3);
        assert_eq!(z[2].to_vec(), vec![-0.5, 1.0]);
    }

    #[test]
    fn chebyshev_order_one_is_identity() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let z = cheb_basis(&Tensor::identity(2), &x, 1).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].ptr_eq(&x));
    }

    #[test]
    fn chebyshev_rejects_zero_order() {
        assert!(cheb_basis(&Tensor::identity(2), &Tensor::zeros(2, 1), 0).is_err());
    }

    #[test]
    fn graph_validation() {
        let x = Tensor::zeros(2, 3);
        assert!(DenseGraph::new(x.clone(), m(&[&[0.5, 0.2], &[0.2, 0.5]])).is_ok());
        assert!(DenseGraph::new(x.clone(), m(&[&[0.5, 0.2], &[0.3, 0.5]])).is_err());
        assert!(DenseGraph::new(x, Tensor::identity(3)).is_err());
    }
}
