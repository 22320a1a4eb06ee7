use crate::diffcore::{ParamStore, Rng, Tensor};
use crate::error::{Error, Result};
use crate::graphcore::{self, DenseGraph, LambdaMaxMode};

/// Chebyshev spectral convolution:
/// `relu(sum_k T_k(L~) X Θ_k + b)` with `L~` the rescaled normalized Laplacian.
#[derive(Debug, Clone)]
pub struct ChebConv {
    pub thetas: Vec<Tensor>,
    pub bias: Tensor,
    pub lambda_mode: LambdaMaxMode,
}

impl ChebConv {
    /// Registers `{prefix}.theta.{k}` for `k in 0..order`, then `{prefix}.bias`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        order: usize,
        lambda_mode: LambdaMaxMode,
        rng: &mut Rng,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::config("cheb_k", "Chebyshev order must be at least 1"));
        }
        let thetas = (0..order)
            .map(|k| store.glorot(format!("{prefix}.theta.{k}"), in_dim, out_dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let bias = store.zeros(format!("{prefix}.bias"), 1, out_dim)?;
        Ok(ChebConv {
            thetas,
            bias,
            lambda_mode,
        })
    }

    pub fn from_weights(thetas: Vec<Tensor>, bias: Tensor, lambda_mode: LambdaMaxMode) -> Result<Self> {
        let first = thetas
            .first()
            .ok_or_else(|| Error::Invalid("ChebConv needs at least one weight matrix".into()))?;
        if thetas.iter().any(|t| t.shape() != first.shape()) || bias.shape() != (1, first.cols()) {
            return Err(Error::Shape {
                op: "cheb_conv",
                lhs: first.shape(),
                rhs: bias.shape(),
            });
        }
        Ok(ChebConv {
            thetas,
            bias,
            lambda_mode,
        })
    }

    pub fn order(&self) -> usize {
        self.thetas.len()
    }

    pub fn forward(&self, graph: &DenseGraph) -> Result<Tensor> {
        Ok(self.pre_activation(graph)?.relu())
    }

    /// `sum_k Z_k Theta_k + b`, before the ReLU.
    pub fn pre_activation(&self, graph: &DenseGraph) -> Result<Tensor> {
        let laplacian = graphcore::normalized_laplacian(&graph.adj)?;
        let lambda = graphcore::spectral_bound(&laplacian, self.lambda_mode);
        let scaled = graphcore::scale_laplacian(&laplacian, lambda)?;
        let basis = graphcore::cheb_basis(&scaled, &graph.x, self.order())?;
        let mut acc = basis[0].matmul(&self.thetas[0])?;
        for (z, theta) in basis.iter().zip(&self.thetas).skip(1) {
            acc = acc.add(&z.matmul(theta)?)?;
        }
        acc.add(&self.bias)
    }
}

/// Spatial convolution with a weighted-mean aggregator over all nodes (self
/// included): `relu(x_i W_self + m_i W_neigh + b)` with
/// `m_i = sum_j a_ij x_j / sum_j a_ij`.
#[derive(Debug, Clone)]
pub struct SageConv {
    pub w_self: Tensor,
    pub w_neigh: Tensor,
    pub bias: Tensor,
}

impl SageConv {
    /// Registers `{prefix}.w_self`, `{prefix}.w_neigh`, `{prefix}.bias`.
    pub fn new(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(SageConv {
            w_self: store.glorot(format!("{prefix}.w_self"), in_dim, out_dim, rng)?,
            w_neigh: store.glorot(format!("{prefix}.w_neigh"), in_dim, out_dim, rng)?,
            bias: store.zeros(format!("{prefix}.bias"), 1, out_dim)?,
        })
    }

    pub fn from_weights(w_self: Tensor, w_neigh: Tensor, bias: Tensor) -> Result<Self> {
        if w_self.shape() != w_neigh.shape() || bias.shape() != (1, w_self.cols()) {
            return Err(Error::Shape {
                op: "sage_conv",
                lhs: w_self.shape(),
                rhs: w_neigh.shape(),
            });
        }
        Ok(SageConv { w_self, w_neigh, bias })
    }

    pub fn forward(&self, graph: &DenseGraph) -> Result<Tensor> {
        Ok(self.pre_activation(graph)?.relu())
    }

    /// `x_i W_self + m_i W_neigh + b`, before the ReLU.
    pub fn pre_activation(&self, graph: &DenseGraph) -> Result<Tensor> {
        let degree = graph.adj.sum_cols();
        if let Some(i) = degree.data().iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Graph(format!("sage_conv: node {i} has zero row sum")));
        }
        let aggregated = graph.adj.matmul(&graph.x)?.mul(&degree.powf(-1.0))?;
        graph
            .x
            .matmul(&self.w_self)?
            .add(&aggregated.matmul(&self.w_neigh)?)?
            .add(&self.bias)
    }
}

#[derive(Debug, Clone)]
pub enum GraphConv {
    Cheb(ChebConv),
    Sage(SageConv),
}

impl GraphConv {
    pub fn forward(&self, graph: &DenseGraph) -> Result<Tensor> {
        match self {
            GraphConv::Cheb(c) => c.forward(graph),
            GraphConv::Sage(s) => s.forward(graph),
        }
    }

    pub fn pre_activation(&self, graph: &DenseGraph) -> Result<Tensor> {
        match self {
            GraphConv::Cheb(c) => c.pre_activation(graph),
            GraphConv::Sage(s) => s.pre_activation(graph),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(x: &[&[f64]], a: &[&[f64]]) -> DenseGraph {
        DenseGraph::new(Tensor::from_rows(x).unwrap(), Tensor::from_rows(a).unwrap()).unwrap()
    }

    #[test]
    fn cheb_order_one_identity_is_relu() {
        let g = graph(&[&[1.0, -2.0], &[-0.5, 3.0]], &[&[0.6, 0.3], &[0.3, 0.9]]);
        let conv = ChebConv::from_weights(vec![Tensor::identity(2)], Tensor::zeros(1, 2), LambdaMaxMode::Fixed2).unwrap();
        assert_eq!(conv.forward(&g).unwrap().to_vec(), vec![1.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn cheb_single_node_alternates_sign() {
        // L = 0, so L~ = -I and Z_k = (-1)^k X.
        let g = graph(&[&[0.5, -1.0]], &[&[0.37]]);
        let thetas: Vec<Tensor> = [
            [[1.0, 0.5], [0.0, 2.0]],
            [[0.3, -0.2], [1.0, 0.1]],
            [[-0.4, 0.6], [0.25, 0.5]],
        ]
        .iter()
        .map(|m| Tensor::from_rows(&[&m[0], &m[1]]).unwrap())
        .collect();
        let bias = Tensor::row_vector(&[0.1, -0.2]).unwrap();
        let conv = ChebConv::from_weights(thetas.clone(), bias, LambdaMaxMode::Power).unwrap();
        let out = conv.forward(&g).unwrap().to_vec();

        let x = [0.5, -1.0];
        let mut expected = [0.1, -0.2];
        for (k, t) in thetas.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for j in 0..2 {
                expected[j] += sign * (x[0] * t.get(0, j) + x[1] * t.get(1, j));
            }
        }
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e.max(0.0)).abs() < 1e-12, "{out:?} vs {expected:?}");
        }
    }

    #[test]
    fn sage_uniform_mean() {
        let g = graph(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let conv = SageConv::from_weights(Tensor::identity(2), Tensor::identity(2), Tensor::zeros(1, 2)).unwrap();
        assert_eq!(conv.forward(&g).unwrap().to_vec(), vec![1.5, 0.5, 0.5, 1.5]);
    }

    #[test]
    fn sage_single_node_aggregates_itself() {
        let g = graph(&[&[0.4, -0.3]], &[&[0.2]]);
        let w_self = Tensor::from_rows(&[&[1.0, 2.0], &[0.5, -1.0]]).unwrap();
        let w_neigh = Tensor::from_rows(&[&[-0.5, 1.0], &[2.0, 0.0]]).unwrap();
        let bias = Tensor::row_vector(&[0.05, 0.1]).unwrap();
        let conv = SageConv::from_weights(w_self.clone(), w_neigh.clone(), bias).unwrap();
        let out = conv.forward(&g).unwrap().to_vec();
        let sum = w_self.add(&w_neigh).unwrap();
        let expected = [
            (0.4 * sum.get(0, 0) - 0.3 * sum.get(1, 0) + 0.05f64).max(0.0),
            (0.4 * sum.get(0, 1) - 0.3 * sum.get(1, 1) + 0.1f64).max(0.0),
        ];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-14);
        }
    }

    #[test]
    fn cheb_rejects_zero_order() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        assert!(ChebConv::new(&mut store, "c", 2, 2, 0, LambdaMaxMode::Fixed2, &mut rng).is_err());
    }

    #[test]
    fn cheb_registers_k_thetas() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        let conv = ChebConv::new(&mut store, "conv.0", 4, 3, 3, LambdaMaxMode::Fixed2, &mut rng).unwrap();
        assert_eq!(conv.order(), 3);
        assert_eq!(store.iter().filter(|p| p.name.contains("theta")).count(), 3);
    }
}
