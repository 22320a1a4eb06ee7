//! Dense rank-2 tensors with reverse-mode differentiation.
//!
//! A [`Tensor`] is a reference-counted node holding a row-major `f64` buffer,
//! a same-sized gradient accumulator and the operation that produced it.
//! Forward ops build a fresh graph on every call; [`Tensor::backward`] walks
//! that graph in reverse topological order and adds each node's contribution
//! into its parents' gradients. Leaves created with [`Tensor::param`] keep
//! their accumulated gradient until it is explicitly zeroed, which is how the
//! optimizer reads it.
//!
//! Everything is rank 2: vectors are `1 x d` (row) or `n x 1` (column) and a
//! scalar is `1 x 1`.

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

use super::kernels;

#[derive(Clone)]
pub struct Tensor(Rc<Node>);

struct Node {
    rows: usize,
    cols: usize,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Vec<f64>>,
    op: Op,
    requires_grad: bool,
}

enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Gram(Tensor),
    Transpose(Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    AddRow(Tensor, Tensor),
    SubRow(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    MulRow(Tensor, Tensor),
    MulCol(Tensor, Tensor),
    Scale(Tensor, f64),
    DivScalar(Tensor, f64),
    AddScalar(Tensor),
    ConcatCols(Tensor, Tensor),
    RepeatRows(Tensor),
    SumRows(Tensor),
    MeanRows(Tensor),
    MaxRows(Tensor, Vec<usize>),
    SumCols(Tensor),
    SumAll(Tensor),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Relu(Tensor),
    Ln(Tensor),
    Square(Tensor),
    Powf(Tensor, f64),
    Sqrt(Tensor),
    Softmax(Tensor),
    BceWithLogits(Tensor, f64),
}

impl Op {
    fn parents(&self) -> Vec<&Tensor> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | AddRow(a, b) | SubRow(a, b) | Mul(a, b)
            | Div(a, b) | MulRow(a, b) | MulCol(a, b) | ConcatCols(a, b) => vec![a, b],
            Gram(a) | Transpose(a) | Scale(a, _) | DivScalar(a, _) | AddScalar(a)
            | RepeatRows(a) | SumRows(a) | MeanRows(a) | MaxRows(a, _) | SumCols(a)
            | SumAll(a) | Sigmoid(a) | Tanh(a) | Relu(a) | Ln(a) | Square(a) | Powf(a, _)
            | Sqrt(a) | Softmax(a) | BceWithLogits(a, _) => vec![a],
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            MatMul(..) => "matmul",
            Gram(..) => "gram",
            Transpose(..) => "transpose",
            Add(..) => "add",
            Sub(..) => "sub",
            AddRow(..) => "add_row",
            SubRow(..) => "sub_row",
            Mul(..) => "mul",
            Div(..) => "div",
            MulRow(..) => "mul_row",
            MulCol(..) => "mul_col",
            Scale(..) => "scale",
            DivScalar(..) => "div_scalar",
            AddScalar(..) => "add_scalar",
            ConcatCols(..) => "concat_cols",
            RepeatRows(..) => "repeat_rows",
            SumRows(..) => "sum_rows",
            MeanRows(..) => "mean_rows",
            MaxRows(..) => "max_rows",
            SumCols(..) => "sum_cols",
            SumAll(..) => "sum_all",
            Sigmoid(..) => "sigmoid",
            Tanh(..) => "tanh",
            Relu(..) => "relu",
            Ln(..) => "ln",
            Square(..) => "square",
            Powf(..) => "powf",
            Sqrt(..) => "sqrt",
            Softmax(..) => "softmax",
            BceWithLogits(..) => "bce_with_logits",
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("op", &self.0.op.name())
            .field("data", &*self.0.data.borrow())
            .finish()
    }
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Invalid(format!(
            "tensor dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if rows * cols != len {
        return Err(Error::Invalid(format!(
            "tensor {rows}x{cols} needs {} values, got {len}",
            rows * cols
        )));
    }
    Ok(())
}

impl Tensor {
    fn from_op(rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Tensor {
        debug_assert_eq!(rows * cols, data.len());
        let requires_grad = op.parents().iter().any(|p| p.0.requires_grad);
        Tensor(Rc::new(Node {
            rows,
            cols,
            grad: RefCell::new(grad_buffer(data.len(), requires_grad)),
            data: RefCell::new(data),
            op,
            requires_grad,
        }))
    }

    fn leaf(rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool) -> Result<Tensor> {
        check_len(rows, cols, data.len())?;
        Ok(Tensor(Rc::new(Node {
            rows,
            cols,
            grad: RefCell::new(grad_buffer(data.len(), requires_grad)),
            data: RefCell::new(data),
            op: Op::Leaf,
            requires_grad,
        })))
    }

    /// Trainable leaf: gradients accumulate into it.
    pub fn param(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Self::leaf(rows, cols, data, true)
    }

    /// Leaf that never receives gradients (inputs, masks, fixed matrices).
    pub fn constant(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Self::leaf(rows, cols, data, false)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Tensor> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Invalid("ragged rows".into()));
        }
        Self::constant(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Self::constant(rows, cols, vec![0.0; rows * cols]).expect("positive dims")
    }

    pub fn identity(n: usize) -> Tensor {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::constant(n, n, data).expect("positive dims")
    }

    pub fn scalar(v: f64) -> Tensor {
        Self::constant(1, 1, vec![v]).expect("1x1")
    }

    pub fn row_vector(values: &[f64]) -> Result<Tensor> {
        Self::constant(1, values.len(), values.to_vec())
    }

    pub fn col_vector(values: &[f64]) -> Result<Tensor> {
        Self::constant(values.len(), 1, values.to_vec())
    }

    /// Copy of the values as a new constant, cutting the graph.
    pub fn detach(&self) -> Tensor {
        Self::constant(self.rows(), self.cols(), self.to_vec()).expect("valid shape")
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.0.rows, self.0.cols)
    }

    pub fn len(&self) -> usize {
        self.0.rows * self.0.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows() && col < self.cols(), "index out of bounds");
        self.0.data.borrow()[row * self.cols() + col]
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "item() on non-scalar tensor");
        self.0.data.borrow()[0]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        let c = self.cols();
        self.0.data.borrow()[row * c..(row + 1) * c].to_vec()
    }

    /// Overwrite values in place. Only meaningful on leaves.
    pub fn set_data(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Shape {
                op: "set_data",
                lhs: self.shape(),
                rhs: (values.len(), 1),
            });
        }
        self.0.data.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn data_mut(&self) -> std::cell::RefMut<'_, Vec<f64>> {
        self.0.data.borrow_mut()
    }

    pub fn grad(&self) -> Vec<f64> {
        if !self.requires_grad() {
            return vec![0.0; self.len()];
        }
        self.0.grad.borrow().clone()
    }

    pub(crate) fn grad_mut(&self) -> std::cell::RefMut<'_, Vec<f64>> {
        self.0.grad.borrow_mut()
    }

    pub fn zero_grad(&self) {
        self.0.grad.borrow_mut().fill(0.0);
    }

    pub fn ptr_eq(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    fn mismatch(&self, op: &'static str, other: &Tensor) -> Error {
        Error::Shape {
            op,
            lhs: self.shape(),
            rhs: other.shape(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.0.data.borrow().iter().map(|&x| f(x)).collect()
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let a = self.0.data.borrow();
        let b = other.0.data.borrow();
        a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect()
    }

    // ----- binary ops -----

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.shape();
        let (k2, n) = other.shape();
        if k != k2 {
            return Err(self.mismatch("matmul", other));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul_acc(&self.data(), &other.data(), &mut out, m, k, n);
        Ok(Self::from_op(m, n, out, Op::MatMul(self.clone(), other.clone())))
    }

    /// `X Xᵀ`, computed on the upper triangle and mirrored so the result is
    /// exactly symmetric.
    pub fn gram(&self) -> Tensor {
        let (n, d) = self.shape();
        let x = self.data();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let xi = &x[i * d..(i + 1) * d];
            for j in i..n {
                let v = kernels::dot(xi, &x[j * d..(j + 1) * d]);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        drop(x);
        Self::from_op(n, n, out, Op::Gram(self.clone()))
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = self.shape();
        let out = kernels::transpose(&self.data(), r, c);
        Self::from_op(c, r, out, Op::Transpose(self.clone()))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() == other.shape() {
            let out = self.zip(other, |a, b| a + b);
            return Ok(Self::from_op(self.rows(), self.cols(), out, Op::Add(self.clone(), other.clone())));
        }
        if other.rows() == 1 && other.cols() == self.cols() {
            let out = self.broadcast_row(other, |a, b| a + b);
            return Ok(Self::from_op(self.rows(), self.cols(), out, Op::AddRow(self.clone(), other.clone())));
        }
        Err(self.mismatch("add", other))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() == other.shape() {
            let out = self.zip(other, |a, b| a - b);
            return Ok(Self::from_op(self.rows(), self.cols(), out, Op::Sub(self.clone(), other.clone())));
        }
        if other.rows() == 1 && other.cols() == self.cols() {
            let out = self.broadcast_row(other, |a, b| a - b);
            return Ok(Self::from_op(self.rows(), self.cols(), out, Op::SubRow(self.clone(), other.clone())));
        }
        Err(self.mismatch("sub", other))
    }

    /// Elementwise product; `other` may also be a `1 x cols` row (broadcast
    /// down the rows) or a `rows x 1` column (broadcast across the columns).
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (r, c) = self.shape();
        if self.shape() == other.shape() {
            let out = self.zip(other, |a, b| a * b);
            return Ok(Self::from_op(r, c, out, Op::Mul(self.clone(), other.clone())));
        }
        if other.shape() == (1, c) {
            let out = self.broadcast_row(other, |a, b| a * b);
            return Ok(Self::from_op(r, c, out, Op::MulRow(self.clone(), other.clone())));
        }
        if other.shape() == (r, 1) {
            let a = self.data();
            let v = other.data();
            let out = (0..r * c).map(|i| a[i] * v[i / c]).collect();
            drop((a, v));
            return Ok(Self::from_op(r, c, out, Op::MulCol(self.clone(), other.clone())));
        }
        Err(self.mismatch("mul", other))
    }

    /// Elementwise quotient of equally shaped tensors.
    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(self.mismatch("div", other));
        }
        let out = self.zip(other, |a, b| a / b);
        Ok(Self::from_op(self.rows(), self.cols(), out, Op::Div(self.clone(), other.clone())))
    }

    fn broadcast_row(&self, row: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let c = self.cols();
        let a = self.data();
        let b = row.data();
        a.iter().enumerate().map(|(i, &x)| f(x, b[i % c])).collect()
    }

    /// Concatenate along the feature (column) axis.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(self.mismatch("concat_cols", other));
        }
        let (r, c1, c2) = (self.rows(), self.cols(), other.cols());
        let a = self.data();
        let b = other.data();
        let mut out = Vec::with_capacity(r * (c1 + c2));
        for i in 0..r {
            out.extend_from_slice(&a[i * c1..(i + 1) * c1]);
            out.extend_from_slice(&b[i * c2..(i + 1) * c2]);
        }
        drop((a, b));
        Ok(Self::from_op(r, c1 + c2, out, Op::ConcatCols(self.clone(), other.clone())))
    }

    // ----- scalar ops -----

    pub fn scale(&self, s: f64) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x * s), Op::Scale(self.clone(), s))
    }

    pub fn div_scalar(&self, s: f64) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x / s), Op::DivScalar(self.clone(), s))
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x + s), Op::AddScalar(self.clone()))
    }

    // ----- shape / reductions -----

    /// Stack `n` copies of a `1 x d` row into an `n x d` matrix.
    pub fn repeat_rows(&self, n: usize) -> Result<Tensor> {
        if self.rows() != 1 || n == 0 {
            return Err(Error::Shape {
                op: "repeat_rows",
                lhs: self.shape(),
                rhs: (n, self.cols()),
            });
        }
        let row = self.data();
        let mut out = Vec::with_capacity(n * row.len());
        for _ in 0..n {
            out.extend_from_slice(&row);
        }
        drop(row);
        Ok(Self::from_op(n, self.cols(), out, Op::RepeatRows(self.clone())))
    }

    /// Column-wise sum over rows (nodes): `n x d -> 1 x d`.
    pub fn sum_rows(&self) -> Tensor {
        let out = kernels::column_sums(&self.data(), self.rows(), self.cols());
        Self::from_op(1, self.cols(), out, Op::SumRows(self.clone()))
    }

    /// Column-wise mean over rows (nodes): `n x d -> 1 x d`.
    pub fn mean_rows(&self) -> Tensor {
        let n = self.rows() as f64;
        let out = kernels::column_sums(&self.data(), self.rows(), self.cols())
            .into_iter()
            .map(|s| s / n)
            .collect();
        Self::from_op(1, self.cols(), out, Op::MeanRows(self.clone()))
    }

    /// Column-wise max over rows (nodes): `n x d -> 1 x d`. Ties route the
    /// gradient to the first maximal row.
    pub fn max_rows(&self) -> Tensor {
        let (r, c) = self.shape();
        let a = self.data();
        let mut out = a[..c].to_vec();
        let mut arg = vec![0usize; c];
        for i in 1..r {
            for j in 0..c {
                let v = a[i * c + j];
                if v > out[j] {
                    out[j] = v;
                    arg[j] = i;
                }
            }
        }
        drop(a);
        Self::from_op(1, c, out, Op::MaxRows(self.clone(), arg))
    }

    /// Row-wise sum over columns: `n x d -> n x 1`.
    pub fn sum_cols(&self) -> Tensor {
        let c = self.cols();
        let out = self.data().chunks(c).map(|row| row.iter().sum()).collect();
        Self::from_op(self.rows(), 1, out, Op::SumCols(self.clone()))
    }

    pub fn sum_all(&self) -> Tensor {
        let s = self.data().iter().sum();
        Self::from_op(1, 1, vec![s], Op::SumAll(self.clone()))
    }

    // ----- elementwise nonlinearities -----

    pub fn sigmoid(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(sigmoid), Op::Sigmoid(self.clone()))
    }

    pub fn tanh(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(f64::tanh), Op::Tanh(self.clone()))
    }

    pub fn relu(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x.max(0.0)), Op::Relu(self.clone()))
    }

    pub fn ln(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(f64::ln), Op::Ln(self.clone()))
    }

    pub fn square(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x * x), Op::Square(self.clone()))
    }

    pub fn powf(&self, p: f64) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(|x| x.powf(p)), Op::Powf(self.clone(), p))
    }

    /// Correctly rounded square root; `sqrt(x * x) == |x|` exactly.
    pub fn sqrt(&self) -> Tensor {
        Self::from_op(self.rows(), self.cols(), self.map(f64::sqrt), Op::Sqrt(self.clone()))
    }

    /// Softmax over all entries of a row or column vector.
    pub fn softmax(&self) -> Result<Tensor> {
        if self.rows() != 1 && self.cols() != 1 {
            return Err(Error::Shape {
                op: "softmax",
                lhs: self.shape(),
                rhs: (1, self.len()),
            });
        }
        let out = kernels::softmax(&self.data());
        Ok(Self::from_op(self.rows(), self.cols(), out, Op::Softmax(self.clone())))
    }

    /// Binary cross-entropy on a `1 x 1` logit, in the overflow-free form
    /// `max(z, 0) - z y + ln(1 + exp(-|z|))`.
    pub fn bce_with_logits(&self, label: f64) -> Result<Tensor> {
        if self.shape() != (1, 1) {
            return Err(Error::NonScalarLoss(self.shape()));
        }
        let z = self.item();
        let loss = z.max(0.0) - z * label + (-z.abs()).exp().ln_1p();
        Ok(Self::from_op(1, 1, vec![loss], Op::BceWithLogits(self.clone(), label)))
    }

    // ----- reverse pass -----

    /// Accumulate d(self)/d(node) into every reachable node that requires a
    /// gradient. `self` must be `1 x 1`.
    pub fn backward(&self) -> Result<()> {
        if self.shape() != (1, 1) {
            return Err(Error::NonScalarLoss(self.shape()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        self.0.grad.borrow_mut()[0] += 1.0;
        for node in order.iter().rev() {
            node.propagate();
        }
        Ok(())
    }

    /// Post-order over nodes that require gradients.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen: HashSet<*const Node> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(Rc::as_ptr(&t.0)) {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.0.op.parents() {
                if p.requires_grad() && !seen.contains(&Rc::as_ptr(&p.0)) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }

    fn propagate(&self) {
        use Op::*;
        let g = self.0.grad.borrow();
        let (rows, cols) = self.shape();
        match &self.0.op {
            Leaf => {}
            MatMul(a, b) => {
                let (m, k) = a.shape();
                let n = b.cols();
                if a.requires_grad() {
                    kernels::matmul_a_bt_acc(&g, &b.data(), &mut a.0.grad.borrow_mut(), m, n, k);
                }
                if b.requires_grad() {
                    kernels::matmul_at_b_acc(&a.data(), &g, &mut b.0.grad.borrow_mut(), m, k, n);
                }
            }
            Gram(x) => {
                let (n, d) = x.shape();
                let mut sym = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        sym[i * n + j] = g[i * n + j] + g[j * n + i];
                    }
                }
                if x.requires_grad() {
                    kernels::matmul_acc(&sym, &x.data(), &mut x.0.grad.borrow_mut(), n, n, d);
                }
            }
            Transpose(a) => {
                a.accumulate(&kernels::transpose(&g, rows, cols));
            }
            Add(a, b) => {
                a.accumulate(&g);
                b.accumulate(&g);
            }
            Sub(a, b) => {
                a.accumulate(&g);
                if b.requires_grad() {
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    b.accumulate(&neg);
                }
            }
            AddRow(a, b) | SubRow(a, b) => {
                a.accumulate(&g);
                if b.requires_grad() {
                    let mut gb = kernels::column_sums(&g, rows, cols);
                    if matches!(self.0.op, SubRow(..)) {
                        gb.iter_mut().for_each(|x| *x = -*x);
                    }
                    b.accumulate(&gb);
                }
            }
            Mul(a, b) => {
                if a.requires_grad() {
                    let ga: Vec<f64> = g.iter().zip(b.data().iter()).map(|(g, y)| g * y).collect();
                    a.accumulate(&ga);
                }
                if b.requires_grad() {
                    let gb: Vec<f64> = g.iter().zip(a.data().iter()).map(|(g, x)| g * x).collect();
                    b.accumulate(&gb);
                }
            }
            Div(a, b) => {
                let bd = b.data();
                if a.requires_grad() {
                    let ga: Vec<f64> = g.iter().zip(bd.iter()).map(|(g, y)| g / y).collect();
                    a.accumulate(&ga);
                }
                if b.requires_grad() {
                    let ad = a.data();
                    let gb: Vec<f64> = g
                        .iter()
                        .zip(ad.iter().zip(bd.iter()))
                        .map(|(g, (x, y))| -g * x / (y * y))
                        .collect();
                    drop(ad);
                    b.accumulate(&gb);
                }
            }
            MulRow(a, v) => {
                if a.requires_grad() {
                    let vd = v.data();
                    let ga: Vec<f64> = g.iter().enumerate().map(|(i, g)| g * vd[i % cols]).collect();
                    drop(vd);
                    a.accumulate(&ga);
                }
                if v.requires_grad() {
                    let ad = a.data();
                    let mut gv = vec![0.0; cols];
                    for (i, gi) in g.iter().enumerate() {
                        gv[i % cols] += gi * ad[i];
                    }
                    drop(ad);
                    v.accumulate(&gv);
                }
            }
            MulCol(a, v) => {
                if a.requires_grad() {
                    let vd = v.data();
                    let ga: Vec<f64> = g.iter().enumerate().map(|(i, g)| g * vd[i / cols]).collect();
                    drop(vd);
                    a.accumulate(&ga);
                }
                if v.requires_grad() {
                    let ad = a.data();
                    let mut gv = vec![0.0; rows];
                    for (i, gi) in g.iter().enumerate() {
                        gv[i / cols] += gi * ad[i];
                    }
                    drop(ad);
                    v.accumulate(&gv);
                }
            }
            Scale(a, s) => {
                let ga: Vec<f64> = g.iter().map(|x| x * s).collect();
                a.accumulate(&ga);
            }
            DivScalar(a, s) => {
                let ga: Vec<f64> = g.iter().map(|x| x / s).collect();
                a.accumulate(&ga);
            }
            AddScalar(a) => a.accumulate(&g),
            ConcatCols(a, b) => {
                let (c1, c2) = (a.cols(), b.cols());
                let mut ga = Vec::with_capacity(rows * c1);
                let mut gb = Vec::with_capacity(rows * c2);
                for row in g.chunks(cols) {
                    ga.extend_from_slice(&row[..c1]);
                    gb.extend_from_slice(&row[c1..]);
                }
                a.accumulate(&ga);
                b.accumulate(&gb);
            }
            RepeatRows(a) => {
                a.accumulate(&kernels::column_sums(&g, rows, cols));
            }
            SumRows(a) => {
                let n = a.rows();
                let ga: Vec<f64> = (0..n * cols).map(|i| g[i % cols]).collect();
                a.accumulate(&ga);
            }
            MeanRows(a) => {
                let n = a.rows();
                let ga: Vec<f64> = (0..n * cols).map(|i| g[i % cols] / n as f64).collect();
                a.accumulate(&ga);
            }
            MaxRows(a, arg) => {
                let mut ga = vec![0.0; a.len()];
                for (j, &i) in arg.iter().enumerate() {
                    ga[i * cols + j] = g[j];
                }
                a.accumulate(&ga);
            }
            SumCols(a) => {
                let c = a.cols();
                let ga: Vec<f64> = (0..rows * c).map(|i| g[i / c]).collect();
                a.accumulate(&ga);
            }
            SumAll(a) => {
                let ga = vec![g[0]; a.len()];
                a.accumulate(&ga);
            }
            Sigmoid(a) => {
                let y = self.data();
                let ga: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| g * y * (1.0 - y)).collect();
                drop(y);
                a.accumulate(&ga);
            }
            Tanh(a) => {
                let y = self.data();
                let ga: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| g * (1.0 - y * y)).collect();
                drop(y);
                a.accumulate(&ga);
            }
            Relu(a) => {
                let x = a.data();
                let ga: Vec<f64> = g
                    .iter()
                    .zip(x.iter())
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                drop(x);
                a.accumulate(&ga);
            }
            Ln(a) => {
                let x = a.data();
                let ga: Vec<f64> = g.iter().zip(x.iter()).map(|(g, x)| g / x).collect();
                drop(x);
                a.accumulate(&ga);
            }
            Square(a) => {
                let x = a.data();
                let ga: Vec<f64> = g.iter().zip(x.iter()).map(|(g, x)| 2.0 * g * x).collect();
                drop(x);
                a.accumulate(&ga);
            }
            Powf(a, p) => {
                let x = a.data();
                let ga: Vec<f64> = g
                    .iter()
                    .zip(x.iter())
                    .map(|(g, x)| g * p * x.powf(p - 1.0))
                    .collect();
                drop(x);
                a.accumulate(&ga);
            }
            Sqrt(a) => {
                let y = self.data();
                let ga: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| 0.5 * g / y).collect();
                drop(y);
                a.accumulate(&ga);
            }
            Softmax(a) => {
                let y = self.data();
                let dot: f64 = g.iter().zip(y.iter()).map(|(g, y)| g * y).sum();
                let ga: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| y * (g - dot)).collect();
                drop(y);
                a.accumulate(&ga);
            }
            BceWithLogits(z, label) => {
                let ga = [g[0] * (sigmoid(z.item()) - label)];
                z.accumulate(&ga);
            }
        }
    }

    fn accumulate(&self, contribution: &[f64]) {
        if !self.requires_grad() {
            return;
        }
        let mut grad = self.0.grad.borrow_mut();
        for (g, c) in grad.iter_mut().zip(contribution) {
            *g += c;
        }
    }
}

/// Nodes outside the differentiation graph carry no gradient storage.
fn grad_buffer(len: usize, requires_grad: bool) -> Vec<f64> {
    if requires_grad {
        vec![0.0; len]
    } else {
        Vec::new()
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
