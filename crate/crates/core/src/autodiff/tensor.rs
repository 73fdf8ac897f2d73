use std::cell::{Ref, RefCell};
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use super::TensorError;
use crate::linalg::Matrix;

/// A dense matrix node in a reverse-mode computation graph.
///
/// Leaves are either constants or parameters (`requires_grad`). Every
/// operation on tensors records its inputs so that [`Tensor::backward`] can
/// propagate exact gradients back to the parameters. Cloning a `Tensor` is
/// cheap and shares the node.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

struct Node {
    value: RefCell<Matrix>,
    grad: RefCell<Option<Matrix>>,
    requires_grad: bool,
    op: Option<Op>,
}

enum Op {
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Hadamard(Tensor, Tensor),
    Transpose(Tensor),
    ConcatCols(Vec<Tensor>),
    Scale(Tensor, f64),
    RowSoftmax(Tensor),
    MaskedRowSoftmax(Tensor),
    Relu(Tensor),
    LeakyRelu(Tensor, f64),
    Elu(Tensor, f64),
    Sigmoid(Tensor),
    Exp(Tensor),
    Log(Tensor),
    SelectRows(Tensor, Vec<usize>),
    Sum(Tensor),
    AddRowBroadcast(Tensor, Tensor),
    OuterSum(Tensor, Tensor),
    WeightedSum(Tensor, Arc<Vec<Arc<Matrix>>>),
    SymNormalize(Tensor, Vec<f64>),
    Mask(Tensor, Matrix),
    MaskedAttention(Tensor, Tensor, f64),
    /// logits, row probabilities, targets restricted to the selected rows
    CrossEntropy(Tensor, Matrix, Matrix, Vec<usize>),
}

impl Op {
    fn parents(&self) -> Vec<&Tensor> {
        use Op::*;
        match self {
            MatMul(a, b) | Add(a, b) | Hadamard(a, b) | AddRowBroadcast(a, b) | OuterSum(a, b) | MaskedAttention(a, b, _) => {
                vec![a, b]
            }
            ConcatCols(ts) => ts.iter().collect(),
            Transpose(a) | Scale(a, _) | RowSoftmax(a) | MaskedRowSoftmax(a) | Relu(a) | LeakyRelu(a, _)
            | Elu(a, _) | Sigmoid(a) | Exp(a) | Log(a) | SelectRows(a, _) | Sum(a) | WeightedSum(a, _)
            | SymNormalize(a, _) | Mask(a, _) | CrossEntropy(a, _, _, _) => vec![a],
        }
    }
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> TensorError {
    TensorError::Shape { op, left: a, right: b }
}

impl Tensor {
    fn from_op(value: Matrix, op: Op) -> Tensor {
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        Tensor(Rc::new(Node {
            value: RefCell::new(value),
            grad: RefCell::new(None),
            requires_grad,
            op: Some(op),
        }))
    }

    fn leaf(value: Matrix, requires_grad: bool) -> Tensor {
        Tensor(Rc::new(Node {
            value: RefCell::new(value),
            grad: RefCell::new(None),
            requires_grad,
            op: None,
        }))
    }

    /// A trainable leaf.
    pub fn param(value: Matrix) -> Tensor {
        Self::leaf(value, true)
    }

    pub fn constant(value: Matrix) -> Tensor {
        Self::leaf(value, false)
    }

    pub fn scalar(v: f64) -> Tensor {
        Self::constant(Matrix::filled(1, 1, v))
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    pub fn value(&self) -> Ref<'_, Matrix> {
        self.0.value.borrow()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().shape()
    }

    /// The single entry of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        let v = self.value();
        assert_eq!(v.shape(), (1, 1), "item() on a non-scalar tensor");
        v[(0, 0)]
    }

    /// Overwrites a leaf's value (optimizer updates, checkpoint restore).
    pub fn set_value(&self, value: Matrix) {
        assert!(self.is_leaf(), "only leaves can be assigned");
        assert_eq!(self.shape(), value.shape(), "set_value shape mismatch");
        *self.0.value.borrow_mut() = value;
    }

    pub fn update_value(&self, f: impl FnOnce(&mut Matrix)) {
        assert!(self.is_leaf(), "only leaves can be assigned");
        f(&mut self.0.value.borrow_mut());
    }

    pub fn grad(&self) -> Option<Matrix> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub fn same_node(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    // ---- forward operations ------------------------------------------------

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.cols() != b.rows() {
            return Err(shape_err("matmul", a.shape(), b.shape()));
        }
        let v = a.matmul(&b);
        drop((a, b));
        Ok(Self::from_op(v, Op::MatMul(self.clone(), other.clone())))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err("add", a.shape(), b.shape()));
        }
        let v = a.zip_map(&b, |x, y| x + y);
        drop((a, b));
        Ok(Self::from_op(v, Op::Add(self.clone(), other.clone())))
    }

    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err("hadamard", a.shape(), b.shape()));
        }
        let v = a.hadamard(&b);
        drop((a, b));
        Ok(Self::from_op(v, Op::Hadamard(self.clone(), other.clone())))
    }

    pub fn transpose(&self) -> Tensor {
        let v = self.value().transpose();
        Self::from_op(v, Op::Transpose(self.clone()))
    }

    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor, TensorError> {
        let first = parts.first().ok_or(TensorError::Empty("concat_cols"))?;
        let rows = first.shape().0;
        let mut cols = 0;
        for p in parts {
            if p.shape().0 != rows {
                return Err(shape_err("concat_cols", first.shape(), p.shape()));
            }
            cols += p.shape().1;
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let v = p.value();
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
            }
            off += v.cols();
        }
        Ok(Self::from_op(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        let v = self.value().scale(alpha);
        Self::from_op(v, Op::Scale(self.clone(), alpha))
    }

    pub fn row_softmax(&self) -> Tensor {
        let x = self.value();
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let row = x.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let o = out.row_mut(r);
            let mut total = 0.0;
            for (o, &v) in o.iter_mut().zip(row) {
                *o = (v - max).exp();
                total += *o;
            }
            o.iter_mut().for_each(|v| *v /= total);
        }
        drop(x);
        Self::from_op(out, Op::RowSoftmax(self.clone()))
    }

    /// Softmax of each row restricted to positions where `mask` is nonzero;
    /// masked positions are exactly 0.
    pub fn masked_row_softmax(&self, mask: &Matrix) -> Result<Tensor, TensorError> {
        let x = self.value();
        if x.shape() != mask.shape() {
            return Err(shape_err("masked_row_softmax", x.shape(), mask.shape()));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let (row, m) = (x.row(r), mask.row(r));
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &k)| k != 0.0)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(TensorError::EmptyMaskRow(r));
            }
            let o = out.row_mut(r);
            let mut total = 0.0;
            for ((o, &v), &k) in o.iter_mut().zip(row).zip(m) {
                if k != 0.0 {
                    *o = (v - max).exp();
                    total += *o;
                }
            }
            o.iter_mut().for_each(|v| *v /= total);
        }
        drop(x);
        Ok(Self::from_op(out, Op::MaskedRowSoftmax(self.clone())))
    }

    pub fn relu(&self) -> Tensor {
        let v = self.value().map(|x| x.max(0.0));
        Self::from_op(v, Op::Relu(self.clone()))
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let v = self.value().map(|x| if x > 0.0 { x } else { slope * x });
        Self::from_op(v, Op::LeakyRelu(self.clone(), slope))
    }

    /// ELU with scale `alpha`: `x` for `x > 0`, else `alpha·(eˣ − 1)`.
    pub fn elu(&self, alpha: f64) -> Tensor {
        let v = self.value().map(|x| if x > 0.0 { x } else { alpha * x.exp_m1() });
        Self::from_op(v, Op::Elu(self.clone(), alpha))
    }

    pub fn sigmoid(&self) -> Tensor {
        let v = self.value().map(|x| 1.0 / (1.0 + (-x).exp()));
        Self::from_op(v, Op::Sigmoid(self.clone()))
    }

    pub fn exp(&self) -> Tensor {
        let v = self.value().map(f64::exp);
        Self::from_op(v, Op::Exp(self.clone()))
    }

    pub fn log(&self) -> Result<Tensor, TensorError> {
        if self.value().as_slice().iter().any(|&x| !(x > 0.0)) {
            return Err(TensorError::Domain("log of a non-positive value"));
        }
        let v = self.value().map(f64::ln);
        Ok(Self::from_op(v, Op::Log(self.clone())))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Tensor, TensorError> {
        let rows = self.shape().0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(TensorError::Index { index: bad, len: rows });
        }
        let v = self.value().select_rows(idx);
        Ok(Self::from_op(v, Op::SelectRows(self.clone(), idx.to_vec())))
    }

    /// Sum of all entries as a 1x1 tensor.
    pub fn sum(&self) -> Tensor {
        let v = Matrix::filled(1, 1, self.value().sum());
        Self::from_op(v, Op::Sum(self.clone()))
    }

    /// Adds the `1 x c` row `bias` to every row.
    pub fn add_row_broadcast(&self, bias: &Tensor) -> Result<Tensor, TensorError> {
        let (x, b) = (self.value(), bias.value());
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row_broadcast", x.shape(), b.shape()));
        }
        let mut v = x.clone();
        for r in 0..v.rows() {
            for (o, &bb) in v.row_mut(r).iter_mut().zip(b.row(0)) {
                *o += bb;
            }
        }
        drop((x, b));
        Ok(Self::from_op(v, Op::AddRowBroadcast(self.clone(), bias.clone())))
    }

    /// `out[i][j] = col[i] + row[j]` for an `n x 1` column and `1 x m` row.
    pub fn outer_sum(col: &Tensor, row: &Tensor) -> Result<Tensor, TensorError> {
        let (c, r) = (col.value(), row.value());
        if c.cols() != 1 || r.rows() != 1 {
            return Err(shape_err("outer_sum", c.shape(), r.shape()));
        }
        let v = Matrix::from_fn(c.rows(), r.cols(), |i, j| c[(i, 0)] + r[(0, j)]);
        drop((c, r));
        Ok(Self::from_op(v, Op::OuterSum(col.clone(), row.clone())))
    }

    /// `Σ_m w[m] · mats[m]` for a `1 x M` weight row and constant matrices.
    pub fn weighted_sum(weights: &Tensor, mats: Arc<Vec<Arc<Matrix>>>) -> Result<Tensor, TensorError> {
        let w = weights.value();
        if w.rows() != 1 || w.cols() != mats.len() || mats.is_empty() {
            return Err(shape_err("weighted_sum", w.shape(), (mats.len(), 0)));
        }
        let shape = mats[0].shape();
        if let Some(m) = mats.iter().find(|m| m.shape() != shape) {
            return Err(shape_err("weighted_sum", shape, m.shape()));
        }
        let mut out = Matrix::zeros(shape.0, shape.1);
        for (k, m) in mats.iter().enumerate() {
            out.axpy(w[(0, k)], m);
        }
        drop(w);
        Ok(Self::from_op(out, Op::WeightedSum(weights.clone(), mats)))
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the row sums of `A`, differentiated
    /// through `D` as well.
    pub fn sym_normalize(&self) -> Result<Tensor, TensorError> {
        let a = self.value();
        if a.rows() != a.cols() {
            return Err(shape_err("sym_normalize", a.shape(), a.shape()));
        }
        let sums = a.row_sums();
        if let Some(i) = sums.iter().position(|&s| !(s > 0.0)) {
            return Err(TensorError::ZeroDegree(i));
        }
        let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s.sqrt()).collect();
        let v = Matrix::from_fn(a.rows(), a.cols(), |i, j| inv[i] * a[(i, j)] * inv[j]);
        drop(a);
        Ok(Self::from_op(v, Op::SymNormalize(self.clone(), inv)))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mask(&self, mask: Matrix) -> Result<Tensor, TensorError> {
        let x = self.value();
        if x.shape() != mask.shape() {
            return Err(shape_err("mask", x.shape(), mask.shape()));
        }
        let v = x.hadamard(&mask);
        drop(x);
        Ok(Self::from_op(v, Op::Mask(self.clone(), mask)))
    }

    /// Fused `masked_row_softmax(leaky_relu(outer_sum(src, dstᵀ), slope), mask)`
    /// for `n x 1` columns `src` and `dst`.
    pub fn masked_attention(src: &Tensor, dst: &Tensor, mask: &Matrix, slope: f64) -> Result<Tensor, TensorError> {
        let (s, t) = (src.value(), dst.value());
        let n = s.rows();
        if s.cols() != 1 || t.shape() != (n, 1) || mask.shape() != (n, n) {
            return Err(shape_err("masked_attention", s.shape(), t.shape()));
        }
        let (s, t) = (s.as_slice(), t.as_slice());
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let m = mask.row(i);
            let o = out.row_mut(i);
            let mut max = f64::NEG_INFINITY;
            for j in 0..n {
                if m[j] != 0.0 {
                    let e = s[i] + t[j];
                    let e = if e > 0.0 { e } else { slope * e };
                    o[j] = e;
                    max = max.max(e);
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(TensorError::EmptyMaskRow(i));
            }
            let mut total = 0.0;
            for j in 0..n {
                if m[j] != 0.0 {
                    o[j] = (o[j] - max).exp();
                    total += o[j];
                }
            }
            let inv = 1.0 / total;
            o.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(Self::from_op(out, Op::MaskedAttention(src.clone(), dst.clone(), slope)))
    }

    /// Summed softmax cross-entropy over `rows`:
    /// `−Σ_{r ∈ rows} Σ_c y[r][c] · log softmax(logits[r])[c]`.
    pub fn cross_entropy(&self, targets: &Matrix, rows: &[usize]) -> Result<Tensor, TensorError> {
        let z = self.value();
        if z.shape() != targets.shape() {
            return Err(shape_err("cross_entropy", z.shape(), targets.shape()));
        }
        if rows.is_empty() {
            return Err(TensorError::Empty("cross_entropy row mask"));
        }
        let mut probs = Matrix::zeros(z.rows(), z.cols());
        let mut loss = 0.0;
        for &r in rows {
            if r >= z.rows() {
                return Err(TensorError::Index { index: r, len: z.rows() });
            }
            let row = z.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (c, &v) in row.iter().enumerate() {
                probs[(r, c)] = (v - lse).exp();
                loss -= targets[(r, c)] * (v - lse);
            }
        }
        drop(z);
        let mut selected = Matrix::zeros(targets.rows(), targets.cols());
        for &r in rows {
            selected.row_mut(r).copy_from_slice(targets.row(r));
        }
        Ok(Self::from_op(
            Matrix::filled(1, 1, loss),
            Op::CrossEntropy(self.clone(), probs, selected, rows.to_vec()),
        ))
    }

    // ---- reverse pass -----------------------------------------------------

    /// Accumulates `∂self/∂leaf` into the gradient slot of every parameter
    /// reachable from `self`. Repeated calls add up.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.shape() != (1, 1) {
            return Err(TensorError::NotScalar(self.shape()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order()?;
        let mut grads: HashMap<*const Node, Matrix> = HashMap::new();
        grads.insert(Rc::as_ptr(&self.0), Matrix::filled(1, 1, 1.0));
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&Rc::as_ptr(&t.0)) else { continue };
            match &t.0.op {
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.add_assign(&g),
                        None => *slot = Some(g),
                    }
                }
                Some(op) => {
                    for (parent, pg) in t.local_grads(op, &g) {
                        if !parent.requires_grad() {
                            continue;
                        }
                        match grads.entry(Rc::as_ptr(&parent.0)) {
                            std::collections::hash_map::Entry::Occupied(mut e) => e.get_mut().add_assign(&pg),
                            std::collections::hash_map::Entry::Vacant(e) => {
                                e.insert(pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Post-order over nodes that require gradients.
    fn topo_order(&self) -> Result<Vec<Tensor>, TensorError> {
        #[derive(PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: HashMap<*const Node, Mark> = HashMap::new();
        let mut order = Vec::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            let key = Rc::as_ptr(&t.0);
            if expanded {
                marks.insert(key, Mark::Done);
                order.push(t);
                continue;
            }
            match marks.get(&key) {
                Some(Mark::Done) => continue,
                Some(Mark::Open) => return Err(TensorError::Cycle),
                None => {}
            }
            marks.insert(key, Mark::Open);
            stack.push((t.clone(), true));
            if let Some(op) = &t.0.op {
                for p in op.parents() {
                    if !p.requires_grad() {
                        continue;
                    }
                    match marks.get(&Rc::as_ptr(&p.0)) {
                        Some(Mark::Done) => {}
                        Some(Mark::Open) => return Err(TensorError::Cycle),
                        None => stack.push((p.clone(), false)),
                    }
                }
            }
        }
        Ok(order)
    }

    /// Gradients with respect to each parent given the upstream gradient `g`.
    fn local_grads(&self, op: &Op, g: &Matrix) -> Vec<(Tensor, Matrix)> {
        use Op::*;
        let out = self.value();
        match op {
            MatMul(a, b) => {
                let mut v = Vec::with_capacity(2);
                if a.requires_grad() {
                    v.push((a.clone(), g.matmul_t(&b.value())));
                }
                if b.requires_grad() {
                    v.push((b.clone(), a.value().t_matmul(g)));
                }
                v
            }
            Add(a, b) => vec![(a.clone(), g.clone()), (b.clone(), g.clone())],
            Hadamard(a, b) => vec![
                (a.clone(), g.hadamard(&b.value())),
                (b.clone(), g.hadamard(&a.value())),
            ],
            Transpose(a) => vec![(a.clone(), g.transpose())],
            ConcatCols(parts) => {
                let mut off = 0;
                parts
                    .iter()
                    .map(|p| {
                        let w = p.shape().1;
                        let pg = Matrix::from_fn(g.rows(), w, |r, c| g[(r, off + c)]);
                        off += w;
                        (p.clone(), pg)
                    })
                    .collect()
            }
            Scale(a, alpha) => vec![(a.clone(), g.scale(*alpha))],
            RowSoftmax(a) | MaskedRowSoftmax(a) => {
                let mut d = Matrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let (y, gr) = (out.row(r), g.row(r));
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((o, &y), &gv) in d.row_mut(r).iter_mut().zip(y).zip(gr) {
                        *o = y * (gv - dot);
                    }
                }
                vec![(a.clone(), d)]
            }
            Relu(a) => vec![(a.clone(), g.zip_map(&a.value(), |g, x| if x > 0.0 { g } else { 0.0 }))],
            LeakyRelu(a, s) => vec![(
                a.clone(),
                g.zip_map(&a.value(), |g, x| if x > 0.0 { g } else { s * g }),
            )],
            Elu(a, alpha) => vec![(
                a.clone(),
                g.zip_map(&a.value(), |g, x| if x > 0.0 { g } else { g * alpha * x.exp() }),
            )],
            Sigmoid(a) => vec![(a.clone(), g.zip_map(&out, |g, y| g * y * (1.0 - y)))],
            Exp(a) => vec![(a.clone(), g.hadamard(&out))],
            Log(a) => vec![(a.clone(), g.zip_map(&a.value(), |g, x| g / x))],
            SelectRows(a, idx) => {
                let (rows, cols) = a.shape();
                let mut d = Matrix::zeros(rows, cols);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, &v) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                vec![(a.clone(), d)]
            }
            Sum(a) => {
                let (r, c) = a.shape();
                vec![(a.clone(), Matrix::filled(r, c, g[(0, 0)]))]
            }
            AddRowBroadcast(x, b) => {
                let mut db = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, &v) in db.row_mut(0).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                vec![(x.clone(), g.clone()), (b.clone(), db)]
            }
            OuterSum(col, row) => {
                let dc = Matrix::from_vec(g.rows(), 1, g.row_sums());
                let mut dr = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, &v) in dr.row_mut(0).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                vec![(col.clone(), dc), (row.clone(), dr)]
            }
            WeightedSum(w, mats) => {
                let dw = Matrix::from_fn(1, mats.len(), |_, k| {
                    g.as_slice().iter().zip(mats[k].as_slice()).map(|(a, b)| a * b).sum()
                });
                vec![(w.clone(), dw)]
            }
            SymNormalize(a, inv) => {
                let n = g.rows();
                // ∂L/∂r_k = −½ s_k² (Σ_j G_kj out_kj + Σ_i G_ik out_ik)
                let mut dr = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let t = g[(i, j)] * out[(i, j)];
                        dr[i] += t;
                        dr[j] += t;
                    }
                }
                for (k, d) in dr.iter_mut().enumerate() {
                    *d *= -0.5 * inv[k] * inv[k];
                }
                let d = Matrix::from_fn(n, n, |k, l| g[(k, l)] * inv[k] * inv[l] + dr[k]);
                vec![(a.clone(), d)]
            }
            Mask(a, m) => vec![(a.clone(), g.hadamard(m))],
            MaskedAttention(src, dst, slope) => {
                let n = g.rows();
                let (s, t) = (src.value(), dst.value());
                let (s, t) = (s.as_slice(), t.as_slice());
                let mut ds = Matrix::zeros(n, 1);
                let mut dt = Matrix::zeros(n, 1);
                for i in 0..n {
                    let (y, gr) = (out.row(i), g.row(i));
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    let mut row_total = 0.0;
                    for j in 0..n {
                        if y[j] == 0.0 {
                            continue;
                        }
                        let d = y[j] * (gr[j] - dot);
                        let d = if s[i] + t[j] > 0.0 { d } else { slope * d };
                        row_total += d;
                        dt.as_mut_slice()[j] += d;
                    }
                    ds.as_mut_slice()[i] = row_total;
                }
                vec![(src.clone(), ds), (dst.clone(), dt)]
            }
            CrossEntropy(z, probs, targets, rows) => {
                let scale = g[(0, 0)];
                let mut d = Matrix::zeros(probs.rows(), probs.cols());
                for &r in rows {
                    let (p, y) = (probs.row(r), targets.row(r));
                    let mass: f64 = y.iter().sum();
                    for (k, o) in d.row_mut(r).iter_mut().enumerate() {
                        *o += scale * (p[k] * mass - y[k]);
                    }
                }
                vec![(z.clone(), d)]
            }
        }
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("leaf", &self.is_leaf())
            .finish()
    }
}
