use std::sync::Arc;

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-6;

enum Op {
    Const,
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    Gather(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    ScaleRows(Var, Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    Reshape(Var),
    Sum(Var),
    RowSum(Var),
    Square(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Record of one forward pass. Consumed by [`Tape::backward`].
pub struct Tape {
    nodes: Vec<Node>,
    checked: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::with_capacity(512),
            checked: true,
        }
    }

    /// Disables the per-op finiteness check.
    pub fn unchecked(mut self) -> Self {
        self.checked = false;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, needs_grad: bool) -> Result<Var> {
        if self.checked && !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A differentiable input (typically a parameter).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Const,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(Error::shape("matmul", format!("{ar}x{ac} · {br}x{bc}")));
        }
        let mut out = Matrix::zeros(ar, bc);
        gemm(
            1.0,
            self.value(a),
            false,
            self.value(b),
            false,
            0.0,
            &mut out,
        );
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", out, Op::MatMul(a, b), ng)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let (x, y) = (self.value(a), self.value(b));
        Matrix::from_vec(
            x.rows,
            x.cols,
            x.data.iter().zip(&y.data).map(|(p, q)| f(*p, *q)).collect(),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip(a, b, |p, q| p + q);
        let ng = self.needs(a) || self.needs(b);
        self.push("add", out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip(a, b, |p, q| p - q);
        let ng = self.needs(a) || self.needs(b);
        self.push("sub", out, Op::Sub(a, b), ng)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip(a, b, |p, q| p * q);
        let ng = self.needs(a) || self.needs(b);
        self.push("mul", out, Op::Mul(a, b), ng)
    }

    /// Adds a `1 × n` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if self.shape(row) != (1, c) {
            return Err(Error::shape(
                "add_row",
                format!("{r}x{c} + {:?}", self.shape(row)),
            ));
        }
        let mut out = self.value(x).clone();
        let b = &self.value(row).data;
        for chunk in out.data.chunks_mut(c.max(1)) {
            for (o, bi) in chunk.iter_mut().zip(b) {
                *o += bi;
            }
        }
        let ng = self.needs(x) || self.needs(row);
        self.push("add_row", out, Op::AddRow(x, row), ng)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let v = self.value(x);
        let out = Matrix::from_vec(v.rows, v.cols, v.data.iter().map(|a| a * s).collect());
        let ng = self.needs(x);
        self.push("scale", out, Op::Scale(x, s), ng)
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.shape(p).0,
            None => return Err(Error::shape("concat", "no operands")),
        };
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(Error::shape(
                "concat",
                format!("{rows} rows vs {:?}", self.shape(bad)),
            ));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = self.value(p);
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + v.cols].copy_from_slice(v.row(r));
            }
            off += v.cols;
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push("concat", out, Op::Concat(parts.to_vec()), ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Matrix::from_vec(v.rows, v.cols, v.data.iter().map(|a| a.max(0.0)).collect());
        let ng = self.needs(x);
        self.push("relu", out, Op::Relu(x), ng)
    }

    /// Row-wise normalisation to zero mean and unit variance, then `· gain + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if self.shape(gain) != (1, c) || self.shape(bias) != (1, c) {
            return Err(Error::shape(
                "layer_norm",
                format!("affine params for width {c}"),
            ));
        }
        let v = self.value(x);
        let g = &self.value(gain).data;
        let b = &self.value(bias).data;
        let mut xhat = Matrix::zeros(r, c);
        let mut out = Matrix::zeros(r, c);
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = v.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(i);
            for j in 0..c {
                xh[j] = (row[j] - mean) * is;
            }
            let o = out.row_mut(i);
            for j in 0..c {
                o[j] = xh[j] * g[j] + b[j];
            }
        }
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        )
    }

    /// `out[k] = x[idx[k]]`.
    pub fn gather_rows(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let v = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= v.rows) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {bad} of {}", v.rows),
            ));
        }
        let mut out = Matrix::zeros(idx.len(), v.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(v.row(i));
        }
        let ng = self.needs(x);
        self.push("gather_rows", out, Op::Gather(x, idx), ng)
    }

    /// `out[idx[k]] += x[k]` into `rows` output rows.
    pub fn scatter_add(&mut self, x: Var, idx: Arc<[usize]>, rows: usize) -> Result<Var> {
        let v = self.value(x);
        if idx.len() != v.rows {
            return Err(Error::shape(
                "scatter_add",
                format!("{} indices for {} rows", idx.len(), v.rows),
            ));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::shape(
                "scatter_add",
                format!("target {bad} of {rows}"),
            ));
        }
        let mut out = Matrix::zeros(rows, v.cols);
        for (k, &i) in idx.iter().enumerate() {
            for (o, a) in out.row_mut(i).iter_mut().zip(v.row(k)) {
                *o += a;
            }
        }
        let ng = self.needs(x);
        self.push("scatter_add", out, Op::ScatterAdd(x, idx), ng)
    }

    /// Multiplies row `k` of `x` by the scalar `w[k]` (`w` is `n × 1`).
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if self.shape(w) != (r, 1) {
            return Err(Error::shape(
                "scale_rows",
                format!("{r}x{c} by {:?}", self.shape(w)),
            ));
        }
        let mut out = self.value(x).clone();
        let wd = &self.value(w).data;
        for (k, chunk) in out.data.chunks_mut(c.max(1)).enumerate() {
            for o in chunk {
                *o *= wd[k];
            }
        }
        let ng = self.needs(x) || self.needs(w);
        self.push("scale_rows", out, Op::ScaleRows(x, w), ng)
    }

    /// Softmax of an `n × 1` column within groups `seg[k]`.
    pub fn segment_softmax(&mut self, x: Var, seg: Arc<[usize]>, groups: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if c != 1 || seg.len() != r {
            return Err(Error::shape(
                "segment_softmax",
                format!("{r}x{c} with {} segments", seg.len()),
            ));
        }
        if let Some(&bad) = seg.iter().find(|&&g| g >= groups) {
            return Err(Error::shape(
                "segment_softmax",
                format!("group {bad} of {groups}"),
            ));
        }
        let v = &self.value(x).data;
        let mut max = vec![f64::NEG_INFINITY; groups];
        for (k, &g) in seg.iter().enumerate() {
            max[g] = max[g].max(v[k]);
        }
        let mut e: Vec<f64> = seg
            .iter()
            .enumerate()
            .map(|(k, &g)| (v[k] - max[g]).exp())
            .collect();
        let mut sum = vec![0.0; groups];
        for (k, &g) in seg.iter().enumerate() {
            sum[g] += e[k];
        }
        for (k, &g) in seg.iter().enumerate() {
            e[k] /= sum[g];
        }
        let ng = self.needs(x);
        self.push(
            "segment_softmax",
            Matrix::from_vec(r, 1, e),
            Op::SegmentSoftmax(x, seg),
            ng,
        )
    }

    /// Reinterprets the row-major data with a new shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(x);
        if v.len() != rows * cols {
            return Err(Error::shape(
                "reshape",
                format!("{:?} to {rows}x{cols}", v.shape()),
            ));
        }
        let out = Matrix::from_vec(rows, cols, v.data.clone());
        let ng = self.needs(x);
        self.push("reshape", out, Op::Reshape(x), ng)
    }

    /// Sum of all entries, as a `1 × 1` value.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data.iter().sum();
        let ng = self.needs(x);
        self.push("sum", Matrix::scalar(s), Op::Sum(x), ng)
    }

    /// Per-row sums, as an `n × 1` column.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let data = (0..v.rows).map(|r| v.row(r).iter().sum()).collect();
        let out = Matrix::from_vec(v.rows, 1, data);
        let ng = self.needs(x);
        self.push("row_sum", out, Op::RowSum(x), ng)
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Matrix::from_vec(v.rows, v.cols, v.data.iter().map(|a| a * a).collect());
        let ng = self.needs(x);
        self.push("square", out, Op::Square(x), ng)
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let n = self.value(pred).len();
        if n == 0 {
            return Err(Error::shape("mse", "empty operands"));
        }
        let d = self.sub(pred, target)?;
        let sq = self.square(d)?;
        let s = self.sum(sq)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// `x · w + b` for a weight `in × out` and bias row `1 × out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss has shape {:?}", self.shape(loss)),
            ));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Matrix>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));
        let val = |v: Var| &nodes[v.0].value;
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.needs_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf | Op::Const => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            let mut acc = |v: Var, d: Matrix| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&d),
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf | Op::Const => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[a.0].needs_grad {
                        let bv = val(*b);
                        let mut da = Matrix::zeros(g.rows, bv.rows);
                        gemm(1.0, &g, false, bv, true, 0.0, &mut da);
                        acc(*a, da);
                    }
                    if nodes[b.0].needs_grad {
                        let av = val(*a);
                        let mut db = Matrix::zeros(av.cols, g.cols);
                        gemm(1.0, av, true, &g, false, 0.0, &mut db);
                        acc(*b, db);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    let neg = Matrix::from_vec(g.rows, g.cols, g.data.iter().map(|x| -x).collect());
                    acc(*a, g);
                    acc(*b, neg);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let da = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect(),
                    );
                    let db = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&av.data).map(|(x, y)| x * y).collect(),
                    );
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::AddRow(x, row) => {
                    let mut db = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (d, v) in db.data.iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    acc(*row, db);
                    acc(*x, g);
                }
                Op::Scale(x, s) => {
                    let d =
                        Matrix::from_vec(g.rows, g.cols, g.data.iter().map(|v| v * s).collect());
                    acc(*x, d);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let c = val(p).cols;
                        if nodes[p.0].needs_grad {
                            let mut d = Matrix::zeros(g.rows, c);
                            for r in 0..g.rows {
                                d.row_mut(r).copy_from_slice(&g.row(r)[off..off + c]);
                            }
                            acc(p, d);
                        }
                        off += c;
                    }
                }
                Op::Relu(x) => {
                    let y = &node.value;
                    let d = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data
                            .iter()
                            .zip(&y.data)
                            .map(|(gv, yv)| if *yv > 0.0 { *gv } else { 0.0 })
                            .collect(),
                    );
                    acc(*x, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let (r, c) = (g.rows, g.cols);
                    let gv = &val(*gain).data;
                    let mut dgain = Matrix::zeros(1, c);
                    let mut dbias = Matrix::zeros(1, c);
                    let mut dx = Matrix::zeros(r, c);
                    let mut dxh = vec![0.0; c];
                    for i in 0..r {
                        let gr = g.row(i);
                        let xr = xhat.row(i);
                        for j in 0..c {
                            dgain.data[j] += gr[j] * xr[j];
                            dbias.data[j] += gr[j];
                            dxh[j] = gr[j] * gv[j];
                        }
                        let s1: f64 = dxh.iter().sum();
                        let s2: f64 = dxh.iter().zip(xr).map(|(a, b)| a * b).sum();
                        let k = inv_std[i] / c as f64;
                        let out = dx.row_mut(i);
                        for j in 0..c {
                            out[j] = k * (c as f64 * dxh[j] - s1 - xr[j] * s2);
                        }
                    }
                    acc(*gain, dgain);
                    acc(*bias, dbias);
                    acc(*x, dx);
                }
                Op::Gather(x, idx) => {
                    let xv = val(*x);
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    for (k, &i) in idx.iter().enumerate() {
                        for (o, a) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += a;
                        }
                    }
                    acc(*x, d);
                }
                Op::ScatterAdd(x, idx) => {
                    let mut d = Matrix::zeros(idx.len(), g.cols);
                    for (k, &i) in idx.iter().enumerate() {
                        d.row_mut(k).copy_from_slice(g.row(i));
                    }
                    acc(*x, d);
                }
                Op::ScaleRows(x, w) => {
                    let (xv, wv) = (val(*x), val(*w));
                    if nodes[x.0].needs_grad {
                        let mut dx = g.clone();
                        for (k, chunk) in dx.data.chunks_mut(g.cols.max(1)).enumerate() {
                            for o in chunk {
                                *o *= wv.data[k];
                            }
                        }
                        acc(*x, dx);
                    }
                    if nodes[w.0].needs_grad {
                        let dw = (0..g.rows)
                            .map(|k| g.row(k).iter().zip(xv.row(k)).map(|(a, b)| a * b).sum())
                            .collect();
                        acc(*w, Matrix::from_vec(g.rows, 1, dw));
                    }
                }
                Op::SegmentSoftmax(x, seg) => {
                    let y = &node.value.data;
                    let groups = seg.iter().max().map_or(0, |m| m + 1);
                    let mut s = vec![0.0; groups];
                    for (k, &gr) in seg.iter().enumerate() {
                        s[gr] += y[k] * g.data[k];
                    }
                    let d = seg
                        .iter()
                        .enumerate()
                        .map(|(k, &gr)| y[k] * (g.data[k] - s[gr]))
                        .collect();
                    acc(*x, Matrix::from_vec(g.rows, 1, d));
                }
                Op::Reshape(x) => {
                    let (r, c) = val(*x).shape();
                    acc(*x, Matrix::from_vec(r, c, g.data));
                }
                Op::Sum(x) => {
                    let (r, c) = val(*x).shape();
                    acc(*x, Matrix::from_vec(r, c, vec![g.data[0]; r * c]));
                }
                Op::RowSum(x) => {
                    let (r, c) = val(*x).shape();
                    let mut d = Matrix::zeros(r, c);
                    for k in 0..r {
                        d.row_mut(k).fill(g.data[k]);
                    }
                    acc(*x, d);
                }
                Op::Square(x) => {
                    let xv = val(*x);
                    let d = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data
                            .iter()
                            .zip(&xv.data)
                            .map(|(a, b)| 2.0 * a * b)
                            .collect(),
                    );
                    acc(*x, d);
                }
            }
        }
        let loss_value = nodes[loss.0].value.data[0];
        let leaf: Vec<bool> = nodes.iter().map(|n| matches!(n.op, Op::Leaf)).collect();
        let shapes: Vec<(usize, usize)> = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients {
            grads,
            leaf,
            shapes,
            loss: loss_value,
        })
    }
}

/// Gradients of every leaf after a reverse sweep.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    leaf: Vec<bool>,
    shapes: Vec<(usize, usize)>,
    pub loss: f64,
}

impl Gradients {
    /// Gradient of a leaf; zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Matrix {
        assert!(self.leaf[v.0], "gradient requested for a non-leaf value");
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}
