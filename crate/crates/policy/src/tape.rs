//! Reverse-mode differentiation over row-major `f64` matrices.
//!
//! Every operation appends a node holding its value and enough context to
//! push gradients back to its inputs. Parameters enter the tape by offset
//! into a flat vector, and [`Tape::backward`] returns the gradient of a
//! scalar node with respect to that whole vector.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Row-major view with explicit strides, used to address transposes and
/// head slices without copying.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rs: usize,
    cs: usize,
}

impl<'a> View<'a> {
    fn of(m: &'a Mat) -> View<'a> {
        View { data: &m.data, rs: m.cols, cs: 1 }
    }

    fn t(self) -> View<'a> {
        View { data: self.data, rs: self.cs, cs: self.rs }
    }

    fn cols_from(m: &'a Mat, start: usize) -> View<'a> {
        View { data: &m.data[start..], rs: m.cols, cs: 1 }
    }
}

/// `c = a * b + beta * c` for an `m x k` times `k x n` product, `c` addressed
/// with row stride `rsc` and unit column stride.
fn gemm(m: usize, k: usize, n: usize, a: View, b: View, beta: f64, c: &mut [f64], rsc: usize) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for x in &mut c[i * rsc..i * rsc + n] {
                *x *= beta;
            }
        }
        return;
    }
    let last = |v: &View, r: usize, cc: usize| (r - 1) * v.rs + (cc - 1) * v.cs;
    assert!(last(&a, m, k) < a.data.len() && last(&b, k, n) < b.data.len());
    assert!((m - 1) * rsc + n <= c.len());
    // SAFETY: the asserts above keep every addressed element inside the
    // borrowed slices, and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Sparse row combination: output row `r` is `sum_j w * input[j]` over the
/// `(j, w)` pairs of entry `r`.
pub type RowMap = Vec<Vec<(usize, f64)>>;

enum Op {
    Leaf,
    Param { offset: usize },
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    SliceCols { a: Var, start: usize },
    RowMix { a: Var, map: RowMap },
    Norm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<f64> },
    LogSoftmax { a: Var, mask: Vec<bool> },
    Pick { a: Var, picks: Vec<(usize, usize)> },
}

struct Node {
    value: Mat,
    op: Op,
}

pub const NORM_EPS: f64 = 1e-5;

pub struct Tape<'p> {
    params: &'p [f64],
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, Var>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [f64]) -> Tape<'p> {
        Tape { params, nodes: Vec::new(), param_nodes: HashMap::new() }
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        let m = &self.nodes[v.0].value;
        (m.rows, m.cols)
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A `rows x cols` parameter block starting at `offset`. Repeated
    /// requests for the same offset return the same node.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize) -> Var {
        if let Some(&v) = self.param_nodes.get(&offset) {
            debug_assert_eq!(self.shape(v), (rows, cols));
            return v;
        }
        let data = self.params[offset..offset + rows * cols].to_vec();
        let v = self.push(Mat::from_vec(rows, cols, data), Op::Param { offset });
        self.param_nodes.insert(offset, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimension");
        let mut out = Mat::zeros(m, n);
        gemm(m, k, n, View::of(self.value(a)), View::of(self.value(b)), 0.0, &mut out.data, n);
        self.push(out, Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        assert_eq!(k, k2, "matmul_bt inner dimension");
        let mut out = Mat::zeros(m, n);
        gemm(m, k, n, View::of(self.value(a)), View::of(self.value(b)).t(), 0.0, &mut out.data, n);
        self.push(out, Op::MatMulBt(a, b))
    }

    /// Adds the single row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(row), (1, n), "broadcast row shape");
        let r = self.value(row).data.clone();
        let mut out = self.value(a).clone();
        for i in 0..m {
            for (x, b) in out.data[i * n..(i + 1) * n].iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shape");
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let out = Mat::from_vec(va.rows, va.cols, data);
        self.push(out, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let va = self.value(a);
        let out = Mat::from_vec(va.rows, va.cols, va.data.iter().map(|&x| f(x)).collect());
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (m, ca) = self.shape(a);
        let (m2, cb) = self.shape(b);
        assert_eq!(m, m2, "concat_cols rows");
        let mut data = Vec::with_capacity(m * (ca + cb));
        for i in 0..m {
            data.extend_from_slice(self.value(a).row(i));
            data.extend_from_slice(self.value(b).row(i));
        }
        self.push(Mat::from_vec(m, ca + cb, data), Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (ra, c) = self.shape(a);
        let (rb, c2) = self.shape(b);
        assert_eq!(c, c2, "concat_rows cols");
        let mut data = self.value(a).data.clone();
        data.extend_from_slice(&self.value(b).data);
        self.push(Mat::from_vec(ra + rb, c, data), Op::ConcatRows(a, b))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let (m, n) = self.shape(a);
        assert!(start + width <= n, "slice_cols range");
        let va = self.value(a);
        let mut data = Vec::with_capacity(m * width);
        for i in 0..m {
            data.extend_from_slice(&va.row(i)[start..start + width]);
        }
        self.push(Mat::from_vec(m, width, data), Op::SliceCols { a, start })
    }

    pub fn row_mix(&mut self, a: Var, map: RowMap) -> Var {
        let (m, n) = self.shape(a);
        let va = self.value(a);
        let mut out = Mat::zeros(map.len(), n);
        for (r, terms) in map.iter().enumerate() {
            let dst = &mut out.data[r * n..(r + 1) * n];
            for &(j, w) in terms {
                assert!(j < m, "row_mix source row");
                for (d, s) in dst.iter_mut().zip(va.row(j)) {
                    *d += w * s;
                }
            }
        }
        self.push(out, Op::RowMix { a, map })
    }

    /// Instance normalization over the row (node) axis with per-column
    /// affine `gamma`, `beta` (both `1 x cols`).
    pub fn norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (m, n) = self.shape(x);
        assert_eq!(self.shape(gamma), (1, n));
        assert_eq!(self.shape(beta), (1, n));
        let vx = self.value(x);
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; n];
        for c in 0..n {
            let mean = (0..m).map(|r| vx.data[r * n + c]).sum::<f64>() / m as f64;
            let var = (0..m).map(|r| (vx.data[r * n + c] - mean).powi(2)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[c] = is;
            for r in 0..m {
                xhat[r * n + c] = (vx.data[r * n + c] - mean) * is;
            }
        }
        let g = &self.value(gamma).data;
        let b = &self.value(beta).data;
        let data = xhat.iter().enumerate().map(|(i, &h)| h * g[i % n] + b[i % n]).collect();
        self.push(Mat::from_vec(m, n, data), Op::Norm { x, gamma, beta, xhat, inv_std })
    }

    /// Multi-head scaled dot-product attention. `mask` (rows of `q` times
    /// rows of `k`, true = blocked) applies to every head; each query row
    /// must keep at least one key.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, mask: Option<&[bool]>) -> Var {
        let (rq, d) = self.shape(q);
        let (rk, dk) = self.shape(k);
        assert_eq!(d, dk, "attention key width");
        assert_eq!(self.shape(v), (rk, d), "attention value shape");
        assert!(heads > 0 && d % heads == 0, "head count must divide width");
        if let Some(m) = mask {
            assert_eq!(m.len(), rq * rk, "attention mask shape");
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (vq, vk, vv) = (self.value(q), self.value(k), self.value(v));
        let mut probs = vec![0.0; heads * rq * rk];
        let mut out = Mat::zeros(rq, d);
        for h in 0..heads {
            let p = &mut probs[h * rq * rk..(h + 1) * rq * rk];
            gemm(rq, dh, rk, View::cols_from(vq, h * dh), View::cols_from(vk, h * dh).t(), 0.0, p, rk);
            for i in 0..rq {
                let row = &mut p[i * rk..(i + 1) * rk];
                let mut hi = f64::NEG_INFINITY;
                for (j, x) in row.iter_mut().enumerate() {
                    if mask.is_some_and(|m| m[i * rk + j]) {
                        *x = f64::NEG_INFINITY;
                    } else {
                        *x *= scale;
                        hi = hi.max(*x);
                    }
                }
                assert!(hi.is_finite(), "attention row {i} has no unmasked key");
                let mut sum = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - hi).exp();
                    sum += *x;
                }
                for x in row.iter_mut() {
                    *x /= sum;
                }
            }
            gemm(rq, rk, dh, View { data: p, rs: rk, cs: 1 }, View::cols_from(vv, h * dh), 0.0, &mut out.data[h * dh..], d);
        }
        self.push(out, Op::Attention { q, k, v, heads, probs })
    }

    /// Row-wise log-softmax over unmasked entries; masked entries become
    /// `-inf`.
    pub fn log_softmax(&mut self, a: Var, mask: Vec<bool>) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(mask.len(), m * n, "log_softmax mask shape");
        let va = self.value(a);
        let mut out = Mat::zeros(m, n);
        for i in 0..m {
            let row = va.row(i);
            let mk = &mask[i * n..(i + 1) * n];
            let hi = row.iter().zip(mk).filter(|(_, &b)| !b).map(|(&x, _)| x).fold(f64::NEG_INFINITY, f64::max);
            assert!(hi.is_finite(), "log_softmax row {i} is fully masked");
            let lse = hi + row.iter().zip(mk).filter(|(_, &b)| !b).map(|(&x, _)| (x - hi).exp()).sum::<f64>().ln();
            for j in 0..n {
                out.data[i * n + j] = if mk[j] { f64::NEG_INFINITY } else { row[j] - lse };
            }
        }
        self.push(out, Op::LogSoftmax { a, mask })
    }

    /// Sum of the selected entries, as a `1 x 1` node.
    pub fn pick_sum(&mut self, a: Var, picks: Vec<(usize, usize)>) -> Var {
        let va = self.value(a);
        let s = picks.iter().map(|&(r, c)| va.at(r, c)).sum();
        self.push(Mat::from_vec(1, 1, vec![s]), Op::Pick { a, picks })
    }

    /// Gradient of the `1 x 1` node `root`, scaled by `seed`, with respect to
    /// the parameter vector.
    pub fn backward(&self, root: Var, seed: f64) -> Vec<f64> {
        assert_eq!(self.shape(root), (1, 1), "backward needs a scalar root");
        let mut param_grad = vec![0.0; self.params.len()];
        let mut grads: Vec<Option<Mat>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Mat::from_vec(1, 1, vec![seed]));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param { offset } => {
                    for (p, x) in param_grad[*offset..*offset + g.data.len()].iter_mut().zip(&g.data) {
                        *p += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut da = Mat::zeros(va.rows, va.cols);
                    gemm(va.rows, g.cols, va.cols, View::of(&g), View::of(vb).t(), 0.0, &mut da.data, va.cols);
                    let mut db = Mat::zeros(vb.rows, vb.cols);
                    gemm(vb.rows, g.rows, vb.cols, View::of(va).t(), View::of(&g), 0.0, &mut db.data, vb.cols);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut da = Mat::zeros(va.rows, va.cols);
                    gemm(va.rows, g.cols, va.cols, View::of(&g), View::of(vb), 0.0, &mut da.data, va.cols);
                    let mut db = Mat::zeros(vb.rows, vb.cols);
                    gemm(vb.rows, g.rows, vb.cols, View::of(&g).t(), View::of(va), 0.0, &mut db.data, vb.cols);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (d, x) in dr.data.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    acc(&mut grads, *row, dr);
                    acc(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    let neg = Mat::from_vec(g.rows, g.cols, g.data.iter().map(|x| -x).collect());
                    acc(&mut grads, *b, neg);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let da = g.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
                    let db = g.data.iter().zip(&va.data).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, da));
                    acc(&mut grads, *b, Mat::from_vec(g.rows, g.cols, db));
                }
                Op::Scale(a, s) => {
                    let da = g.data.iter().map(|x| x * s).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, da));
                }
                Op::Relu(a) => {
                    let y = &node.value.data;
                    let da = g.data.iter().zip(y).map(|(x, &y)| if y > 0.0 { *x } else { 0.0 }).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, da));
                }
                Op::Tanh(a) => {
                    let y = &node.value.data;
                    let da = g.data.iter().zip(y).map(|(x, y)| x * (1.0 - y * y)).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, da));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value.data;
                    let da = g.data.iter().zip(y).map(|(x, y)| x * y * (1.0 - y)).collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, da));
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols;
                    let cb = g.cols - ca;
                    let mut da = Vec::with_capacity(g.rows * ca);
                    let mut db = Vec::with_capacity(g.rows * cb);
                    for r in 0..g.rows {
                        da.extend_from_slice(&g.row(r)[..ca]);
                        db.extend_from_slice(&g.row(r)[ca..]);
                    }
                    acc(&mut grads, *a, Mat::from_vec(g.rows, ca, da));
                    acc(&mut grads, *b, Mat::from_vec(g.rows, cb, db));
                }
                Op::ConcatRows(a, b) => {
                    let ra = self.value(*a).rows;
                    let split = ra * g.cols;
                    acc(&mut grads, *a, Mat::from_vec(ra, g.cols, g.data[..split].to_vec()));
                    acc(&mut grads, *b, Mat::from_vec(g.rows - ra, g.cols, g.data[split..].to_vec()));
                }
                Op::SliceCols { a, start } => {
                    let va = self.value(*a);
                    let mut da = Mat::zeros(va.rows, va.cols);
                    for r in 0..g.rows {
                        da.data[r * va.cols + start..r * va.cols + start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, da);
                }
                Op::RowMix { a, map } => {
                    let va = self.value(*a);
                    let mut da = Mat::zeros(va.rows, va.cols);
                    for (r, terms) in map.iter().enumerate() {
                        for &(j, w) in terms {
                            for (d, x) in da.data[j * va.cols..(j + 1) * va.cols].iter_mut().zip(g.row(r)) {
                                *d += w * x;
                            }
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Norm { x, gamma, beta, xhat, inv_std } => {
                    let (m, n) = (g.rows, g.cols);
                    let gv = &self.value(*gamma).data;
                    let mut dg = Mat::zeros(1, n);
                    let mut db = Mat::zeros(1, n);
                    let mut dx = Mat::zeros(m, n);
                    for c in 0..n {
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for r in 0..m {
                            let gy = g.data[r * n + c];
                            dg.data[c] += gy * xhat[r * n + c];
                            db.data[c] += gy;
                            let dh = gy * gv[c];
                            sum_d += dh;
                            sum_dx += dh * xhat[r * n + c];
                        }
                        let k = inv_std[c] / m as f64;
                        for r in 0..m {
                            let dh = g.data[r * n + c] * gv[c];
                            dx.data[r * n + c] = k * (m as f64 * dh - sum_d - xhat[r * n + c] * sum_dx);
                        }
                    }
                    acc(&mut grads, *gamma, dg);
                    acc(&mut grads, *beta, db);
                    acc(&mut grads, *x, dx);
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (vq, vk, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let (rq, d) = (vq.rows, vq.cols);
                    let rk = vk.rows;
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Mat::zeros(rq, d);
                    let mut dk = Mat::zeros(rk, d);
                    let mut dv = Mat::zeros(rk, d);
                    let mut ds = vec![0.0; rq * rk];
                    for h in 0..*heads {
                        let p = &probs[h * rq * rk..(h + 1) * rq * rk];
                        let pv = View { data: p, rs: rk, cs: 1 };
                        let go = View::cols_from(&g, h * dh);
                        gemm(rk, rq, dh, pv.t(), go, 1.0, &mut dv.data[h * dh..], d);
                        gemm(rq, dh, rk, go, View::cols_from(vv, h * dh).t(), 0.0, &mut ds, rk);
                        for i in 0..rq {
                            let prow = &p[i * rk..(i + 1) * rk];
                            let drow = &mut ds[i * rk..(i + 1) * rk];
                            let dot: f64 = prow.iter().zip(drow.iter()).map(|(a, b)| a * b).sum();
                            for (x, &pp) in drow.iter_mut().zip(prow) {
                                *x = pp * (*x - dot) * scale;
                            }
                        }
                        let sv = View { data: &ds, rs: rk, cs: 1 };
                        gemm(rq, rk, dh, sv, View::cols_from(vk, h * dh), 1.0, &mut dq.data[h * dh..], d);
                        gemm(rk, rq, dh, sv.t(), View::cols_from(vq, h * dh), 1.0, &mut dk.data[h * dh..], d);
                    }
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dk);
                    acc(&mut grads, *v, dv);
                }
                Op::LogSoftmax { a, mask } => {
                    let y = &node.value;
                    let (m, n) = (y.rows, y.cols);
                    let mut da = Mat::zeros(m, n);
                    for i in 0..m {
                        let mut total = 0.0;
                        for j in 0..n {
                            if !mask[i * n + j] {
                                total += g.data[i * n + j];
                            }
                        }
                        for j in 0..n {
                            if !mask[i * n + j] {
                                da.data[i * n + j] = g.data[i * n + j] - y.data[i * n + j].exp() * total;
                            }
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::Pick { a, picks } => {
                    let va = self.value(*a);
                    let mut da = Mat::zeros(va.rows, va.cols);
                    for &(r, c) in picks {
                        da.data[r * va.cols + c] += g.data[0];
                    }
                    acc(&mut grads, *a, da);
                }
            }
        }
        param_grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Compare the tape gradient of `f` against central differences.
    fn check(n: usize, seed: u64, f: impl Fn(&mut Tape) -> Var) {
        let p = rand_vec(n, seed);
        let mut tape = Tape::new(&p);
        let root = f(&mut tape);
        let grad = tape.backward(root, 1.0);
        let eps = 1e-6;
        for i in 0..n {
            let mut hi = p.clone();
            hi[i] += eps;
            let mut lo = p.clone();
            lo[i] -= eps;
            let fh = {
                let mut t = Tape::new(&hi);
                let r = f(&mut t);
                t.value(r).data[0]
            };
            let fl = {
                let mut t = Tape::new(&lo);
                let r = f(&mut t);
                t.value(r).data[0]
            };
            let num = (fh - fl) / (2.0 * eps);
            let denom = grad[i].abs().max(num.abs()).max(1e-6);
            let err = (grad[i] - num).abs();
            assert!(err < 1e-8 || err / denom < 1e-5, "param {i}: analytic {} numeric {num}", grad[i]);
        }
    }

    fn weighted_sum(t: &mut Tape, x: Var) -> Var {
        let (r, c) = (t.value(x).rows, t.value(x).cols);
        let w: Vec<f64> = (0..r * c).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let wv = t.leaf(Mat::from_vec(r, c, w));
        let prod = t.mul(x, wv);
        let picks = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
        t.pick_sum(prod, picks)
    }

    #[test]
    fn matmul_variants() {
        check(12 + 12, 1, |t| {
            let a = t.param(0, 3, 4);
            let b = t.param(12, 4, 3);
            let c = t.matmul(a, b);
            let d = t.matmul_bt(c, c);
            weighted_sum(t, d)
        });
    }

    #[test]
    fn elementwise_and_broadcast() {
        check(15, 2, |t| {
            let a = t.param(0, 3, 4);
            let row = t.param(12, 1, 3);
            let a3 = t.slice_cols(a, 1, 3);
            let s = t.add_row(a3, row);
            let x = t.sigmoid(s);
            let y = t.tanh(a3);
            let z = t.mul(x, y);
            let w = t.sub(z, x);
            let r = t.relu(w);
            let q = t.add(r, y);
            let q = t.scale(q, 1.7);
            weighted_sum(t, q)
        });
    }

    #[test]
    fn concat_rowmix_norm() {
        check(6 + 6 + 8, 3, |t| {
            let a = t.param(0, 3, 2);
            let b = t.param(6, 3, 2);
            let c = t.concat_cols(a, b);
            let d = t.concat_rows(c, c);
            let m = t.row_mix(d, vec![vec![(0, 0.5), (5, 0.5)], vec![(2, 1.0)], vec![(1, -0.3), (3, 2.0)], vec![(4, 1.0)]]);
            let g = t.param(12, 1, 4);
            let be = t.param(16, 1, 4);
            let n = t.norm(m, g, be);
            weighted_sum(t, n)
        });
    }

    #[test]
    fn attention_with_mask() {
        check(4 * 6 + 3 * 6 + 3 * 6, 4, |t| {
            let q = t.param(0, 4, 6);
            let k = t.param(24, 3, 6);
            let v = t.param(42, 3, 6);
            let mask = vec![false, true, false, false, false, false, true, true, false, false, true, false];
            let o = t.attention(q, k, v, 2, Some(&mask));
            weighted_sum(t, o)
        });
        check(5 * 4 * 3, 5, |t| {
            let x = t.param(0, 5, 4);
            let k = t.param(20, 5, 4);
            let v = t.param(40, 5, 4);
            let o = t.attention(x, k, v, 4, None);
            weighted_sum(t, o)
        });
    }

    #[test]
    fn log_softmax_pick() {
        check(12, 6, |t| {
            let a = t.param(0, 3, 4);
            let mask = vec![false, true, false, false, false, false, false, true, true, true, false, true];
            let l = t.log_softmax(a, mask);
            t.pick_sum(l, vec![(0, 2), (1, 0), (2, 2), (0, 0)])
        });
    }

    #[test]
    fn log_softmax_rows_normalize() {
        let p = rand_vec(12, 7);
        let mut t = Tape::new(&p);
        let a = t.param(0, 3, 4);
        let mask = vec![false, true, false, false, true, true, true, false, false, false, false, false];
        let l = t.log_softmax(a, mask.clone());
        for r in 0..3 {
            let s: f64 = t.value(l).row(r).iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.value(l).at(0, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn norm_output_is_standardized() {
        let p: Vec<f64> = rand_vec(20, 8).into_iter().chain([1.0; 4]).chain([0.0; 4]).collect();
        let mut t = Tape::new(&p);
        let x = t.param(0, 5, 4);
        let g = t.param(20, 1, 4);
        let b = t.param(24, 1, 4);
        let n = t.norm(x, g, b);
        for c in 0..4 {
            let col: Vec<f64> = (0..5).map(|r| t.value(n).at(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 5.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_seed_gives_zero_gradient() {
        let p = rand_vec(6, 9);
        let mut t = Tape::new(&p);
        let a = t.param(0, 2, 3);
        let s = t.tanh(a);
        let r = t.pick_sum(s, vec![(0, 0), (1, 2)]);
        assert!(t.backward(r, 0.0).iter().all(|&g| g == 0.0));
    }
}
