//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every operation of one forward computation as a
//! node in an arena. Parameters are borrowed from a [`ParamStore`] rather
//! than copied, and [`Graph::backward`] accumulates parameter gradients
//! directly into a [`GradBuffer`]. One graph belongs to one thread;
//! independent graphs over the same store can run in parallel.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::params::{GradBuffer, ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Lookup { param: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    HCat(Vec<Var>),
    VCat(Vec<Var>),
    Slice { src: Var, row: usize, col: usize },
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Mean(Var),
    Sum(Var),
    LstmRec(Box<LstmCache>),
    CrossEntropy { logits: Var, gold: Vec<usize>, probs: Tensor },
}

struct LstmCache {
    xw: Var,
    w_hh: Var,
    reverse: bool,
    /// Post-activation gates per step, columns `[i f g o]`.
    gates: Tensor,
    cells: Tensor,
}

struct Node {
    /// `None` only for parameter nodes, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn shape(t: &Tensor) -> [usize; 2] {
    [t.nrows(), t.ncols()]
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows_of(m: &Tensor) -> Result<Tensor> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    Ok(out)
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        shape(self.value(v))
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant leaf.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let needs_grad = self.params.param(id).trainable;
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Gather rows `ids` of a parameter table.
    pub fn lookup(&mut self, id: ParamId, ids: &[usize]) -> Result<Var> {
        let table = self.params.get(id);
        if let Some(&bad) = ids.iter().find(|&&i| i >= table.nrows()) {
            return Err(Error::Invalid(format!(
                "row {bad} out of range for `{}` with {} rows",
                self.params.param(id).name,
                table.nrows()
            )));
        }
        let value = table.select(Axis(0), ids);
        let needs_grad = self.params.param(id).trainable;
        Ok(self.push(
            value,
            Op::Lookup {
                param: id,
                ids: ids.to_vec(),
            },
            needs_grad,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::Shape {
                op: "matmul",
                left: shape(va),
                right: shape(vb),
            });
        }
        let value = va.dot(vb);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.ncols() {
            return Err(Error::Shape {
                op: "matmul_t",
                left: shape(va),
                right: shape(vb),
            });
        }
        let value = va.dot(&vb.t());
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMulT(a, b), ng))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    /// Add a 1×c row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.nrows() != 1 || vr.ncols() != va.ncols() {
            return Err(Error::Shape {
                op: "add_row",
                left: shape(va),
                right: shape(vr),
            });
        }
        let value = va + vr;
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    /// Elementwise product with a constant.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let va = self.value(a);
        if va.raw_dim() != c.raw_dim() {
            return Err(Error::Shape {
                op: "mul_const",
                left: shape(va),
                right: shape(&c),
            });
        }
        let value = va * &c;
        let ng = self.ng(a);
        Ok(self.push(value, Op::MulConst(a, c), ng))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, factor), ng)
    }

    /// Multiply `a` by the 1×1 node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let vs = self.value(s);
        if shape(vs) != [1, 1] {
            return Err(Error::Shape {
                op: "scale_by",
                left: self.shape(a),
                right: shape(vs),
            });
        }
        let value = self.value(a) * vs[[0, 0]];
        let ng = self.ng(a) || self.ng(s);
        Ok(self.push(value, Op::ScaleBy(a, s), ng))
    }

    /// Concatenate along columns.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Invalid("hcat of nothing".into()))?;
        let rows = self.shape(*first)[0];
        for p in parts {
            if self.shape(*p)[0] != rows {
                return Err(Error::Shape {
                    op: "hcat",
                    left: self.shape(*first),
                    right: self.shape(*p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(value, Op::HCat(parts.to_vec()), ng))
    }

    /// Concatenate along rows.
    pub fn vcat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Invalid("vcat of nothing".into()))?;
        let cols = self.shape(*first)[1];
        for p in parts {
            if self.shape(*p)[1] != cols {
                return Err(Error::Shape {
                    op: "vcat",
                    left: self.shape(*first),
                    right: self.shape(*p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts checked");
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(value, Op::VCat(parts.to_vec()), ng))
    }

    /// Sub-block `[row, row + rows) × [col, col + cols)`.
    pub fn slice(&mut self, src: Var, row: usize, rows: usize, col: usize, cols: usize) -> Result<Var> {
        let sv = self.shape(src);
        if row + rows > sv[0] || col + cols > sv[1] {
            return Err(Error::Shape {
                op: "slice",
                left: sv,
                right: [row + rows, col + cols],
            });
        }
        let value = self
            .value(src)
            .slice(s![row..row + rows, col..col + cols])
            .to_owned();
        let ng = self.ng(src);
        Ok(self.push(value, Op::Slice { src, row, col }, ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let ng = self.ng(a);
        self.push(value, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let ng = self.ng(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        if self.shape(a)[1] == 0 {
            return Err(Error::Invalid("softmax over an empty row".into()));
        }
        let value = softmax_rows_of(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::SoftmaxRows(a), ng))
    }

    /// Mean of all entries, as a 1×1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let m = if va.is_empty() { 0.0 } else { va.sum() / va.len() as f64 };
        let ng = self.ng(a);
        self.push(Array2::from_elem((1, 1), m), Op::Mean(a), ng)
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).sum();
        let ng = self.ng(a);
        self.push(Array2::from_elem((1, 1), total), Op::Sum(a), ng)
    }

    /// Inverted dropout: keeps each entry with probability `1 - rate` and
    /// rescales survivors by `1 / (1 - rate)`. Identity when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        if rate >= 1.0 {
            return Err(Error::Config(format!("dropout rate {rate} must be below 1")));
        }
        let keep = 1.0 - rate;
        let [r, c] = self.shape(a);
        let mask = Array2::from_shape_fn((r, c), |_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        self.mul_const(a, mask)
    }

    /// Run one LSTM direction over precomputed input projections.
    ///
    /// `xw` is `n × 4h` (input times input weights plus bias, gate order
    /// `i f g o`), `w_hh` is `h × 4h`. Returns the `n × h` hidden states in
    /// positional order; with `reverse` the recurrence runs right to left.
    pub fn lstm_recurrence(&mut self, xw: Var, w_hh: Var, reverse: bool) -> Result<Var> {
        let (vx, vw) = (self.value(xw), self.value(w_hh));
        let h = vw.nrows();
        if vw.ncols() != 4 * h || vx.ncols() != 4 * h {
            return Err(Error::Shape {
                op: "lstm_recurrence",
                left: shape(vx),
                right: shape(vw),
            });
        }
        let n = vx.nrows();
        let mut gates = Array2::zeros((n, 4 * h));
        let mut cells = Array2::zeros((n, h));
        let mut out = Array2::zeros((n, h));
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            let z = &vx.row(t) + &h_prev.dot(vw);
            let mut g = gates.row_mut(t);
            for k in 0..h {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h + k]);
                let gg = z[2 * h + k].tanh();
                let o = sigmoid(z[3 * h + k]);
                let c = f * c_prev[k] + i * gg;
                g[k] = i;
                g[h + k] = f;
                g[2 * h + k] = gg;
                g[3 * h + k] = o;
                cells[[t, k]] = c;
                out[[t, k]] = o * c.tanh();
            }
            h_prev.assign(&out.row(t));
            c_prev.assign(&cells.row(t));
        }
        let ng = self.ng(xw) || self.ng(w_hh);
        Ok(self.push(
            out,
            Op::LstmRec(Box::new(LstmCache {
                xw,
                w_hh,
                reverse,
                gates,
                cells,
            })),
            ng,
        ))
    }

    /// Mean categorical cross entropy of row-wise softmax(`logits`) against
    /// `gold` class ids, as a 1×1 node.
    pub fn cross_entropy(&mut self, logits: Var, gold: &[usize]) -> Result<Var> {
        let vl = self.value(logits);
        let [n, classes] = shape(vl);
        if gold.len() != n || n == 0 {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: [n, classes],
                right: [gold.len(), 1],
            });
        }
        if let Some(&bad) = gold.iter().find(|&&g| g >= classes) {
            return Err(Error::LabelOutOfRange { id: bad, classes });
        }
        let probs = softmax_rows_of(vl)?;
        let mut loss = 0.0;
        for (i, &g) in gold.iter().enumerate() {
            // log-softmax computed from the logits keeps large margins finite.
            let row = vl.row(i);
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[g];
        }
        loss /= n as f64;
        let ng = self.ng(logits);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                gold: gold.to_vec(),
                probs,
            },
            ng,
        ))
    }

    /// Backpropagate from the 1×1 node `loss`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, loss: Var, grads: &mut GradBuffer) -> Result<()> {
        if self.shape(loss) != [1, 1] {
            return Err(Error::Shape {
                op: "backward",
                left: self.shape(loss),
                right: [1, 1],
            });
        }
        let mut adj: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let mut send = |v: Var, d: Tensor| {
                if self.nodes[v.0].needs_grad {
                    match &mut adj[v.0] {
                        Some(acc) => *acc += &d,
                        slot => *slot = Some(d),
                    }
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => grads.add(*id, &g),
                Op::Lookup { param, ids } => {
                    for (r, &row) in ids.iter().enumerate() {
                        grads.add_row(*param, row, g.row(r));
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.ng(*a) {
                        send(*a, g.dot(&vb.t()));
                    }
                    if self.ng(*b) {
                        send(*b, va.t().dot(&g));
                    }
                }
                Op::MatMulT(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.ng(*a) {
                        send(*a, g.dot(vb));
                    }
                    if self.ng(*b) {
                        send(*b, g.t().dot(va));
                    }
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::AddRow(a, r) => {
                    send(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    send(*a, &g * vb);
                    send(*b, &g * va);
                }
                Op::MulConst(a, c) => send(*a, &g * c),
                Op::Scale(a, f) => send(*a, g * *f),
                Op::ScaleBy(a, sc) => {
                    let s = self.value(*sc)[[0, 0]];
                    let ds = (&g * self.value(*a)).sum();
                    send(*sc, Array2::from_elem((1, 1), ds));
                    send(*a, g * s);
                }
                Op::HCat(parts) => {
                    let mut col = 0;
                    for p in parts {
                        let w = self.shape(*p)[1];
                        send(*p, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::VCat(parts) => {
                    let mut row = 0;
                    for p in parts {
                        let h = self.shape(*p)[0];
                        send(*p, g.slice(s![row..row + h, ..]).to_owned());
                        row += h;
                    }
                }
                Op::Slice { src, row, col } => {
                    let mut d = Array2::zeros(self.value(*src).raw_dim());
                    let (r, c) = g.dim();
                    d.slice_mut(s![*row..*row + r, *col..*col + c]).assign(&g);
                    send(*src, d);
                }
                Op::Sigmoid(a) => {
                    let y = self.value(Var(idx));
                    send(*a, &g * &y.mapv(|v| v * (1.0 - v)));
                }
                Op::Tanh(a) => {
                    let y = self.value(Var(idx));
                    send(*a, &g * &y.mapv(|v| 1.0 - v * v));
                }
                Op::SoftmaxRows(a) => {
                    let y = self.value(Var(idx));
                    let gy = &g * y;
                    let dots = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(*a, gy - &(y * &dots));
                }
                Op::Mean(a) => {
                    let va = self.value(*a);
                    let n = va.len().max(1) as f64;
                    send(*a, Array2::from_elem(va.raw_dim(), g[[0, 0]] / n));
                }
                Op::Sum(a) => {
                    let va = self.value(*a);
                    send(*a, Array2::from_elem(va.raw_dim(), g[[0, 0]]));
                }
                Op::CrossEntropy { logits, gold, probs } => {
                    let n = gold.len() as f64;
                    let mut d = probs.clone();
                    for (i, &c) in gold.iter().enumerate() {
                        d[[i, c]] -= 1.0;
                    }
                    d *= g[[0, 0]] / n;
                    send(*logits, d);
                }
                Op::LstmRec(cache) => {
                    let (dxw, dw) = self.lstm_backward(Var(idx), cache, &g);
                    if let Some(dw) = dw {
                        send(cache.w_hh, dw);
                    }
                    send(cache.xw, dxw);
                }
            }
        }
        Ok(())
    }

    fn lstm_backward(&self, node: Var, cache: &LstmCache, d_out: &Tensor) -> (Tensor, Option<Tensor>) {
        let w = self.value(cache.w_hh);
        let h = w.nrows();
        let n = d_out.nrows();
        let out = self.value(node);
        let mut dz = Array2::<f64>::zeros((n, 4 * h));
        let mut h_prev_rows = Array2::<f64>::zeros((n, h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);

        for step in (0..n).rev() {
            let t = if cache.reverse { n - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if cache.reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            if let Some(p) = prev {
                h_prev_rows.row_mut(t).assign(&out.row(p));
            }
            let gates = cache.gates.row(t);
            let dh: Array1<f64> = &d_out.row(t) + &dh_next;
            let mut dzt = dz.row_mut(t);
            for k in 0..h {
                let (i, f, gg, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let c = cache.cells[[t, k]];
                let c_prev = prev.map_or(0.0, |p| cache.cells[[p, k]]);
                let tc = c.tanh();
                let d_o = dh[k] * tc;
                let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
                dzt[k] = dc * gg * i * (1.0 - i);
                dzt[h + k] = dc * c_prev * f * (1.0 - f);
                dzt[2 * h + k] = dc * i * (1.0 - gg * gg);
                dzt[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next = w.dot(&dz.row(t));
        }
        let dw = self.ng(cache.w_hh).then(|| h_prev_rows.t().dot(&dz));
        (dz, dw)
    }
}

