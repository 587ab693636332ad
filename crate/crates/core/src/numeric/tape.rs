//! Vector-valued reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive as it is evaluated. Values live on the
//! tape; parameters are read in place from a borrowed [`ParamStore`] and never
//! copied. [`Tape::backward`] walks the record once, newest first, and adds
//! `∂loss/∂θ` into a caller-owned [`Gradients`] buffer, so independent tapes
//! over the same store can run on different threads and be merged afterwards.

use std::sync::atomic::{AtomicU32, Ordering};

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u32,
    idx: u32,
}

#[derive(Debug)]
enum Op {
    Input,
    Gather { param: ParamId, row: usize },
    Linear { weight: ParamId, bias: Option<ParamId>, x: usize },
    Concat(Vec<usize>),
    Slice { x: usize, start: usize },
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatVec { m: usize, x: usize },
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Pick { x: usize, index: usize },
    Sum(usize),
    Dot(usize, usize),
    Mean(Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    /// Row count when the node is used as a matrix; 1 for plain vectors.
    rows: usize,
    op: Op,
}

pub struct Tape<'p> {
    id: u32,
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Adjoints left behind by a backward pass.
pub struct Adjoints {
    tape: u32,
    values: Vec<Option<Vec<f64>>>,
    visited: usize,
}

impl Adjoints {
    /// `∂loss/∂var`, or `None` when `var` does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        if var.tape != self.tape {
            return None;
        }
        self.values.get(var.idx as usize)?.as_deref()
    }

    /// Number of recorded ops the backward sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(scores.iter().map(|s| s - lse).collect())
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            params,
            nodes: Vec::with_capacity(256),
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

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx as usize >= self.nodes.len() {
            return Err(Error::ForeignVar);
        }
        Ok(v.idx as usize)
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, op: Op) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { value, rows, op });
        Var { tape: self.id, idx }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx as usize].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    /// A constant leaf.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, 1, Op::Input)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![0.0; n])
    }

    /// Row `row` of a rank-2 parameter (embedding lookup).
    pub fn gather(&mut self, param: ParamId, row: usize) -> Result<Var> {
        let p = self.params.get(param);
        if p.dims().len() != 2 || row >= p.rows() {
            return Err(Error::shape(
                format!("row < {} of {}", p.rows(), p.name()),
                format!("row {row}"),
            ));
        }
        let value = p.row(row).to_vec();
        Ok(self.push(value, 1, Op::Gather { param, row }))
    }

    /// `W x + b` with `W` of shape (out, in).
    pub fn linear(&mut self, weight: ParamId, bias: Option<ParamId>, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let w = self.params.get(weight);
        let (out, inp) = (w.rows(), w.cols());
        let xv = &self.nodes[xi].value;
        if w.dims().len() != 2 || xv.len() != inp {
            return Err(Error::shape(
                format!("input of width {inp} for {} {:?}", w.name(), w.dims()),
                format!("width {}", xv.len()),
            ));
        }
        let mut y = match bias {
            Some(b) => {
                let bv = self.params.data(b);
                if bv.len() != out {
                    return Err(Error::shape(format!("bias of length {out}"), bv.len()));
                }
                bv.to_vec()
            }
            None => vec![0.0; out],
        };
        let wd = w.data();
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &wd[i * inp..(i + 1) * inp];
            *yi += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(y, 1, Op::Linear { weight, bias, x: xi }))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let idxs = parts.iter().map(|&v| self.idx(v)).collect::<Result<Vec<_>>>()?;
        let value = idxs.iter().flat_map(|&i| self.nodes[i].value.iter().copied()).collect();
        Ok(self.push(value, 1, Op::Concat(idxs)))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let idxs = rows.iter().map(|&v| self.idx(v)).collect::<Result<Vec<_>>>()?;
        if let Some(&first) = idxs.first() {
            let w = self.nodes[first].value.len();
            if let Some(&bad) = idxs.iter().find(|&&i| self.nodes[i].value.len() != w) {
                return Err(Error::shape(format!("rows of width {w}"), self.nodes[bad].value.len()));
            }
        }
        let value = idxs.iter().flat_map(|&i| self.nodes[i].value.iter().copied()).collect();
        let n = idxs.len();
        Ok(self.push(value, n, Op::Concat(idxs)))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xi = self.idx(x)?;
        let n = self.nodes[xi].value.len();
        if start + len > n {
            return Err(Error::shape(format!("range within length {n}"), format!("{start}..{}", start + len)));
        }
        let value = self.nodes[xi].value[start..start + len].to_vec();
        Ok(self.push(value, 1, Op::Slice { x: xi, start }))
    }

    fn same_len(&self, a: usize, b: usize) -> Result<()> {
        let (la, lb) = (self.nodes[a].value.len(), self.nodes[b].value.len());
        if la != lb {
            return Err(Error::shape(la, lb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ai, bi)?;
        let value = self.nodes[ai].value.iter().zip(&self.nodes[bi].value).map(|(x, y)| x + y).collect();
        Ok(self.push(value, 1, Op::Add(ai, bi)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ai, bi)?;
        let value = self.nodes[ai].value.iter().zip(&self.nodes[bi].value).map(|(x, y)| x * y).collect();
        Ok(self.push(value, 1, Op::Mul(ai, bi)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let ai = self.idx(a)?;
        let value = self.nodes[ai].value.iter().map(|x| k * x).collect();
        Ok(self.push(value, 1, Op::Scale(ai, k)))
    }

    /// Matrix (from [`Tape::stack_rows`]) times vector.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (mi, xi) = (self.idx(m)?, self.idx(x)?);
        let rows = self.nodes[mi].rows;
        let cols = self.nodes[mi].value.len() / rows.max(1);
        let xv = &self.nodes[xi].value;
        if xv.len() != cols {
            return Err(Error::shape(format!("vector of length {cols} for {rows}x{cols} matrix"), xv.len()));
        }
        let md = &self.nodes[mi].value;
        let value = (0..rows)
            .map(|r| md[r * cols..(r + 1) * cols].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(value, 1, Op::MatVec { m: mi, x: xi }))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: impl FnOnce(usize) -> Op) -> Result<Var> {
        let ai = self.idx(a)?;
        let value = self.nodes[ai].value.iter().map(|&x| f(x)).collect();
        Ok(self.push(value, 1, op(ai)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, sigmoid, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.max(0.0), Op::Relu)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let value = softmax(&self.nodes[ai].value)?;
        Ok(self.push(value, 1, Op::Softmax(ai)))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let value = log_softmax(&self.nodes[ai].value)?;
        Ok(self.push(value, 1, Op::LogSoftmax(ai)))
    }

    /// Scalar element `index` of `a`.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let ai = self.idx(a)?;
        let n = self.nodes[ai].value.len();
        if index >= n {
            return Err(Error::shape(format!("index < {n}"), index));
        }
        let v = self.nodes[ai].value[index];
        Ok(self.push(vec![v], 1, Op::Pick { x: ai, index }))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let v = self.nodes[ai].value.iter().sum();
        Ok(self.push(vec![v], 1, Op::Sum(ai)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len(ai, bi)?;
        let v = self.nodes[ai].value.iter().zip(&self.nodes[bi].value).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![v], 1, Op::Dot(ai, bi)))
    }

    /// Elementwise mean of equal-length vectors.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let idxs = parts.iter().map(|&v| self.idx(v)).collect::<Result<Vec<_>>>()?;
        let n = self.nodes[idxs[0]].value.len();
        let mut value = vec![0.0; n];
        for &i in &idxs {
            let v = &self.nodes[i].value;
            if v.len() != n {
                return Err(Error::shape(n, v.len()));
            }
            value.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        let k = idxs.len() as f64;
        value.iter_mut().for_each(|a| *a /= k);
        Ok(self.push(value, 1, Op::Mean(idxs)))
    }

    /// Sum of scalars.
    pub fn add_all(&mut self, scalars: &[Var]) -> Result<Var> {
        let c = self.concat(scalars)?;
        self.sum(c)
    }

    /// Reverse sweep from the scalar `loss`, adding parameter gradients into
    /// `grads`. Parameters the loss does not reach receive nothing.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<Adjoints> {
        self.backward_seeded(loss, &[1.0], grads)
    }

    /// Vector-Jacobian product: reverse sweep from `output` seeded with `seed`.
    pub fn backward_seeded(&self, output: Var, seed: &[f64], grads: &mut Gradients) -> Result<Adjoints> {
        let root = self.idx(output).map_err(|_| Error::LossNotOnTape)?;
        if self.nodes[root].value.len() != seed.len() {
            return Err(Error::LossNotOnTape);
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape(format!("{} gradient tensors", self.params.len()), grads.len()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(root + 1);
        adj.resize_with(root + 1, || None);
        adj[root] = Some(seed.to_vec());
        let mut visited = 0;

        for i in (0..=root).rev() {
            let Some(g) = adj[i].take() else { continue };
            visited += 1;
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Gather { param, row } => {
                    let cols = self.params.get(*param).cols();
                    let dst = &mut grads.get_mut(*param)[row * cols..(row + 1) * cols];
                    dst.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::Linear { weight, bias, x } => {
                    let w = self.params.get(*weight);
                    let inp = w.cols();
                    let xv = &self.nodes[*x].value;
                    {
                        let gw = grads.get_mut(*weight);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * inp..(r + 1) * inp];
                            row.iter_mut().zip(xv).for_each(|(d, xj)| *d += gr * xj);
                        }
                    }
                    if let Some(b) = bias {
                        grads.get_mut(*b).iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                    let wd = w.data();
                    let gx = slot(&mut adj, &self.nodes, *x);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        let row = &wd[r * inp..(r + 1) * inp];
                        gx.iter_mut().zip(row).for_each(|(d, wj)| *d += gr * wj);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        let gp = slot(&mut adj, &self.nodes, p);
                        gp.iter_mut().zip(&g[off..off + n]).for_each(|(d, s)| *d += s);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let gx = slot(&mut adj, &self.nodes, *x);
                    gx[*start..*start + g.len()].iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::Add(a, b) => {
                    for &p in [a, b] {
                        let gp = slot(&mut adj, &self.nodes, p);
                        gp.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let bv = &self.nodes[b].value;
                    let ga = slot(&mut adj, &self.nodes, a);
                    ga.iter_mut().zip(g.iter().zip(bv)).for_each(|(d, (s, y))| *d += s * y);
                    let av = &self.nodes[a].value;
                    let gb = slot(&mut adj, &self.nodes, b);
                    gb.iter_mut().zip(g.iter().zip(av)).for_each(|(d, (s, x))| *d += s * x);
                }
                Op::Scale(a, k) => {
                    let ga = slot(&mut adj, &self.nodes, *a);
                    ga.iter_mut().zip(&g).for_each(|(d, s)| *d += k * s);
                }
                Op::MatVec { m, x } => {
                    let (m, x) = (*m, *x);
                    let rows = self.nodes[m].rows;
                    let cols = self.nodes[m].value.len() / rows.max(1);
                    let xv = &self.nodes[x].value;
                    let gm = slot(&mut adj, &self.nodes, m);
                    for r in 0..rows {
                        gm[r * cols..(r + 1) * cols]
                            .iter_mut()
                            .zip(xv)
                            .for_each(|(d, xj)| *d += g[r] * xj);
                    }
                    let md = &self.nodes[m].value;
                    let gx = slot(&mut adj, &self.nodes, x);
                    for r in 0..rows {
                        gx.iter_mut()
                            .zip(&md[r * cols..(r + 1) * cols])
                            .for_each(|(d, mj)| *d += g[r] * mj);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = slot(&mut adj, &self.nodes, *a);
                    for ((d, s), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += s * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let ga = slot(&mut adj, &self.nodes, *a);
                    for ((d, s), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += s * (1.0 - y * y);
                    }
                }
                Op::Relu(a) => {
                    let a = *a;
                    let xv = &self.nodes[a].value;
                    let ga = slot(&mut adj, &self.nodes, a);
                    for ((d, s), x) in ga.iter_mut().zip(&g).zip(xv) {
                        if *x > 0.0 {
                            *d += s;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let inner: f64 = p.iter().zip(&g).map(|(pi, gi)| pi * gi).sum();
                    let ga = slot(&mut adj, &self.nodes, *a);
                    for ((d, s), pi) in ga.iter_mut().zip(&g).zip(p) {
                        *d += pi * (s - inner);
                    }
                }
                Op::LogSoftmax(a) => {
                    let total: f64 = g.iter().sum();
                    let ga = slot(&mut adj, &self.nodes, *a);
                    for ((d, s), lp) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += s - lp.exp() * total;
                    }
                }
                Op::Pick { x, index } => {
                    slot(&mut adj, &self.nodes, *x)[*index] += g[0];
                }
                Op::Sum(a) => {
                    slot(&mut adj, &self.nodes, *a).iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let bv = &self.nodes[b].value;
                    slot(&mut adj, &self.nodes, a).iter_mut().zip(bv).for_each(|(d, y)| *d += g[0] * y);
                    let av = &self.nodes[a].value;
                    slot(&mut adj, &self.nodes, b).iter_mut().zip(av).for_each(|(d, x)| *d += g[0] * x);
                }
                Op::Mean(parts) => {
                    let k = parts.len() as f64;
                    for &p in parts {
                        let gp = slot(&mut adj, &self.nodes, p);
                        gp.iter_mut().zip(&g).for_each(|(d, s)| *d += s / k);
                    }
                }
            }
            adj[i] = Some(g);
        }
        Ok(Adjoints {
            tape: self.id,
            values: adj,
            visited,
        })
    }
}

fn slot<'a>(adj: &'a mut [Option<Vec<f64>>], nodes: &[Node], i: usize) -> &'a mut Vec<f64> {
    adj[i].get_or_insert_with(|| vec![0.0; nodes[i].value.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(softmax(&[-712.5]).unwrap(), vec![1.0]);
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in p.iter().zip([0.09003057, 0.24472847, 0.66524096]) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        assert!(matches!(softmax(&[]), Err(Error::EmptyScores)));
        assert_eq!(Error::EmptyScores.to_string(), "empty action score vector");
    }

    #[test]
    fn log_softmax_gradient_is_indicator_minus_probability() {
        let store = ParamStore::new();
        let mut grads = Gradients::zeros_like(&store);
        let mut t = Tape::new(&store);
        let z = t.input(vec![0.3, -1.2, 2.0, 0.7]);
        let lp = t.log_softmax(z).unwrap();
        let loss = t.pick(lp, 2).unwrap();
        let adj = t.backward(loss, &mut grads).unwrap();
        let p = softmax(t.value(z)).unwrap();
        for (i, g) in adj.get(z).unwrap().iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 } - p[i];
            assert!((g - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn half_squared_norm_of_linear_map() {
        let mut store = ParamStore::new();
        let w = store.add("w", &[2, 3], vec![0.5, -1.0, 2.0, 0.25, 0.0, -0.75]).unwrap();
        let x = [1.5, -2.0, 0.5];
        let mut grads = Gradients::zeros_like(&store);
        let mut t = Tape::new(&store);
        let xv = t.input(x.to_vec());
        let y = t.linear(w, None, xv).unwrap();
        let sq = t.dot(y, y).unwrap();
        let loss = t.scale(sq, 0.5).unwrap();
        t.backward(loss, &mut grads).unwrap();
        let wx = t.value(y).to_vec();
        for (r, wxr) in wx.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                assert!((grads.get(w)[r * 3 + c] - wxr * xc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unreachable_parameters_get_exact_zero() {
        let mut store = ParamStore::new();
        let used = store.add("used", &[1, 2], vec![1.0, 2.0]).unwrap();
        let unused = store.add("unused", &[1, 2], vec![3.0, 4.0]).unwrap();
        let mut grads = Gradients::zeros_like(&store);
        let mut t = Tape::new(&store);
        let a = t.gather(used, 0).unwrap();
        let _b = t.gather(unused, 0).unwrap();
        let loss = t.sum(a).unwrap();
        t.backward(loss, &mut grads).unwrap();
        assert_eq!(grads.get(used), &[1.0, 1.0]);
        assert_eq!(grads.get(unused), &[0.0, 0.0]);
    }

    #[test]
    fn backward_visits_reachable_ops_once() {
        let store = ParamStore::new();
        let mut grads = Gradients::zeros_like(&store);
        let mut t = Tape::new(&store);
        let a = t.input(vec![1.0, 2.0]);
        let _dead = t.tanh(a).unwrap();
        let b = t.sigmoid(a).unwrap();
        let c = t.mul(a, b).unwrap();
        let loss = t.sum(c).unwrap();
        let adj = t.backward(loss, &mut grads).unwrap();
        // loss, c, b, a; the dead tanh is skipped.
        assert_eq!(adj.visited(), 4);
    }

    #[test]
    fn loss_must_be_a_scalar_on_this_tape() {
        let store = ParamStore::new();
        let mut grads = Gradients::zeros_like(&store);
        let mut other = Tape::new(&store);
        let foreign = other.input(vec![1.0]);
        let mut t = Tape::new(&store);
        let v = t.input(vec![1.0, 2.0]);
        assert!(matches!(t.backward(v, &mut grads), Err(Error::LossNotOnTape)));
        assert!(matches!(t.backward(foreign, &mut grads), Err(Error::LossNotOnTape)));
    }
}
