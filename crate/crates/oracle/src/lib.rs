//! Straight-line reimplementation of the walker's forward pass, generic over
//! the scalar type. It shares no code with the library's tape, so it serves
//! as an independent oracle; with double-double scalars it also gives
//! finite differences that are not limited by f64 rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

use kgwalk::graph::Graph;
use kgwalk::numeric::ParamStore;
use twofloat::TwoFloat;

pub trait Real:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn to_f64(self) -> f64;

    fn zero() -> Self {
        Self::of(0.0)
    }

    fn sigmoid(self) -> Self {
        let one = Self::of(1.0);
        if self >= Self::zero() {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }

    fn tanh(self) -> Self {
        let one = Self::of(1.0);
        let neg = self < Self::zero();
        let a = if neg { -self } else { self };
        let e = (Self::of(-2.0) * a).exp();
        let t = (one - e) / (one + e);
        if neg {
            -t
        } else {
            t
        }
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Double-double scalar. Addition and multiplication come from `twofloat`;
/// division, exp and ln are computed here because the crate's versions are
/// not accurate to full double-double precision.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Dd(pub TwoFloat);

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        Dd(self.0 + o.0)
    }
}
impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        Dd(self.0 - o.0)
    }
}
impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        Dd(self.0 * o.0)
    }
}
/// Long division with three f64 quotient digits; the crate's own division
/// is only accurate to about one f64 ulp.
impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.0.hi() / o.0.hi();
        let r = self.0 - o.0 * q1;
        let q2 = r.hi() / o.0.hi();
        let r = r - o.0 * q2;
        let q3 = r.hi() / o.0.hi();
        Dd(TwoFloat::from(q1) + q2 + q3)
    }
}
impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

impl Real for Dd {
    fn of(x: f64) -> Self {
        Dd(TwoFloat::from(x))
    }

    /// `2^k · (Taylor(r / 1024))^1024` with `r = x − k ln 2`.
    fn exp(self) -> Self {
        let x = self.0;
        let k = (x.hi() / std::f64::consts::LN_2).round();
        let r = (x - twofloat::consts::LN_2 * k) / 1024.0;
        let mut term = TwoFloat::from(1.0);
        let mut sum = TwoFloat::from(1.0);
        for n in 1..16 {
            term = term * r / n as f64;
            sum += term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        let scale = 2f64.powi(k as i32);
        Dd(TwoFloat::try_from((sum.hi() * scale, sum.lo() * scale)).expect("normalised"))
    }

    /// Two Newton steps on `exp(y) = x` from the f64 logarithm.
    fn ln(self) -> Self {
        let mut y = Dd::of(self.0.hi().ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::of(1.0);
        }
        y
    }

    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
}

pub struct Reference<'a> {
    pub store: &'a ParamStore,
    pub graph: &'a Graph,
    pub dim: usize,
}

impl Reference<'_> {
    fn param(&self, name: &str) -> (&[f64], usize) {
        let id = self.store.id(name).unwrap_or_else(|| panic!("missing parameter {name}"));
        let p = self.store.get(id);
        (p.data(), *p.dims().last().unwrap())
    }

    fn row<R: Real>(&self, name: &str, i: usize) -> Vec<R> {
        let (data, cols) = self.param(name);
        data[i * cols..(i + 1) * cols].iter().map(|&v| R::of(v)).collect()
    }

    fn affine<R: Real>(&self, w: &str, b: &str, x: &[R]) -> Vec<R> {
        let (wd, cols) = self.param(w);
        let (bd, _) = self.param(b);
        assert_eq!(cols, x.len(), "{w}");
        bd.iter()
            .enumerate()
            .map(|(i, &bi)| {
                let mut acc = R::of(bi);
                for (j, &xj) in x.iter().enumerate() {
                    acc = acc + R::of(wd[i * cols + j]) * xj;
                }
                acc
            })
            .collect()
    }

    fn ffn<R: Real>(&self, prefix: &str, x: &[R]) -> Vec<R> {
        let hidden: Vec<R> = self
            .affine(&format!("{prefix}.w1"), &format!("{prefix}.b1"), x)
            .into_iter()
            .map(|v| if v > R::zero() { v } else { R::zero() })
            .collect();
        self.affine(&format!("{prefix}.w2"), &format!("{prefix}.b2"), &hidden)
    }

    /// Gates in order input, forget, candidate, output.
    fn lstm<R: Real>(&self, prefix: &str, x: &[R], h: &[R], c: &[R]) -> (Vec<R>, Vec<R>) {
        let n = h.len();
        let xh: Vec<R> = x.iter().chain(h).copied().collect();
        let z = self.affine(&format!("{prefix}.weight"), &format!("{prefix}.bias"), &xh);
        let mut h2 = Vec::with_capacity(n);
        let mut c2 = Vec::with_capacity(n);
        for k in 0..n {
            let i = z[k].sigmoid();
            let f = z[n + k].sigmoid();
            let g = z[2 * n + k].tanh();
            let o = z[3 * n + k].sigmoid();
            let ck = f * c[k] + i * g;
            c2.push(ck);
            h2.push(o * ck.tanh());
        }
        (h2, c2)
    }

    pub fn question<R: Real>(&self, tokens: &[usize]) -> Vec<R> {
        let mut pooled = vec![R::zero(); self.dim];
        for &t in tokens {
            for (p, v) in pooled.iter_mut().zip(self.row::<R>("encoder.token_embedding", t)) {
                *p = *p + v;
            }
        }
        let n = R::of(tokens.len() as f64);
        let pooled: Vec<R> = pooled.into_iter().map(|v| v / n).collect();
        self.ffn("encoder.pool", &pooled)
    }

    pub fn query<R: Real>(&self, questions: &[Vec<usize>]) -> Vec<R> {
        let mut h = vec![R::zero(); self.dim];
        let mut c = vec![R::zero(); self.dim];
        for q in questions {
            let x = self.question::<R>(q);
            (h, c) = self.lstm("encoder.history", &x, &h, &c);
        }
        h
    }

    fn action<R: Real>(&self, relation: usize, edge: usize, tail: usize) -> Vec<R> {
        let mut a = self.row::<R>("policy.relation_embedding", relation);
        a.extend(self.row::<R>("policy.edge_embedding", edge));
        a.extend(self.row::<R>("policy.entity_embedding", tail));
        a
    }

    /// Sum of step log-probabilities of `actions` from `central`, plus
    /// `entropy_weight` times the summed step entropies.
    pub fn walk<R: Real>(&self, questions: &[Vec<usize>], central: usize, actions: &[usize], entropy_weight: f64) -> R {
        let lq = self.query::<R>(questions);
        let d = self.dim;
        let mut x0 = self.row::<R>("policy.entity_embedding", central);
        x0.extend(lq.iter().copied());
        x0.extend(vec![R::zero(); d]);
        let (mut g, mut c) = self.lstm("policy.history", &x0, &vec![R::zero(); d], &vec![R::zero(); d]);
        let mut node = central;
        let mut total = R::zero();
        for (t, &idx) in actions.iter().enumerate() {
            let out = self.graph.outgoing(node).unwrap();
            let mut ctx = self.row::<R>("policy.entity_embedding", node);
            ctx.extend(lq.iter().copied());
            ctx.extend(g.iter().copied());
            let f = self.ffn("policy.score", &ctx);
            let embs: Vec<Vec<R>> = out.iter().map(|a| self.action(a.relation, a.edge, a.tail)).collect();
            let scores: Vec<R> = embs
                .iter()
                .map(|a| a.iter().zip(&f).fold(R::zero(), |s, (&x, &y)| s + x * y))
                .collect();
            let m = scores.iter().copied().fold(scores[0], |a, b| if b > a { b } else { a });
            let z = scores.iter().fold(R::zero(), |s, &v| s + (v - m).exp());
            let lse = m + z.ln();
            total = total + scores[idx] - lse;
            if entropy_weight != 0.0 {
                let h = scores.iter().fold(R::zero(), |s, &v| {
                    let lp = v - lse;
                    s - lp.exp() * lp
                });
                total = total + R::of(entropy_weight) * h;
            }
            node = out[idx].tail;
            if t + 1 < actions.len() {
                (g, c) = self.lstm("policy.history", &embs[idx], &g, &c);
            }
        }
        total
    }
}
