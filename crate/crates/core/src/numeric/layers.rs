//! LSTM cell and two-layer feed-forward network built from tape primitives.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// LSTM cell weights. `weight` is `(4·hidden, input + hidden)` acting on
/// `[x ‖ h_prev]`; gate blocks are stacked as input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_uniform(format!("{prefix}.weight"), &[4 * hidden, input + hidden], bound, rng)?;
        let bias = store.add_uniform(format!("{prefix}.bias"), &[4 * hidden], bound, rng)?;
        Ok(LstmParams {
            weight,
            bias,
            input,
            hidden,
        })
    }

    /// Recovers the handles from a store by name, validating shapes.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let weight = find(store, &format!("{prefix}.weight"))?;
        let bias = find(store, &format!("{prefix}.bias"))?;
        let w = store.get(weight);
        if w.dims().len() != 2 || !w.rows().is_multiple_of(4) {
            return Err(Error::Checkpoint(format!("{} has bad shape {:?}", w.name(), w.dims())));
        }
        let hidden = w.rows() / 4;
        if w.cols() < hidden || store.get(bias).dims() != [4 * hidden] {
            return Err(Error::Checkpoint(format!("{prefix} weights are inconsistent")));
        }
        Ok(LstmParams {
            weight,
            bias,
            input: w.cols() - hidden,
            hidden,
        })
    }

    /// One cell step on the tape. Returns `(h, c)`.
    pub fn step(&self, tape: &mut Tape<'_>, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let (xl, hl, cl) = (tape.value(x).len(), tape.value(h_prev).len(), tape.value(c_prev).len());
        if xl != self.input || hl != self.hidden || cl != self.hidden {
            return Err(Error::shape(
                format!("x[{}], h[{}], c[{}]", self.input, self.hidden, self.hidden),
                format!("x[{xl}], h[{hl}], c[{cl}]"),
            ));
        }
        let n = self.hidden;
        let xh = tape.concat(&[x, h_prev])?;
        let z = tape.linear(self.weight, Some(self.bias), xh)?;
        let zi = tape.slice(z, 0, n)?;
        let zf = tape.slice(z, n, n)?;
        let zg = tape.slice(z, 2 * n, n)?;
        let zo = tape.slice(z, 3 * n, n)?;
        let i = tape.sigmoid(zi)?;
        let f = tape.sigmoid(zf)?;
        let g = tape.tanh(zg)?;
        let o = tape.sigmoid(zo)?;
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }
}

/// `y = W2 · relu(W1 · x + b1) + b2`
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FfnParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FfnParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(FfnParams {
            w1: store.add_uniform(format!("{prefix}.w1"), &[hidden, input], bound, rng)?,
            b1: store.add_uniform(format!("{prefix}.b1"), &[hidden], bound, rng)?,
            w2: store.add_uniform(format!("{prefix}.w2"), &[output, hidden], bound, rng)?,
            b2: store.add_uniform(format!("{prefix}.b2"), &[output], bound, rng)?,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(FfnParams {
            w1: find(store, &format!("{prefix}.w1"))?,
            b1: find(store, &format!("{prefix}.b1"))?,
            w2: find(store, &format!("{prefix}.w2"))?,
            b2: find(store, &format!("{prefix}.b2"))?,
        })
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w1).cols()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w2).rows()
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let hidden = tape.linear(self.w1, Some(self.b1), x)?;
        let act = tape.relu(hidden)?;
        tape.linear(self.w2, Some(self.b2), act)
    }
}

fn find(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .id(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))
}

/// Value-level LSTM step on a throwaway tape.
pub fn lstm_step(store: &ParamStore, cell: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new(store);
    let (xv, hv, cv) = (tape.input(x.to_vec()), tape.input(h_prev.to_vec()), tape.input(c_prev.to_vec()));
    let (h, c) = cell.step(&mut tape, xv, hv, cv)?;
    Ok((tape.value(h).to_vec(), tape.value(c).to_vec()))
}

/// Value-level feed-forward pass on a throwaway tape.
pub fn ffn(store: &ParamStore, net: &FfnParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new(store);
    let xv = tape.input(x.to_vec());
    let y = net.forward(&mut tape, xv)?;
    Ok(tape.value(y).to_vec())
}
