//! Named parameter tensors and their gradient accumulators.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Stable handle to a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A dense rank-1 or rank-2 tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    name: String,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.dims.first().copied().unwrap_or(1)
    }

    /// Row width; vectors are treated as a single column.
    pub fn cols(&self) -> usize {
        self.dims.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }
}

/// Gradient buffers laid out exactly like the parameters of one store.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            tensors: store.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.tensors.iter().map(Vec::as_slice)
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Gradients) {
        self.add_scaled(other, 1.0);
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        assert_eq!(self.tensors.len(), other.tensors.len(), "gradient layouts differ");
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn max_abs_diff(&self, other: &Gradients) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .zip(other.tensors.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }
}

/// Ordered collection of named parameters, each paired with a gradient
/// accumulator of identical shape.
#[derive(Clone, Debug)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
    grads: Gradients,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            index: HashMap::new(),
            grads: Gradients { tensors: Vec::new() },
        }
    }

    /// Registers a tensor. Rank must be 1 or 2 and names must be unique.
    pub fn add(&mut self, name: impl Into<String>, dims: &[usize], data: Vec<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        if dims.is_empty() || dims.len() > 2 {
            return Err(Error::shape("rank 1 or 2", format!("rank {}", dims.len())));
        }
        let numel: usize = dims.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                format!("{numel} elements for {dims:?}"),
                format!("{} elements", data.len()),
            ));
        }
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.grads.tensors.push(vec![0.0; data.len()]);
        self.params.push(Param {
            name,
            dims: dims.to_vec(),
            data,
        });
        Ok(id)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, dims: &[usize]) -> Result<ParamId> {
        let numel = dims.iter().product();
        self.add(name, dims, vec![0.0; numel])
    }

    /// Registers a tensor drawn uniformly from `[-bound, bound]`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        dims: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let numel: usize = dims.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.add(name, dims, data)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].data
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].data
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn grads(&self) -> &Gradients {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut Gradients {
        &mut self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.zero();
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        self.grads.add_assign(grads);
    }

    /// Plain gradient descent on the accumulated gradient: `θ -= lr * ∇`.
    pub fn sgd_step(&mut self, lr: f64) {
        for (p, g) in self.params.iter_mut().zip(&self.grads.tensors) {
            for (x, d) in p.data.iter_mut().zip(g) {
                *x -= lr * d;
            }
        }
    }

    /// Overwrites every tensor with uniform draws from `[-bound, bound]`,
    /// in registration order.
    pub fn reinit_uniform<R: Rng>(&mut self, bound: f64, rng: &mut R) {
        for p in &mut self.params {
            p.data.iter_mut().for_each(|x| *x = rng.gen_range(-bound..=bound));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|x| x.is_finite()))
    }
}
