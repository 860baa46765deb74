use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{AdError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct AdamState {
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) step: u64,
}

/// Named learnable tensors, their accumulated gradients and optimizer moments.
///
/// Parameters keep insertion order; that order is also the checkpoint order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    index: BTreeMap<String, ParamId>,
    values: Vec<Tensor>,
    grads: Vec<Option<Vec<f64>>>,
    pub(crate) adam: Vec<AdamState>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(AdError::DuplicateName(name));
        }
        let id = ParamId(self.values.len());
        let n = value.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value.with_requires_grad(true));
        self.grads.push(None);
        self.adam.push(AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        });
        Ok(id)
    }

    /// Weight matrix drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        self.add(name, Tensor::from_vec(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    /// Overwrites a parameter with a same-shaped tensor.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let cur = &self.values[id.0];
        if cur.shape() != value.shape() {
            return Err(AdError::ShapeMismatch {
                op: "set_value",
                left: cur.shape(),
                right: value.shape(),
            });
        }
        self.values[id.0] = value.with_requires_grad(true);
        Ok(())
    }

    pub fn entry(&self, id: ParamId, flat: usize) -> f64 {
        self.values[id.0].data()[flat]
    }

    pub fn set_entry(&mut self, id: ParamId, flat: usize, v: f64) {
        self.values[id.0].data_mut()[flat] = v;
    }

    pub(crate) fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    pub fn grad_mut(&mut self, id: ParamId) -> Option<&mut Vec<f64>> {
        self.grads[id.0].as_mut()
    }

    pub(crate) fn take_grad(&mut self, id: ParamId) -> Option<Vec<f64>> {
        self.grads[id.0].take()
    }

    /// Adds `g` into the gradient slot, creating it if absent.
    pub fn accumulate_grad(&mut self, id: ParamId, g: &[f64]) {
        let slot = self.grads[id.0].get_or_insert_with(|| vec![0.0; g.len()]);
        for (s, x) in slot.iter_mut().zip(g) {
            *s += x;
        }
    }

    pub(crate) fn ensure_grad(&mut self, id: ParamId) {
        let n = self.values[id.0].len();
        self.grads[id.0].get_or_insert_with(|| vec![0.0; n]);
    }

    pub fn clear_grads(&mut self) {
        for g in &mut self.grads {
            *g = None;
        }
    }

    /// True when names, shapes and values agree bit for bit.
    pub fn same_values(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| {
                    a.shape() == b.shape()
                        && a.data()
                            .iter()
                            .zip(b.data())
                            .all(|(x, y)| x.to_bits() == y.to_bits())
                })
    }
}
