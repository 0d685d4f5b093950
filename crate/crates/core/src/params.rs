//! Named parameter registry.

use std::ops::Index;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Position of a parameter in its [`ParamLayout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(-bound, bound)`.
    Uniform(f64),
    Zeros,
    Ones,
}

impl Init {
    /// Fan-in scaled uniform initialization, `bound = 1 / sqrt(fan_in)`.
    pub fn fan_in(fan_in: usize) -> Self {
        Init::Uniform(1.0 / (fan_in.max(1) as f64).sqrt())
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

/// Ordered declaration of every parameter a model owns.
#[derive(Clone, Debug, Default)]
pub struct ParamLayout {
    entries: Vec<Entry>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> ParamId {
        self.entries.push(Entry { name: name.into(), shape: shape.to_vec(), init });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.entries.iter().map(|e| (e.name.as_str(), e.shape.as_slice()))
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.shape.iter().product::<usize>()).sum()
    }

    /// Seeded initialization, one value stream for the whole layout.
    pub fn init(&self, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = IndexMap::with_capacity(self.entries.len());
        for e in &self.entries {
            let n: usize = e.shape.iter().product();
            let data = match e.init {
                Init::Uniform(b) => (0..n).map(|_| rng.random_range(-b..=b)).collect(),
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
            };
            tensors.insert(e.name.clone(), Tensor::from_parts(e.shape.clone(), data));
        }
        ModelParams { tensors }
    }

    /// Checks that `params` has exactly this layout's names and shapes, in order.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if params.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                self.entries.len(),
                params.len()
            )));
        }
        for (e, (name, t)) in self.entries.iter().zip(params.iter()) {
            if e.name != name || e.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter mismatch: expected {} {:?}, found {} {:?}",
                    e.name,
                    e.shape,
                    name,
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Concrete parameter values, ordered as in the owning [`ParamLayout`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelParams {
    tensors: IndexMap<String, Tensor>,
}

impl ModelParams {
    pub fn from_named(named: Vec<(String, Tensor)>) -> Self {
        ModelParams { tensors: named.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn by_id(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn by_id_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.values_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Rounds every value to `f32`, the precision checkpoints store.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors.values_mut() {
            t.round_to_f32();
        }
    }

    /// Pushes every parameter onto `tape`, as differentiable leaves when
    /// `trainable`, otherwise as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Bound> {
        let mut vars = Vec::with_capacity(self.tensors.len());
        for t in self.tensors.values() {
            let v = if trainable { tape.leaf(t.clone())? } else { tape.constant(t.clone())? };
            vars.push(v);
        }
        Ok(Bound(vars))
    }
}

/// Parameters bound to tape variables, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Wraps tape variables already pushed in layout order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}
