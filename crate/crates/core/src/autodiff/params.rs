use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};

/// Named parameter tensors plus Adam state, iterated in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pub values: Vec<Matrix>,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

/// Collects parameter shapes before the store is finalised.
#[derive(Debug, Default)]
pub struct ParamBuilder {
    shapes: BTreeMap<String, Init>,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform in ±√(6 / (fan_in + fan_out)).
    Glorot(usize, usize),
    Zeros(usize, usize),
    Ones(usize, usize),
}

impl Init {
    fn shape(self) -> (usize, usize) {
        match self {
            Init::Glorot(r, c) | Init::Zeros(r, c) | Init::Ones(r, c) => (r, c),
        }
    }
}

impl ParamBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, init: Init) {
        let name = name.into();
        let prev = self.shapes.insert(name.clone(), init);
        assert!(prev.is_none(), "duplicate parameter {name}");
    }

    /// Initialises every tensor from `seed`, in name order.
    pub fn build(self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(self.shapes.len());
        let mut values = Vec::with_capacity(self.shapes.len());
        for (name, init) in self.shapes {
            let (r, c) = init.shape();
            let m = match init {
                Init::Glorot(fan_in, fan_out) => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    Matrix::from_vec(
                        r,
                        c,
                        (0..r * c)
                            .map(|_| rng.random_range(-limit..=limit))
                            .collect(),
                    )
                }
                Init::Zeros(..) => Matrix::zeros(r, c),
                Init::Ones(..) => Matrix::from_vec(r, c, vec![1.0; r * c]),
            };
            names.push(name);
            values.push(m);
        }
        ParamStore::from_parts(names, values)
    }
}

impl ParamStore {
    /// Builds a store from name-sorted tensors with zeroed optimizer state.
    pub fn from_parts(names: Vec<String>, values: Vec<Matrix>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let m = values
            .iter()
            .map(|x| Matrix::zeros(x.rows, x.cols))
            .collect();
        let v = values
            .iter()
            .map(|x| Matrix::zeros(x.rows, x.cols))
            .collect();
        ParamStore {
            names,
            index,
            values,
            m,
            v,
            step: 0,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.values[i])
    }

    /// All parameters concatenated in name order.
    pub fn flat(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|m| m.data.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::shape(
                "set_flat",
                format!("{} values for {}", flat.len(), self.num_scalars()),
            ));
        }
        let mut off = 0;
        for m in &mut self.values {
            let n = m.len();
            m.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.values.iter().map(|m| tape.leaf(m.clone())).collect(),
            index: self.index.clone(),
        }
    }
}

/// Tape handles of a bound [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Parameter(format!("unknown parameter {name}")))
    }

    /// Parameter gradients aligned with the store's order.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Matrix> {
        self.vars.iter().map(|&v| grads.wrt(v)).collect()
    }
}
