use serde::{Deserialize, Serialize};

use super::params::{Bound, Init, ParamBuilder};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Dense layers with ReLU between them and a linear output, optionally
/// followed by a layer norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub prefix: String,
    pub widths: Vec<usize>,
    pub layer_norm: bool,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, widths: Vec<usize>, layer_norm: bool) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        Mlp {
            prefix: prefix.into(),
            widths,
            layer_norm,
        }
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn weight(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.prefix)
    }

    pub fn bias(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.prefix)
    }

    pub fn ln_gain(&self) -> String {
        format!("{}.ln_gain", self.prefix)
    }

    pub fn ln_bias(&self) -> String {
        format!("{}.ln_bias", self.prefix)
    }

    pub fn register(&self, params: &mut ParamBuilder) {
        for (l, pair) in self.widths.windows(2).enumerate() {
            params.add(self.weight(l), Init::Glorot(pair[0], pair[1]));
            params.add(self.bias(l), Init::Zeros(1, pair[1]));
        }
        if self.layer_norm {
            params.add(self.ln_gain(), Init::Ones(1, self.output_width()));
            params.add(self.ln_bias(), Init::Zeros(1, self.output_width()));
        }
    }

    /// Names of every tensor owned by this MLP.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.widths.len() - 1)
            .flat_map(|l| [self.weight(l), self.bias(l)])
            .collect();
        if self.layer_norm {
            names.push(self.ln_gain());
            names.push(self.ln_bias());
        }
        names
    }

    pub fn apply(&self, tape: &mut Tape, params: &Bound, input: Var) -> Result<Var> {
        let (_, cols) = tape.shape(input);
        if cols != self.input_width() {
            return Err(Error::shape(
                "mlp",
                format!(
                    "{} expects width {}, got {cols}",
                    self.prefix,
                    self.input_width()
                ),
            ));
        }
        let layers = self.widths.len() - 1;
        let mut h = input;
        for l in 0..layers {
            h = tape.linear(h, params.var(&self.weight(l))?, params.var(&self.bias(l))?)?;
            if l + 1 < layers {
                h = tape.relu(h)?;
            }
        }
        if self.layer_norm {
            h = tape.layer_norm(
                h,
                params.var(&self.ln_gain())?,
                params.var(&self.ln_bias())?,
            )?;
        }
        Ok(h)
    }
}
