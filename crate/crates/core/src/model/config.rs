use serde::{Deserialize, Serialize};

use crate::contact::SpanAnchor;
use crate::error::{Error, Result};
use crate::mesh::CellType;

/// How vertex-to-element aggregation weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoAgg {
    #[default]
    Learned,
    /// Every weight is one over the group size (ablation A).
    Uniform,
}

/// Whether volume, area and perimeter features reach the element encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoFeats {
    #[default]
    On,
    /// Element encoder inputs are replaced by zeros (ablation B).
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub latent: usize,
    pub layers: usize,
    /// Hidden widths of every MLP.
    pub hidden: Vec<usize>,
    /// Per-vertex physical quantities besides position.
    pub quantities: usize,
    pub cell_type: CellType,
    /// Facet contact radius.
    pub contact_radius: f64,
    /// Vertex world-edge radius, used only without explicit elements.
    pub world_radius: f64,
    pub span_anchor: SpanAnchor,
    pub self_contact: bool,
    pub geo_agg: GeoAgg,
    pub geo_feats: GeoFeats,
    /// With `false`, a vertex-only message passing network over mesh and
    /// world edges replaces the cell–facet processor (ablation C).
    pub explicit_elements: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk()
    }
}

impl ModelConfig {
    /// Small enough to train on one CPU core in minutes.
    pub fn desk() -> Self {
        ModelConfig {
            latent: 48,
            layers: 6,
            hidden: vec![48],
            quantities: 1,
            cell_type: CellType::Hex,
            contact_radius: 0.06,
            world_radius: 0.06,
            span_anchor: SpanAnchor::Own,
            self_contact: false,
            geo_agg: GeoAgg::Learned,
            geo_feats: GeoFeats::On,
            explicit_elements: true,
        }
    }

    /// Latent width 128 with 15 processor layers.
    pub fn large_latent() -> Self {
        ModelConfig {
            latent: 128,
            layers: 15,
            hidden: vec![128, 128],
            ..ModelConfig::desk()
        }
    }

    /// Hidden widths [96, 96] with 15 processor layers.
    pub fn large_table() -> Self {
        ModelConfig {
            latent: 96,
            layers: 15,
            hidden: vec![96, 96],
            ..ModelConfig::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "large-128" => Ok(Self::large_latent()),
            "large-96" => Ok(Self::large_table()),
            _ => Err(Error::Parameter(format!(
                "unknown preset {name:?} (expected desk, large-128 or large-96)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 {
            return Err(Error::Parameter("latent width must be positive".into()));
        }
        if self.layers == 0 {
            return Err(Error::Parameter(
                "at least one processor layer is required".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Parameter("hidden widths must be positive".into()));
        }
        for (name, r) in [
            ("contact_radius", self.contact_radius),
            ("world_radius", self.world_radius),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    /// Width of the decoded per-vertex delta: position plus quantities.
    pub fn output_width(&self) -> usize {
        3 + self.quantities
    }

    /// MLP widths `[input, hidden…, output]`.
    pub(crate) fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(input);
        w.extend_from_slice(&self.hidden);
        w.push(output);
        w
    }
}
