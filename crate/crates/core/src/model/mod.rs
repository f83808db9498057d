//! The cell–facet network: element encoders, geometric aggregation, two-stage
//! cell–facet message passing, disaggregation back to vertices, and the
//! decoder. A vertex-only network stands in when explicit elements are off.

mod config;
mod features;
mod network;

pub use config::{GeoAgg, GeoFeats, ModelConfig};
pub use features::{
    target_deltas, world_edges, Inputs, Normalizers, RawFeatures, StepInput, Topology,
};
pub use network::{Coefficients, Trace};

use network::{ElementNet, NodeNet};

use crate::autodiff::{Bound, Matrix, ParamBuilder, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::mesh::{NodeType, Point};

enum Net {
    Element(ElementNet),
    Node(NodeNet),
}

pub struct Model {
    pub config: ModelConfig,
    net: Net,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let net = if config.explicit_elements {
            Net::Element(ElementNet::new(&config))
        } else {
            Net::Node(NodeNet::new(&config))
        };
        Ok(Model { config, net })
    }

    pub fn param_builder(&self) -> ParamBuilder {
        let mut b = ParamBuilder::new();
        match &self.net {
            Net::Element(n) => n.register(&mut b),
            Net::Node(n) => n.register(&mut b),
        }
        b
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        self.param_builder().build(seed)
    }

    /// Errors unless `store` holds exactly this model's tensors.
    pub fn check_params(&self, store: &ParamStore) -> Result<()> {
        let expected = self.init_params(0);
        if expected.names() != store.names() {
            return Err(Error::Data(
                "checkpoint parameters do not match the model configuration".into(),
            ));
        }
        for (name, (a, b)) in store
            .names()
            .iter()
            .zip(expected.values.iter().zip(&store.values))
        {
            if a.shape() != b.shape() {
                return Err(Error::Data(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        topo: &Topology,
        inputs: &Inputs,
    ) -> Result<Trace> {
        match &self.net {
            Net::Element(n) => n.forward(tape, params, topo, inputs),
            Net::Node(n) => n.forward(tape, params, topo, inputs),
        }
    }

    /// Builds features for `step` and returns the standardized deltas.
    pub fn predict(
        &self,
        params: &ParamStore,
        topo: &Topology,
        norms: &Normalizers,
        step: &StepInput,
    ) -> Result<Matrix> {
        let raw = RawFeatures::compute(topo, step, &self.config)?;
        let inputs = Inputs::new(topo, &raw, norms, &self.config);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let trace = self.forward(&mut tape, &bound, topo, &inputs)?;
        Ok(tape.value(trace.output).clone())
    }
}

/// Positions and quantities of the next frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NextState {
    pub positions: Vec<Point>,
    pub quantities: Vec<Vec<f64>>,
}

/// De-standardizes predicted deltas and integrates them.
///
/// Scripted vertices jump to their targets, obstacle vertices without a
/// target stay put, and kinematic vertices keep their quantities.
pub fn decode_update(
    topo: &Topology,
    norms: &Normalizers,
    step: &StepInput,
    standardized: &Matrix,
) -> Result<NextState> {
    let nv = topo.num_vertices();
    if standardized.rows != nv || standardized.cols != norms.output.dim() {
        return Err(Error::shape(
            "decode",
            format!("{:?} deltas for {nv} vertices", standardized.shape()),
        ));
    }
    let deltas = norms.output.destandardize(standardized);
    let mut positions = Vec::with_capacity(nv);
    let mut quantities = Vec::with_capacity(nv);
    for v in 0..nv {
        let x = step.cur[v];
        let q = &step.quantities[v];
        let kind = topo.mesh.node_type[v];
        if kind.is_kinematic() {
            let p = match (kind, step.targets[v]) {
                (_, Some(t)) => t,
                (NodeType::Scripted, None) => {
                    return Err(Error::Data(format!(
                        "scripted vertex {v} has no target position"
                    )));
                }
                _ => x,
            };
            positions.push(p);
            quantities.push(q.clone());
        } else {
            let d = deltas.row(v);
            positions.push([x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
            quantities.push(q.iter().zip(&d[3..]).map(|(a, b)| a + b).collect());
        }
    }
    Ok(NextState {
        positions,
        quantities,
    })
}
