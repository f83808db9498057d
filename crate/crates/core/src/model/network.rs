use std::sync::Arc;

use super::config::{GeoAgg, ModelConfig};
use super::features::{Inputs, Topology};
use crate::autodiff::{Bound, Matrix, Mlp, ParamBuilder, Tape, Var};
use crate::error::Result;
use crate::mesh::NodeType;

/// Normalized aggregation weights of one forward pass, all `n × 1`.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients {
    /// Per cell over its vertices, in `cv_*` order.
    pub cell_vertex: Var,
    /// The same raw scores normalized per vertex over its cells.
    pub vertex_cell: Var,
    pub facet_vertex: Var,
    /// Per cell over its facets, in `cf_*` order.
    pub cell_facet: Var,
    /// The same raw scores normalized per facet over its cells.
    pub facet_cell: Var,
}

/// Handles into one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Trace {
    pub h_v0: Var,
    pub h_v: Var,
    /// Standardized per-vertex `[Δx, Δq]`.
    pub output: Var,
    pub coefficients: Option<Coefficients>,
}

struct Layer {
    v2c: Mlp,
    v2f: Mlp,
    to_f: Mlp,
    to_c: Mlp,
    to_v: Mlp,
    ffn: Mlp,
}

pub(crate) struct ElementNet {
    enc_vertex: Mlp,
    enc_cell: Mlp,
    enc_facet: Mlp,
    enc_contact: Mlp,
    enc_script: Mlp,
    coef_cell: Mlp,
    coef_facet: Mlp,
    coef_incidence: Mlp,
    contact: Mlp,
    layers: Vec<Layer>,
    decoder: Mlp,
    geo_agg: GeoAgg,
    latent: usize,
}

fn weighted_sum(
    tape: &mut Tape,
    x: Var,
    from: &Arc<[usize]>,
    w: Var,
    to: &Arc<[usize]>,
    rows: usize,
) -> Result<Var> {
    let g = tape.gather_rows(x, from.clone())?;
    let s = tape.scale_rows(g, w)?;
    tape.scatter_add(s, to.clone(), rows)
}

impl ElementNet {
    pub(crate) fn new(c: &ModelConfig) -> Self {
        let k = c.cell_type.arity();
        let m = c.cell_type.facet_arity();
        let lat = c.latent;
        let mlp = |name: &str, i: usize, o: usize, ln: bool| Mlp::new(name, c.widths(i, o), ln);
        ElementNet {
            enc_vertex: mlp("enc.vertex", NodeType::COUNT + 3 + c.quantities, lat, true),
            enc_cell: mlp("enc.cell", 4, lat, true),
            enc_facet: mlp("enc.facet", 4, lat, true),
            enc_contact: mlp("enc.contact", crate::contact::feature_dim(m, m), lat, true),
            enc_script: mlp("enc.script", 4 * m, lat, true),
            coef_cell: mlp("coef.cell", 3 * k, k, false),
            coef_facet: mlp("coef.facet", 3 * m, m, false),
            coef_incidence: mlp("coef.incidence", 7, 1, false),
            contact: mlp("proc.contact", 2 * lat, lat, true),
            layers: (0..c.layers)
                .map(|l| Layer {
                    v2c: mlp(&format!("proc.{l}.v2c"), 2 * lat, lat, true),
                    v2f: mlp(&format!("proc.{l}.v2f"), 2 * lat, lat, true),
                    to_f: mlp(&format!("proc.{l}.to_f"), 4 * lat, lat, true),
                    to_c: mlp(&format!("proc.{l}.to_c"), 2 * lat, lat, true),
                    to_v: mlp(&format!("proc.{l}.to_v"), 2 * lat, lat, true),
                    ffn: Mlp::new(format!("proc.{l}.ffn"), vec![lat, 2 * lat, lat], false),
                })
                .collect(),
            decoder: mlp("dec", lat, c.output_width(), false),
            geo_agg: c.geo_agg,
            latent: lat,
        }
    }

    fn mlps(&self) -> Vec<&Mlp> {
        let mut v = vec![
            &self.enc_vertex,
            &self.enc_cell,
            &self.enc_facet,
            &self.enc_contact,
            &self.enc_script,
            &self.contact,
            &self.decoder,
        ];
        if self.geo_agg == GeoAgg::Learned {
            v.extend([&self.coef_cell, &self.coef_facet, &self.coef_incidence]);
        }
        for l in &self.layers {
            v.extend([&l.v2c, &l.v2f, &l.to_f, &l.to_c, &l.to_v, &l.ffn]);
        }
        v
    }

    pub(crate) fn register(&self, b: &mut ParamBuilder) {
        for m in self.mlps() {
            m.register(b);
        }
    }

    fn scores(&self, tape: &mut Tape, p: &Bound, mlp: &Mlp, input: &Matrix) -> Result<Var> {
        let n = input.rows * mlp.output_width();
        match self.geo_agg {
            GeoAgg::Uniform => Ok(tape.constant(Matrix::zeros(n, 1))),
            GeoAgg::Learned => {
                let x = tape.constant(input.clone());
                let s = mlp.apply(tape, p, x)?;
                tape.reshape(s, n, 1)
            }
        }
    }

    fn coefficients(
        &self,
        tape: &mut Tape,
        p: &Bound,
        topo: &Topology,
        x: &Inputs,
    ) -> Result<Coefficients> {
        let (nv, nc, nf) = (topo.num_vertices(), topo.num_cells(), topo.num_facets());
        let s_cv = self.scores(tape, p, &self.coef_cell, &x.cell_local)?;
        let s_fv = self.scores(tape, p, &self.coef_facet, &x.facet_local)?;
        let s_cf = self.scores(tape, p, &self.coef_incidence, &x.incidence)?;
        Ok(Coefficients {
            cell_vertex: tape.segment_softmax(s_cv, topo.cv_cell.clone(), nc)?,
            vertex_cell: tape.segment_softmax(s_cv, topo.cv_vertex.clone(), nv)?,
            facet_vertex: tape.segment_softmax(s_fv, topo.fv_facet.clone(), nf)?,
            cell_facet: tape.segment_softmax(s_cf, topo.cf_cell.clone(), nc)?,
            facet_cell: tape.segment_softmax(s_cf, topo.cf_facet.clone(), nf)?,
        })
    }

    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        topo: &Topology,
        x: &Inputs,
    ) -> Result<Trace> {
        let (nv, nc, nf) = (topo.num_vertices(), topo.num_cells(), topo.num_facets());
        let encode = |tape: &mut Tape, mlp: &Mlp, m: &Matrix| -> Result<Var> {
            let c = tape.constant(m.clone());
            mlp.apply(tape, p, c)
        };
        let h_v0 = encode(tape, &self.enc_vertex, &x.vertex)?;
        let h_c0 = encode(tape, &self.enc_cell, &x.cell)?;
        let h_f0 = encode(tape, &self.enc_facet, &x.facet)?;
        let h_s = encode(tape, &self.enc_script, &x.script_facet)?;
        let h_e = if x.contact.rows > 0 {
            Some(encode(tape, &self.enc_contact, &x.contact)?)
        } else {
            None
        };
        let a = self.coefficients(tape, p, topo, x)?;
        let no_contact = tape.constant(Matrix::zeros(nf, self.latent));

        let mut h_v = h_v0;
        for layer in &self.layers {
            let agg_c = weighted_sum(tape, h_v, &topo.cv_vertex, a.cell_vertex, &topo.cv_cell, nc)?;
            let in_c = tape.concat(&[h_c0, agg_c])?;
            let h_c = layer.v2c.apply(tape, p, in_c)?;
            let agg_f = weighted_sum(
                tape,
                h_v,
                &topo.fv_vertex,
                a.facet_vertex,
                &topo.fv_facet,
                nf,
            )?;
            let in_f = tape.concat(&[h_f0, agg_f])?;
            let h_f = layer.v2f.apply(tape, p, in_f)?;

            let contact_sum = match h_e {
                Some(h_e) => {
                    let recv = tape.gather_rows(h_f, x.contact_receiver.clone())?;
                    let pair = tape.concat(&[h_e, recv])?;
                    let msg = self.contact.apply(tape, p, pair)?;
                    tape.scatter_add(msg, x.contact_receiver.clone(), nf)?
                }
                None => no_contact,
            };
            let cells_to_f =
                weighted_sum(tape, h_c, &topo.cf_cell, a.facet_cell, &topo.cf_facet, nf)?;
            let in_mf = tape.concat(&[h_s, contact_sum, h_f, cells_to_f])?;
            let m_f = layer.to_f.apply(tape, p, in_mf)?;

            let facets_to_c =
                weighted_sum(tape, m_f, &topo.cf_facet, a.cell_facet, &topo.cf_cell, nc)?;
            let in_mc = tape.concat(&[h_c, facets_to_c])?;
            let m_c = layer.to_c.apply(tape, p, in_mc)?;

            let cells_to_v =
                weighted_sum(tape, m_c, &topo.cv_cell, a.vertex_cell, &topo.cv_vertex, nv)?;
            let in_mv = tape.concat(&[h_v, cells_to_v])?;
            let m_v = layer.to_v.apply(tape, p, in_mv)?;
            let u = tape.add(h_v, m_v)?;
            let f = layer.ffn.apply(tape, p, u)?;
            h_v = tape.add(u, f)?;
        }
        let output = self.decoder.apply(tape, p, h_v)?;
        Ok(Trace {
            h_v0,
            h_v,
            output,
            coefficients: Some(a),
        })
    }
}

struct NodeLayer {
    mesh_edge: Mlp,
    world_edge: Mlp,
    node: Mlp,
}

/// Vertex-only encode–process–decode network over mesh and world edges.
pub(crate) struct NodeNet {
    enc_vertex: Mlp,
    enc_mesh_edge: Mlp,
    enc_world_edge: Mlp,
    layers: Vec<NodeLayer>,
    decoder: Mlp,
    latent: usize,
}

impl NodeNet {
    pub(crate) fn new(c: &ModelConfig) -> Self {
        let lat = c.latent;
        let mlp = |name: &str, i: usize, o: usize, ln: bool| Mlp::new(name, c.widths(i, o), ln);
        NodeNet {
            enc_vertex: mlp(
                "enc.vertex",
                NodeType::COUNT + 3 + c.quantities + 8,
                lat,
                true,
            ),
            enc_mesh_edge: mlp("enc.mesh_edge", 8, lat, true),
            enc_world_edge: mlp("enc.world_edge", 4, lat, true),
            layers: (0..c.layers)
                .map(|l| NodeLayer {
                    mesh_edge: mlp(&format!("proc.{l}.mesh_edge"), 3 * lat, lat, true),
                    world_edge: mlp(&format!("proc.{l}.world_edge"), 3 * lat, lat, true),
                    node: mlp(&format!("proc.{l}.node"), 3 * lat, lat, true),
                })
                .collect(),
            decoder: mlp("dec", lat, c.output_width(), false),
            latent: lat,
        }
    }

    pub(crate) fn register(&self, b: &mut ParamBuilder) {
        for m in [
            &self.enc_vertex,
            &self.enc_mesh_edge,
            &self.enc_world_edge,
            &self.decoder,
        ] {
            m.register(b);
        }
        for l in &self.layers {
            for m in [&l.mesh_edge, &l.world_edge, &l.node] {
                m.register(b);
            }
        }
    }

    fn edge_update(
        tape: &mut Tape,
        p: &Bound,
        mlp: &Mlp,
        e: Var,
        h: Var,
        src: &Arc<[usize]>,
        dst: &Arc<[usize]>,
    ) -> Result<Var> {
        let hs = tape.gather_rows(h, src.clone())?;
        let hd = tape.gather_rows(h, dst.clone())?;
        let cat = tape.concat(&[e, hs, hd])?;
        let d = mlp.apply(tape, p, cat)?;
        tape.add(e, d)
    }

    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        topo: &Topology,
        x: &Inputs,
    ) -> Result<Trace> {
        let nv = topo.num_vertices();
        let xv = tape.constant(x.vertex.clone());
        let h_v0 = self.enc_vertex.apply(tape, p, xv)?;
        let xm = tape.constant(x.mesh_edge.clone());
        let mut e_m = self.enc_mesh_edge.apply(tape, p, xm)?;
        let mut e_w = if x.world_edge.rows > 0 {
            let xw = tape.constant(x.world_edge.clone());
            Some(self.enc_world_edge.apply(tape, p, xw)?)
        } else {
            None
        };
        let zeros = tape.constant(Matrix::zeros(nv, self.latent));
        let mut h = h_v0;
        for layer in &self.layers {
            e_m = Self::edge_update(
                tape,
                p,
                &layer.mesh_edge,
                e_m,
                h,
                &topo.edge_src,
                &topo.edge_dst,
            )?;
            let agg_m = tape.scatter_add(e_m, topo.edge_dst.clone(), nv)?;
            let agg_w = match e_w {
                Some(e) => {
                    let e = Self::edge_update(
                        tape,
                        p,
                        &layer.world_edge,
                        e,
                        h,
                        &x.world_src,
                        &x.world_dst,
                    )?;
                    e_w = Some(e);
                    tape.scatter_add(e, x.world_dst.clone(), nv)?
                }
                None => zeros,
            };
            let cat = tape.concat(&[h, agg_m, agg_w])?;
            let d = layer.node.apply(tape, p, cat)?;
            h = tape.add(h, d)?;
        }
        let output = self.decoder.apply(tape, p, h)?;
        Ok(Trace {
            h_v0,
            h_v: h,
            output,
            coefficients: None,
        })
    }
}
