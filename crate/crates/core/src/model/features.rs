//! Turns one simulation frame into the standardized input matrices of the
//! network.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{GeoFeats, ModelConfig};
use crate::autodiff::Matrix;
use crate::contact::{self, Aabb, ContactPair};
use crate::error::{Error, Result};
use crate::geometry::{norm, sub, MeshGeometry};
use crate::mesh::{extract_facets, CanonicalElements, FacetSet, Mesh, NodeType, Point};
use crate::training::Normalizer;

/// Connectivity shared by every frame of a trajectory.
#[derive(Debug, Clone)]
pub struct Topology {
    /// The mesh at its reference configuration.
    pub mesh: Mesh,
    pub facets: FacetSet,
    /// Canonical vertex order of every element, fixed at the reference.
    pub canon: CanonicalElements,
    pub reference: MeshGeometry,
    /// Cell–vertex incidences, cell major, canonical slot order.
    pub cv_cell: Arc<[usize]>,
    pub cv_vertex: Arc<[usize]>,
    pub fv_facet: Arc<[usize]>,
    pub fv_vertex: Arc<[usize]>,
    /// Cell–facet incidences, cell major, local face order.
    pub cf_cell: Arc<[usize]>,
    pub cf_facet: Arc<[usize]>,
    /// `+1` where the stored facet normal points out of the incident cell.
    pub cf_sign: Vec<f64>,
    /// Directed mesh edges, both directions of every cell edge.
    pub edge_src: Arc<[usize]>,
    pub edge_dst: Arc<[usize]>,
    /// Vertices whose motion is predicted.
    pub normal_vertices: Arc<[usize]>,
}

impl Topology {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        mesh.check()?;
        let facets = extract_facets(mesh)?;
        let canon = CanonicalElements::new(mesh, &facets, &mesh.vertices);
        let reference = MeshGeometry::compute(mesh, &facets, &canon, &mesh.vertices)?;

        let flatten = |groups: &[Vec<usize>]| -> (Arc<[usize]>, Arc<[usize]>) {
            let owner: Vec<usize> = groups
                .iter()
                .enumerate()
                .flat_map(|(g, ids)| ids.iter().map(move |_| g))
                .collect();
            let member: Vec<usize> = groups.iter().flatten().copied().collect();
            (owner.into(), member.into())
        };
        let (cv_cell, cv_vertex) = flatten(&canon.cells);
        let (fv_facet, fv_vertex) = flatten(&canon.facets);
        let (cf_cell, cf_facet) = flatten(&facets.cell_to_facets);
        let cf_sign = cf_cell
            .iter()
            .zip(cf_facet.iter())
            .map(|(&c, &f)| {
                if facets.facet_to_cells[f][0] == c {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();

        let mut src = Vec::new();
        let mut dst = Vec::new();
        for [a, b] in mesh.edges() {
            src.extend([a, b]);
            dst.extend([b, a]);
        }
        let normal_vertices: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&v| !mesh.node_type[v].is_kinematic())
            .collect();

        Ok(Topology {
            mesh: mesh.clone(),
            facets,
            canon,
            reference,
            cv_cell,
            cv_vertex,
            fv_facet,
            fv_vertex,
            cf_cell,
            cf_facet,
            cf_sign,
            edge_src: src.into(),
            edge_dst: dst.into(),
            normal_vertices: normal_vertices.into(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn geometry(&self, positions: &[Point]) -> Result<MeshGeometry> {
        MeshGeometry::compute(&self.mesh, &self.facets, &self.canon, positions)
    }
}

/// State needed to predict one step ahead.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub prev: &'a [Point],
    pub cur: &'a [Point],
    pub quantities: &'a [Vec<f64>],
    /// Next positions of scripted vertices, indexed by vertex.
    pub targets: &'a [Option<Point>],
}

/// Unstandardized features of one frame.
#[derive(Debug, Clone)]
pub struct RawFeatures {
    pub one_hot: Matrix,
    /// Velocity then quantities.
    pub vertex: Matrix,
    /// Scripted flag then next-step displacement.
    pub script: Matrix,
    /// Volume and surface area now, then at the reference.
    pub cell: Matrix,
    /// Area and perimeter now, then at the reference.
    pub facet: Matrix,
    pub cell_local: Matrix,
    pub facet_local: Matrix,
    /// Centroid offset, outward normal, and area ratio per incidence.
    pub incidence: Matrix,
    pub contacts: Vec<ContactPair>,
    pub contact: Matrix,
    pub mesh_edge: Matrix,
    pub world_edges: Vec<[usize; 2]>,
    pub world_edge: Matrix,
}

fn flatten_points(rows: &[Vec<Point>]) -> Matrix {
    let cols = rows.first().map_or(0, |r| 3 * r.len());
    Matrix::from_vec(
        rows.len(),
        cols,
        rows.iter()
            .flat_map(|r| r.iter().flatten().copied())
            .collect(),
    )
}

fn with_length(d: Point) -> [f64; 4] {
    [d[0], d[1], d[2], norm(&d)]
}

/// Cross-body vertex pairs within `radius`, both directions, sorted.
pub fn world_edges(mesh: &Mesh, positions: &[Point], radius: f64) -> Result<Vec<[usize; 2]>> {
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    let boxes: Vec<Aabb> = positions.iter().map(|p| Aabb::from_points(&[*p])).collect();
    let bvh = contact::build_bvh(&boxes)?;
    let mut out = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        for j in bvh.query(&boxes[i], radius) {
            if mesh.body_id[i] != mesh.body_id[j] && norm(&sub(p, &positions[j])) <= radius {
                out.push([i, j]);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

impl RawFeatures {
    pub fn compute(topo: &Topology, input: &StepInput, config: &ModelConfig) -> Result<Self> {
        let mesh = &topo.mesh;
        let nv = mesh.num_vertices();
        let q = config.quantities;
        if input.prev.len() != nv
            || input.cur.len() != nv
            || input.quantities.len() != nv
            || input.targets.len() != nv
        {
            return Err(Error::shape(
                "features",
                format!("frame data does not cover {nv} vertices"),
            ));
        }
        if let Some(row) = input.quantities.iter().find(|r| r.len() != q) {
            return Err(Error::shape(
                "features",
                format!("{} quantities per vertex, model expects {q}", row.len()),
            ));
        }
        if mesh.cell_type != config.cell_type {
            return Err(Error::Parameter(format!(
                "model built for {:?} cells, mesh has {:?}",
                config.cell_type, mesh.cell_type
            )));
        }

        let mut one_hot = Matrix::zeros(nv, NodeType::COUNT);
        let mut vertex = Matrix::zeros(nv, 3 + q);
        let mut script = Matrix::zeros(nv, 4);
        for v in 0..nv {
            one_hot
                .row_mut(v)
                .copy_from_slice(&mesh.node_type[v].one_hot());
            let vel = sub(&input.cur[v], &input.prev[v]);
            let row = vertex.row_mut(v);
            row[..3].copy_from_slice(&vel);
            row[3..].copy_from_slice(&input.quantities[v]);
            if mesh.node_type[v] == NodeType::Scripted {
                let target = input.targets[v].ok_or_else(|| {
                    Error::Data(format!("scripted vertex {v} has no target position"))
                })?;
                let d = sub(&target, &input.cur[v]);
                script.row_mut(v).copy_from_slice(&[1.0, d[0], d[1], d[2]]);
            }
        }

        let geo = topo.geometry(input.cur)?;
        let reference = &topo.reference;
        let cell = Matrix::from_vec(
            geo.cells.len(),
            4,
            geo.cells
                .iter()
                .zip(&reference.cells)
                .flat_map(|(g, r)| [g.volume, g.surface_area, r.volume, r.surface_area])
                .collect(),
        );
        let facet = Matrix::from_vec(
            geo.facets.len(),
            4,
            geo.facets
                .iter()
                .zip(&reference.facets)
                .flat_map(|(g, r)| [g.area, g.perimeter, r.area, r.perimeter])
                .collect(),
        );
        let cell_local = flatten_points(
            &geo.cells
                .iter()
                .map(|g| g.local.clone())
                .collect::<Vec<_>>(),
        );
        let facet_local = flatten_points(
            &geo.facets
                .iter()
                .map(|g| g.local.clone())
                .collect::<Vec<_>>(),
        );

        let mut incidence = Matrix::zeros(topo.cf_cell.len(), 7);
        for (k, (&c, &f)) in topo.cf_cell.iter().zip(topo.cf_facet.iter()).enumerate() {
            let (cg, fg) = (&geo.cells[c], &geo.facets[f]);
            let off = sub(&fg.centroid, &cg.centroid);
            let s = topo.cf_sign[k];
            incidence.row_mut(k).copy_from_slice(&[
                off[0],
                off[1],
                off[2],
                s * fg.normal[0],
                s * fg.normal[1],
                s * fg.normal[2],
                fg.area / cg.surface_area,
            ]);
        }

        let m = mesh.cell_type.facet_arity();
        let contacts = contact::detect_contacts(
            mesh,
            &topo.facets,
            input.cur,
            config.contact_radius,
            config.self_contact,
        )?;
        let dim = contact::feature_dim(m, m);
        let contact = Matrix::from_vec(
            contacts.len(),
            dim,
            contacts
                .iter()
                .flat_map(|p| {
                    contact::face_edge_features(
                        &geo.facets[p.sender],
                        &geo.facets[p.receiver],
                        config.span_anchor,
                    )
                })
                .collect(),
        );

        let (mesh_edge, world, world_edge) = if config.explicit_elements {
            (Matrix::zeros(0, 8), Vec::new(), Matrix::zeros(0, 4))
        } else {
            let x = input.cur;
            let x0 = &mesh.vertices;
            let mut me = Matrix::zeros(topo.edge_src.len(), 8);
            for (k, (&s, &d)) in topo.edge_src.iter().zip(topo.edge_dst.iter()).enumerate() {
                let row = me.row_mut(k);
                row[..4].copy_from_slice(&with_length(sub(&x[s], &x[d])));
                row[4..].copy_from_slice(&with_length(sub(&x0[s], &x0[d])));
            }
            let world = world_edges(mesh, x, config.world_radius)?;
            let we = Matrix::from_vec(
                world.len(),
                4,
                world
                    .iter()
                    .flat_map(|&[s, d]| with_length(sub(&x[s], &x[d])))
                    .collect(),
            );
            (me, world, we)
        };

        Ok(RawFeatures {
            one_hot,
            vertex,
            script,
            cell,
            facet,
            cell_local,
            facet_local,
            incidence,
            contacts,
            contact,
            mesh_edge,
            world_edges: world,
            world_edge,
        })
    }
}

/// Per-vertex `[Δx, Δq]` between two frames.
pub fn target_deltas(
    cur: &[Point],
    next: &[Point],
    cur_q: &[Vec<f64>],
    next_q: &[Vec<f64>],
) -> Matrix {
    let q = cur_q.first().map_or(0, Vec::len);
    let mut out = Matrix::zeros(cur.len(), 3 + q);
    for v in 0..cur.len() {
        let row = out.row_mut(v);
        row[..3].copy_from_slice(&sub(&next[v], &cur[v]));
        for k in 0..q {
            row[3 + k] = next_q[v][k] - cur_q[v][k];
        }
    }
    out
}

/// Statistics of every standardized feature group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub vertex: Normalizer,
    pub cell: Normalizer,
    pub facet: Normalizer,
    pub cell_local: Normalizer,
    pub facet_local: Normalizer,
    pub incidence: Normalizer,
    pub contact: Normalizer,
    pub mesh_edge: Normalizer,
    pub world_edge: Normalizer,
    /// Position and quantity deltas of predicted vertices.
    pub output: Normalizer,
}

impl Normalizers {
    pub fn new(config: &ModelConfig) -> Self {
        let k = config.cell_type.arity();
        let m = config.cell_type.facet_arity();
        Normalizers {
            vertex: Normalizer::new(3 + config.quantities),
            cell: Normalizer::new(4),
            facet: Normalizer::new(4),
            cell_local: Normalizer::new(3 * k),
            facet_local: Normalizer::new(3 * m),
            incidence: Normalizer::new(7),
            contact: Normalizer::new(contact::feature_dim(m, m)),
            mesh_edge: Normalizer::new(8),
            world_edge: Normalizer::new(4),
            output: Normalizer::new(config.output_width()),
        }
    }

    /// Accumulates one training transition; `target` rows of kinematic
    /// vertices are skipped.
    pub fn observe(&mut self, topo: &Topology, raw: &RawFeatures, target: &Matrix) {
        self.vertex.observe_matrix(&raw.vertex);
        self.cell.observe_matrix(&raw.cell);
        self.facet.observe_matrix(&raw.facet);
        self.cell_local.observe_matrix(&raw.cell_local);
        self.facet_local.observe_matrix(&raw.facet_local);
        self.incidence.observe_matrix(&raw.incidence);
        self.contact.observe_matrix(&raw.contact);
        self.mesh_edge.observe_matrix(&raw.mesh_edge);
        self.world_edge.observe_matrix(&raw.world_edge);
        for &v in topo.normal_vertices.iter() {
            self.output.observe(target.row(v));
        }
    }
}

/// Standardized network inputs of one frame.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub vertex: Matrix,
    pub cell: Matrix,
    pub facet: Matrix,
    pub cell_local: Matrix,
    pub facet_local: Matrix,
    pub incidence: Matrix,
    pub contact: Matrix,
    pub contact_receiver: Arc<[usize]>,
    /// Concatenated script features of every facet's vertices, canonical order.
    pub script_facet: Matrix,
    pub mesh_edge: Matrix,
    pub world_edge: Matrix,
    pub world_src: Arc<[usize]>,
    pub world_dst: Arc<[usize]>,
}

impl Inputs {
    pub fn new(
        topo: &Topology,
        raw: &RawFeatures,
        norms: &Normalizers,
        config: &ModelConfig,
    ) -> Self {
        let nv = topo.num_vertices();
        let out_std = norms.output.std();
        let mut script = raw.script.clone();
        for v in 0..nv {
            for k in 0..3 {
                script.row_mut(v)[1 + k] /= out_std[k];
            }
        }
        let (cell, facet) = match config.geo_feats {
            GeoFeats::On => (
                norms.cell.standardize(&raw.cell),
                norms.facet.standardize(&raw.facet),
            ),
            GeoFeats::Zero => (
                Matrix::zeros(raw.cell.rows, 4),
                Matrix::zeros(raw.facet.rows, 4),
            ),
        };

        let std_vertex = norms.vertex.standardize(&raw.vertex);
        let extra = if config.explicit_elements { 0 } else { 8 };
        let width = raw.one_hot.cols + std_vertex.cols + extra;
        let mut vertex = Matrix::zeros(nv, width);
        let mut cell_mean = Matrix::zeros(nv, 4);
        if !config.explicit_elements {
            let mut count = vec![0usize; nv];
            for (&c, &v) in topo.cv_cell.iter().zip(topo.cv_vertex.iter()) {
                count[v] += 1;
                for k in 0..4 {
                    cell_mean.row_mut(v)[k] += cell.get(c, k);
                }
            }
            for v in 0..nv {
                let inv = 1.0 / count[v].max(1) as f64;
                cell_mean.row_mut(v).iter_mut().for_each(|x| *x *= inv);
            }
        }
        for v in 0..nv {
            let row = vertex.row_mut(v);
            let (a, rest) = row.split_at_mut(raw.one_hot.cols);
            a.copy_from_slice(raw.one_hot.row(v));
            let (b, rest) = rest.split_at_mut(std_vertex.cols);
            b.copy_from_slice(std_vertex.row(v));
            if extra > 0 {
                rest[..4].copy_from_slice(script.row(v));
                rest[4..].copy_from_slice(cell_mean.row(v));
            }
        }

        let m = config.cell_type.facet_arity();
        let mut script_facet = Matrix::zeros(topo.num_facets(), 4 * m);
        for (f, ids) in topo.canon.facets.iter().enumerate() {
            let row = script_facet.row_mut(f);
            for (k, &v) in ids.iter().enumerate() {
                row[4 * k..4 * k + 4].copy_from_slice(script.row(v));
            }
        }

        Inputs {
            vertex,
            cell,
            facet,
            cell_local: norms.cell_local.standardize(&raw.cell_local),
            facet_local: norms.facet_local.standardize(&raw.facet_local),
            incidence: norms.incidence.standardize(&raw.incidence),
            contact: norms.contact.standardize(&raw.contact),
            contact_receiver: raw.contacts.iter().map(|p| p.receiver).collect(),
            script_facet,
            mesh_edge: norms.mesh_edge.standardize(&raw.mesh_edge),
            world_edge: norms.world_edge.standardize(&raw.world_edge),
            world_src: raw.world_edges.iter().map(|e| e[0]).collect(),
            world_dst: raw.world_edges.iter().map(|e| e[1]).collect(),
        }
    }
}
