//! Mesh topology: vertices, volumetric cells, and the facets shared between them.
//!
//! A [`Mesh`] stores reference-time vertex positions and cell connectivity.
//! [`extract_facets`] derives the deduplicated facet list together with the
//! bipartite cell–facet incidence graph the processor runs on.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    Tet,
    Hex,
}

// Outward-facing local faces for a positively oriented tet.
const TET_FACES: [&[usize]; 4] = [&[1, 2, 3], &[0, 3, 2], &[0, 1, 3], &[0, 2, 1]];

// Bottom 0-1-2-3 and top 4-5-6-7, both counter-clockwise seen from +z.
const HEX_FACES: [&[usize]; 6] = [
    &[0, 3, 2, 1],
    &[4, 5, 6, 7],
    &[0, 1, 5, 4],
    &[1, 2, 6, 5],
    &[2, 3, 7, 6],
    &[3, 0, 4, 7],
];

const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
const HEX_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

impl CellType {
    /// Vertices per cell.
    pub fn arity(self) -> usize {
        match self {
            CellType::Tet => 4,
            CellType::Hex => 8,
        }
    }

    /// Vertices per facet.
    pub fn facet_arity(self) -> usize {
        match self {
            CellType::Tet => 3,
            CellType::Hex => 4,
        }
    }

    pub fn faces_per_cell(self) -> usize {
        self.local_faces().len()
    }

    /// Local vertex slots of every face, oriented outward for a well-formed cell.
    pub fn local_faces(self) -> &'static [&'static [usize]] {
        match self {
            CellType::Tet => &TET_FACES,
            CellType::Hex => &HEX_FACES,
        }
    }

    pub fn local_edges(self) -> &'static [[usize; 2]] {
        match self {
            CellType::Tet => &TET_EDGES,
            CellType::Hex => &HEX_EDGES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum NodeType {
    Normal = 0,
    Scripted = 1,
    Obstacle = 2,
}

impl NodeType {
    pub const COUNT: usize = 3;

    /// Vertices whose motion is prescribed rather than predicted.
    pub fn is_kinematic(self) -> bool {
        !matches!(self, NodeType::Normal)
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self as usize] = 1.0;
        v
    }
}

impl TryFrom<u8> for NodeType {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(NodeType::Normal),
            1 => Ok(NodeType::Scripted),
            2 => Ok(NodeType::Obstacle),
            other => Err(format!("unknown node type {other}")),
        }
    }
}

impl From<NodeType> for u8 {
    fn from(t: NodeType) -> u8 {
        t as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub cell_type: CellType,
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub node_type: Vec<NodeType>,
    pub body_id: Vec<i64>,
}

/// One violated mesh invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cell: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.cell {
            Some(c) => write!(f, "cell {c}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Lists every violated mesh invariant. An empty report means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> Vec<Violation> {
    let mut report = Vec::new();
    let n = mesh.vertices.len();
    if mesh.node_type.len() != n {
        report.push(Violation {
            cell: None,
            message: format!(
                "node_type has {} entries for {n} vertices",
                mesh.node_type.len()
            ),
        });
    }
    if mesh.body_id.len() != n {
        report.push(Violation {
            cell: None,
            message: format!(
                "body_id has {} entries for {n} vertices",
                mesh.body_id.len()
            ),
        });
    }
    for (i, p) in mesh.vertices.iter().enumerate() {
        if p.iter().any(|x| !x.is_finite()) {
            report.push(Violation {
                cell: None,
                message: format!("vertex {i} has a non-finite position"),
            });
        }
    }
    let arity = mesh.cell_type.arity();
    for (c, cell) in mesh.cells.iter().enumerate() {
        if cell.len() != arity {
            report.push(Violation {
                cell: Some(c),
                message: format!(
                    "cell arity mismatch: {} vertices for declared {:?}",
                    cell.len(),
                    mesh.cell_type
                ),
            });
        }
        if let Some(&bad) = cell.iter().find(|&&v| v >= n) {
            report.push(Violation {
                cell: Some(c),
                message: format!("index out of range: vertex {bad} >= {n}"),
            });
            continue;
        }
        let mut sorted = cell.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cell.len() {
            report.push(Violation {
                cell: Some(c),
                message: "repeated vertex in cell".into(),
            });
        }
        if mesh.body_id.len() == n {
            let b = mesh.body_id[cell[0]];
            if cell.iter().any(|&v| mesh.body_id[v] != b) {
                report.push(Violation {
                    cell: Some(c),
                    message: "cell spans more than one body".into(),
                });
            }
        }
    }
    report
}

impl Mesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(
        cell_type: CellType,
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        node_type: Vec<NodeType>,
        body_id: Vec<i64>,
    ) -> Result<Self> {
        let mesh = Mesh {
            cell_type,
            vertices,
            cells,
            node_type,
            body_id,
        };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn check(&self) -> Result<()> {
        match validate_mesh(self).into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::Topology(v.to_string())),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_body(&self, cell: usize) -> i64 {
        self.body_id[self.cells[cell][0]]
    }

    /// Incident cells of each vertex, ascending.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    /// Unique undirected cell edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .cells
            .iter()
            .flat_map(|cell| {
                self.cell_type.local_edges().iter().map(move |&[a, b]| {
                    let (a, b) = (cell[a], cell[b]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Appends `other`, offsetting its vertex indices.
    pub fn append(&mut self, other: &Mesh) -> Result<()> {
        if other.cell_type != self.cell_type {
            return Err(Error::Topology(
                "cannot merge meshes of different cell types".into(),
            ));
        }
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.node_type.extend_from_slice(&other.node_type);
        self.body_id.extend_from_slice(&other.body_id);
        self.cells.extend(
            other
                .cells
                .iter()
                .map(|c| c.iter().map(|v| v + offset).collect()),
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetSet {
    /// Vertex ids of every facet, outward with respect to its lowest-indexed
    /// incident cell and rotated to start at the smallest id.
    pub facets: Vec<Vec<usize>>,
    /// Incident cells of every facet, ascending (length 1 or 2).
    pub facet_to_cells: Vec<Vec<usize>>,
    /// Facet ids of every cell, in the cell type's local face order.
    pub cell_to_facets: Vec<Vec<usize>>,
    pub boundary_mask: Vec<bool>,
}

impl FacetSet {
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary_mask.iter().filter(|&&b| b).count()
    }

    /// Number of (cell, facet) incidence pairs.
    pub fn num_incidences(&self) -> usize {
        self.facet_to_cells.iter().map(Vec::len).sum()
    }

    /// Orientation-free facet keys, in facet id order.
    pub fn keys(&self) -> Vec<Vec<usize>> {
        self.facets
            .iter()
            .map(|f| {
                let mut k = f.clone();
                k.sort_unstable();
                k
            })
            .collect()
    }
}

fn rotate_to_min(face: &mut [usize]) {
    if let Some((pos, _)) = face.iter().enumerate().min_by_key(|&(_, v)| *v) {
        face.rotate_left(pos);
    }
}

/// Derives the deduplicated facet set and the cell–facet incidence graph.
///
/// Facet ids follow the ascending order of their sorted vertex keys, so the
/// result does not depend on the order cells are stored in.
pub fn extract_facets(mesh: &Mesh) -> Result<FacetSet> {
    let arity = mesh.cell_type.arity();
    let n = mesh.vertices.len();
    for (c, cell) in mesh.cells.iter().enumerate() {
        if cell.len() != arity {
            return Err(Error::Topology(format!(
                "cell {c} has {} vertices, {:?} needs {arity}",
                cell.len(),
                mesh.cell_type
            )));
        }
        if let Some(&v) = cell.iter().find(|&&v| v >= n) {
            return Err(Error::Topology(format!(
                "cell {c} references vertex {v} >= {n}"
            )));
        }
    }

    let faces = mesh.cell_type.local_faces();
    // (key, cell, local face)
    let mut entries: Vec<(Vec<usize>, usize, usize)> =
        Vec::with_capacity(mesh.cells.len() * faces.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        for (lf, slots) in faces.iter().enumerate() {
            let mut key: Vec<usize> = slots.iter().map(|&s| cell[s]).collect();
            key.sort_unstable();
            entries.push((key, c, lf));
        }
    }
    entries.sort_unstable();

    let mut set = FacetSet {
        facets: Vec::new(),
        facet_to_cells: Vec::new(),
        cell_to_facets: vec![vec![usize::MAX; faces.len()]; mesh.cells.len()],
        boundary_mask: Vec::new(),
    };
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].0 == entries[start].0 {
            end += 1;
        }
        let group = &entries[start..end];
        if group.len() > 2 {
            return Err(Error::NonManifold {
                face: group[0].0.clone(),
                count: group.len(),
            });
        }
        let fid = set.facets.len();
        let (_, owner, lf) = group[0];
        let cell = &mesh.cells[owner];
        let mut face: Vec<usize> = faces[lf].iter().map(|&s| cell[s]).collect();
        orient_outward(mesh, cell, &mut face);
        rotate_to_min(&mut face);
        set.facets.push(face);
        set.facet_to_cells.push(group.iter().map(|e| e.1).collect());
        set.boundary_mask.push(group.len() == 1);
        for &(_, c, lf) in group {
            set.cell_to_facets[c][lf] = fid;
        }
        start = end;
    }
    Ok(set)
}

fn orient_outward(mesh: &Mesh, cell: &[usize], face: &mut [usize]) {
    let pts: Vec<Point> = face.iter().map(|&v| mesh.vertices[v]).collect();
    let normal = geometry::area_vector(&pts);
    let fc = geometry::mean_point(&pts);
    let cc = geometry::mean_point(&cell.iter().map(|&v| mesh.vertices[v]).collect::<Vec<_>>());
    let outward = (0..3).map(|k| normal[k] * (fc[k] - cc[k])).sum::<f64>();
    if outward < 0.0 {
        face.reverse();
    }
}

/// Permutation of an element's local vertex slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalOrder {
    pub perm: Vec<usize>,
}

impl CanonicalOrder {
    /// Reorders `ids` so that entry `k` is the `k`-th vertex in canonical order.
    pub fn apply<T: Copy>(&self, ids: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| ids[p]).collect()
    }
}

/// Sorts an element's vertices by distance to the element centroid, breaking
/// ties by ascending global vertex id.
///
/// The centroid is summed in ascending id order, so the result is bit-identical
/// for every storage order of the same vertex set. Exactly symmetric elements
/// fall back to the id order, which is not relabeling invariant.
pub fn canonical_order(ids: &[usize], positions: &[Point]) -> CanonicalOrder {
    let mut by_id: Vec<usize> = (0..ids.len()).collect();
    by_id.sort_by_key(|&s| ids[s]);
    let mut centroid = [0.0; 3];
    for &s in &by_id {
        for k in 0..3 {
            centroid[k] += positions[ids[s]][k];
        }
    }
    let inv = 1.0 / ids.len() as f64;
    for c in &mut centroid {
        *c *= inv;
    }
    let dist: Vec<f64> = ids
        .iter()
        .map(|&v| {
            let p = positions[v];
            (0..3)
                .map(|k| (p[k] - centroid[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut perm: Vec<usize> = (0..ids.len()).collect();
    perm.sort_by(|&a, &b| match dist[a].total_cmp(&dist[b]) {
        Ordering::Equal => ids[a].cmp(&ids[b]),
        o => o,
    });
    CanonicalOrder { perm }
}

/// Canonically ordered vertex ids of every cell and facet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalElements {
    pub cells: Vec<Vec<usize>>,
    pub facets: Vec<Vec<usize>>,
}

impl CanonicalElements {
    pub fn new(mesh: &Mesh, facets: &FacetSet, positions: &[Point]) -> Self {
        let order = |ids: &Vec<usize>| canonical_order(ids, positions).apply(ids);
        CanonicalElements {
            cells: mesh.cells.iter().map(order).collect(),
            facets: facets.facets.iter().map(order).collect(),
        }
    }
}

/// Structured hex meshes used by the data generator, tests, and the demo.
pub mod build {
    use super::*;

    /// An `nx × ny × nz` block of axis-aligned hexes with spacing `h`.
    pub fn hex_block(
        origin: Point,
        dims: [usize; 3],
        h: [f64; 3],
        node_type: NodeType,
        body: i64,
    ) -> Mesh {
        let [nx, ny, nz] = dims;
        let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push([
                        origin[0] + i as f64 * h[0],
                        origin[1] + j as f64 * h[1],
                        origin[2] + k as f64 * h[2],
                    ]);
                }
            }
        }
        let mut cells = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    cells.push(vec![
                        vid(i, j, k),
                        vid(i + 1, j, k),
                        vid(i + 1, j + 1, k),
                        vid(i, j + 1, k),
                        vid(i, j, k + 1),
                        vid(i + 1, j, k + 1),
                        vid(i + 1, j + 1, k + 1),
                        vid(i, j + 1, k + 1),
                    ]);
                }
            }
        }
        let n = vertices.len();
        Mesh {
            cell_type: CellType::Hex,
            vertices,
            cells,
            node_type: vec![node_type; n],
            body_id: vec![body; n],
        }
    }

    // Six tets around the 0-6 diagonal; conforming across neighbouring hexes.
    const HEX_TO_TETS: [[usize; 4]; 6] = [
        [0, 1, 2, 6],
        [0, 2, 3, 6],
        [0, 3, 7, 6],
        [0, 7, 4, 6],
        [0, 4, 5, 6],
        [0, 5, 1, 6],
    ];

    /// Splits every hex into six tets, each positively oriented.
    pub fn tetrahedralize(hex: &Mesh) -> Mesh {
        let mut cells = Vec::with_capacity(hex.cells.len() * 6);
        for cell in &hex.cells {
            for t in HEX_TO_TETS {
                let mut tet: Vec<usize> = t.iter().map(|&s| cell[s]).collect();
                let p: Vec<Point> = tet.iter().map(|&v| hex.vertices[v]).collect();
                if geometry::signed_tet_volume(&p[0], &p[1], &p[2], &p[3]) < 0.0 {
                    tet.swap(1, 2);
                }
                cells.push(tet);
            }
        }
        Mesh {
            cell_type: CellType::Tet,
            vertices: hex.vertices.clone(),
            cells,
            node_type: hex.node_type.clone(),
            body_id: hex.body_id.clone(),
        }
    }

    pub fn unit_tet() -> Mesh {
        Mesh {
            cell_type: CellType::Tet,
            vertices: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            cells: vec![vec![0, 1, 2, 3]],
            node_type: vec![NodeType::Normal; 4],
            body_id: vec![0; 4],
        }
    }
}
