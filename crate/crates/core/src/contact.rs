//! Facet-level contact detection.
//!
//! Boundary facets are boxed, a median-split BVH prunes candidate pairs, and
//! the exact proximity test runs on point samples (vertices plus centroid).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, FacetGeometry};
use crate::mesh::{FacetSet, Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn from_points(pts: &[Point]) -> Self {
        let mut b = Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        };
        for p in pts {
            for k in 0..3 {
                b.min[k] = b.min[k].min(p[k]);
                b.max[k] = b.max[k].max(p[k]);
            }
        }
        b
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        for k in 0..3 {
            b.min[k] = b.min[k].min(other.min[k]);
            b.max[k] = b.max[k].max(other.max[k]);
        }
        b
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    /// Euclidean gap between two boxes, zero when they overlap.
    pub fn distance(&self, other: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let gap = (other.min[k] - self.max[k])
                .max(self.min[k] - other.max[k])
                .max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        bbox: Aabb,
        item: usize,
    },
    Inner {
        bbox: Aabb,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

/// Binary BVH over a fixed set of boxes; immutable once built.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    root: usize,
}

/// Builds a BVH by recursive median split along the longest axis of the box centres.
pub fn build_bvh(aabbs: &[Aabb]) -> Result<Bvh> {
    if aabbs.is_empty() {
        return Err(Error::Parameter(
            "cannot build a BVH over zero boxes".into(),
        ));
    }
    let mut items: Vec<usize> = (0..aabbs.len()).collect();
    let mut nodes = Vec::with_capacity(2 * aabbs.len());
    let root = split(aabbs, &mut items, &mut nodes);
    Ok(Bvh { nodes, root })
}

fn split(aabbs: &[Aabb], items: &mut [usize], nodes: &mut Vec<Node>) -> usize {
    if let [item] = *items {
        nodes.push(Node::Leaf {
            bbox: aabbs[item],
            item,
        });
        return nodes.len() - 1;
    }
    let centres = Aabb::from_points(&items.iter().map(|&i| aabbs[i].center()).collect::<Vec<_>>());
    let extent = geometry::sub(&centres.max, &centres.min);
    let axis = (0..3).fold(0, |best, k| if extent[k] > extent[best] { k } else { best });
    let key = |i: &usize| (aabbs[*i].center()[axis], *i);
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
    });
    let (lo, hi) = items.split_at_mut(mid);
    let left = split(aabbs, lo, nodes);
    let right = split(aabbs, hi, nodes);
    let bbox = nodes[left].bbox().union(nodes[right].bbox());
    nodes.push(Node::Inner { bbox, left, right });
    nodes.len() - 1
}

impl Bvh {
    pub fn root_box(&self) -> Aabb {
        *self.nodes[self.root].bbox()
    }

    /// Items whose box lies within `radius` of `query`, ascending.
    pub fn query(&self, query: &Aabb, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bbox().distance(query) > radius {
                continue;
            }
            match *node {
                Node::Leaf { item, .. } => out.push(item),
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Leaf items reachable from the root, ascending.
    pub fn leaves(&self) -> Vec<usize> {
        let mut items: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { item, .. } => Some(*item),
                Node::Inner { .. } => None,
            })
            .collect();
        items.sort_unstable();
        items
    }

    /// True when every inner node's box contains both children's boxes.
    pub fn is_nested(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { .. } => true,
            Node::Inner { bbox, left, right } => {
                bbox.contains(self.nodes[*left].bbox()) && bbox.contains(self.nodes[*right].bbox())
            }
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], n: usize) -> usize {
            match nodes[n] {
                Node::Leaf { .. } => 1,
                Node::Inner { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, self.root)
    }
}

/// Proximity samples of one facet: its vertices followed by its centroid.
#[derive(Debug, Clone)]
pub struct FacetSample {
    pub id: usize,
    pub body: i64,
    pub points: Vec<Point>,
}

impl FacetSample {
    pub fn new(id: usize, body: i64, vertices: &[Point]) -> Self {
        let mut points = vertices.to_vec();
        points.push(geometry::mean_point(vertices));
        FacetSample { id, body, points }
    }

    fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }
}

/// Minimum distance between the sample sets of two facets.
pub fn proximity(a: &FacetSample, b: &FacetSample) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.points {
        for q in &b.points {
            best = best.min(geometry::norm(&geometry::sub(p, q)));
        }
    }
    best
}

/// One directed contact edge `sender → receiver`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub sender: usize,
    pub receiver: usize,
    pub distance: f64,
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Parameter(format!(
            "contact radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

fn push_both(out: &mut Vec<ContactPair>, a: &FacetSample, b: &FacetSample, radius: f64) {
    if a.body == b.body {
        return;
    }
    let d = proximity(a, b);
    if d <= radius {
        out.push(ContactPair {
            sender: a.id,
            receiver: b.id,
            distance: d,
        });
        out.push(ContactPair {
            sender: b.id,
            receiver: a.id,
            distance: d,
        });
    }
}

fn finish(mut pairs: Vec<ContactPair>) -> Vec<ContactPair> {
    pairs.sort_by_key(|p| (p.sender, p.receiver));
    pairs.dedup_by(|p, q| p.sender == q.sender && p.receiver == q.receiver);
    pairs
}

/// All cross-body pairs between `a` and `b` within `radius`, both directions,
/// sorted by `(sender, receiver)`.
pub fn detect_face_pairs(
    a: &[FacetSample],
    b: &[FacetSample],
    radius: f64,
) -> Result<Vec<ContactPair>> {
    check_radius(radius)?;
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let boxes: Vec<Aabb> = b.iter().map(FacetSample::bbox).collect();
    let bvh = build_bvh(&boxes)?;
    let mut out = Vec::new();
    for fa in a {
        for j in bvh.query(&fa.bbox(), radius) {
            push_both(&mut out, fa, &b[j], radius);
        }
    }
    Ok(finish(out))
}

/// Reference O(|A|·|B|) implementation of [`detect_face_pairs`].
pub fn detect_face_pairs_brute(
    a: &[FacetSample],
    b: &[FacetSample],
    radius: f64,
) -> Result<Vec<ContactPair>> {
    check_radius(radius)?;
    let mut out = Vec::new();
    for fa in a {
        for fb in b {
            push_both(&mut out, fa, fb, radius);
        }
    }
    Ok(finish(out))
}

/// Contact edges between boundary facets of different bodies at one frame.
///
/// With `self_contact`, facets of the same body that share no vertex may
/// pair as well.
pub fn detect_contacts(
    mesh: &Mesh,
    facets: &FacetSet,
    positions: &[Point],
    radius: f64,
    self_contact: bool,
) -> Result<Vec<ContactPair>> {
    check_radius(radius)?;
    let samples: Vec<FacetSample> = facets
        .facets
        .iter()
        .enumerate()
        .filter(|&(f, _)| facets.boundary_mask[f])
        .map(|(f, ids)| {
            let pts: Vec<Point> = ids.iter().map(|&v| positions[v]).collect();
            FacetSample::new(f, mesh.body_id[ids[0]], &pts)
        })
        .collect();
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let boxes: Vec<Aabb> = samples.iter().map(FacetSample::bbox).collect();
    let bvh = build_bvh(&boxes)?;
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        for j in bvh.query(&boxes[i], radius) {
            let t = &samples[j];
            if j == i {
                continue;
            }
            let allowed = s.body != t.body
                || (self_contact
                    && !facets.facets[s.id]
                        .iter()
                        .any(|v| facets.facets[t.id].contains(v)));
            if !allowed {
                continue;
            }
            let d = proximity(s, t);
            if d <= radius {
                out.push(ContactPair {
                    sender: s.id,
                    receiver: t.id,
                    distance: d,
                });
            }
        }
    }
    Ok(finish(out))
}

/// Anchor point of the per-vertex spanning vectors in the contact features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanAnchor {
    /// `x_{s_i} − p_s` and `x_{r_i} − p_r`.
    #[default]
    Own,
    /// `x_{s_i} − p_r` and `x_{r_i} − p_s`.
    Other,
}

/// Number of raw feature entries for facets with `m_s` and `m_r` vertices.
pub fn feature_dim(m_s: usize, m_r: usize) -> usize {
    3 * (1 + m_s + m_r + 2)
}

/// Raw contact-edge features: centroid offset, sender and receiver spanning
/// vectors in canonical order, then both unit normals.
///
/// Expects `local` vectors of each facet in canonical order, as produced by
/// [`crate::geometry::MeshGeometry`].
pub fn face_edge_features(
    sender: &FacetGeometry,
    receiver: &FacetGeometry,
    anchor: SpanAnchor,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(feature_dim(sender.local.len(), receiver.local.len()));
    let offset = geometry::sub(&receiver.centroid, &sender.centroid);
    out.extend_from_slice(&offset);
    let (shift_s, shift_r) = match anchor {
        SpanAnchor::Own => ([0.0; 3], [0.0; 3]),
        SpanAnchor::Other => (
            geometry::sub(&sender.centroid, &receiver.centroid),
            geometry::sub(&receiver.centroid, &sender.centroid),
        ),
    };
    for d in &sender.local {
        out.extend((0..3).map(|k| d[k] + shift_s[k]));
    }
    for d in &receiver.local {
        out.extend((0..3).map(|k| d[k] + shift_r[k]));
    }
    out.extend_from_slice(&sender.normal);
    out.extend_from_slice(&receiver.normal);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_facet_geometry;

    fn square(z: f64, dx: f64) -> Vec<Point> {
        vec![
            [dx, 0.0, z],
            [dx + 1.0, 0.0, z],
            [dx + 1.0, 1.0, z],
            [dx, 1.0, z],
        ]
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn bvh_single_and_pair() {
        let a = Aabb::from_points(&[[0.0; 3], [1.0; 3]]);
        let t = build_bvh(&[a]).unwrap();
        assert_eq!(t.leaves(), vec![0]);
        assert_eq!(t.depth(), 1);

        let b = Aabb::from_points(&[[3.0; 3], [4.0; 3]]);
        let t = build_bvh(&[a, b]).unwrap();
        assert_eq!(t.root_box(), a.union(&b));
        assert_eq!(t.leaves(), vec![0, 1]);
        assert!(build_bvh(&[]).is_err());
    }

    #[test]
    fn bvh_random_boxes_structure() {
        let mut s = 7u64;
        let boxes: Vec<Aabb> = (0..64)
            .map(|_| {
                let p = [lcg(&mut s) * 10.0, lcg(&mut s) * 10.0, lcg(&mut s) * 10.0];
                let q = [p[0] + lcg(&mut s), p[1] + lcg(&mut s), p[2] + lcg(&mut s)];
                Aabb::from_points(&[p, q])
            })
            .collect();
        let t = build_bvh(&boxes).unwrap();
        assert_eq!(t.leaves(), (0..64).collect::<Vec<_>>());
        assert!(t.is_nested());
        assert!(t.depth() <= 7);
    }

    #[test]
    fn parallel_squares() {
        let a = [FacetSample::new(0, 0, &square(0.0, 0.0))];
        let b = [FacetSample::new(1, 1, &square(0.5, 0.0))];
        let pairs = detect_face_pairs(&a, &b, 0.6).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!((pairs[0].sender, pairs[0].receiver), (0, 1));
        assert_eq!((pairs[1].sender, pairs[1].receiver), (1, 0));
        assert!((pairs[0].distance - 0.5).abs() < 1e-15);
        assert!(detect_face_pairs(&a, &b, 0.4).unwrap().is_empty());
        assert!(detect_face_pairs(&a, &b, 0.0).is_err());
    }

    #[test]
    fn same_body_never_pairs() {
        let a = [FacetSample::new(0, 3, &square(0.0, 0.0))];
        let b = [FacetSample::new(1, 3, &square(0.0, 0.0))];
        assert!(detect_face_pairs(&a, &b, 100.0).unwrap().is_empty());
    }

    #[test]
    fn coincident_facets_have_zero_offset() {
        let g = compute_facet_geometry(&square(0.0, 0.0)).unwrap();
        let f = face_edge_features(&g, &g, SpanAnchor::Own);
        assert_eq!(f.len(), feature_dim(4, 4));
        assert_eq!(&f[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_computed_triangle_features() {
        // sender centroid (1,1,0), receiver centroid (1,1,2)
        let s =
            compute_facet_geometry(&[[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]]).unwrap();
        let r =
            compute_facet_geometry(&[[0.0, 0.0, 2.0], [0.0, 3.0, 2.0], [3.0, 0.0, 2.0]]).unwrap();
        let f = face_edge_features(&s, &r, SpanAnchor::Own);
        #[rustfmt::skip]
        let expect = [
            0.0, 0.0, 2.0,
            -1.0, -1.0, 0.0, 2.0, -1.0, 0.0, -1.0, 2.0, 0.0,
            -1.0, -1.0, 0.0, -1.0, 2.0, 0.0, 2.0, -1.0, 0.0,
            0.0, 0.0, 1.0,
            0.0, 0.0, -1.0,
        ];
        assert_eq!(f, expect);
        let g = face_edge_features(&s, &r, SpanAnchor::Other);
        assert_eq!(&g[3..6], &[-1.0, -1.0, -2.0]);
        assert_eq!(&g[12..15], &[-1.0, -1.0, 2.0]);
    }

    #[test]
    fn features_translation_invariant() {
        let t = [12.5, -3.25, 7.0];
        let a = vec![[0.1, 0.2, 0.0], [1.3, 0.1, 0.2], [0.4, 1.1, -0.1]];
        let b = vec![[0.0, 0.3, 0.5], [1.0, 0.2, 0.6], [0.7, 1.4, 0.45]];
        let shift = |v: &Vec<Point>| {
            v.iter()
                .map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
                .collect::<Vec<_>>()
        };
        let f0 = face_edge_features(
            &compute_facet_geometry(&a).unwrap(),
            &compute_facet_geometry(&b).unwrap(),
            SpanAnchor::Own,
        );
        let f1 = face_edge_features(
            &compute_facet_geometry(&shift(&a)).unwrap(),
            &compute_facet_geometry(&shift(&b)).unwrap(),
            SpanAnchor::Own,
        );
        for (x, y) in f0.iter().zip(&f1) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cloud(seed: u64, n: usize, body: i64, base: usize, offset: f64) -> Vec<FacetSample> {
            let mut s = seed;
            (0..n)
                .map(|i| {
                    let c = [
                        lcg(&mut s) * 4.0 + offset,
                        lcg(&mut s) * 4.0,
                        lcg(&mut s) * 4.0,
                    ];
                    let tri: Vec<Point> = (0..3)
                        .map(|_| {
                            [
                                c[0] + lcg(&mut s) * 0.3,
                                c[1] + lcg(&mut s) * 0.3,
                                c[2] + lcg(&mut s) * 0.3,
                            ]
                        })
                        .collect();
                    FacetSample::new(base + i, body, &tri)
                })
                .collect()
        }

        proptest! {
            #[test]
            fn bvh_matches_brute_force(seed in 0u64..10_000, r in 0.01f64..0.8) {
                let a = cloud(seed, 40, 0, 0, 0.0);
                let b = cloud(seed ^ 0xfeed, 40, 1, 40, 1.0);
                let fast = detect_face_pairs(&a, &b, r).unwrap();
                let slow = detect_face_pairs_brute(&a, &b, r).unwrap();
                prop_assert_eq!(&fast, &slow);
                for p in &fast {
                    prop_assert!(fast.iter().any(|q| q.sender == p.receiver && q.receiver == p.sender));
                }
                let wider = detect_face_pairs(&a, &b, r * 1.5).unwrap();
                prop_assert!(fast.iter().all(|p| wider.iter().any(|q| q.sender == p.sender && q.receiver == p.receiver)));
            }
        }
    }
}
