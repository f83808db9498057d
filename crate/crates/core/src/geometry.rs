//! Geometric measures of cells and facets at an arbitrary frame.
//!
//! Quads are handled by a fan of triangles around the vertex mean, for
//! areas, normals, and the divergence-theorem hex volume alike.

use crate::error::{Error, Result};
use crate::mesh::{CanonicalElements, CellType, FacetSet, Mesh, Point};

const DEGENERACY: f64 = 1e-14;

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean_point(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let inv = 1.0 / pts.len() as f64;
    [c[0] * inv, c[1] * inv, c[2] * inv]
}

fn bbox_diagonal(pts: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    norm(&sub(&hi, &lo))
}

pub fn signed_tet_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    dot(&sub(b, a), &cross(&sub(c, a), &sub(d, a))) / 6.0
}

/// Fan triangles `(centroid, p_k, p_{k+1})` of a polygon; a triangle is its own fan.
fn fan_cross(pts: &[Point], mut f: impl FnMut(Point)) {
    if pts.len() == 3 {
        f(cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0])));
        return;
    }
    let c = mean_point(pts);
    for k in 0..pts.len() {
        let a = sub(&pts[k], &c);
        let b = sub(&pts[(k + 1) % pts.len()], &c);
        f(cross(&a, &b));
    }
}

/// Sum of fan-triangle area vectors, `Σ ½ (a × b)`.
pub fn area_vector(pts: &[Point]) -> Point {
    let mut s = [0.0; 3];
    fan_cross(pts, |c| {
        for k in 0..3 {
            s[k] += 0.5 * c[k];
        }
    });
    s
}

/// Fan area (sum of triangle area magnitudes).
pub fn polygon_area(pts: &[Point]) -> f64 {
    let mut a = 0.0;
    fan_cross(pts, |c| a += 0.5 * norm(&c));
    a
}

pub fn perimeter(pts: &[Point]) -> f64 {
    (0..pts.len())
        .map(|k| norm(&sub(&pts[(k + 1) % pts.len()], &pts[k])))
        .sum()
}

/// `x_v − centroid` for every vertex, in the order given.
pub fn local_vectors(pts: &[Point]) -> Vec<Point> {
    let c = mean_point(pts);
    pts.iter().map(|p| sub(p, &c)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub volume: f64,
    pub surface_area: f64,
    pub centroid: Point,
    pub local: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetGeometry {
    pub area: f64,
    pub perimeter: f64,
    pub centroid: Point,
    pub normal: Point,
    pub local: Vec<Point>,
}

fn cell_volume(pts: &[Point], cell_type: CellType) -> f64 {
    match cell_type {
        CellType::Tet => signed_tet_volume(&pts[0], &pts[1], &pts[2], &pts[3]).abs(),
        CellType::Hex => {
            let cc = mean_point(pts);
            let mut vol = 0.0;
            for face in cell_type.local_faces() {
                let fp: Vec<Point> = face.iter().map(|&s| pts[s]).collect();
                let fc = mean_point(&fp);
                for k in 0..fp.len() {
                    vol += signed_tet_volume(&cc, &fc, &fp[k], &fp[(k + 1) % fp.len()]);
                }
            }
            vol.abs()
        }
    }
}

fn check_cell(pts: &[Point], cell_type: CellType) -> Result<()> {
    if pts.len() != cell_type.arity() {
        return Err(Error::shape(
            "cell geometry",
            format!("{} positions for {:?}", pts.len(), cell_type),
        ));
    }
    if pts.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("cell geometry"));
    }
    Ok(())
}

fn check_volume(volume: f64, pts: &[Point]) -> Result<()> {
    let tolerance = DEGENERACY * bbox_diagonal(pts).powi(3);
    if volume <= tolerance {
        return Err(Error::Degenerate {
            kind: "cell",
            measure: volume,
            tolerance,
        });
    }
    Ok(())
}

/// Volume, surface area, centroid, and centroid-relative vertex vectors of a cell.
pub fn compute_cell_geometry(pts: &[Point], cell_type: CellType) -> Result<CellGeometry> {
    check_cell(pts, cell_type)?;
    let volume = cell_volume(pts, cell_type);
    check_volume(volume, pts)?;
    let surface_area = cell_type
        .local_faces()
        .iter()
        .map(|face| polygon_area(&face.iter().map(|&s| pts[s]).collect::<Vec<_>>()))
        .sum();
    Ok(CellGeometry {
        volume,
        surface_area,
        centroid: mean_point(pts),
        local: local_vectors(pts),
    })
}

/// Area, perimeter, centroid, unit normal, and local vectors of a facet given
/// in cyclic storage order. The normal follows the right-hand rule.
pub fn compute_facet_geometry(pts: &[Point]) -> Result<FacetGeometry> {
    if pts.len() != 3 && pts.len() != 4 {
        return Err(Error::shape(
            "facet geometry",
            format!("{} vertices", pts.len()),
        ));
    }
    if pts.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("facet geometry"));
    }
    let area = polygon_area(pts);
    let tolerance = DEGENERACY * bbox_diagonal(pts).powi(2);
    let av = area_vector(pts);
    let len = norm(&av);
    if area <= tolerance || len <= tolerance {
        return Err(Error::Degenerate {
            kind: "facet",
            measure: area,
            tolerance,
        });
    }
    Ok(FacetGeometry {
        area,
        perimeter: perimeter(pts),
        centroid: mean_point(pts),
        normal: [av[0] / len, av[1] / len, av[2] / len],
        local: local_vectors(pts),
    })
}

/// Geometry of every cell and facet of a mesh at one frame.
///
/// Local vectors are listed in canonical element order, and each cell's
/// surface area is the sum of its facets' areas.
#[derive(Debug, Clone)]
pub struct MeshGeometry {
    pub cells: Vec<CellGeometry>,
    pub facets: Vec<FacetGeometry>,
}

impl MeshGeometry {
    pub fn compute(
        mesh: &Mesh,
        facets: &FacetSet,
        canon: &CanonicalElements,
        positions: &[Point],
    ) -> Result<Self> {
        let gather = |ids: &[usize]| ids.iter().map(|&v| positions[v]).collect::<Vec<Point>>();
        let facet_geo = facets
            .facets
            .iter()
            .zip(&canon.facets)
            .map(|(ids, canon_ids)| {
                let mut g = compute_facet_geometry(&gather(ids))?;
                g.local = canon_ids
                    .iter()
                    .map(|&v| sub(&positions[v], &g.centroid))
                    .collect();
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        let cell_geo = mesh
            .cells
            .iter()
            .enumerate()
            .map(|(c, ids)| {
                let pts = gather(ids);
                check_cell(&pts, mesh.cell_type)?;
                let volume = cell_volume(&pts, mesh.cell_type);
                check_volume(volume, &pts)?;
                let centroid = mean_point(&pts);
                let surface_area = facets.cell_to_facets[c]
                    .iter()
                    .map(|&f| facet_geo[f].area)
                    .sum();
                Ok(CellGeometry {
                    volume,
                    surface_area,
                    centroid,
                    local: canon.cells[c]
                        .iter()
                        .map(|&v| sub(&positions[v], &centroid))
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeshGeometry {
            cells: cell_geo,
            facets: facet_geo,
        })
    }
}
