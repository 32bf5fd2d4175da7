//! Triangle meshes of the two-sphere.
//!
//! A [`TriMesh`] is the discrete immersion: vertex positions plus a fixed
//! counterclockwise (outward) triangle list. Meshes are immutable values;
//! every operation that moves vertices returns a new mesh and connectivity
//! never changes during a run.

use std::collections::HashMap;
use std::ops::Deref;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Largest accepted icosphere subdivision level (10·4^8 + 2 vertices).
pub const MAX_SUBDIVISIONS: u32 = 8;

/// One scalar per vertex.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexField(Vec<f64>);

impl VertexField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    /// Checks that the field belongs to a mesh with `n` vertices.
    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::FieldLength {
                expected: n,
                got: self.0.len(),
            })
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    /// `Σ self_i · other_i` in vertex order.
    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl Deref for VertexField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for VertexField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl FromIterator<f64> for VertexField {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    positions: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

/// Derived incidence maps of a mesh.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Triangles incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
    /// Undirected edge `(min, max)` to the vertices opposite it, one per incident triangle.
    pub edge_opposites: HashMap<(usize, usize), Vec<usize>>,
}

impl TriMesh {
    /// Builds a mesh from raw arrays. Indices are checked against the vertex
    /// count; topology is checked by [`validate`].
    pub fn new(positions: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
        }
        Ok(Self {
            positions,
            triangles,
        })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.triangles.len()
    }

    /// Sorted list of undirected edges `(min, max)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edges().len() as i64 + self.num_faces() as i64
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    /// `(b − a) × (c − a)`: twice the area times the unit face normal.
    pub fn face_cross(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.face_cross(t).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_faces()).map(|t| self.triangle_area(t)).sum()
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Point {
        let mut acc = Point::zeros();
        let mut area = 0.0;
        for t in 0..self.num_faces() {
            let [a, b, c] = self.corners(t);
            let w = self.triangle_area(t);
            acc += w * (a + b + c) / 3.0;
            area += w;
        }
        if area > 0.0 {
            acc / area
        } else {
            Point::zeros()
        }
    }

    /// Signed enclosed volume; positive for outward orientation.
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.num_faces())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn adjacency(&self) -> Adjacency {
        let mut vertex_triangles = vec![Vec::new(); self.num_vertices()];
        let mut edge_opposites: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                vertex_triangles[tri[k]].push(t);
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                edge_opposites
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push(c);
            }
        }
        Adjacency {
            vertex_triangles,
            edge_opposites,
        }
    }

    /// Sorted one-ring neighbour lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_vertices()];
        for &(a, b) in &self.edges() {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        for list in &mut nbrs {
            list.sort_unstable();
        }
        nbrs
    }

    /// Same connectivity, new positions.
    pub fn with_positions(&self, positions: Vec<Point>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::FieldLength {
                expected: self.positions.len(),
                got: positions.len(),
            });
        }
        Ok(Self {
            positions,
            triangles: self.triangles.clone(),
        })
    }

    pub fn map_positions(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            positions: self.positions.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_positions(|p| p * s)
    }

    pub fn translated(&self, v: Point) -> Self {
        self.map_positions(|p| p + v)
    }

    /// Reverses every triangle, turning outward normals inward.
    pub fn flipped_orientation(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Moves every vertex radially about the centroid by a factor `1 + δ_i`
    /// with `δ_i` uniform in `[−amplitude, amplitude]`, drawn from a seeded
    /// ChaCha8 stream in vertex order.
    pub fn perturb_radial(&self, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = self.centroid();
        let positions = self
            .positions
            .iter()
            .map(|p| {
                let delta: f64 = rng.random_range(-1.0..=1.0) * amplitude;
                c + (p - c) * (1.0 + delta)
            })
            .collect();
        Self {
            positions,
            triangles: self.triangles.clone(),
        }
    }
}

/// Generates a subdivided icosahedron projected onto the sphere of the given
/// radius about the origin. `V = 10·4^s + 2`.
pub fn build_icosphere(subdivisions: u32, radius: f64) -> Result<TriMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::SubdivisionCap {
            requested: subdivisions,
            cap: MAX_SUBDIVISIONS,
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }

    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Point> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut mid = |a: usize, b: usize, positions: &mut Vec<Point>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                positions.push(((positions[a] + positions[b]) * 0.5).normalize());
                positions.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }

    for p in &mut positions {
        *p *= radius;
    }
    TriMesh::new(positions, triangles)
}

/// Problems detected by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    BoundaryEdge { a: usize, b: usize },
    NonManifoldEdge { a: usize, b: usize, faces: usize },
    OrientationInconsistency { a: usize, b: usize },
    EulerCharacteristic { chi: i64 },
    DegenerateTriangle { triangle: usize },
    RepeatedVertex { triangle: usize },
    IsolatedVertex { vertex: usize },
}

/// Diagnostic report; `passed` iff every mesh invariant holds.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub boundary_edges: usize,
    pub orientation_conflicts: usize,
    pub min_triangle_area: f64,
    /// Smallest interior angle over all triangles, radians.
    pub min_angle: f64,
    pub signed_volume: f64,
    /// Edges whose cotangent weight is negative (non-Delaunay). Warning only.
    pub negative_cotan_edges: usize,
    pub issues: Vec<ValidationIssue>,
    pub passed: bool,
}

pub fn validate(mesh: &TriMesh) -> ValidationReport {
    let mut issues = Vec::new();

    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut used = vec![false; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
            issues.push(ValidationIssue::RepeatedVertex { triangle: t });
        }
        for k in 0..3 {
            used[tri[k]] = true;
            *directed.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
        }
    }

    let edges = mesh.edges();
    let mut boundary_edges = 0;
    let mut orientation_conflicts = 0;
    for &(a, b) in &edges {
        let fwd = directed.get(&(a, b)).copied().unwrap_or(0);
        let bwd = directed.get(&(b, a)).copied().unwrap_or(0);
        match fwd + bwd {
            1 => {
                boundary_edges += 1;
                issues.push(ValidationIssue::BoundaryEdge { a, b });
            }
            2 => {
                if fwd != 1 {
                    orientation_conflicts += 1;
                    issues.push(ValidationIssue::OrientationInconsistency { a, b });
                }
            }
            faces => issues.push(ValidationIssue::NonManifoldEdge { a, b, faces }),
        }
    }

    for (v, &u) in used.iter().enumerate() {
        if !u {
            issues.push(ValidationIssue::IsolatedVertex { vertex: v });
        }
    }

    let chi = mesh.num_vertices() as i64 - edges.len() as i64 + mesh.num_faces() as i64;
    if chi != 2 {
        issues.push(ValidationIssue::EulerCharacteristic { chi });
    }

    let mut min_area = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    for t in 0..mesh.num_faces() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            issues.push(ValidationIssue::DegenerateTriangle { triangle: t });
        }
        min_area = min_area.min(area);
        let p = mesh.corners(t);
        for k in 0..3 {
            let u = p[(k + 1) % 3] - p[k];
            let v = p[(k + 2) % 3] - p[k];
            min_angle = min_angle.min(u.angle(&v));
        }
    }
    if mesh.num_faces() == 0 {
        min_area = 0.0;
        min_angle = 0.0;
    }

    let negative_cotan_edges = crate::diffgeo::edge_cotan_weights(mesh)
        .values()
        .filter(|&&w| w < 0.0)
        .count();

    ValidationReport {
        vertices: mesh.num_vertices(),
        edges: edges.len(),
        faces: mesh.num_faces(),
        euler_characteristic: chi,
        boundary_edges,
        orientation_conflicts,
        min_triangle_area: min_area,
        min_angle,
        signed_volume: mesh.enclosed_volume(),
        negative_cotan_edges,
        passed: issues.is_empty(),
        issues,
    }
}

/// Lumped vertex areas from mixed Voronoi cells.
///
/// Each non-obtuse triangle is split at its circumcentre; an obtuse triangle
/// gives half its area to the obtuse corner and a quarter to each other
/// corner. The cells partition the surface, so `Σ a_i` is the mesh area.
pub fn vertex_measure(mesh: &TriMesh) -> Result<VertexField> {
    let mut a = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { triangle: t, area });
        }
        let p = mesh.corners(t);
        let mut dots = [0.0; 3];
        for (k, d) in dots.iter_mut().enumerate() {
            *d = (p[(k + 1) % 3] - p[k]).dot(&(p[(k + 2) % 3] - p[k]));
        }
        match dots.iter().position(|&d| d < 0.0) {
            None => {
                for k in 0..3 {
                    let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                    let cot_j = dots[j] / (2.0 * area);
                    let cot_l = dots[l] / (2.0 * area);
                    a[tri[k]] += ((p[j] - p[k]).norm_squared() * cot_l
                        + (p[l] - p[k]).norm_squared() * cot_j)
                        / 8.0;
                }
            }
            Some(obtuse) => {
                for k in 0..3 {
                    a[tri[k]] += if k == obtuse { area / 2.0 } else { area / 4.0 };
                }
            }
        }
    }
    Ok(VertexField(a))
}

/// Uniformly scales the mesh about its area-weighted centroid so that its
/// area equals `target`.
pub fn rescale_to_area(mesh: &TriMesh, target: f64) -> Result<TriMesh> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target area must be positive, got {target}"
        )));
    }
    let area = mesh.total_area();
    if !(area > 0.0) {
        return Err(Error::ZeroArea);
    }
    let s = (target / area).sqrt();
    let c = mesh.centroid();
    Ok(mesh.map_positions(|p| c + (p - c) * s))
}
