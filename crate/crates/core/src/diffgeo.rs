//! Discrete differential operators on [`TriMesh`].
//!
//! Sign conventions, fixed for the whole crate:
//! - `Δ` is the cotangent Laplace–Beltrami operator with lumped mass and is
//!   negative semi-definite, so that `Δf = −2Hν` on a smooth surface;
//! - `ν` is the outward unit normal (angle-weighted face average);
//! - `H = (κ₁ + κ₂)/2` is positive on convex spheres.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{vertex_measure, Point, TriMesh, VertexField};

/// Cotangents of the three corner angles of triangle `t`, corner order
/// matching the triangle's vertex order. `None` for a degenerate triangle.
fn triangle_cotans(mesh: &TriMesh, t: usize) -> Option<[f64; 3]> {
    let p = mesh.corners(t);
    let twice_area = mesh.face_cross(t).norm();
    if !(twice_area > 0.0) {
        return None;
    }
    let mut cot = [0.0; 3];
    for (k, c) in cot.iter_mut().enumerate() {
        let u = p[(k + 1) % 3] - p[k];
        let v = p[(k + 2) % 3] - p[k];
        *c = u.dot(&v) / twice_area;
    }
    Some(cot)
}

/// Interior angles of triangle `t`, corner order matching vertex order.
fn triangle_angles(mesh: &TriMesh, t: usize) -> [f64; 3] {
    let p = mesh.corners(t);
    let mut ang = [0.0; 3];
    for (k, a) in ang.iter_mut().enumerate() {
        let u = p[(k + 1) % 3] - p[k];
        let v = p[(k + 2) % 3] - p[k];
        *a = u.cross(&v).norm().atan2(u.dot(&v));
    }
    ang
}

/// Edge weights `½(cot α + cot β)` keyed by `(min, max)`. Degenerate
/// triangles are skipped.
pub(crate) fn edge_cotan_weights(mesh: &TriMesh) -> HashMap<(usize, usize), f64> {
    let mut weights = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let Some(cot) = triangle_cotans(mesh, t) else {
            continue;
        };
        for k in 0..3 {
            let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            *weights.entry((i.min(j), i.max(j))).or_insert(0.0) += 0.5 * cot[k];
        }
    }
    weights
}

/// Sparse symmetric cotangent stiffness matrix `L` with companion lumped
/// mass. `(Lu)_i = Σ_j w_ij (u_j − u_i)`; the pointwise Laplacian is
/// `(Lu)_i / a_i`.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    /// Off-diagonal entries per row, sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    mass: VertexField,
}

impl LaplacianOperator {
    pub fn num_vertices(&self) -> usize {
        self.rows.len()
    }

    pub fn mass(&self) -> &VertexField {
        &self.mass
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Entry `L[i][j]`, including the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            -self.rows[i].iter().map(|&(_, w)| w).sum::<f64>()
        } else {
            self.rows[i]
                .binary_search_by_key(&j, |&(c, _)| c)
                .map(|k| self.rows[i][k].1)
                .unwrap_or(0.0)
        }
    }

    pub fn negative_weights(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter(|&&(_, w)| w < 0.0)
            .count()
            / 2
    }

    /// Stiffness product `L u` (integrated Laplacian).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows.len(), "field length mismatch");
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, w)| w * (u[j] - u[i])).sum())
            .collect()
    }

    pub fn apply_points(&self, u: &[Point]) -> Vec<Point> {
        assert_eq!(u.len(), self.rows.len(), "field length mismatch");
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .fold(Point::zeros(), |acc, &(j, w)| acc + w * (u[j] - u[i]))
            })
            .collect()
    }

    /// Pointwise Laplacian `(Lu)_i / a_i`.
    pub fn laplace(&self, u: &[f64]) -> VertexField {
        self.apply(u)
            .into_iter()
            .zip(self.mass.iter())
            .map(|(l, a)| l / a)
            .collect()
    }
}

pub fn cotan_laplacian(mesh: &TriMesh) -> Result<LaplacianOperator> {
    let mass = vertex_measure(mesh)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let cot = triangle_cotans(mesh, t).ok_or(Error::DegenerateTriangle {
            triangle: t,
            area: mesh.triangle_area(t),
        })?;
        for k in 0..3 {
            let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            rows[i].push((j, 0.5 * cot[k]));
            rows[j].push((i, 0.5 * cot[k]));
        }
    }
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        // Merge the two half-weights of each interior edge.
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len() / 2 + 1);
        for &(j, w) in row.iter() {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += w,
                _ => merged.push((j, w)),
            }
        }
        *row = merged;
    }
    Ok(LaplacianOperator { rows, mass })
}

/// Outward unit normals: angle-weighted average of incident face normals.
pub fn vertex_normals(mesh: &TriMesh) -> Result<Vec<Point>> {
    let mut acc = vec![Point::zeros(); mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let n = mesh.face_cross(t);
        let norm = n.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateTriangle {
                triangle: t,
                area: 0.5 * norm,
            });
        }
        let n = n / norm;
        let ang = triangle_angles(mesh, t);
        for k in 0..3 {
            acc[tri[k]] += ang[k] * n;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(v, n)| {
            let norm = n.norm();
            if norm > 0.0 && norm.is_finite() {
                Ok(n / norm)
            } else {
                Err(Error::NonFinite {
                    quantity: "vertex normal",
                    vertex: v,
                })
            }
        })
        .collect()
}

/// Per-vertex curvature data of a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceFields {
    pub h: VertexField,
    pub k: VertexField,
    pub normal: Vec<Point>,
    pub measure: VertexField,
}

impl SurfaceFields {
    pub fn compute(mesh: &TriMesh) -> Result<Self> {
        let lap = cotan_laplacian(mesh)?;
        Self::with_laplacian(mesh, &lap)
    }

    /// Fields computed from an already assembled Laplacian of `mesh`.
    pub fn with_laplacian(mesh: &TriMesh, lap: &LaplacianOperator) -> Result<Self> {
        let normal = vertex_normals(mesh)?;
        let measure = lap.mass().clone();
        let h = mean_curvature_from(lap, mesh.positions(), &normal);
        let k = angle_defects(mesh)
            .into_iter()
            .zip(measure.iter())
            .map(|(d, a)| d / a)
            .collect();
        Ok(Self {
            h,
            k,
            normal,
            measure,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.measure.len()
    }

    pub fn total_area(&self) -> f64 {
        self.measure.iter().sum()
    }
}

/// `H_i = −⟨(Lf)_i / (2a_i), ν_i⟩`.
fn mean_curvature_from(
    lap: &LaplacianOperator,
    positions: &[Point],
    normal: &[Point],
) -> VertexField {
    lap.apply_points(positions)
        .iter()
        .zip(normal)
        .zip(lap.mass().iter())
        .map(|((lf, n), a)| -lf.dot(n) / (2.0 * a))
        .collect()
}

/// `2π − Σ` incident angles, per vertex.
fn angle_defects(mesh: &TriMesh) -> Vec<f64> {
    let mut defect = vec![2.0 * std::f64::consts::PI; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let ang = triangle_angles(mesh, t);
        for k in 0..3 {
            defect[tri[k]] -= ang[k];
        }
    }
    defect
}

pub fn mean_curvature(mesh: &TriMesh) -> Result<VertexField> {
    let lap = cotan_laplacian(mesh)?;
    let normal = vertex_normals(mesh)?;
    Ok(mean_curvature_from(&lap, mesh.positions(), &normal))
}

/// Angle-defect Gauss curvature `K_i = (2π − Σθ)/a_i`.
pub fn gauss_curvature(mesh: &TriMesh) -> Result<VertexField> {
    let measure = vertex_measure(mesh)?;
    Ok(angle_defects(mesh)
        .into_iter()
        .zip(measure.iter())
        .map(|(d, a)| d / a)
        .collect())
}

/// `Σ H_i² a_i`.
pub fn willmore_energy(mesh: &TriMesh) -> Result<f64> {
    let f = SurfaceFields::compute(mesh)?;
    Ok(f.h
        .iter()
        .zip(f.measure.iter())
        .map(|(h, a)| h * h * a)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;
    use std::f64::consts::PI;

    /// Flat grid on `[−1,1]²`, open, with `n×n` cells.
    fn planar_patch(n: usize, lift: impl Fn(f64, f64) -> f64) -> TriMesh {
        let mut pos = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                let x = -1.0 + 2.0 * i as f64 / n as f64;
                let y = -1.0 + 2.0 * j as f64 / n as f64;
                pos.push(Point::new(x, y, lift(x, y)));
            }
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        TriMesh::new(pos, tris).unwrap()
    }

    #[test]
    fn laplacian_is_symmetric_with_zero_row_sums() {
        let m = build_icosphere(2, 1.0).unwrap().perturb_radial(0.05, 1);
        let lap = cotan_laplacian(&m).unwrap();
        for i in 0..m.num_vertices() {
            let row_sum: f64 = (0..m.num_vertices()).map(|j| lap.entry(i, j)).sum();
            assert!(row_sum.abs() < 1e-12);
            for &(j, w) in lap.row(i) {
                assert_eq!(w, lap.entry(j, i));
            }
        }
        let ones = vec![3.5; m.num_vertices()];
        assert!(lap.apply(&ones).iter().all(|v| v.abs() < 1e-12 * 3.5));
    }

    #[test]
    fn laplacian_is_negative_semidefinite() {
        let m = build_icosphere(2, 1.0).unwrap();
        let lap = cotan_laplacian(&m).unwrap();
        let u: Vec<f64> = m.positions().iter().map(|p| p.x * p.y + p.z).collect();
        let quad: f64 = lap.apply(&u).iter().zip(&u).map(|(l, v)| l * v).sum();
        assert!(quad < 0.0);
    }

    #[test]
    fn linear_field_is_harmonic_on_flat_patch() {
        let m = planar_patch(6, |_, _| 0.0);
        let lap = cotan_laplacian(&m).unwrap();
        let u: Vec<f64> = m
            .positions()
            .iter()
            .map(|p| 0.3 * p.x - 1.7 * p.y + 2.0)
            .collect();
        let lu = lap.apply(&u);
        for j in 1..6 {
            for i in 1..6 {
                assert!(lu[j * 7 + i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn position_laplacian_matches_mean_curvature_vector() {
        let m = build_icosphere(3, 1.0).unwrap();
        let lap = cotan_laplacian(&m).unwrap();
        let lf = lap.apply_points(m.positions());
        let (mut num, mut den) = (0.0, 0.0);
        for ((l, p), a) in lf.iter().zip(m.positions()).zip(lap.mass().iter()) {
            // Unit sphere: −2Hν = −2p.
            let diff = l / *a + 2.0 * p;
            num += diff.norm_squared() * a;
            den += (2.0 * p).norm_squared() * a;
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 0.05, "relative mismatch {rel}");
    }

    #[test]
    fn unit_icosphere_mean_curvature_near_one() {
        let h = mean_curvature(&build_icosphere(3, 1.0).unwrap()).unwrap();
        for v in h.iter() {
            assert!((0.98..=1.02).contains(v), "H = {v}");
        }
        let h2 = mean_curvature(&build_icosphere(3, 2.0).unwrap()).unwrap();
        for v in h2.iter() {
            assert!((v - 0.5).abs() <= 0.01, "H = {v}");
        }
    }

    #[test]
    fn graph_patch_mean_curvature_at_apex() {
        // u = (x² + y²)/2 has H(0,0) = (u_xx + u_yy)/2 = 1 with upward normal;
        // the patch normal points +z, the paraboloid bends toward +z, so with
        // the outward (convex-side) convention H = −1 here.
        let graph_h = |ux: f64, uy: f64, uxx: f64, uxy: f64, uyy: f64| {
            ((1.0 + uy * uy) * uxx - 2.0 * ux * uy * uxy + (1.0 + ux * ux) * uyy)
                / (2.0 * (1.0 + ux * ux + uy * uy).powf(1.5))
        };
        assert_eq!(graph_h(0.0, 0.0, 1.0, 0.0, 1.0), 1.0);

        let n = 40;
        let m = planar_patch(n, |x, y| 0.5 * (x * x + y * y));
        let h = mean_curvature(&m).unwrap();
        let centre = (n / 2) * (n + 1) + n / 2;
        assert!((h[centre] + 1.0).abs() < 1e-2, "H = {}", h[centre]);
    }

    #[test]
    fn gauss_bonnet_holds_exactly() {
        for (s, noise, seed) in [(0, 0.0, 0), (2, 0.1, 4), (3, 0.05, 9)] {
            let m = build_icosphere(s, 1.7).unwrap().perturb_radial(noise, seed);
            let f = SurfaceFields::compute(&m).unwrap();
            let total: f64 = f.k.iter().zip(f.measure.iter()).map(|(k, a)| k * a).sum();
            assert!((total - 4.0 * PI).abs() / (4.0 * PI) < 1e-10);
        }
    }

    #[test]
    fn gauss_curvature_on_spheres() {
        let k = gauss_curvature(&build_icosphere(3, 1.0).unwrap()).unwrap();
        assert!(k.iter().all(|v| (v - 1.0).abs() < 0.05));
        let k = gauss_curvature(&build_icosphere(3, 2.0).unwrap()).unwrap();
        assert!(k.iter().all(|v| (v - 0.25).abs() < 0.25 * 0.05));
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let m = build_icosphere(2, 1.0).unwrap().perturb_radial(0.05, 2);
        for (n, p) in vertex_normals(&m).unwrap().iter().zip(m.positions()) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(p) > 0.0);
        }
    }

    #[test]
    fn willmore_energy_of_round_sphere() {
        let w = willmore_energy(&build_icosphere(3, 1.0).unwrap()).unwrap();
        let ratio = w / (4.0 * PI);
        assert!((0.98..=1.05).contains(&ratio), "ratio {ratio}");
        let w2 = willmore_energy(&build_icosphere(3, 3.0).unwrap()).unwrap();
        assert!((w - w2).abs() / w < 1e-10);
    }

    #[test]
    fn ellipsoid_exceeds_sphere_bound() {
        let m = build_icosphere(3, 1.0)
            .unwrap()
            .map_positions(|p| Point::new(2.0 * p.x, p.y, p.z));
        assert!(willmore_energy(&m).unwrap() > 4.0 * PI);
    }

    #[test]
    fn scale_covariance() {
        let m = build_icosphere(2, 1.0).unwrap().perturb_radial(0.05, 5);
        let s = 1.9;
        let a = SurfaceFields::compute(&m).unwrap();
        let b = SurfaceFields::compute(&m.scaled(s)).unwrap();
        for i in 0..m.num_vertices() {
            assert!((b.h[i] * s - a.h[i]).abs() <= 1e-10 * a.h[i].abs());
            assert!((b.k[i] * s * s - a.k[i]).abs() <= 1e-10 * a.k[i].abs().max(1e-3));
            assert!((b.measure[i] - s * s * a.measure[i]).abs() <= 1e-10 * b.measure[i]);
        }
    }

    #[test]
    fn mean_curvature_error_shrinks_under_refinement() {
        let errs: Vec<f64> = (2..=4)
            .map(|s| {
                mean_curvature(&build_icosphere(s, 1.0).unwrap())
                    .unwrap()
                    .iter()
                    .map(|h| (h - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn orientation_flip_negates_mean_curvature() {
        let m = build_icosphere(2, 1.0).unwrap().perturb_radial(0.03, 8);
        let a = mean_curvature(&m).unwrap();
        let b = mean_curvature(&m.flipped_orientation()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x + y).abs() < 1e-12);
        }
    }
}
