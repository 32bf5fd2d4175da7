//! Ambient weight functions `ξ ≥ 1` and their gradients.

use serde::{Deserialize, Serialize};

use crate::diffgeo::vertex_normals;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, VertexField};

/// A weight function on ambient space.
///
/// `AxisQuadratic` does not grow along the plane orthogonal to its axis, so
/// it cannot stop a surface from drifting off to infinity; runs using it
/// must enable the penalisation term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant {
        c: f64,
    },
    /// `1 + c·|x − center|²`
    RadialQuadratic {
        center: [f64; 3],
        c: f64,
    },
    /// `1 + c·⟨axis, x⟩²`
    AxisQuadratic {
        axis: [f64; 3],
        c: f64,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { c: 1.0 }
    }
}

impl WeightSpec {
    pub fn check(&self) -> Result<()> {
        match *self {
            WeightSpec::Constant { c } if !(c >= 1.0 && c.is_finite()) => Err(
                Error::InvalidWeight(format!("constant weight must be >= 1, got {c}")),
            ),
            WeightSpec::RadialQuadratic { center, c } => {
                if !(c > 0.0 && c.is_finite()) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidWeight(format!(
                        "radial quadratic needs finite center and c > 0, got c = {c}"
                    )));
                }
                Ok(())
            }
            WeightSpec::AxisQuadratic { axis, c } => {
                let n = Point::from(axis).norm();
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidWeight(format!(
                        "axis quadratic needs c > 0, got {c}"
                    )));
                }
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidWeight(format!(
                        "axis must be a unit vector, |axis| = {n}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether `ξ → ∞` as `|x| → ∞`.
    pub fn is_coercive(&self) -> bool {
        !matches!(self, WeightSpec::AxisQuadratic { .. })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WeightSpec::Constant { .. })
    }

    /// Value and exact gradient at `x`.
    pub fn eval(&self, x: &Point) -> (f64, Point) {
        match *self {
            WeightSpec::Constant { c } => (c, Point::zeros()),
            WeightSpec::RadialQuadratic { center, c } => {
                let r = x - Point::from(center);
                (1.0 + c * r.norm_squared(), 2.0 * c * r)
            }
            WeightSpec::AxisQuadratic { axis, c } => {
                let axis = Point::from(axis);
                let s = axis.dot(x);
                (1.0 + c * s * s, 2.0 * c * s * axis)
            }
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.eval(x).0
    }

    /// `ξ(f_i)` for every vertex.
    pub fn on_mesh(&self, mesh: &TriMesh) -> VertexField {
        mesh.positions().iter().map(|p| self.value(p)).collect()
    }
}

/// `⟨∇ξ(f_i), ν_i⟩` with the outward vertex normal.
pub fn normal_weight_derivative(mesh: &TriMesh, spec: &WeightSpec) -> Result<VertexField> {
    let normals = vertex_normals(mesh)?;
    Ok(normal_derivative_with(mesh, spec, &normals))
}

pub(crate) fn normal_derivative_with(
    mesh: &TriMesh,
    spec: &WeightSpec,
    normals: &[Point],
) -> VertexField {
    mesh.positions()
        .iter()
        .zip(normals)
        .map(|(p, n)| spec.eval(p).1.dot(n))
        .collect()
}
