//! Curvature energies: the normalised weighted `L^p` norm of mean curvature
//! (optionally `ε`-regularised), its `L^∞` limit, the distance penalisation
//! and their sum.
//!
//! All integrals use the lumped vertex measure, matching where `H` lives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diffgeo::{cotan_laplacian, LaplacianOperator, SurfaceFields};
use crate::distance::ReferenceSurface;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, VertexField};
use crate::weights::WeightSpec;

/// Integrability exponent: finite `p ≥ 2` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Text(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                Ok(Exponent::Infinite)
            }
            Raw::Text(s) => s
                .parse::<f64>()
                .map(Exponent::Finite)
                .map_err(|_| serde::de::Error::custom(format!("invalid exponent {s:?}"))),
        }
    }
}

/// Parameters of the energy `h_{p,ε} + P^σ` under the area constraint.
#[derive(Debug, Clone)]
pub struct EnergyParams {
    pub p: Exponent,
    pub epsilon: f64,
    pub sigma: f64,
    pub target_area: f64,
    pub weight: WeightSpec,
    pub reference: Option<Arc<ReferenceSurface>>,
}

impl EnergyParams {
    /// Unweighted, unregularised, unpenalised energy.
    pub fn new(p: Exponent, target_area: f64) -> Self {
        Self {
            p,
            epsilon: 0.0,
            sigma: 0.0,
            target_area,
            weight: WeightSpec::default(),
            reference: None,
        }
    }

    pub fn with_p(mut self, p: Exponent) -> Self {
        self.p = p;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_weight(mut self, weight: WeightSpec) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_reference(mut self, reference: Arc<ReferenceSurface>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn check(&self) -> Result<()> {
        if let Exponent::Finite(p) = self.p {
            if !(p >= 2.0 && p.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "p must lie in [2, inf), got {p}"
                )));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.target_area > 0.0 && self.target_area.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "target area must be positive, got {}",
                self.target_area
            )));
        }
        if self.sigma > 0.0 && self.reference.is_none() {
            return Err(Error::MissingReference { sigma: self.sigma });
        }
        self.weight.check()?;
        if !self.weight.is_coercive() && self.sigma == 0.0 {
            return Err(Error::InvalidParams(
                "non-coercive weight requires sigma > 0 with a reference surface".into(),
            ));
        }
        Ok(())
    }

    fn finite_p(&self) -> Result<f64> {
        self.p
            .finite()
            .ok_or_else(|| Error::InvalidParams("operation requires a finite p".into()))
    }
}

/// Geometry of one mesh under one weight: Laplacian, curvature fields and
/// the weight sampled at the vertices.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub laplacian: LaplacianOperator,
    pub fields: SurfaceFields,
    /// `ξ(f_i)`.
    pub xi: VertexField,
    /// `ξ_i H_i`.
    pub xi_h: VertexField,
}

impl Evaluation {
    pub fn new(mesh: &TriMesh, weight: &WeightSpec) -> Result<Self> {
        let laplacian = cotan_laplacian(mesh)?;
        let fields = SurfaceFields::with_laplacian(mesh, &laplacian)?;
        let xi = weight.on_mesh(mesh);
        let xi_h = xi.iter().zip(fields.h.iter()).map(|(x, h)| x * h).collect();
        Ok(Self {
            laplacian,
            fields,
            xi,
            xi_h,
        })
    }

    pub fn measure(&self) -> &VertexField {
        &self.fields.measure
    }
}

/// `A^{−1/p} (Σ_i (x_i² + ε)^{p/2} a_i)^{1/p}`, evaluated after factoring
/// out the largest `x_i² + ε` so that no power overflows.
pub fn normalized_lp(
    values: &[f64],
    measure: &[f64],
    p: f64,
    epsilon: f64,
    area: f64,
) -> Result<f64> {
    let m: Vec<f64> = values.iter().map(|x| x * x + epsilon).collect();
    let m_max = m.iter().copied().fold(0.0, f64::max);
    if !m_max.is_finite() {
        return Err(Error::Overflow(format!("integrand maximum is {m_max}")));
    }
    if m_max == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = m
        .iter()
        .zip(measure)
        .map(|(mi, a)| a * (mi / m_max).powf(0.5 * p))
        .sum();
    let h = ((sum.ln() - area.ln()) / p).exp() * m_max.sqrt();
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::Overflow(format!(
            "h_p not finite at p = {p} (sum {sum:e}, max {m_max:e})"
        )))
    }
}

/// `max_i |x_i|` and the lowest index attaining it.
pub(crate) fn sup_norm(values: &[f64]) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (i, v) in values.iter().enumerate() {
        if v.abs() > best.0 {
            best = (v.abs(), i);
        }
    }
    best
}

pub(crate) fn lp_from(eval: &Evaluation, params: &EnergyParams) -> Result<f64> {
    normalized_lp(
        &eval.xi_h,
        eval.measure(),
        params.finite_p()?,
        params.epsilon,
        params.target_area,
    )
}

/// `h_{p,ε}`: the normalised weighted `L^p` norm of `√((ξH)² + ε)`.
pub fn lp_energy(mesh: &TriMesh, params: &EnergyParams) -> Result<f64> {
    lp_from(&Evaluation::new(mesh, &params.weight)?, params)
}

/// `‖ξH‖_∞` with the attaining vertex (lowest index on ties).
pub fn linf_energy(mesh: &TriMesh, params: &EnergyParams) -> Result<(f64, usize)> {
    let eval = Evaluation::new(mesh, &params.weight)?;
    Ok(sup_norm(&eval.xi_h))
}

/// Distances `d(f_i)` and their gradients, in vertex order.
pub(crate) fn vertex_distances(mesh: &TriMesh, reference: &ReferenceSurface) -> Vec<(f64, Point)> {
    mesh.positions()
        .par_iter()
        .map(|p| reference.distance_eval(p))
        .collect()
}

pub(crate) fn penalisation_from(
    mesh: &TriMesh,
    measure: &[f64],
    params: &EnergyParams,
) -> Result<f64> {
    if params.sigma == 0.0 {
        return Ok(0.0);
    }
    let reference = params.reference.as_ref().ok_or(Error::MissingReference {
        sigma: params.sigma,
    })?;
    let integral: f64 = vertex_distances(mesh, reference)
        .iter()
        .zip(measure)
        .map(|((d, _), a)| d * d * a)
        .sum();
    Ok(params.sigma / (2.0 * params.target_area) * integral)
}

/// `(σ / 2A) Σ_i d(f_i)² a_i`.
pub fn penalisation(mesh: &TriMesh, params: &EnergyParams) -> Result<f64> {
    if params.sigma == 0.0 {
        return Ok(0.0);
    }
    let measure = crate::mesh::vertex_measure(mesh)?;
    penalisation_from(mesh, &measure, params)
}

pub(crate) fn total_from(mesh: &TriMesh, eval: &Evaluation, params: &EnergyParams) -> Result<f64> {
    let curvature = match params.p {
        Exponent::Finite(_) => lp_from(eval, params)?,
        Exponent::Infinite => sup_norm(&eval.xi_h).0,
    };
    Ok(curvature + penalisation_from(mesh, eval.measure(), params)?)
}

/// Curvature term (`h_{p,ε}`, or `‖ξH‖_∞` for `p = ∞`) plus penalisation.
pub fn total_energy(mesh: &TriMesh, params: &EnergyParams) -> Result<f64> {
    params.check()?;
    let eval = Evaluation::new(mesh, &params.weight)?;
    total_from(mesh, &eval, params)
}

/// `√(8π)`: bound on `‖ξH‖_∞ √A` below which the `L^p` approximation
/// cannot change topology.
pub fn low_energy_threshold() -> f64 {
    (8.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowEnergy {
    pub ok: bool,
    /// `‖ξH‖_∞ · √A`
    pub value: f64,
}

pub fn low_energy_check(mesh: &TriMesh, params: &EnergyParams) -> Result<LowEnergy> {
    let (linf, _) = linf_energy(mesh, params)?;
    Ok(low_energy_from(linf, params.target_area))
}

pub(crate) fn low_energy_from(linf: f64, area: f64) -> LowEnergy {
    let value = linf * area.sqrt();
    LowEnergy {
        ok: value < low_energy_threshold(),
        value,
    }
}
