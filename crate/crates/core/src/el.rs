//! Euler–Lagrange coefficient fields and the checks of the limiting system
//!
//! ```text
//!     ½Δw + Qw = λH,      h·w = |w|·ξH.
//! ```
//!
//! With the outward normal `ν` used throughout the crate, the first
//! variation of `h_{p,ε} + P^σ` along a normal speed `ψ` (displacement `ψν`)
//! is `−(1/A) ∫ ψ G dμ` where
//!
//! ```text
//!     G = ½Δw + Qw − σ d ∂_ν d − σ d² H
//!     Q = 2H² − K − (2/p)(H² + ε/ξ²) − H ∂_ν ξ / ξ
//! ```
//!
//! and area changes by `2 ∫ ψ H dμ`. Flipping `ν` to the mean-curvature
//! normal recovers the other common sign convention term by term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    lp_from, normalized_lp, sup_norm, vertex_distances, EnergyParams, Evaluation,
};
use crate::mesh::{TriMesh, VertexField};
use crate::weights::normal_derivative_with;

/// Which algebraic form of `Q` was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QBranch {
    /// `ε = 0`: `2((p−1)/p)H² − K − H ∂_ν ξ/ξ`.
    Unregularized,
    /// `ε > 0`: `2H² − K − (2/p)(H² + ε/ξ²) − H ∂_ν ξ/ξ`.
    Regularized,
}

/// `w` in log space.
///
/// `ε = 0`: `h^{1−p} ξ^p |H|^{p−2} H`; otherwise
/// `h^{1−p} ((ξH)² + ε)^{(p−2)/2} ξ² H`.
fn w_field(eval: &Evaluation, h: f64, p: f64, epsilon: f64) -> Result<VertexField> {
    if !(h > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let log_h = h.ln();
    eval.fields
        .h
        .iter()
        .zip(eval.xi.iter())
        .zip(eval.xi_h.iter())
        .enumerate()
        .map(|(i, ((&hc, &xi), &xh))| {
            if hc == 0.0 {
                return Ok(0.0);
            }
            let log_mag = if epsilon == 0.0 {
                (1.0 - p) * log_h + p * xi.ln() + (p - 1.0) * hc.abs().ln()
            } else {
                (1.0 - p) * log_h
                    + 0.5 * (p - 2.0) * (xh * xh + epsilon).ln()
                    + 2.0 * xi.ln()
                    + hc.abs().ln()
            };
            let w = hc.signum() * log_mag.exp();
            if w.is_finite() {
                Ok(w)
            } else {
                Err(Error::NonFinite {
                    quantity: "w",
                    vertex: i,
                })
            }
        })
        .collect()
}

fn q_field(eval: &Evaluation, dnu_xi: &[f64], p: f64, epsilon: f64) -> (VertexField, QBranch) {
    let f = &eval.fields;
    let branch = if epsilon == 0.0 {
        QBranch::Unregularized
    } else {
        QBranch::Regularized
    };
    let q = (0..f.num_vertices())
        .map(|i| {
            let (h, k, xi) = (f.h[i], f.k[i], eval.xi[i]);
            let weight_term = h * dnu_xi[i] / xi;
            match branch {
                QBranch::Unregularized => 2.0 * (p - 1.0) / p * h * h - k - weight_term,
                QBranch::Regularized => {
                    2.0 * h * h - k - (2.0 / p) * (h * h + epsilon / (xi * xi)) - weight_term
                }
            }
        })
        .collect();
    (q, branch)
}

/// All Euler–Lagrange ingredients at one mesh.
#[derive(Debug, Clone)]
pub struct Density {
    pub eval: Evaluation,
    pub p: f64,
    /// `h_{p,ε}`
    pub h: f64,
    pub w: VertexField,
    pub q: VertexField,
    pub q_branch: QBranch,
    /// `λ`-free density `G`.
    pub g: VertexField,
}

impl Density {
    pub fn compute(mesh: &TriMesh, params: &EnergyParams) -> Result<Self> {
        let eval = Evaluation::new(mesh, &params.weight)?;
        Self::from_evaluation(mesh, eval, params)
    }

    pub fn from_evaluation(
        mesh: &TriMesh,
        eval: Evaluation,
        params: &EnergyParams,
    ) -> Result<Self> {
        let p = params
            .p
            .finite()
            .ok_or_else(|| Error::InvalidParams("Euler-Lagrange fields need a finite p".into()))?;
        let h = lp_from(&eval, params)?;
        let w = w_field(&eval, h, p, params.epsilon)?;
        let dnu_xi = normal_derivative_with(mesh, &params.weight, &eval.fields.normal);
        let (q, q_branch) = q_field(&eval, &dnu_xi, p, params.epsilon);

        let lap_w = eval.laplacian.laplace(&w);
        let mut g: Vec<f64> = (0..w.len()).map(|i| 0.5 * lap_w[i] + q[i] * w[i]).collect();

        if params.sigma > 0.0 {
            let reference = params.reference.as_ref().ok_or(Error::MissingReference {
                sigma: params.sigma,
            })?;
            let dist = vertex_distances(mesh, reference);
            for (i, (d, grad)) in dist.iter().enumerate() {
                let dnu_d = grad.dot(&eval.fields.normal[i]);
                g[i] -= params.sigma * (d * dnu_d + d * d * eval.fields.h[i]);
            }
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "Euler-Lagrange density",
                vertex: i,
            });
        }

        Ok(Self {
            eval,
            p,
            h,
            w,
            q,
            q_branch,
            g: g.into(),
        })
    }

    pub fn measure(&self) -> &VertexField {
        self.eval.measure()
    }

    pub fn mean_curvature(&self) -> &VertexField {
        &self.eval.fields.h
    }

    /// `L²(μ)` projection of `G` onto `H`.
    pub fn lambda(&self) -> Result<f64> {
        project_onto(&self.g, self.mean_curvature(), self.measure())
    }
}

/// `(Σ g_i H_i a_i) / (Σ H_i² a_i)`.
pub fn project_onto(g: &[f64], h: &[f64], measure: &[f64]) -> Result<f64> {
    let num: f64 = (0..g.len()).map(|i| g[i] * h[i] * measure[i]).sum();
    let den: f64 = (0..g.len()).map(|i| h[i] * h[i] * measure[i]).sum();
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::ZeroCurvature)
    }
}

pub(crate) fn weighted_l2(values: &[f64], measure: &[f64]) -> f64 {
    values
        .iter()
        .zip(measure)
        .map(|(v, a)| v * v * a)
        .sum::<f64>()
        .sqrt()
}

pub fn compute_w(mesh: &TriMesh, params: &EnergyParams) -> Result<VertexField> {
    Ok(Density::compute(mesh, params)?.w)
}

#[allow(non_snake_case)]
pub fn compute_Q(mesh: &TriMesh, params: &EnergyParams) -> Result<VertexField> {
    let p = params
        .p
        .finite()
        .ok_or_else(|| Error::InvalidParams("Q needs a finite p".into()))?;
    let eval = Evaluation::new(mesh, &params.weight)?;
    let dnu_xi = normal_derivative_with(mesh, &params.weight, &eval.fields.normal);
    Ok(q_field(&eval, &dnu_xi, p, params.epsilon).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValueClass {
    Plus,
    Zero,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeValueOptions {
    /// Nodal band: `|w_i| ≤ τ·max|w|`.
    pub tau: f64,
    /// Concentration tolerance on `|ξH − h·sgn w| / h`.
    pub delta_c: f64,
}

impl Default for ThreeValueOptions {
    fn default() -> Self {
        Self {
            tau: 0.05,
            delta_c: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeValue {
    pub classes: Vec<ValueClass>,
    pub plus: usize,
    pub zero: usize,
    pub minus: usize,
    /// `μ`-fraction of non-nodal vertices with `|ξH − h·sgn w|/h ≤ δ_c`.
    pub concentration: f64,
    /// `‖h w − |w| ξH‖_{L¹} / (h ‖w‖_{L¹})`
    pub sign_residual: f64,
}

/// Classifies vertices into `{PLUS, ZERO, MINUS}` by the sign of `w`, with a
/// nodal band relative to `max|w|`.
pub fn classify_three_values(
    w: &[f64],
    xi_h: &[f64],
    h: f64,
    measure: &[f64],
    opts: ThreeValueOptions,
) -> ThreeValue {
    let (w_max, _) = sup_norm(w);
    let classes: Vec<ValueClass> = w
        .iter()
        .map(|&wi| {
            if wi.abs() <= opts.tau * w_max {
                ValueClass::Zero
            } else if wi > 0.0 {
                ValueClass::Plus
            } else {
                ValueClass::Minus
            }
        })
        .collect();
    let count = |c: ValueClass| classes.iter().filter(|&&x| x == c).count();

    let (mut active, mut concentrated) = (0.0, 0.0);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..w.len() {
        let a = measure[i];
        if classes[i] != ValueClass::Zero {
            active += a;
            if (xi_h[i] - h * w[i].signum()).abs() / h <= opts.delta_c {
                concentrated += a;
            }
        }
        num += (h * w[i] - w[i].abs() * xi_h[i]).abs() * a;
        den += w[i].abs() * a;
    }
    ThreeValue {
        plus: count(ValueClass::Plus),
        zero: count(ValueClass::Zero),
        minus: count(ValueClass::Minus),
        classes,
        concentration: if active > 0.0 {
            concentrated / active
        } else {
            0.0
        },
        sign_residual: if den > 0.0 { num / (h * den) } else { 0.0 },
    }
}

/// Verdict on the Euler–Lagrange system at one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElReport {
    pub p: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub h: f64,
    pub lambda: f64,
    pub q_branch: QBranch,
    pub w: VertexField,
    #[serde(rename = "Q")]
    pub q: VertexField,
    /// `‖G − λH‖_{L²(μ)} / ‖Qw‖_{L²(μ)}`
    pub residual_l2: f64,
    /// `‖ξH‖_∞ √A`
    pub linf_times_sqrt_a: f64,
    pub tau: Option<f64>,
    pub delta_c: Option<f64>,
    pub three_value: Option<Vec<ValueClass>>,
    pub class_counts: Option<[usize; 3]>,
    pub concentration: Option<f64>,
    pub sign_residual: Option<f64>,
}

impl ElReport {
    pub fn from_density(density: &Density, params: &EnergyParams) -> Result<Self> {
        let lambda = density.lambda()?;
        let measure = density.measure();
        let hc = density.mean_curvature();
        let residual: Vec<f64> = (0..hc.len())
            .map(|i| density.g[i] - lambda * hc[i])
            .collect();
        let qw: Vec<f64> = (0..hc.len()).map(|i| density.q[i] * density.w[i]).collect();
        let scale = weighted_l2(&qw, measure);
        let residual_l2 = if scale > 0.0 {
            weighted_l2(&residual, measure) / scale
        } else {
            f64::INFINITY
        };
        Ok(Self {
            p: density.p,
            epsilon: params.epsilon,
            sigma: params.sigma,
            h: density.h,
            lambda,
            q_branch: density.q_branch,
            w: density.w.clone(),
            q: density.q.clone(),
            residual_l2,
            linf_times_sqrt_a: sup_norm(&density.eval.xi_h).0 * params.target_area.sqrt(),
            tau: None,
            delta_c: None,
            three_value: None,
            class_counts: None,
            concentration: None,
            sign_residual: None,
        })
    }

    pub fn with_three_value(mut self, tv: ThreeValue, opts: ThreeValueOptions) -> Self {
        self.tau = Some(opts.tau);
        self.delta_c = Some(opts.delta_c);
        self.class_counts = Some([tv.plus, tv.zero, tv.minus]);
        self.concentration = Some(tv.concentration);
        self.sign_residual = Some(tv.sign_residual);
        self.three_value = Some(tv.classes);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// `w`, `Q`, `λ`, `h` and the relative residual of `G = λH`.
pub fn el_residual(mesh: &TriMesh, params: &EnergyParams) -> Result<ElReport> {
    ElReport::from_density(&Density::compute(mesh, params)?, params)
}

/// [`el_residual`] plus the three-value classification.
pub fn three_value_report(
    mesh: &TriMesh,
    params: &EnergyParams,
    opts: ThreeValueOptions,
) -> Result<ElReport> {
    let density = Density::compute(mesh, params)?;
    full_report(&density, params, opts)
}

pub(crate) fn full_report(
    density: &Density,
    params: &EnergyParams,
    opts: ThreeValueOptions,
) -> Result<ElReport> {
    let tv = classify_three_values(
        &density.w,
        &density.eval.xi_h,
        density.h,
        density.measure(),
        opts,
    );
    Ok(ElReport::from_density(density, params)?.with_three_value(tv, opts))
}

/// `(p, h_p)` with `ε = 0` for each `p`: the normalised `L^p` norms of `ξH`.
pub fn holder_curve(
    mesh: &TriMesh,
    params: &EnergyParams,
    p_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let eval = Evaluation::new(mesh, &params.weight)?;
    p_list
        .iter()
        .map(|&p| {
            normalized_lp(&eval.xi_h, eval.measure(), p, 0.0, params.target_area).map(|h| (p, h))
        })
        .collect()
}
