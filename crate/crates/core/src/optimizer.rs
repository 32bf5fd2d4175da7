//! Area-constrained normal flow for `h_{p,ε} + P^σ` and the `p → ∞`
//! continuation ladder.
//!
//! The drift is the Euler–Lagrange density `G` of the smooth energy,
//! sampled on the mesh, with the area multiplier removed by `L²(μ)`
//! projection: vertices move by `t·(G − λH)·ν`. After every trial step the
//! mesh is rescaled to the target area, and the step is accepted by Armijo
//! backtracking on the discrete energy of the rescaled mesh.

use serde::{Deserialize, Serialize};

use crate::diffgeo::vertex_normals;
use crate::el::{full_report, project_onto, weighted_l2, Density, ElReport, ThreeValueOptions};
use crate::error::{Error, Result};
use crate::functionals::{
    low_energy_from, normalized_lp, sup_norm, total_from, EnergyParams, Evaluation, Exponent,
    LowEnergy,
};
use crate::mesh::{rescale_to_area, Point, TriMesh, VertexField};

/// `ε(p) = scale / p^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRule {
    pub scale: f64,
    pub power: f64,
}

impl Default for EpsilonRule {
    fn default() -> Self {
        Self {
            scale: 1e-2,
            power: 2.0,
        }
    }
}

impl EpsilonRule {
    pub fn at(&self, p: f64) -> f64 {
        self.scale / p.powf(self.power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub p_list: Vec<f64>,
    pub epsilon_rule: EpsilonRule,
    pub max_iters_per_stage: usize,
    /// Initial trial step; `None` means `1e-3·R³` with `R = √(A/4π)`.
    pub step_init: Option<f64>,
    /// Stage stops once `‖G − λH‖_{L²(μ)} / (h²√A)` drops below this.
    pub grad_tol: f64,
    /// Stage also stops when the energy decreased by less than this
    /// fraction over the last `stagnation_window` accepted steps.
    pub energy_rtol: f64,
    pub stagnation_window: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Tangential vertex relaxation at the start of every stage.
    pub tangential_smoothing: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            p_list: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            epsilon_rule: EpsilonRule::default(),
            max_iters_per_stage: 2000,
            step_init: None,
            grad_tol: 1e-4,
            energy_rtol: 1e-10,
            stagnation_window: 50,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_halvings: 40,
            tangential_smoothing: false,
        }
    }
}

impl Schedule {
    pub fn check(&self) -> Result<()> {
        if self.p_list.is_empty() {
            return Err(Error::InvalidSchedule("p_list is empty".into()));
        }
        if self.p_list.iter().any(|&p| !(p >= 2.0 && p.is_finite())) {
            return Err(Error::InvalidSchedule(
                "every p must be finite and >= 2".into(),
            ));
        }
        if self.p_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule(
                "p_list must be strictly increasing".into(),
            ));
        }
        if self
            .p_list
            .iter()
            .any(|&p| !(self.epsilon_rule.at(p) > 0.0))
        {
            return Err(Error::InvalidSchedule("epsilon(p) must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidSchedule(
                "backtrack factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidSchedule("armijo_c must lie in (0, 1)".into()));
        }
        if self.step_init.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidSchedule("step_init must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_step(&self, target_area: f64) -> f64 {
        self.step_init
            .unwrap_or_else(|| 1e-3 * (target_area / (4.0 * std::f64::consts::PI)).powf(1.5))
    }

    /// Energy parameters of stage `p`.
    pub fn stage_params(&self, base: &EnergyParams, p: f64) -> EnergyParams {
        base.clone()
            .with_p(Exponent::Finite(p))
            .with_epsilon(self.epsilon_rule.at(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Flow speed below `grad_tol`.
    Converged,
    /// Energy stopped decreasing within `energy_rtol`.
    Stagnated,
    IterationCap,
    /// Line search failed after the maximum number of halvings.
    Stalled,
}

impl Termination {
    pub fn is_stall(self) -> bool {
        self == Termination::Stalled
    }
}

/// The drift of one mesh.
#[derive(Debug, Clone)]
pub struct Drift {
    pub density: Density,
    pub lambda: f64,
    /// Outward normal speed `G − λH`.
    pub speed: VertexField,
    pub normals: Vec<Point>,
    /// `‖speed‖_{L²(μ)} / (h²√A)`
    pub grad_norm: f64,
}

impl Drift {
    pub fn compute(mesh: &TriMesh, params: &EnergyParams) -> Result<Self> {
        let density = Density::compute(mesh, params)?;
        let lambda = density.lambda()?;
        let hc = density.mean_curvature();
        let speed: VertexField = (0..hc.len())
            .map(|i| density.g[i] - lambda * hc[i])
            .collect();
        let grad_norm = weighted_l2(&speed, density.measure())
            / (density.h * density.h * params.target_area.sqrt());
        let normals = density.eval.fields.normal.clone();
        Ok(Self {
            density,
            lambda,
            speed,
            normals,
            grad_norm,
        })
    }
}

/// `(G, w)` at `mesh`.
pub fn el_density(mesh: &TriMesh, params: &EnergyParams) -> Result<(VertexField, VertexField)> {
    let d = Density::compute(mesh, params)?;
    Ok((d.g, d.w))
}

/// Area multiplier `λ = ⟨G, H⟩_μ / ⟨H, H⟩_μ`.
pub fn lambda_estimate(mesh: &TriMesh, params: &EnergyParams) -> Result<f64> {
    Density::compute(mesh, params)?.lambda()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub stage: usize,
    pub iter: usize,
    pub energy: f64,
    pub h: f64,
    pub lambda: f64,
    pub grad_norm: f64,
    pub linf_times_sqrt_a: f64,
}

/// Optimisation state within one stage.
#[derive(Debug, Clone)]
pub struct OptState {
    pub mesh: TriMesh,
    pub params: EnergyParams,
    pub stage: usize,
    pub iteration: usize,
    pub step: f64,
    pub energy_history: Vec<f64>,
    pub lambda_history: Vec<f64>,
    pub termination: Option<Termination>,
    /// Record describing the mesh *before* the latest step.
    pub last_record: Option<IterationRecord>,
}

impl OptState {
    /// Starts a stage; `mesh` is rescaled to the target area.
    pub fn new(mesh: &TriMesh, params: EnergyParams, stage: usize, step: f64) -> Result<Self> {
        params.check()?;
        let mesh = rescale_to_area(mesh, params.target_area)?;
        let eval = Evaluation::new(&mesh, &params.weight)?;
        let energy = total_from(&mesh, &eval, &params)?;
        Ok(Self {
            mesh,
            params,
            stage,
            iteration: 0,
            step,
            energy_history: vec![energy],
            lambda_history: Vec::new(),
            termination: None,
            last_record: None,
        })
    }

    pub fn energy(&self) -> f64 {
        *self.energy_history.last().expect("history is never empty")
    }
}

/// Moves `mesh` by `t·speed·ν` and rescales to `area`.
fn displaced(mesh: &TriMesh, drift: &Drift, t: f64, area: f64) -> Result<TriMesh> {
    let positions = mesh
        .positions()
        .iter()
        .zip(&drift.normals)
        .zip(drift.speed.iter())
        .map(|((p, n), s)| p + t * s * n)
        .collect();
    rescale_to_area(&mesh.with_positions(positions)?, area)
}

fn energy_of(mesh: &TriMesh, params: &EnergyParams) -> Result<f64> {
    let eval = Evaluation::new(mesh, &params.weight)?;
    total_from(mesh, &eval, params)
}

/// One Armijo-backtracked step of the area-constrained flow.
pub fn flow_step(state: &OptState, schedule: &Schedule) -> Result<OptState> {
    let mut next = state.clone();
    if state.termination.is_some() {
        return Ok(next);
    }
    let params = &state.params;
    let area = params.target_area;
    let drift = Drift::compute(&state.mesh, params)?;
    let e0 = state.energy();

    next.last_record = Some(IterationRecord {
        stage: state.stage,
        iter: state.iteration,
        energy: e0,
        h: drift.density.h,
        lambda: drift.lambda,
        grad_norm: drift.grad_norm,
        linf_times_sqrt_a: sup_norm(&drift.density.eval.xi_h).0 * area.sqrt(),
    });
    next.lambda_history.push(drift.lambda);

    if drift.grad_norm < schedule.grad_tol {
        next.termination = Some(Termination::Converged);
        return Ok(next);
    }

    // Directional derivative of the energy along the drift is −slope.
    let slope = drift
        .speed
        .iter()
        .zip(drift.density.measure().iter())
        .map(|(s, a)| s * s * a)
        .sum::<f64>()
        / area;

    let mut t = state.step;
    for _ in 0..=schedule.max_halvings {
        let trial = match displaced(&state.mesh, &drift, t, area) {
            Ok(m) => m,
            Err(Error::DegenerateTriangle { .. }) | Err(Error::NonFinite { .. }) => {
                t *= schedule.backtrack;
                continue;
            }
            Err(e) => return Err(e),
        };
        match energy_of(&trial, params) {
            Ok(e1) if e1 < e0 && e1 <= e0 - schedule.armijo_c * t * slope => {
                next.mesh = trial;
                next.energy_history.push(e1);
                next.iteration += 1;
                next.step = t / schedule.backtrack;
                return Ok(next);
            }
            Ok(_) | Err(Error::DegenerateTriangle { .. }) | Err(Error::NonFinite { .. }) => {
                t *= schedule.backtrack;
            }
            Err(e) => return Err(e),
        }
    }
    next.termination = Some(Termination::Stalled);
    Ok(next)
}

/// Relaxes vertices toward their one-ring average within their tangent
/// planes, then restores the area.
pub fn tangential_relax(mesh: &TriMesh, strength: f64, area: f64) -> Result<TriMesh> {
    let normals = vertex_normals(mesh)?;
    let nbrs = mesh.vertex_neighbors();
    let pos = mesh.positions();
    let moved = pos
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if nbrs[i].is_empty() {
                return *p;
            }
            let avg = nbrs[i].iter().map(|&j| pos[j]).sum::<Point>() / nbrs[i].len() as f64;
            let d = avg - p;
            let n = normals[i];
            p + strength * (d - d.dot(&n) * n)
        })
        .collect();
    rescale_to_area(&mesh.with_positions(moved)?, area)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub p: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub energy: f64,
    /// `h_p` with `ε = 0`.
    pub h: f64,
    pub lambda: f64,
    pub grad_norm: f64,
    pub low_energy: LowEnergy,
    pub report: ElReport,
}

/// Hooks for streaming a run to disk.
pub trait RunObserver {
    fn on_iteration(&mut self, _record: &IterationRecord, _mesh: &TriMesh) {}
    fn on_stage_end(&mut self, _summary: &StageSummary, _mesh: &TriMesh) {}
}

impl RunObserver for () {}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_mesh: TriMesh,
    pub stages: Vec<StageSummary>,
    pub stage_meshes: Vec<TriMesh>,
    pub history: Vec<IterationRecord>,
    /// Low-energy value `‖ξH‖_∞√A` of the initial mesh.
    pub initial_low_energy: LowEnergy,
}

impl RunResult {
    pub fn stalled(&self) -> bool {
        self.stages.last().is_some_and(|s| s.termination.is_stall())
    }

    pub fn final_report(&self) -> &ElReport {
        &self
            .stages
            .last()
            .expect("a run has at least one stage")
            .report
    }

    /// `h_p` (with `ε = 0`) at the end of every stage.
    pub fn h_log(&self) -> Vec<(f64, f64)> {
        self.stages.iter().map(|s| (s.p, s.h)).collect()
    }
}

/// Minimises stage by stage over `schedule.p_list`, warm-starting each
/// stage from the previous result.
pub fn continuation_run(
    initial: &TriMesh,
    base: &EnergyParams,
    schedule: &Schedule,
) -> Result<RunResult> {
    continuation_run_with(initial, base, schedule, &mut ())
}

pub fn continuation_run_with(
    initial: &TriMesh,
    base: &EnergyParams,
    schedule: &Schedule,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    schedule.check()?;
    base.check()?;
    let area = base.target_area;
    let mut mesh = rescale_to_area(initial, area)?;
    let initial_eval = Evaluation::new(&mesh, &base.weight)?;
    let initial_low_energy = low_energy_from(sup_norm(&initial_eval.xi_h).0, area);

    let mut stages = Vec::new();
    let mut stage_meshes = Vec::new();
    let mut history = Vec::new();
    let mut step = schedule.initial_step(area);

    for (stage, &p) in schedule.p_list.iter().enumerate() {
        let params = schedule.stage_params(base, p);
        if schedule.tangential_smoothing {
            mesh = smoothed(&mesh, &params)?;
        }
        let mut state = OptState::new(&mesh, params.clone(), stage, step)?;

        while state.termination.is_none() {
            if state.iteration >= schedule.max_iters_per_stage {
                state.termination = Some(Termination::IterationCap);
                break;
            }
            let last_good = state.mesh.clone();
            state = flow_step(&state, schedule).map_err(|e| match e {
                Error::DegenerateTriangle { .. } | Error::NonFinite { .. } => Error::Degenerated {
                    stage,
                    iteration: state.iteration,
                    last_good: Box::new(last_good.clone()),
                },
                other => other,
            })?;
            if let Some(record) = state.last_record.take() {
                observer.on_iteration(&record, &last_good);
                history.push(record);
            }
            if state.termination.is_none() && stagnated(&state.energy_history, schedule) {
                state.termination = Some(Termination::Stagnated);
            }
        }

        let density = Density::compute(&state.mesh, &params)?;
        let report = full_report(&density, &params, ThreeValueOptions::default())?;
        let h = normalized_lp(&density.eval.xi_h, density.measure(), p, 0.0, area)?;
        let lambda = project_onto(&density.g, density.mean_curvature(), density.measure())?;
        let drift_norm = {
            let hc = density.mean_curvature();
            let speed: Vec<f64> = (0..hc.len())
                .map(|i| density.g[i] - lambda * hc[i])
                .collect();
            weighted_l2(&speed, density.measure()) / (density.h * density.h * area.sqrt())
        };
        let summary = StageSummary {
            stage,
            p,
            epsilon: params.epsilon,
            iterations: state.iteration,
            termination: state.termination.expect("loop exits with a reason"),
            energy: state.energy(),
            h,
            lambda,
            grad_norm: drift_norm,
            low_energy: low_energy_from(report.linf_times_sqrt_a / area.sqrt(), area),
            report,
        };
        observer.on_stage_end(&summary, &state.mesh);
        stages.push(summary);
        stage_meshes.push(state.mesh.clone());
        step = state.step;
        mesh = state.mesh;
    }

    Ok(RunResult {
        final_mesh: mesh,
        stages,
        stage_meshes,
        history,
        initial_low_energy,
    })
}

fn stagnated(history: &[f64], schedule: &Schedule) -> bool {
    let n = schedule.stagnation_window;
    if n == 0 || history.len() <= n {
        return false;
    }
    let now = history[history.len() - 1];
    let before = history[history.len() - 1 - n];
    (before - now) <= schedule.energy_rtol * before.abs()
}

fn smoothed(mesh: &TriMesh, params: &EnergyParams) -> Result<TriMesh> {
    let before = energy_of(mesh, params)?;
    let relaxed = tangential_relax(mesh, 0.5, params.target_area)?;
    match energy_of(&relaxed, params) {
        Ok(after) if after <= before * 1.001 => Ok(relaxed),
        _ => Ok(mesh.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::ReferenceSurface;
    use crate::mesh::build_icosphere;
    use std::f64::consts::PI;
    use std::sync::Arc;

    const AREA: f64 = 4.0 * PI;

    fn round(s: u32) -> TriMesh {
        rescale_to_area(&build_icosphere(s, 1.0).unwrap(), AREA).unwrap()
    }

    fn noisy(s: u32, seed: u64) -> TriMesh {
        rescale_to_area(
            &build_icosphere(s, 1.0).unwrap().perturb_radial(0.05, seed),
            AREA,
        )
        .unwrap()
    }

    fn params(p: f64) -> EnergyParams {
        EnergyParams::new(Exponent::Finite(p), AREA)
    }

    #[test]
    fn sphere_density_is_constant() {
        // Δw amplifies the O(h²) error of w by 1/h², so G is only checked
        // pointwise to a few percent and must improve under refinement.
        for p in [4.0, 8.0] {
            let r = (AREA / (4.0 * PI)).sqrt();
            let expected = (1.0 - 2.0 / p) / (r * r);
            let mut worst = Vec::new();
            for s in [3, 4] {
                let (g, w) = el_density(&round(s), &params(p)).unwrap();
                assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-3));
                worst.push(g.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max) / expected);
            }
            assert!(worst[0] < 0.05 && worst[1] < worst[0], "p={p} {worst:?}");
            let m = round(3);
            let lambda = lambda_estimate(&m, &params(p)).unwrap();
            assert!((lambda - (1.0 - 2.0 / p) / r).abs() <= 0.05 * lambda);
        }
    }

    #[test]
    fn p_two_density_is_curvature_over_h() {
        let m = noisy(2, 1);
        let d = Density::compute(&m, &params(2.0)).unwrap();
        for (w, h) in d.w.iter().zip(d.mean_curvature().iter()) {
            assert!((w - h / d.h).abs() <= 1e-12 * w.abs().max(1.0));
        }
    }

    #[test]
    fn no_penalisation_force_on_the_reference() {
        let m = noisy(2, 2);
        let reference = Arc::new(ReferenceSurface::new(m.clone()).unwrap());
        let plain = el_density(&m, &params(4.0)).unwrap().0;
        let pen = el_density(&m, &params(4.0).with_sigma(5.0).with_reference(reference))
            .unwrap()
            .0;
        assert_eq!(plain, pen);
    }

    #[test]
    fn projected_drift_preserves_area_to_first_order() {
        for (m, p) in [(noisy(3, 3), 2.0), (noisy(2, 4), 16.0), (round(2), 8.0)] {
            let drift = Drift::compute(&m, &params(p).with_epsilon(1e-4)).unwrap();
            let hc = drift.density.mean_curvature();
            let a = drift.density.measure();
            let dot: f64 = (0..hc.len()).map(|i| drift.speed[i] * hc[i] * a[i]).sum();
            let scale: f64 = (0..hc.len())
                .map(|i| (drift.speed[i] * hc[i]).abs() * a[i])
                .sum();
            assert!(dot.abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn lambda_cases() {
        let m = noisy(2, 5);
        let d = Density::compute(&m, &params(4.0)).unwrap();
        let hc = d.mean_curvature();
        let g: Vec<f64> = hc.iter().map(|h| -1.5 * h).collect();
        assert!((project_onto(&g, hc, d.measure()).unwrap() + 1.5).abs() < 1e-14);
        assert_eq!(
            project_onto(&vec![0.0; hc.len()], hc, d.measure()).unwrap(),
            0.0
        );
    }

    #[test]
    fn flow_decreases_energy_and_keeps_area() {
        let schedule = Schedule::default();
        let mut state = OptState::new(
            &noisy(3, 6),
            params(2.0).with_epsilon(2.5e-3),
            0,
            schedule.initial_step(AREA),
        )
        .unwrap();
        for _ in 0..60 {
            let before = state.energy();
            state = flow_step(&state, &schedule).unwrap();
            assert!(state.termination.is_none());
            assert!(state.energy() < before);
            let area = state.mesh.total_area();
            assert!((area - AREA).abs() / AREA <= 1e-12);
        }
        assert!(state.energy_history.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(state.iteration, 60);
    }

    #[test]
    fn round_sphere_is_nearly_critical() {
        let round = Drift::compute(&round(3), &params(2.0)).unwrap();
        let rough = Drift::compute(&noisy(3, 7), &params(2.0)).unwrap();
        assert!(
            round.grad_norm < 1e-3 * rough.grad_norm,
            "{} vs {}",
            round.grad_norm,
            rough.grad_norm
        );
    }

    #[test]
    fn grad_tol_terminates_immediately() {
        let schedule = Schedule {
            grad_tol: 1.0,
            ..Schedule::default()
        };
        let state = OptState::new(&round(2), params(4.0), 0, 1e-3).unwrap();
        let next = flow_step(&state, &schedule).unwrap();
        assert_eq!(next.termination, Some(Termination::Converged));
        assert_eq!(next.mesh, state.mesh);
    }

    #[test]
    fn orientation_flip_leaves_first_step_unchanged() {
        let m = noisy(2, 9);
        let schedule = Schedule::default();
        let p = params(4.0).with_epsilon(1e-3);
        let a = flow_step(&OptState::new(&m, p.clone(), 0, 1e-3).unwrap(), &schedule).unwrap();
        let b = flow_step(
            &OptState::new(&m.flipped_orientation(), p, 0, 1e-3).unwrap(),
            &schedule,
        )
        .unwrap();
        assert_eq!(a.iteration, 1);
        assert_eq!(b.iteration, 1);
        for (x, y) in a.mesh.positions().iter().zip(b.mesh.positions()) {
            assert!((x - y).norm() <= 1e-10);
        }
        let da = Density::compute(&m, &params(4.0)).unwrap();
        let db = Density::compute(&m.flipped_orientation(), &params(4.0)).unwrap();
        for i in 0..m.num_vertices() {
            assert!((da.w[i] + db.w[i]).abs() <= 1e-10 * da.w[i].abs().max(1.0));
        }
    }

    #[test]
    fn stalls_when_no_step_is_accepted() {
        let schedule = Schedule {
            max_halvings: 0,
            ..Schedule::default()
        };
        let state = OptState::new(&noisy(2, 10), params(2.0), 0, 1e6).unwrap();
        let next = flow_step(&state, &schedule).unwrap();
        assert_eq!(next.termination, Some(Termination::Stalled));
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::default().check().is_ok());
        let bad = |f: fn(&mut Schedule)| {
            let mut s = Schedule::default();
            f(&mut s);
            s.check().is_err()
        };
        assert!(bad(|s| s.p_list = vec![4.0, 2.0]));
        assert!(bad(|s| s.p_list = vec![1.0, 2.0]));
        assert!(bad(|s| s.p_list.clear()));
        assert!(bad(|s| s.epsilon_rule.scale = 0.0));
        assert!(bad(|s| s.backtrack = 1.0));
        assert_eq!(Schedule::default().epsilon_rule.at(10.0), 1e-4);
        assert!((Schedule::default().initial_step(16.0 * PI) - 8e-3).abs() < 1e-15);
    }

    #[test]
    fn tangential_relaxation_keeps_area() {
        let m = noisy(2, 11);
        let r = tangential_relax(&m, 0.5, AREA).unwrap();
        assert!((r.total_area() - AREA).abs() / AREA < 1e-12);
        assert_ne!(r, m);
    }

    #[test]
    fn short_run_records_every_stage() {
        let schedule = Schedule {
            p_list: vec![2.0, 4.0],
            max_iters_per_stage: 30,
            tangential_smoothing: true,
            ..Schedule::default()
        };
        let r = continuation_run(&noisy(2, 12), &params(2.0), &schedule).unwrap();
        assert_eq!(r.stages.len(), 2);
        assert_eq!(r.stage_meshes.len(), 2);
        assert!(r.history.iter().all(|rec| rec.stage < 2));
        for s in &r.stages {
            assert!(s.iterations <= 30);
            assert!(s.report.three_value.is_some());
        }
        assert!((r.final_mesh.total_area() - AREA).abs() / AREA <= 1e-12);
        for stage in 0..2 {
            let energies: Vec<f64> = r
                .history
                .iter()
                .filter(|h| h.stage == stage)
                .map(|h| h.energy)
                .collect();
            assert!(energies.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn run_rejects_missing_reference() {
        let p = params(2.0).with_sigma(1.0);
        assert!(matches!(
            continuation_run(&round(1), &p, &Schedule::default()),
            Err(Error::MissingReference { .. })
        ));
    }
}
