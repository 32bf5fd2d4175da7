//! The `run` command: continuation run streamed to a run directory.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use infwillmore::distance::ReferenceSurface;
use infwillmore::el::{three_value_report, ElReport, ThreeValueOptions};
use infwillmore::error::Error;
use infwillmore::functionals::{
    low_energy_threshold, lp_energy, EnergyParams, Exponent, LowEnergy,
};
use infwillmore::mesh::{build_icosphere, rescale_to_area, validate, TriMesh};
use infwillmore::obj::{load_obj, save_obj};
use infwillmore::optimizer::{
    continuation_run_with, IterationRecord, RunObserver, StageSummary, Termination,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const METRICS_VERSION: &str = "# infwillmore metrics v1";
pub const METRICS_HEADER: [&str; 7] = [
    "stage",
    "iter",
    "energy",
    "h",
    "lambda",
    "grad_norm",
    "linf_times_sqrtA",
];
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: usize,
    pub p: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub energy: f64,
    pub h: f64,
    pub lambda: f64,
    pub grad_norm: f64,
    pub residual_l2: f64,
    pub concentration: Option<f64>,
    pub sign_residual: Option<f64>,
    pub snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowEnergyTrace {
    /// `√(8π)`
    pub threshold: f64,
    pub initial: LowEnergy,
    /// One entry per stage, at the end of the stage.
    pub stages: Vec<LowEnergy>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub seed: u64,
    pub target_area: f64,
    pub sigma: f64,
    pub stalled: bool,
    pub stages: Vec<StageEntry>,
    pub low_energy: LowEnergyTrace,
    #[serde(rename = "final")]
    pub final_report: ElReport,
}

/// Streams metrics rows and OBJ snapshots while the run progresses.
struct Sink {
    dir: PathBuf,
    metrics: csv::Writer<File>,
    snapshot_every: usize,
    stage_files: Vec<String>,
    failure: Option<anyhow::Error>,
}

impl Sink {
    fn new(dir: &Path, snapshot_every: usize) -> Result<Self> {
        use std::io::Write;
        let path = dir.join("metrics.csv");
        let mut file =
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        writeln!(file, "{METRICS_VERSION}")?;
        let mut metrics = csv::Writer::from_writer(file);
        metrics.write_record(METRICS_HEADER)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics,
            snapshot_every,
            stage_files: Vec::new(),
            failure: None,
        })
    }

    fn record(&mut self, r: &IterationRecord, mesh: &TriMesh) -> Result<()> {
        self.metrics.write_record([
            r.stage.to_string(),
            r.iter.to_string(),
            r.energy.to_string(),
            r.h.to_string(),
            r.lambda.to_string(),
            r.grad_norm.to_string(),
            r.linf_times_sqrt_a.to_string(),
        ])?;
        if self.snapshot_every > 0 && r.iter.is_multiple_of(self.snapshot_every) {
            save_obj(
                mesh,
                self.dir
                    .join(format!("stage{}_iter{:05}.obj", r.stage, r.iter)),
            )?;
        }
        Ok(())
    }

    fn stage(&mut self, s: &StageSummary, mesh: &TriMesh) -> Result<()> {
        let name = format!("stage{}_p{}.obj", s.stage, s.p);
        save_obj(mesh, self.dir.join(&name))?;
        self.stage_files.push(name);
        self.metrics.flush()?;
        Ok(())
    }
}

impl RunObserver for Sink {
    fn on_iteration(&mut self, record: &IterationRecord, mesh: &TriMesh) {
        if self.failure.is_none() {
            self.failure = self.record(record, mesh).err();
        }
    }

    fn on_stage_end(&mut self, summary: &StageSummary, mesh: &TriMesh) {
        if self.failure.is_none() {
            self.failure = self.stage(summary, mesh).err();
        }
    }
}

pub fn initial_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    let mesh = match &cfg.mesh.obj {
        Some(path) => load_obj(path)?,
        None => build_icosphere(cfg.mesh.icosphere, cfg.mesh.radius)?,
    };
    let mesh = if cfg.mesh.perturb > 0.0 {
        mesh.perturb_radial(cfg.mesh.perturb, cfg.seed)
    } else {
        mesh
    };
    let report = validate(&mesh);
    if !report.passed {
        bail!(
            "start mesh is invalid: {} issues, first {:?}",
            report.issues.len(),
            report.issues.first()
        );
    }
    Ok(rescale_to_area(&mesh, cfg.energy.area)?)
}

pub fn base_params(cfg: &RunConfig, start: &TriMesh) -> Result<EnergyParams> {
    let mut params =
        EnergyParams::new(Exponent::Finite(2.0), cfg.energy.area).with_weight(cfg.weight.clone());
    if let Some(path) = &cfg.energy.reference {
        let surface = ReferenceSurface::new(load_obj(path)?)
            .with_context(|| format!("reference {} is invalid", path.display()))?;
        params = params.with_reference(Arc::new(surface));
    }
    let sigma = match cfg.energy.sigma {
        Some(s) => s,
        None if params.reference.is_some() => 10.0 * lp_energy(start, &params)?,
        None => 0.0,
    };
    params = params.with_sigma(sigma);
    params.check()?;
    Ok(params)
}

/// Runs the configured continuation. Returns whether the final stage stalled.
pub fn execute(cfg: &RunConfig) -> Result<bool> {
    let schedule = cfg.schedule.to_schedule();
    schedule.check()?;
    let start = initial_mesh(cfg)?;
    let base = base_params(cfg, &start)?;

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    save_obj(&start, dir.join("initial.obj"))?;

    let mut sink = Sink::new(dir, cfg.output.snapshot_every)?;
    let result = continuation_run_with(&start, &base, &schedule, &mut sink);
    if let Some(e) = sink.failure.take() {
        return Err(e.context("writing run output"));
    }
    let run = match result {
        Ok(run) => run,
        Err(Error::Degenerated {
            stage,
            iteration,
            last_good,
        }) => {
            let path = dir.join("last_good.obj");
            save_obj(&last_good, &path)?;
            bail!(
                "mesh degenerated at stage {stage}, iteration {iteration}; last good mesh saved to {}",
                path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    sink.metrics.flush()?;
    save_obj(&run.final_mesh, dir.join("final.obj"))?;

    let last = run.stages.last().expect("schedule has at least one stage");
    let opts = ThreeValueOptions {
        tau: cfg.output.tau,
        delta_c: cfg.output.delta_c,
    };
    let final_report =
        three_value_report(&run.final_mesh, &schedule.stage_params(&base, last.p), opts)?;
    let report = RunReport {
        format_version: REPORT_VERSION,
        seed: cfg.seed,
        target_area: base.target_area,
        sigma: base.sigma,
        stalled: run.stalled(),
        stages: run
            .stages
            .iter()
            .zip(&sink.stage_files)
            .map(|(s, file)| StageEntry {
                stage: s.stage,
                p: s.p,
                epsilon: s.epsilon,
                iterations: s.iterations,
                termination: s.termination,
                energy: s.energy,
                h: s.h,
                lambda: s.lambda,
                grad_norm: s.grad_norm,
                residual_l2: s.report.residual_l2,
                concentration: s.report.concentration,
                sign_residual: s.report.sign_residual,
                snapshot: file.clone(),
            })
            .collect(),
        low_energy: LowEnergyTrace {
            threshold: low_energy_threshold(),
            initial: run.initial_low_energy,
            stages: run.stages.iter().map(|s| s.low_energy).collect(),
        },
        final_report,
    };
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("cannot write {}", path.display()))?;

    for s in &report.stages {
        eprintln!(
            "stage {} p={} {:?} after {} iterations: h={:.6} lambda={:.6} grad={:.3e}",
            s.stage, s.p, s.termination, s.iterations, s.h, s.lambda, s.grad_norm
        );
    }
    Ok(report.stalled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips_through_its_schema() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "seed = 3\n[mesh]\nicosphere = 2\nperturb = 0.03\n[schedule]\np_list = [2, 4]\nmax_iters_per_stage = 5\n[output]\ndir = \"{}\"\n",
            dir.path().join("out").display()
        );
        let cfg = RunConfig::parse(&text, dir.path()).unwrap();
        execute(&cfg).unwrap();
        let written = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
        let report: RunReport = serde_json::from_str(&written).unwrap();
        assert_eq!(serde_json::to_string_pretty(&report).unwrap(), written);
        assert_eq!(report.format_version, REPORT_VERSION);
        assert_eq!(report.stages.len(), 2);
        assert_eq!(report.low_energy.stages.len(), 2);
        assert_eq!(report.final_report.tau, Some(0.05));
        assert_eq!(report.stages[1].snapshot, "stage1_p4.obj");
    }
}
