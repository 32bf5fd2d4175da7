//! Run configuration: one TOML document with flat `[mesh]`, `[energy]`,
//! `[weight]`, `[schedule]` and `[output]` tables.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use infwillmore::optimizer::{EpsilonRule, Schedule};
use infwillmore::weights::WeightSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `obj = "path"` or an icosphere generated from the remaining keys.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub obj: Option<PathBuf>,
    pub icosphere: u32,
    pub radius: f64,
    /// Radial noise amplitude, seeded by the top-level `seed`.
    pub perturb: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            obj: None,
            icosphere: 3,
            radius: 1.0,
            perturb: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    /// Target area `A`.
    pub area: f64,
    /// Penalisation weight; defaults to `10·h_2` of the start mesh when a
    /// reference is given and to zero otherwise.
    pub sigma: Option<f64>,
    pub reference: Option<PathBuf>,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            area: 4.0 * PI,
            sigma: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub p_list: Vec<f64>,
    pub epsilon_scale: f64,
    pub epsilon_power: f64,
    pub max_iters_per_stage: usize,
    pub step_init: Option<f64>,
    pub grad_tol: f64,
    pub energy_rtol: f64,
    pub stagnation_window: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub tangential_smoothing: bool,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = Schedule::default();
        Self {
            p_list: s.p_list,
            epsilon_scale: s.epsilon_rule.scale,
            epsilon_power: s.epsilon_rule.power,
            max_iters_per_stage: s.max_iters_per_stage,
            step_init: s.step_init,
            grad_tol: s.grad_tol,
            energy_rtol: s.energy_rtol,
            stagnation_window: s.stagnation_window,
            armijo_c: s.armijo_c,
            backtrack: s.backtrack,
            max_halvings: s.max_halvings,
            tangential_smoothing: s.tangential_smoothing,
        }
    }
}

impl ScheduleSection {
    pub fn to_schedule(&self) -> Schedule {
        Schedule {
            p_list: self.p_list.clone(),
            epsilon_rule: EpsilonRule {
                scale: self.epsilon_scale,
                power: self.epsilon_power,
            },
            max_iters_per_stage: self.max_iters_per_stage,
            step_init: self.step_init,
            grad_tol: self.grad_tol,
            energy_rtol: self.energy_rtol,
            stagnation_window: self.stagnation_window,
            armijo_c: self.armijo_c,
            backtrack: self.backtrack,
            max_halvings: self.max_halvings,
            tangential_smoothing: self.tangential_smoothing,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Extra OBJ snapshot every this many iterations; 0 keeps only the
    /// per-stage snapshots.
    pub snapshot_every: usize,
    /// Nodal band of the three-value classification, relative to `max|w|`.
    pub tau: f64,
    pub delta_c: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            snapshot_every: 0,
            tau: 0.05,
            delta_c: 0.10,
        }
    }
}

impl RunConfig {
    /// Parses `text`; relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.mesh.obj.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.energy.reference.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Checks that every referenced input file exists.
    pub fn check_paths(&self) -> Result<()> {
        for (what, path) in [
            ("mesh", &self.mesh.obj),
            ("reference", &self.energy.reference),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    bail!("{what} file {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }
}
