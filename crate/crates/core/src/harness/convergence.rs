//! Cauchy-difference refinement study along the path `s = C h^2`.
//!
//! Every level runs to the same final time `T`; the step size is adjusted
//! to `s = T / round(T / (C h^2))` so that a whole number of steps lands on
//! `T`. Adjacent levels are compared on the finer grid after bilinear
//! prolongation of the coarser solution.

use std::time::{Duration, Instant};

use crate::energy::ModelParams;
use crate::error::{FchError, Result};
use crate::grid::{CellField, GridSpec, Norm};
use crate::harness::init::init_benchmark;
use crate::harness::interp::prolong_bilinear_to;
use crate::poisson::SpectralPlan;
use crate::psd::PsdConfig;
use crate::scheme::{run, NoHooks, Schedule, Stepper};

/// Allowed gap between the accumulated time and `T`.
const TIME_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub m: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Accumulated simulated time.
    pub time: f64,
    pub mean_iters: f64,
    pub cpu_per_step: Duration,
    pub phi: CellField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub coarse_m: usize,
    pub fine_m: usize,
    /// `‖φ_f - I(φ_c)‖₂` on the fine grid.
    pub norm: f64,
    /// `log₂` of the previous pair's norm over this one; absent for the
    /// first pair.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub levels: Vec<LevelResult>,
    pub pairs: Vec<PairResult>,
    pub tol_residual_inf: f64,
}

/// `log₂(norms[k-1] / norms[k])` for each consecutive pair.
pub fn rates(norms: &[f64]) -> Vec<f64> {
    norms.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Number of steps and the adjusted step size reaching `t_final` on the
/// path `s = C h^2`.
pub fn refinement_step(grid: &GridSpec, c: f64, t_final: f64) -> Result<(usize, f64)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(FchError::Config(format!("refinement constant C = {c} must be positive")));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(FchError::Config(format!("final time {t_final} must be positive")));
    }
    let target = c * grid.h() * grid.h();
    let n = (t_final / target).round().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

/// Runs the study from the smooth benchmark profile.
pub fn cauchy_study(
    levels: &[usize],
    c: f64,
    template: &ModelParams,
    t_final: f64,
    cfg: PsdConfig,
) -> Result<StudyReport> {
    cauchy_study_with(levels, c, template, t_final, cfg, init_benchmark, |_| {})
}

/// General form of [`cauchy_study`]: `init` builds the initial data on each
/// level and `on_level` sees every level as soon as it finishes.
pub fn cauchy_study_with(
    levels: &[usize],
    c: f64,
    template: &ModelParams,
    t_final: f64,
    cfg: PsdConfig,
    init: impl Fn(GridSpec) -> CellField,
    mut on_level: impl FnMut(&LevelResult),
) -> Result<StudyReport> {
    if levels.len() < 2 {
        return Err(FchError::Config("a Cauchy study needs at least two levels".into()));
    }
    for w in levels.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(FchError::Config(format!(
                "levels must double: {} is followed by {}",
                w[0], w[1]
            )));
        }
    }
    let length = template.grid().length();

    let mut results = Vec::with_capacity(levels.len());
    for &m in levels {
        let grid = GridSpec::new(m, length)?;
        let (steps, dt) = refinement_step(&grid, c, t_final)?;
        let p = template.with_grid(grid)?.with_dt(dt)?;
        let plan = SpectralPlan::new(grid);
        let mut stepper = Stepper::new(&p, &plan, cfg)?;
        let schedule = Schedule {
            snapshot_every: usize::MAX,
            series_every: usize::MAX,
        };
        let start = Instant::now();
        let summary = run(&init(grid), steps, &mut stepper, schedule, &mut NoHooks)?;
        let elapsed = start.elapsed();
        if (summary.time - t_final).abs() > TIME_TOLERANCE * t_final.max(1.0) {
            return Err(FchError::Config(format!(
                "level m = {m} stopped at t = {} instead of {t_final}",
                summary.time
            )));
        }
        let level = LevelResult {
            m,
            h: grid.h(),
            dt,
            steps,
            time: summary.time,
            mean_iters: summary.mean_iters(),
            cpu_per_step: elapsed / steps as u32,
            phi: summary.phi,
        };
        on_level(&level);
        results.push(level);
    }

    let norms = results
        .windows(2)
        .map(|w| {
            let fine = &w[1].phi;
            let coarse = prolong_bilinear_to(&w[0].phi, *fine.grid())?;
            Ok(fine.zip_with(&coarse, |a, b| a - b)?.norm(Norm::L2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let r = rates(&norms);
    let pairs = results
        .windows(2)
        .zip(&norms)
        .enumerate()
        .map(|(k, (w, &norm))| PairResult {
            coarse_m: w[0].m,
            fine_m: w[1].m,
            norm,
            rate: k.checked_sub(1).map(|i| r[i]),
        })
        .collect();
    Ok(StudyReport {
        levels: results,
        pairs,
        tol_residual_inf: cfg.tol_residual_inf,
    })
}

impl StudyReport {
    /// Plain-text table with one row per level pair.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>6} {:>12} {:>6} {:>10} {:>14}\n",
            "coarse", "fine", "norm", "rate", "avg_iters", "cpu_per_step_s"
        );
        for (pair, fine) in self.pairs.iter().zip(&self.levels[1..]) {
            let rate = pair.rate.map_or_else(|| "-".to_string(), |r| format!("{r:.2}"));
            out.push_str(&format!(
                "{:>6} {:>6} {:>12.4e} {:>6} {:>10.1} {:>14.4e}\n",
                pair.coarse_m,
                pair.fine_m,
                pair.norm,
                rate,
                fine.mean_iters,
                fine.cpu_per_step.as_secs_f64()
            ));
        }
        out.push_str(&format!("PSD tolerance ||r||_inf <= {:e}\n", self.tol_residual_inf));
        out
    }
}
