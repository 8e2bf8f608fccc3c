//! Run configuration: `key=value` settings files, command-line overrides
//! and validation into a [`RunConfig`].
//!
//! Settings files hold one `key=value` per line; `#` starts a comment and
//! blank lines are ignored. Keys are the long command-line flag names
//! without the leading dashes (`m`, `L`, `eps`, `cfl-c`, ...).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::energy::ModelParams;
use crate::error::{FchError, Result};
use crate::grid::{CellField, GridSpec};
use crate::harness::convergence::refinement_step;
use crate::harness::init::{init_benchmark, init_random};
use crate::harness::output::read_raw;
use crate::psd::PsdConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `s = C h²`, adjusted so a whole number of steps reaches `t_max`.
    Refinement(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialData {
    Benchmark,
    Random,
    File(PathBuf),
}

/// Optional settings from one source. `None` means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub m: Option<usize>,
    pub length: Option<f64>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub a: Option<f64>,
    pub dt: Option<f64>,
    pub cfl_c: Option<f64>,
    pub tmax: Option<f64>,
    pub seed: Option<u64>,
    pub init: Option<String>,
    pub init_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub snap_every: Option<usize>,
    pub series_every: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub m_list: Option<Vec<usize>>,
    pub steps: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| FchError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

/// Comma-separated list of grid sizes.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

impl Settings {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "m" => self.m = Some(parse_value(key, value)?),
            "L" => self.length = Some(parse_value(key, value)?),
            "eps" => self.eps = Some(parse_value(key, value)?),
            "eta" => self.eta = Some(parse_value(key, value)?),
            "A" => self.a = Some(parse_value(key, value)?),
            "dt" => self.dt = Some(parse_value(key, value)?),
            "cfl-c" => self.cfl_c = Some(parse_value(key, value)?),
            "tmax" => self.tmax = Some(parse_value(key, value)?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "init" => self.init = Some(value.to_string()),
            "init-file" => self.init_file = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "snap-every" => self.snap_every = Some(parse_value(key, value)?),
            "series-every" => self.series_every = Some(parse_value(key, value)?),
            "tol" => self.tol = Some(parse_value(key, value)?),
            "max-iter" => self.max_iter = Some(parse_value(key, value)?),
            "levels" => self.levels = Some(parse_list(key, value)?),
            "m-list" => self.m_list = Some(parse_list(key, value)?),
            "steps" => self.steps = Some(parse_value(key, value)?),
            _ => return Err(FchError::Config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Parses settings text; `origin` labels errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                FchError::Config(format!("{origin}:{}: expected key=value, found `{line}`", n + 1))
            })?;
            out.set(key.trim(), value.trim())
                .map_err(|e| FchError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        out.check_step_choice()?;
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FchError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn check_step_choice(&self) -> Result<()> {
        if self.dt.is_some() && self.cfl_c.is_some() {
            return Err(FchError::Config("dt and cfl-c are mutually exclusive".into()));
        }
        Ok(())
    }

    /// Layers `over` on top of `self`. A step-size choice in `over` (either
    /// `dt` or `cfl-c`) replaces both of `self`'s.
    pub fn overlay(self, over: Settings) -> Result<Settings> {
        over.check_step_choice()?;
        let step_given = over.dt.is_some() || over.cfl_c.is_some();
        let (dt, cfl_c) = if step_given {
            (over.dt, over.cfl_c)
        } else {
            (self.dt, self.cfl_c)
        };
        Ok(Settings {
            m: over.m.or(self.m),
            length: over.length.or(self.length),
            eps: over.eps.or(self.eps),
            eta: over.eta.or(self.eta),
            a: over.a.or(self.a),
            dt,
            cfl_c,
            tmax: over.tmax.or(self.tmax),
            seed: over.seed.or(self.seed),
            init: over.init.or(self.init),
            init_file: over.init_file.or(self.init_file),
            out: over.out.or(self.out),
            snap_every: over.snap_every.or(self.snap_every),
            series_every: over.series_every.or(self.series_every),
            tol: over.tol.or(self.tol),
            max_iter: over.max_iter.or(self.max_iter),
            levels: over.levels.or(self.levels),
            m_list: over.m_list.or(self.m_list),
            steps: over.steps.or(self.steps),
        })
    }

    /// Physical parameters on an `m`-cell grid with step `dt`, filling
    /// unset values with the benchmark defaults.
    pub fn model_params(&self, m: usize, dt: f64) -> Result<ModelParams> {
        let grid = GridSpec::new(m, self.length.unwrap_or(defaults::LENGTH))?;
        ModelParams::new(
            grid,
            self.eps.unwrap_or(defaults::EPS),
            self.eta.unwrap_or(defaults::ETA),
            self.a.unwrap_or(defaults::A),
            dt,
        )
    }

    pub fn psd_config(&self) -> Result<PsdConfig> {
        let cfg = PsdConfig {
            tol_residual_inf: self.tol.unwrap_or(defaults::TOL),
            max_iters: self.max_iter.unwrap_or(defaults::MAX_ITER),
            ..PsdConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn step_size(&self) -> StepSize {
        match (self.dt, self.cfl_c) {
            (Some(dt), _) => StepSize::Fixed(dt),
            (None, Some(c)) => StepSize::Refinement(c),
            (None, None) => StepSize::Refinement(defaults::CFL_C),
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let init = match self.init.as_deref().unwrap_or("benchmark") {
            "benchmark" => InitialData::Benchmark,
            "random" => InitialData::Random,
            "file" => InitialData::File(self.init_file.clone().ok_or_else(|| {
                FchError::Config("init=file requires init-file".into())
            })?),
            other => {
                return Err(FchError::Config(format!(
                    "unknown init `{other}` (expected benchmark, random or file)"
                )))
            }
        };
        if self.init_file.is_some() && !matches!(init, InitialData::File(_)) {
            return Err(FchError::Config("init-file is only used with init=file".into()));
        }
        let m = self.m.unwrap_or(defaults::M);
        let step_size = self.step_size();
        let probe = match step_size {
            StepSize::Fixed(dt) => dt,
            StepSize::Refinement(_) => 1.0,
        };
        let cfg = RunConfig {
            params: self.model_params(m, probe)?,
            step_size,
            t_max: self.tmax.unwrap_or(defaults::TMAX),
            seed: self.seed.unwrap_or(defaults::SEED),
            psd: self.psd_config()?,
            out_dir: self.out.clone().unwrap_or_else(|| PathBuf::from(defaults::OUT)),
            snap_every: self.snap_every.unwrap_or(defaults::SNAP_EVERY),
            series_every: self.series_every.unwrap_or(1),
            init,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Values used when a setting is given nowhere.
pub mod defaults {
    pub const M: usize = 64;
    pub const LENGTH: f64 = 3.2;
    pub const EPS: f64 = 0.18;
    pub const ETA: f64 = 1.0;
    pub const A: f64 = 1.0;
    pub const CFL_C: f64 = 0.1;
    pub const TMAX: f64 = 0.32;
    pub const SEED: u64 = 1;
    pub const TOL: f64 = 1e-9;
    pub const MAX_ITER: usize = 2000;
    pub const OUT: &str = "fch-out";
    pub const SNAP_EVERY: usize = 1000;
}

/// A validated single-simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Grid and physics; `dt` is a placeholder until [`RunConfig::plan`].
    pub params: ModelParams,
    pub step_size: StepSize,
    pub t_max: f64,
    pub seed: u64,
    pub psd: PsdConfig,
    pub out_dir: PathBuf,
    pub snap_every: usize,
    pub series_every: usize,
    pub init: InitialData,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(FchError::Config(format!("tmax {} must be non-negative", self.t_max)));
        }
        if self.snap_every < 1 || self.series_every < 1 {
            return Err(FchError::Config("output intervals must be at least 1".into()));
        }
        if let StepSize::Refinement(c) = self.step_size {
            if !(c.is_finite() && c > 0.0) {
                return Err(FchError::Config(format!("cfl-c {c} must be positive")));
            }
        }
        Ok(())
    }

    /// Step count and parameters with the actual step size. A zero final
    /// time gives zero steps.
    pub fn plan(&self) -> Result<(usize, ModelParams)> {
        let grid = *self.params.grid();
        let (steps, dt) = match self.step_size {
            StepSize::Fixed(dt) => ((self.t_max / dt).round() as usize, dt),
            StepSize::Refinement(c) if self.t_max > 0.0 => refinement_step(&grid, c, self.t_max)?,
            StepSize::Refinement(c) => (0, c * grid.h() * grid.h()),
        };
        if steps > 0 && (steps as f64 * dt - self.t_max).abs() > 1e-9 * self.t_max {
            return Err(FchError::Config(format!(
                "tmax {} is not a whole number of steps of {dt}",
                self.t_max
            )));
        }
        Ok((steps, self.params.with_dt(dt)?))
    }

    pub fn initial_field(&self) -> Result<CellField> {
        let grid = *self.params.grid();
        match &self.init {
            InitialData::Benchmark => Ok(init_benchmark(grid)),
            InitialData::Random => Ok(init_random(grid, self.seed)),
            InitialData::File(path) => {
                let (phi, _) = read_raw(path)?;
                if !phi.grid().same_as(&grid) {
                    return Err(FchError::Config(format!(
                        "{}: field is {} cells on L = {}, run expects {} on L = {}",
                        path.display(),
                        phi.grid().m(),
                        phi.grid().length(),
                        grid.m(),
                        grid.length()
                    )));
                }
                Ok(phi)
            }
        }
    }
}
