//! `fch`: run simulations, refinement studies and solver benchmarks.

use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fch_core::harness::config::{defaults, Settings};
use fch_core::harness::convergence::{cauchy_study_with, LevelResult};
use fch_core::harness::output::FileOutput;
use fch_core::scheme::{run, RunHooks, Schedule, Stepper};
use fch_core::{FchError, Result, SpectralPlan};

#[derive(Parser, Debug)]
#[command(name = "fch", version, about = "Functionalized Cahn-Hilliard simulator")]
struct Cli {
    /// Settings file with one key=value per line; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation, writing snapshots and an energy/mass series.
    Run(RunArgs),
    /// Cauchy-difference refinement study along s = C h².
    Converge(ConvergeArgs),
    /// Record PSD residual traces for several grid sizes.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct PhysicsArgs {
    /// Domain side length.
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Auxiliary convexity constant (at least 1).
    #[arg(long = "A")]
    a: Option<f64>,
    /// PSD stopping tolerance on the max-norm residual.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Cells per side.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    physics: PhysicsArgs,
    /// Fixed time step.
    #[arg(long, conflicts_with = "cfl_c")]
    dt: Option<f64>,
    /// Refinement constant C in s = C h².
    #[arg(long = "cfl-c")]
    cfl_c: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// benchmark, random or file.
    #[arg(long)]
    init: Option<String>,
    /// Raw field file used with `--init file`.
    #[arg(long = "init-file")]
    init_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "snap-every")]
    snap_every: Option<usize>,
    #[arg(long = "series-every")]
    series_every: Option<usize>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Comma-separated grid sizes, each twice the previous.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long = "cfl-c")]
    cfl_c: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[command(flatten)]
    physics: PhysicsArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated grid sizes.
    #[arg(long = "m-list", value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    dt: Option<f64>,
    /// Steps per grid; the trace of the last one is reported.
    #[arg(long)]
    steps: Option<usize>,
    /// Directory for per-grid residual CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    physics: PhysicsArgs,
}

impl PhysicsArgs {
    fn apply(&self, s: &mut Settings) {
        s.length = self.length;
        s.eps = self.eps;
        s.eta = self.eta;
        s.a = self.a;
        s.tol = self.tol;
        s.max_iter = self.max_iter;
    }
}

impl Command {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        match self {
            Command::Run(a) => {
                a.physics.apply(&mut s);
                s.m = a.m;
                s.dt = a.dt;
                s.cfl_c = a.cfl_c;
                s.tmax = a.tmax;
                s.seed = a.seed;
                s.init = a.init.clone();
                s.init_file = a.init_file.clone();
                s.out = a.out.clone();
                s.snap_every = a.snap_every;
                s.series_every = a.series_every;
            }
            Command::Converge(a) => {
                a.physics.apply(&mut s);
                s.levels = a.levels.clone();
                s.cfl_c = a.cfl_c;
                s.tmax = a.tmax;
            }
            Command::Bench(a) => {
                a.physics.apply(&mut s);
                s.m_list = a.m_list.clone();
                s.dt = a.dt;
                s.steps = a.steps;
                s.out = a.out.clone();
            }
        }
        s
    }
}

fn run_command(s: &Settings) -> Result<()> {
    let cfg = s.run_config()?;
    let (steps, params) = cfg.plan()?;
    let phi0 = cfg.initial_field()?;
    let plan = SpectralPlan::new(*params.grid());
    let mut stepper = Stepper::new(&params, &plan, cfg.psd)?;
    let mut out = FileOutput::create(&cfg.out_dir)?;
    let schedule = Schedule {
        snapshot_every: cfg.snap_every,
        series_every: cfg.series_every,
    };
    eprintln!(
        "m = {}, dt = {:e}, {steps} steps to t = {}",
        params.grid().m(),
        params.dt(),
        cfg.t_max
    );
    let start = Instant::now();
    let summary = run(&phi0, steps, &mut stepper, schedule, &mut out)?;
    if steps > 0 && steps % cfg.snap_every != 0 {
        out.snapshot(steps, summary.time, &summary.phi)?;
    }
    let series = out.series_path().to_path_buf();
    out.finish()?;
    println!(
        "finished {} steps in {:.2} s, mean PSD iterations {:.1}; series in {}",
        summary.steps,
        start.elapsed().as_secs_f64(),
        summary.mean_iters(),
        series.display()
    );
    Ok(())
}

fn converge_command(s: &Settings) -> Result<()> {
    let levels = s.levels.clone().unwrap_or_else(|| vec![16, 32, 64]);
    let c = s.cfl_c.unwrap_or(defaults::CFL_C);
    if s.dt.is_some() {
        return Err(FchError::Config("converge takes cfl-c, not dt".into()));
    }
    let t_final = s.tmax.unwrap_or(defaults::TMAX);
    let template = s.model_params(levels[0], 1.0)?;
    let cfg = s.psd_config()?;
    let report = cauchy_study_with(
        &levels,
        c,
        &template,
        t_final,
        cfg,
        fch_core::harness::init_benchmark,
        |l: &LevelResult| {
            eprintln!(
                "m = {:4}: {} steps of {:.4e}, {:.1} PSD iterations per step, {:.3e} s per step",
                l.m,
                l.steps,
                l.dt,
                l.mean_iters,
                l.cpu_per_step.as_secs_f64()
            )
        },
    )?;
    print!("{}", report.table());
    Ok(())
}

fn bench_command(s: &Settings) -> Result<()> {
    let m_list = s.m_list.clone().unwrap_or_else(|| vec![64, 128, 256]);
    let dt = s.dt.unwrap_or(1e-5);
    let steps = s.steps.unwrap_or(20).max(1);
    let cfg = s.psd_config()?;
    if let Some(dir) = &s.out {
        fs::create_dir_all(dir).map_err(|e| FchError::Config(format!("{}: {e}", dir.display())))?;
    }
    println!("{:>5} {:>6} {:>12} {:>12} {:>12}", "m", "iters", "final_res", "ratio_mean", "ratio_std");
    for &m in &m_list {
        let params = s.model_params(m, dt)?;
        let plan = SpectralPlan::new(*params.grid());
        let mut stepper = Stepper::new(&params, &plan, cfg)?;
        let mut phi = fch_core::harness::init_benchmark(*params.grid());
        let mut last = None;
        for _ in 0..steps {
            let res = stepper.step(&phi)?;
            phi = res.phi_next;
            last = Some(res.report);
        }
        let report = last.expect("at least one step");
        let ratios = report.residual_ratios();
        let tail = &ratios[ratios.len().saturating_sub(10)..];
        let n = tail.len().max(1) as f64;
        let mean = tail.iter().sum::<f64>() / n;
        let std = (tail.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        println!(
            "{m:>5} {:>6} {:>12.4e} {mean:>12.4} {std:>12.4}",
            report.iters,
            report.final_residual()
        );
        if let Some(dir) = &s.out {
            let path = dir.join(format!("residuals_m{m}.csv"));
            let mut text = String::from("iter,residual\n");
            for (k, r) in report.residual_history.iter().enumerate() {
                text.push_str(&format!("{k},{r}\n"));
            }
            fs::write(&path, text).map_err(|e| FchError::Config(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let settings = file.overlay(cli.command.settings())?;
    match &cli.command {
        Command::Run(_) => run_command(&settings),
        Command::Converge(_) => converge_command(&settings),
        Command::Bench(_) => bench_command(&settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = e.source();
            while let Some(inner) = source {
                eprint!(": {inner}");
                source = inner.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}
