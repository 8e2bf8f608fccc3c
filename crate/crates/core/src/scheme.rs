//! The convex-splitting time step and the time loop around it.
//!
//! Each step solves `N_h[φ] = b` for `φᵏ⁺¹` with
//!
//! ```text
//! N_h[φ] = T_h(φ - g) + 3sε⁻²φ⁵ + 4sAφ³ + s(ε⁻² + η)φ + 6sφ 𝔄|∇ᵥφ|²
//!          - 6s ∇ᵥ·(𝔞(φ²)∇ᵥφ) - 4sA ∇ᵥ·(|∇ᵥφ|²∇ᵥφ) + sε²Δ_h²φ
//! ```
//!
//! `g = φᵏ` and `b = s δF_e,h(φᵏ)`. Everything after the `T_h` term is
//! `s δF_c,h(φ)`, evaluated by [`NonlinearOperator`] without any transform.

use crate::energy::{check_same_mean, energy_split, explicit_rhs, EnergySplit, ModelParams};
use crate::error::{FchError, Result};
use crate::grid::{down, up, CellField};
use crate::poisson::{Preconditioner, SpectralPlan};
use crate::psd::{PsdConfig, PsdReport, PsdSolver};

/// Scratch-holding evaluator of `s δF_c,h(φ)`.
pub struct NonlinearOperator {
    params: ModelParams,
    gx: Vec<f64>,
    gy: Vec<f64>,
    w: Vec<f64>,
    lap: Vec<f64>,
}

impl NonlinearOperator {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.grid().len();
        Self {
            params: params.clone(),
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            w: vec![0.0; n],
            lap: vec![0.0; n],
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Writes `s δF_c,h(φ)` into `out`.
    pub fn apply_local(&mut self, phi: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let g = p.grid();
        let (m, h) = (g.m(), g.h());
        let a = p.a();
        let ie2 = p.inv_eps2();
        let lin = ie2 + p.eta();
        let half_h = 0.5 / h;
        let inv_h2 = 1.0 / (h * h);

        // Vertex pass: w = |∇φ|², flux = (6 𝔞(φ²) + 4A w) ∇φ.
        let vertex = |a0: f64, a1: f64, b0: f64, b1: f64| {
            let dx = half_h * (b1 - b0 + a1 - a0);
            let dy = half_h * (b1 - a1 + b0 - a0);
            let wk = dx * dx + dy * dy;
            let avg_sq = 0.25 * (a0 * a0 + a1 * a1 + b0 * b0 + b1 * b1);
            let coeff = 6.0 * avg_sq + 4.0 * a * wk;
            (wk, coeff * dx, coeff * dy)
        };
        for j in 0..m {
            let r0 = j * m;
            let r1 = up(j, m) * m;
            let ra = &phi[r0..r0 + m];
            let rb = &phi[r1..r1 + m];
            let fx = &mut self.gx[r0..r0 + m];
            let fy = &mut self.gy[r0..r0 + m];
            let w = &mut self.w[r0..r0 + m];
            let n = m - 1;
            let (a0, a1, b0, b1) = (&ra[..n], &ra[1..], &rb[..n], &rb[1..]);
            let (w_, fx_, fy_) = (&mut w[..n], &mut fx[..n], &mut fy[..n]);
            for i in 0..n {
                let (wk, x, y) = vertex(a0[i], a1[i], b0[i], b1[i]);
                w_[i] = wk;
                fx_[i] = x;
                fy_[i] = y;
            }
            let (wk, x, y) = vertex(ra[n], ra[0], rb[n], rb[0]);
            w[n] = wk;
            fx[n] = x;
            fy[n] = y;
        }

        // Cell pass: pointwise terms, 6φ 𝔄w, minus the flux divergence;
        // Δφ goes to lap on the side.
        let cell = |v: f64, div4: [f64; 8], w4: [f64; 4], lap5: [f64; 4]| {
            let [f0, f0m, fm, fmm, q0, qm, q0m, qmm] = div4;
            let div = half_h * (f0 - f0m + fm - fmm + q0 - qm + q0m - qmm);
            let avg_w = 0.25 * (w4[0] + w4[1] + w4[2] + w4[3]);
            let v2 = v * v;
            let val = 3.0 * ie2 * v2 * v2 * v + 4.0 * a * v2 * v + lin * v + 6.0 * v * avg_w - div;
            let lap = inv_h2 * (lap5[0] + lap5[1] + lap5[2] + lap5[3] - 4.0 * v);
            (val, lap)
        };
        for j in 0..m {
            let r0 = j * m;
            let rm = down(j, m) * m;
            let rp = up(j, m) * m;
            let (f0, fm) = (&self.gx[r0..r0 + m], &self.gx[rm..rm + m]);
            let (q0, qm) = (&self.gy[r0..r0 + m], &self.gy[rm..rm + m]);
            let (w0, wm) = (&self.w[r0..r0 + m], &self.w[rm..rm + m]);
            let (pc, pn, ps) = (&phi[r0..r0 + m], &phi[rp..rp + m], &phi[rm..rm + m]);
            let o = &mut out[r0..r0 + m];
            let lap = &mut self.lap[r0..r0 + m];
            let at = |i: usize, im: usize, ip: usize| {
                cell(
                    pc[i],
                    [f0[i], f0[im], fm[i], fm[im], q0[i], qm[i], q0[im], qm[im]],
                    [wm[im], w0[im], w0[i], wm[i]],
                    [pc[ip], pc[im], pn[i], ps[i]],
                )
            };
            (o[0], lap[0]) = at(0, m - 1, 1);
            (o[m - 1], lap[m - 1]) = at(m - 1, m - 2, 0);
            // interior i = 1..m-1 through equal-length shifted views
            let n = m - 2;
            let (f0c, f0l) = (&f0[1..=n], &f0[..n]);
            let (fmc, fml) = (&fm[1..=n], &fm[..n]);
            let (q0c, q0l) = (&q0[1..=n], &q0[..n]);
            let (qmc, qml) = (&qm[1..=n], &qm[..n]);
            let (w0c, w0l) = (&w0[1..=n], &w0[..n]);
            let (wmc, wml) = (&wm[1..=n], &wm[..n]);
            let (pcc, pcl, pcr) = (&pc[1..=n], &pc[..n], &pc[2..]);
            let (pnc, psc) = (&pn[1..=n], &ps[1..=n]);
            let (oc, lc) = (&mut o[1..=n], &mut lap[1..=n]);
            for i in 0..n {
                let (v, l) = cell(
                    pcc[i],
                    [f0c[i], f0l[i], fmc[i], fml[i], q0c[i], qmc[i], q0l[i], qml[i]],
                    [wml[i], w0l[i], w0c[i], wmc[i]],
                    [pcr[i], pcl[i], pnc[i], psc[i]],
                );
                oc[i] = v;
                lc[i] = l;
            }
        }

        // out <- s (out + ε² Δ_h lap)
        let s = p.dt();
        let se2 = s * p.eps() * p.eps() * inv_h2;
        let combine = |o: f64, c: f64, l: f64, r: f64, n: f64, so: f64| {
            s * o + se2 * (l + r + n + so - 4.0 * c)
        };
        for j in 0..m {
            let r0 = j * m;
            let rm = down(j, m) * m;
            let rp = up(j, m) * m;
            let (cc, cn, cs) = (&self.lap[r0..r0 + m], &self.lap[rp..rp + m], &self.lap[rm..rm + m]);
            let o = &mut out[r0..r0 + m];
            o[0] = combine(o[0], cc[0], cc[m - 1], cc[1], cn[0], cs[0]);
            o[m - 1] = combine(o[m - 1], cc[m - 1], cc[m - 2], cc[0], cn[m - 1], cs[m - 1]);
            let n = m - 2;
            let (c_, l_, r_, n_, s_) = (&cc[1..=n], &cc[..n], &cc[2..], &cn[1..=n], &cs[1..=n]);
            let oc = &mut o[1..=n];
            for i in 0..n {
                oc[i] = combine(oc[i], c_[i], l_[i], r_[i], n_[i], s_[i]);
            }
        }
    }
}

/// Evaluates `N_h[φ]` with `g` the previous time level.
pub fn apply_n(
    phi: &CellField,
    g: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
) -> Result<CellField> {
    check_same_mean(phi, g, "N_h: mean(phi) != mean(g)")?;
    p.grid().check(phi.grid())?;
    let mut diff = phi.zip_with(g, |a, b| a - b)?;
    diff.project_mean_zero();
    let mut out = plan.inv_neg_laplacian(&diff)?;
    let mut local = CellField::zeros(*phi.grid());
    NonlinearOperator::new(p).apply_local(phi.values(), local.values_mut());
    out.axpy(1.0, &local)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub phi_next: CellField,
    pub report: PsdReport,
    pub energy_before: EnergySplit,
    pub energy_after: EnergySplit,
    /// Grid mean of `phi_next`.
    pub mass: f64,
}

/// Advances one field through repeated time steps with a fixed step size.
pub struct Stepper {
    solver: PsdSolver,
}

impl Stepper {
    pub fn new(params: &ModelParams, plan: &SpectralPlan, cfg: PsdConfig) -> Result<Self> {
        let precond = plan.preconditioner(params)?;
        Ok(Self::with_preconditioner(precond, cfg))
    }

    pub fn with_preconditioner(precond: Preconditioner, cfg: PsdConfig) -> Self {
        Self {
            solver: PsdSolver::new(precond, cfg),
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.solver.params()
    }

    pub fn config(&self) -> &PsdConfig {
        self.solver.config()
    }

    pub fn solver(&mut self) -> &mut PsdSolver {
        &mut self.solver
    }

    /// One step from `phi_k`, warm-starting the solver at `phi_k`.
    pub fn step(&mut self, phi_k: &CellField) -> Result<StepResult> {
        if !phi_k.is_finite() {
            return Err(FchError::NonFinite("time step input"));
        }
        let p = self.solver.params().clone();
        let rhs = explicit_rhs(phi_k, &p);
        let (phi_next, report) = self.solver.solve(phi_k, &rhs, phi_k)?;
        if !phi_next.is_finite() {
            return Err(FchError::NonFinite("time step output"));
        }
        Ok(StepResult {
            energy_before: energy_split(phi_k, &p),
            energy_after: energy_split(&phi_next, &p),
            mass: phi_next.mean(),
            phi_next,
            report,
        })
    }
}

/// Single step with freshly built solver state.
pub fn time_step(
    phi_k: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
    cfg: PsdConfig,
) -> Result<StepResult> {
    Stepper::new(p, plan, cfg)?.step(phi_k)
}

/// One row of the energy/mass time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub energy_convex: f64,
    pub energy_concave: f64,
    pub mass: f64,
    pub psd_iters: usize,
    pub residual: f64,
}

/// Callbacks fired by [`run`]. Both default to doing nothing.
pub trait RunHooks {
    fn snapshot(&mut self, _step: usize, _time: f64, _phi: &CellField) -> Result<()> {
        Ok(())
    }

    fn series(&mut self, _row: &SeriesRow) -> Result<()> {
        Ok(())
    }
}

/// No-op hooks.
pub struct NoHooks;

impl RunHooks for NoHooks {}

/// Output cadence for [`run`]; step 0 always fires both hooks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub snapshot_every: usize,
    pub series_every: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            snapshot_every: usize::MAX,
            series_every: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub phi: CellField,
    pub steps: usize,
    pub time: f64,
    pub series: Vec<SeriesRow>,
    pub total_iters: usize,
}

impl RunSummary {
    pub fn mean_iters(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_iters as f64 / self.steps as f64
        }
    }
}

/// Runs `n_steps` steps from `phi0`. Step errors are wrapped with their
/// 1-based step index.
pub fn run(
    phi0: &CellField,
    n_steps: usize,
    stepper: &mut Stepper,
    schedule: Schedule,
    hooks: &mut dyn RunHooks,
) -> Result<RunSummary> {
    if schedule.snapshot_every == 0 || schedule.series_every == 0 {
        return Err(FchError::Config("output intervals must be at least 1".into()));
    }
    let dt = stepper.params().dt();
    let split = energy_split(phi0, stepper.params());
    let first = SeriesRow {
        step: 0,
        time: 0.0,
        energy: split.total,
        energy_convex: split.convex,
        energy_concave: split.concave,
        mass: phi0.mean(),
        psd_iters: 0,
        residual: 0.0,
    };
    hooks.snapshot(0, 0.0, phi0)?;
    hooks.series(&first)?;
    let mut series = vec![first];
    let mut phi = phi0.clone();
    let mut total_iters = 0;

    for step in 1..=n_steps {
        let res = stepper
            .step(&phi)
            .map_err(|e| FchError::Step {
                step,
                source: Box::new(e),
            })?;
        let time = step as f64 * dt;
        total_iters += res.report.iters;
        phi = res.phi_next;
        if step % schedule.series_every == 0 {
            let row = SeriesRow {
                step,
                time,
                energy: res.energy_after.total,
                energy_convex: res.energy_after.convex,
                energy_concave: res.energy_after.concave,
                mass: res.mass,
                psd_iters: res.report.iters,
                residual: res.report.final_residual(),
            };
            hooks.series(&row)?;
            series.push(row);
        }
        if step % schedule.snapshot_every == 0 {
            hooks.snapshot(step, time, &phi)?;
        }
    }

    Ok(RunSummary {
        phi,
        steps: n_steps,
        time: n_steps as f64 * dt,
        series,
        total_iters,
    })
}
