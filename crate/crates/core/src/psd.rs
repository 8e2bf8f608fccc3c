//! Preconditioned steepest descent for the per-step equation `N_h[φ] = b`.
//!
//! Iteration `n`:
//!
//! 1. residual `rⁿ = b - N_h[φⁿ]` (projected to mean zero),
//! 2. search direction `dⁿ = L_h⁻¹ rⁿ` by FFT,
//! 3. exact line search: `ᾱ` is the root of `q(α) = δE_h[φⁿ + αdⁿ](dⁿ)`,
//! 4. `φⁿ⁺¹ = φⁿ + ᾱ dⁿ`.
//!
//! `q` is strictly increasing because `E_h` is strictly convex, and
//! `q(0) = -(rⁿ, dⁿ)₂ < 0`, so the root is unique and positive.
//!
//! Along a line every term of `s F_c,h` is a polynomial of degree at most six
//! in `α`, and the remaining terms of `E_h` are quadratic. The default line
//! search therefore builds the exact quintic `q` once per iteration and finds
//! its root without touching the grid again. [`LineSearchMethod::Direct`]
//! instead evaluates `q` by applying `N_h` at every probe.

use wide::f64x4;

use crate::energy::{check_mean_zero, check_same_mean, ModelParams};
use crate::error::{FchError, Result};
use crate::grid::{down, max_abs, pairwise_sum, CellField};
use crate::lanes::Lane;
use crate::poisson::{Preconditioner, SpectralPlan, SpectralWorkspace};
use crate::scheme::NonlinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchMethod {
    /// Exact quintic expansion of `q(α)`.
    Polynomial,
    /// One `N_h` application per probe.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdConfig {
    /// Stop once `‖rⁿ‖∞` is at or below this.
    pub tol_residual_inf: f64,
    pub max_iters: usize,
    /// Relative tolerance on `ᾱ`.
    pub line_tol: f64,
    /// Maximum number of bracket doublings starting from `α = 1`.
    pub line_max_expand: usize,
    pub line_search: LineSearchMethod,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            tol_residual_inf: 1e-9,
            max_iters: 2000,
            line_tol: 1e-10,
            line_max_expand: 60,
            line_search: LineSearchMethod::Polynomial,
        }
    }
}

impl PsdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual_inf > 0.0) {
            return Err(FchError::Config(format!(
                "solver tolerance {} must be positive",
                self.tol_residual_inf
            )));
        }
        if self.max_iters < 1 {
            return Err(FchError::Config("max_iters must be at least 1".into()));
        }
        if !(self.line_tol > 0.0 && self.line_tol <= 1e-2) {
            return Err(FchError::Config(format!(
                "line search tolerance {} must lie in (0, 1e-2]",
                self.line_tol
            )));
        }
        Ok(())
    }
}

/// Iteration history of one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PsdReport {
    /// Number of updates `φⁿ → φⁿ⁺¹` performed.
    pub iters: usize,
    /// `‖rⁿ‖∞` for `n = 0..=iters`.
    pub residual_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
    pub converged: bool,
}

impl PsdReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Successive ratios `‖rⁿ⁺¹‖∞ / ‖rⁿ‖∞`.
    pub fn residual_ratios(&self) -> Vec<f64> {
        self.residual_history
            .windows(2)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// `b - N_h[φ]`, projected to mean zero.
pub fn residual(
    phi: &CellField,
    g: &CellField,
    rhs: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
) -> Result<CellField> {
    let n = crate::scheme::apply_n(phi, g, p, plan)?;
    let mut r = rhs.zip_with(&n, |b, v| b - v)?;
    r.project_mean_zero();
    Ok(r)
}

/// `d = L_h⁻¹ r`.
pub fn search_direction(precond: &Preconditioner, r: &CellField) -> Result<CellField> {
    precond.solve(r)
}

/// Exact line search along `d` from `φ`, returning `ᾱ`.
pub fn line_search(
    phi: &CellField,
    d: &CellField,
    g: &CellField,
    rhs: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
    cfg: &PsdConfig,
) -> Result<f64> {
    check_same_mean(phi, g, "line search: mean(phi) != mean(g)")?;
    check_mean_zero(d, "line search direction must be mean-zero")?;
    let mut diff = phi.zip_with(g, |a, b| a - b)?;
    diff.project_mean_zero();
    let t = plan.inv_neg_laplacian(&diff)?;
    let mut d0 = d.clone();
    d0.project_mean_zero();
    let td = plan.inv_neg_laplacian(&d0)?;
    let mut op = NonlinearOperator::new(p);
    let n = phi.grid().len();
    let mut local = vec![0.0; n];
    op.apply_local(phi.values(), &mut local);
    let r: Vec<f64> = (0..n)
        .map(|k| rhs.values()[k] - t.values()[k] - local[k])
        .collect();
    let mut scratch = LineScratch::new(phi.grid().m());
    let line = LineInputs {
        phi: phi.values(),
        d: d.values(),
        t: t.values(),
        td: td.values(),
        rhs: rhs.values(),
        r: &r,
    };
    line_search_inner(&mut op, &line, cfg, &mut scratch)
}

pub(crate) struct LineScratch {
    psi: Vec<f64>,
    out: Vec<f64>,
    first: RowData,
    lower: RowData,
    upper: RowData,
    vd_u: Vec<f64>,
    vd_v: Vec<f64>,
}

impl LineScratch {
    fn new(m: usize) -> Self {
        Self {
            psi: vec![0.0; m * m],
            out: vec![0.0; m * m],
            first: RowData::new(m),
            lower: RowData::new(m),
            upper: RowData::new(m),
            vd_u: vec![0.0; m + 1],
            vd_v: vec![0.0; m + 1],
        }
    }
}

/// Per-row quantities shared by the two vertex rows a cell row touches:
/// forward differences along the row and sums over horizontal cell pairs.
#[derive(Clone)]
struct RowData {
    diff_u: Vec<f64>,
    diff_v: Vec<f64>,
    pair_uu: Vec<f64>,
    pair_uv: Vec<f64>,
    pair_vv: Vec<f64>,
}

impl RowData {
    fn new(m: usize) -> Self {
        Self {
            diff_u: vec![0.0; m],
            diff_v: vec![0.0; m],
            pair_uu: vec![0.0; m],
            pair_uv: vec![0.0; m],
            pair_vv: vec![0.0; m],
        }
    }

    fn fill(&mut self, u: &[f64], v: &[f64]) {
        let m = u.len();
        let n = m - 1;
        let (u0, u1, v0, v1) = (&u[..n], &u[1..], &v[..n], &v[1..]);
        let (du, dv) = (&mut self.diff_u[..n], &mut self.diff_v[..n]);
        let (puu, puv, pvv) = (&mut self.pair_uu[..n], &mut self.pair_uv[..n], &mut self.pair_vv[..n]);
        for i in 0..n {
            du[i] = u1[i] - u0[i];
            dv[i] = v1[i] - v0[i];
            puu[i] = u0[i] * u0[i] + u1[i] * u1[i];
            puv[i] = u0[i] * v0[i] + u1[i] * v1[i];
            pvv[i] = v0[i] * v0[i] + v1[i] * v1[i];
        }
        self.diff_u[n] = u[0] - u[n];
        self.diff_v[n] = v[0] - v[n];
        self.pair_uu[n] = u[n] * u[n] + u[0] * u[0];
        self.pair_uv[n] = u[n] * v[n] + u[0] * v[0];
        self.pair_vv[n] = v[n] * v[n] + v[0] * v[0];
    }
}

/// Polynomial data of `E_h` along `ψ = φ + α d`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LineCoefficients {
    /// `c_2..=c_6` of the nonlinear part `ε⁻²/2 ‖ψ‖₆⁶ + H_h(ψ)`; the
    /// constant and linear coefficients are not needed by the root finder.
    pub(crate) c: [f64; 5],
    /// `‖d‖²`.
    pub(crate) dd: f64,
    /// `‖Δ_h d‖²`.
    pub(crate) lap_dd: f64,
    /// `⟨r, d⟩`.
    pub(crate) rd: f64,
    /// `⟨T_h d, d⟩`.
    pub(crate) td_d: f64,
}

/// Computes [`LineCoefficients`] in one sweep over the rows.
pub(crate) fn nonlinear_line_coefficients(
    p: &ModelParams,
    line: &LineInputs,
    s: &mut LineScratch,
) -> LineCoefficients {
    let LineInputs { phi, d, r, td, .. } = *line;
    let g = p.grid();
    let (m, h) = (g.m(), g.h());
    let h2 = h * h;
    let inv_h2 = 1.0 / h2;
    let a = p.a();
    let ie2 = p.inv_eps2();
    let mut cell_sum = [0.0; 11];
    let mut vtx_sum = [0.0; 6];
    let mut lap_sum = [0.0; 1];
    s.first.fill(&phi[..m], &d[..m]);
    s.lower.clone_from(&s.first);
    for j in 0..m {
        let r0 = j * m;
        let rm = down(j, m) * m;
        let (ua, va) = (&phi[r0..r0 + m], &d[r0..r0 + m]);
        let (vs, vn) = if j + 1 == m {
            s.upper.clone_from(&s.first);
            (&d[rm..rm + m], &d[..m])
        } else {
            let rp = r0 + m;
            s.upper.fill(&phi[rp..rp + m], &d[rp..rp + m]);
            (&d[rm..rm + m], &d[rp..rp + m])
        };
        let un = if j + 1 == m { &phi[..m] } else { &phi[r0 + m..r0 + 2 * m] };

        let cells = CellTerms {
            u: ua,
            v: va,
            r: &r[r0..r0 + m],
            t: &td[r0..r0 + m],
        };
        lane_sum(m, &cells, &mut cell_sum);

        for i in 0..m {
            s.vd_u[i] = un[i] - ua[i];
            s.vd_v[i] = vn[i] - va[i];
        }
        s.vd_u[m] = s.vd_u[0];
        s.vd_v[m] = s.vd_v[0];
        let (lo, hi) = (&s.lower, &s.upper);
        let vertex = VertexTerms {
            hu: [&lo.diff_u, &hi.diff_u],
            hv: [&lo.diff_v, &hi.diff_v],
            vu: [&s.vd_u[..m], &s.vd_u[1..]],
            vv: [&s.vd_v[..m], &s.vd_v[1..]],
            puu: [&lo.pair_uu, &hi.pair_uu],
            puv: [&lo.pair_uv, &hi.pair_uv],
            pvv: [&lo.pair_vv, &hi.pair_vv],
        };
        lane_sum(m, &vertex, &mut vtx_sum);

        let k = m - 2;
        let lap = LapTerms {
            c: &va[1..=k],
            l: &va[..k],
            r: &va[2..],
            n: &vn[1..=k],
            s: &vs[1..=k],
        };
        lane_sum(k, &lap, &mut lap_sum);
        let n = m - 1;
        let edge = |c: f64, l: f64, r: f64, n: f64, s: f64| (l + r + n + s - 4.0 * c).powi(2);
        lap_sum[0] += edge(va[0], va[n], va[1], vn[0], vs[0]) + edge(va[n], va[n - 1], va[0], vn[n], vs[n]);

        std::mem::swap(&mut s.lower, &mut s.upper);
    }

    let half_ie2 = 0.5 * ie2;
    let [u4v2, u2v2, u3v3, uv3, u2v4, v4, uv5, v6, v2, rv, tv] = cell_sum;
    // (2h)^-4 and (2h)^-2 / 4 from the unscaled gradients and averages
    let g4 = a / (16.0 * h2 * h2);
    let g2 = 3.0 / (16.0 * h2);
    let [x2, y2, x3, y3, x4, y4] = vtx_sum;
    let c = [
        half_ie2 * 15.0 * u4v2 + a * 6.0 * u2v2 + g4 * x2 + g2 * y2,
        half_ie2 * 20.0 * u3v3 + a * 4.0 * uv3 + g4 * 4.0 * x3 + g2 * 2.0 * y3,
        half_ie2 * 15.0 * u2v4 + a * v4 + g4 * x4 + g2 * y4,
        half_ie2 * 6.0 * uv5,
        half_ie2 * v6,
    ];
    LineCoefficients {
        c: c.map(|x| h2 * x),
        dd: h2 * v2,
        lap_dd: h2 * inv_h2 * inv_h2 * lap_sum[0],
        rd: h2 * rv,
        td_d: h2 * tv,
    }
}

/// Per-index term of a row sum, evaluable one lane or four lanes at a time.
trait RowTerms<const K: usize> {
    fn at<T: Lane>(&self, i: usize) -> [T; K];
}

/// Adds `Σ_{i<n} terms.at(i)` into `acc`.
#[inline(always)]
fn lane_sum<const K: usize, R: RowTerms<K>>(n: usize, terms: &R, acc: &mut [f64; K]) {
    let mut wide = [f64x4::splat(0.0); K];
    let full = n / 4 * 4;
    for i in (0..full).step_by(4) {
        let t = terms.at::<f64x4>(i);
        for k in 0..K {
            wide[k] = wide[k] + t[k];
        }
    }
    for i in full..n {
        let t = terms.at::<f64>(i);
        for k in 0..K {
            acc[k] += t[k];
        }
    }
    for k in 0..K {
        acc[k] += wide[k].total();
    }
}

/// Cell sums for the binomial expansions of ε⁻²/2 ψ⁶ + A ψ⁴:
/// u⁴v², u²v², u³v³, uv³, u²v⁴, v⁴, uv⁵, v⁶, v², then rv and tv.
struct CellTerms<'a> {
    u: &'a [f64],
    v: &'a [f64],
    r: &'a [f64],
    t: &'a [f64],
}

impl RowTerms<11> for CellTerms<'_> {
    #[inline(always)]
    fn at<T: Lane>(&self, i: usize) -> [T; 11] {
        let (u, v) = (T::load(self.u, i), T::load(self.v, i));
        let (u2, v2) = (u * u, v * v);
        let (uv, u2v2) = (u * v, u2 * v2);
        let v4 = v2 * v2;
        [
            u2v2 * u2,
            u2v2,
            u2v2 * uv,
            uv * v2,
            u2 * v4,
            v4,
            uv * v4,
            v4 * v2,
            v2,
            T::load(self.r, i) * v,
            T::load(self.t, i) * v,
        ]
    }
}

/// Vertex sums for A|∇ψ|⁴ + 3 𝔞(ψ²)|∇ψ|². Gradients are left unscaled by
/// 1/(2h) and vertex averages by 1/4; the caller restores both. With
/// |∇ψ|² ∝ ga + 2gb α + gc α² and 𝔞(ψ²) ∝ pp + 2qq α + rr α².
struct VertexTerms<'a> {
    // row differences of φ and d in the lower and upper cell rows
    hu: [&'a [f64]; 2],
    hv: [&'a [f64]; 2],
    // column differences of φ and d, shifted by one cell
    vu: [&'a [f64]; 2],
    vv: [&'a [f64]; 2],
    // horizontal pair sums of φ², φd, d² in both rows
    puu: [&'a [f64]; 2],
    puv: [&'a [f64]; 2],
    pvv: [&'a [f64]; 2],
}

impl RowTerms<6> for VertexTerms<'_> {
    #[inline(always)]
    fn at<T: Lane>(&self, i: usize) -> [T; 6] {
        let pair = |x: &[&[f64]; 2]| T::load(x[0], i) + T::load(x[1], i);
        let (gx, gy) = (pair(&self.hu), pair(&self.vu));
        let (dx, dy) = (pair(&self.hv), pair(&self.vv));
        let (pp, qq, rr) = (pair(&self.puu), pair(&self.puv), pair(&self.pvv));
        let ga = gx * gx + gy * gy;
        let gb = gx * dx + gy * dy;
        let gc = dx * dx + dy * dy;
        let (two, four) = (T::splat(2.0), T::splat(4.0));
        [
            four * gb * gb + two * ga * gc,
            pp * gc + four * qq * gb + rr * ga,
            gb * gc,
            qq * gc + rr * gb,
            gc * gc,
            rr * gc,
        ]
    }
}

/// Square of the unscaled five-point Laplacian.
struct LapTerms<'a> {
    c: &'a [f64],
    l: &'a [f64],
    r: &'a [f64],
    n: &'a [f64],
    s: &'a [f64],
}

impl RowTerms<1> for LapTerms<'_> {
    #[inline(always)]
    fn at<T: Lane>(&self, i: usize) -> [T; 1] {
        let x = T::load(self.l, i) + T::load(self.r, i) + T::load(self.n, i) + T::load(self.s, i)
            - T::splat(4.0) * T::load(self.c, i);
        [x * x]
    }
}

fn inner(a: &[f64], b: &[f64], h2: f64) -> f64 {
    h2 * pairwise_sum(a.len(), |k| a[k] * b[k])
}

/// Slices describing one line search along `φ + α d`.
#[derive(Clone, Copy)]
pub(crate) struct LineInputs<'a> {
    pub(crate) phi: &'a [f64],
    pub(crate) d: &'a [f64],
    /// `T_h(φ - g)`
    pub(crate) t: &'a [f64],
    /// `T_h d`
    pub(crate) td: &'a [f64],
    pub(crate) rhs: &'a [f64],
    /// `rhs - N_h[φ]`
    pub(crate) r: &'a [f64],
}

pub(crate) fn line_search_inner(
    op: &mut NonlinearOperator,
    line: &LineInputs,
    cfg: &PsdConfig,
    scratch: &mut LineScratch,
) -> Result<f64> {
    let p = op.params().clone();
    let g = *p.grid();
    let h2 = g.h() * g.h();
    match cfg.line_search {
        LineSearchMethod::Polynomial => {
            let k = nonlinear_line_coefficients(&p, line, scratch);
            let s = p.dt();
            let e2 = p.eps() * p.eps();
            let q0 = -k.rd;
            let lin = k.td_d + s * (p.inv_eps2() + p.eta()) * k.dd + s * e2 * k.lap_dd;
            let c = k.c;
            // q(α) - q(0) = lin α + s Σ_{k≥2} k c_k α^{k-1}
            let q = |alpha: f64| -> Result<f64> {
                let mut acc = 6.0 * c[4];
                for k in (2..6).rev() {
                    acc = acc * alpha + k as f64 * c[k - 2];
                }
                Ok(q0 + lin * alpha + s * acc * alpha)
            };
            find_root(q0, q, cfg)
        }
        LineSearchMethod::Direct => {
            let LineInputs { phi, d, t, td, rhs, r } = *line;
            let n = phi.len();
            let q0 = -inner(r, d, h2);
            let q = |alpha: f64| -> Result<f64> {
                for k in 0..n {
                    scratch.psi[k] = phi[k] + alpha * d[k];
                }
                op.apply_local(&scratch.psi, &mut scratch.out);
                let out = &scratch.out;
                Ok(h2 * pairwise_sum(n, |k| (t[k] + alpha * td[k] + out[k] - rhs[k]) * d[k]))
            };
            find_root(q0, q, cfg)
        }
    }
}

/// Root of an increasing scalar function with `q(0) = q0`, by bracket
/// doubling from `[0, 1]` followed by Illinois regula falsi.
pub(crate) fn find_root(
    q0: f64,
    mut q: impl FnMut(f64) -> Result<f64>,
    cfg: &PsdConfig,
) -> Result<f64> {
    if q0 == 0.0 {
        return Ok(0.0);
    }
    // Root on the negative side for an ascent direction.
    let dir = if q0 < 0.0 { 1.0 } else { -1.0 };
    let mut eval = |x: f64| -> Result<f64> { Ok(dir * q(dir * x)?) };
    let f0 = dir * q0;

    let (mut lo, mut flo) = (0.0_f64, f0);
    let mut hi = 1.0_f64;
    let mut fhi = eval(hi)?;
    let mut expansions = 0;
    while fhi < 0.0 {
        if expansions >= cfg.line_max_expand || !fhi.is_finite() {
            return Err(FchError::LineSearchBracket {
                expansions,
                alpha: dir * hi,
            });
        }
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = eval(hi)?;
        expansions += 1;
    }
    if !fhi.is_finite() {
        return Err(FchError::LineSearchBracket {
            expansions,
            alpha: dir * hi,
        });
    }
    if fhi == 0.0 {
        return Ok(dir * hi);
    }

    let ftol = cfg.line_tol * f0.abs();
    let mut side = 0i8;
    let mut x = hi;
    for it in 0..200 {
        x = if it % 8 == 7 {
            0.5 * (lo + hi)
        } else {
            let cand = hi - fhi * (hi - lo) / (fhi - flo);
            if cand > lo && cand < hi {
                cand
            } else {
                0.5 * (lo + hi)
            }
        };
        let fx = eval(x)?;
        if fx.abs() <= ftol || (hi - lo) <= cfg.line_tol * x.abs() {
            break;
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(dir * x)
}

/// Writes `r = b - t - local` projected to mean zero and returns `‖r‖∞`
/// together with the removed mean.
fn residual_into(b: &[f64], t: &[f64], local: &[f64], r: &mut [f64]) -> (f64, f64) {
    let n = r.len();
    let (b, t, local) = (&b[..n], &t[..n], &local[..n]);
    for k in 0..n {
        r[k] = b[k] - t[k] - local[k];
    }
    let mean = pairwise_sum(n, |k| r[k]) / n as f64;
    let mut acc = [0.0_f64; 4];
    let mut chunks = r.chunks_exact_mut(4);
    for c in &mut chunks {
        for l in 0..4 {
            c[l] -= mean;
            let a = c[l].abs();
            acc[l] = if a > acc[l] || a.is_nan() { a } else { acc[l] };
        }
    }
    for x in chunks.into_remainder() {
        *x -= mean;
        let a = x.abs();
        acc[0] = if a > acc[0] || a.is_nan() { a } else { acc[0] };
    }
    (max_abs(&acc), mean)
}

/// Reusable solver state for repeated solves with one preconditioner.
pub struct PsdSolver {
    precond: Preconditioner,
    cfg: PsdConfig,
    op: NonlinearOperator,
    ws: SpectralWorkspace,
    scratch: LineScratch,
    t: CellField,
    local: Vec<f64>,
    r: CellField,
    d: CellField,
    td: CellField,
}

impl PsdSolver {
    pub fn new(precond: Preconditioner, cfg: PsdConfig) -> Self {
        let grid = *precond.plan().grid();
        let n = grid.len();
        Self {
            op: NonlinearOperator::new(precond.params()),
            ws: precond.plan().workspace(),
            scratch: LineScratch::new(grid.m()),
            t: CellField::zeros(grid),
            local: vec![0.0; n],
            r: CellField::zeros(grid),
            d: CellField::zeros(grid),
            td: CellField::zeros(grid),
            precond,
            cfg,
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.precond.params()
    }

    pub fn config(&self) -> &PsdConfig {
        &self.cfg
    }

    /// Solves `N_h[φ] = rhs` with `g` the previous time level, starting
    /// from `phi_init`. Non-convergence is an error carrying the report.
    pub fn solve(
        &mut self,
        g: &CellField,
        rhs: &CellField,
        phi_init: &CellField,
    ) -> Result<(CellField, PsdReport)> {
        self.cfg.validate()?;
        let grid = *self.precond.plan().grid();
        grid.check(g.grid())?;
        grid.check(rhs.grid())?;
        check_same_mean(phi_init, g, "solve: mean(phi_init) != mean(g)")?;

        let n = grid.len();
        let mut phi = phi_init.clone();
        let mut diff = phi.zip_with(g, |a, b| a - b)?;
        diff.project_mean_zero();
        self.precond
            .plan()
            .inv_neg_laplacian_into(&mut self.ws, &diff, &mut self.t)?;

        let mut report = PsdReport::default();
        loop {
            self.op.apply_local(phi.values(), &mut self.local);
            let (res, offset) =
                residual_into(rhs.values(), self.t.values(), &self.local, self.r.values_mut());
            if !res.is_finite() {
                return Err(FchError::NonFinite("PSD residual"));
            }
            report.residual_history.push(res);
            if res <= self.cfg.tol_residual_inf {
                report.converged = true;
                return Ok((phi, report));
            }
            if report.iters >= self.cfg.max_iters {
                return Err(FchError::NotConverged {
                    report: Box::new(report),
                });
            }

            self.precond.solve_scaled(
                &mut self.ws,
                self.r.values(),
                // roundoff left by the projection scales with the removed offset
                res.max(offset.abs()),
                self.d.values_mut(),
                self.td.values_mut(),
            )?;
            let line = LineInputs {
                phi: phi.values(),
                d: self.d.values(),
                t: self.t.values(),
                td: self.td.values(),
                rhs: rhs.values(),
                r: self.r.values(),
            };
            let alpha = line_search_inner(&mut self.op, &line, &self.cfg, &mut self.scratch)?;
            let (d, td) = (self.d.values(), self.td.values());
            let (pv, tv) = (phi.values_mut(), self.t.values_mut());
            for k in 0..n {
                pv[k] += alpha * d[k];
                tv[k] += alpha * td[k];
            }
            report.alpha_history.push(alpha);
            report.iters += 1;
        }
    }
}

/// One-shot solve of `N_h[φ] = rhs`.
pub fn solve(
    g: &CellField,
    rhs: &CellField,
    phi_init: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
    cfg: PsdConfig,
) -> Result<(CellField, PsdReport)> {
    PsdSolver::new(plan.preconditioner(p)?, cfg).solve(g, rhs, phi_init)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(PsdConfig::default().validate().is_ok());
        let bad = PsdConfig {
            line_tol: 0.5,
            ..PsdConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PsdConfig {
            max_iters: 0,
            ..PsdConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn root_of_linear_function() {
        let cfg = PsdConfig::default();
        let x = find_root(-3.0, |a| Ok(2.0 * a - 3.0), &cfg).unwrap();
        assert!((x - 1.5).abs() < 1e-9);
        // needs several doublings
        let x = find_root(-100.0, |a| Ok(a - 100.0), &cfg).unwrap();
        assert!((x - 100.0).abs() < 1e-7);
        // ascent direction: root on the negative side
        let x = find_root(2.0, |a| Ok(a + 2.0), &cfg).unwrap();
        assert!((x + 2.0).abs() < 1e-9);
        assert_eq!(find_root(0.0, |a| Ok(a), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn bracket_exhaustion_is_an_error() {
        let cfg = PsdConfig {
            line_max_expand: 5,
            ..PsdConfig::default()
        };
        assert!(matches!(
            find_root(-1.0, |_| Ok(-1.0), &cfg),
            Err(FchError::LineSearchBracket { expansions: 5, .. })
        ));
    }

    #[test]
    fn report_ratios() {
        let r = PsdReport {
            iters: 2,
            residual_history: vec![1.0, 0.5, 0.125],
            alpha_history: vec![1.0, 1.0],
            converged: true,
        };
        assert_eq!(r.residual_ratios(), vec![0.5, 0.25]);
        assert_eq!(r.final_residual(), 0.125);
    }
}
