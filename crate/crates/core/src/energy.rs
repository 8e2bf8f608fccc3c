//! Discrete FCH energy and its convex splitting.
//!
//! ```text
//! F_h   = F_c,h - F_e,h
//! F_c,h = ε⁻²/2 ‖φ‖₆⁶ + (ε⁻²/2 + η/2) ‖φ‖₂² + ε²/2 ‖Δ_h φ‖₂² + H_h(φ)
//! F_e,h = (ε⁻² + η/4) ‖φ‖₄⁴ + (1 + ηε²/2) ‖∇ᵥφ‖₂² + A ‖φ‖₄⁴ + A ‖∇ᵥφ‖₄⁴
//! H_h   = A ‖φ‖₄⁴ + A ‖∇ᵥφ‖₄⁴ + 3 (φ², 𝔄|∇ᵥφ|²)₂
//! ```
//!
//! Both parts are convex for `A >= 1`. One time step solves
//! `T_h(φ - g) + s δF_c,h(φ) = s δF_e,h(φᵏ)` (up to a constant), which is the
//! stationarity condition of the strictly convex functional
//!
//! ```text
//! E_h[φ] = ½ ‖φ - g‖₋₁² + s F_c,h(φ) - (b, φ)₂,   b = s δF_e,h(φᵏ) = -s f.
//! ```
//!
//! Here `f` is the explicit source returned by [`assemble_f`], i.e.
//! `f = -δF_e,h(φᵏ)`; [`explicit_rhs`] gives `b`.

use crate::error::{FchError, Result};
use crate::grid::{
    avg_c2v, avg_v2c, div_v, grad_norm_4, grad_norm_sq, grad_sq, grad_v, laplacian,
    laplacian_skew, p_laplacian_4, CellField, GridSpec, Norm,
};
use crate::poisson::SpectralPlan;
use crate::scheme::apply_n;

/// Physical and time-stepping constants. Mobility is fixed to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    grid: GridSpec,
    eps: f64,
    eta: f64,
    a: f64,
    dt: f64,
}

impl ModelParams {
    pub fn new(grid: GridSpec, eps: f64, eta: f64, a: f64, dt: f64) -> Result<Self> {
        let bad = |msg: String| Err(FchError::InvalidParams(msg));
        if !(eps.is_finite() && eps > 0.0) {
            return bad(format!("eps = {eps} must be positive"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return bad(format!("time step s = {dt} must be positive"));
        }
        if !(a.is_finite() && a >= 1.0) {
            return bad(format!("A = {a} must be at least 1 for a convex splitting"));
        }
        if !eta.is_finite() || 1.0 + 0.5 * eta * eps * eps <= 0.0 {
            return bad(format!(
                "eta = {eta}: the gradient coefficient 1 + eta*eps^2/2 must stay positive"
            ));
        }
        Ok(Self {
            grid,
            eps,
            eta,
            a,
            dt,
        })
    }

    /// The benchmark constants `ε = 0.18, η = 1, A = 1`.
    pub fn benchmark(grid: GridSpec, dt: f64) -> Result<Self> {
        Self::new(grid, 0.18, 1.0, 1.0, dt)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Time step `s`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.grid, self.eps, self.eta, self.a, dt)
    }

    pub fn with_grid(&self, grid: GridSpec) -> Result<Self> {
        Self::new(grid, self.eps, self.eta, self.a, self.dt)
    }

    pub(crate) fn inv_eps2(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    /// `(c0, c1) = (4ε⁻² + η + 4A + 6, 6 + 4A)`.
    pub fn preconditioner_coefficients(&self) -> (f64, f64) {
        (
            4.0 * self.inv_eps2() + self.eta + 4.0 * self.a + 6.0,
            6.0 + 4.0 * self.a,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySplit {
    pub total: f64,
    pub convex: f64,
    pub concave: f64,
}

/// The auxiliary convex part `H_h`.
pub fn h_energy(phi: &CellField, p: &ModelParams) -> f64 {
    let w = grad_sq(phi);
    let phi2 = phi.map(|v| v * v);
    let cross = phi2.inner_unchecked(&avg_v2c(&w));
    p.a * phi.norm_pow(Norm::L4) + p.a * grad_norm_4(phi) + 3.0 * cross
}

pub fn convex_energy(phi: &CellField, p: &ModelParams) -> f64 {
    let ie2 = p.inv_eps2();
    let lap = laplacian(phi);
    0.5 * ie2 * phi.norm_pow(Norm::L6)
        + 0.5 * (ie2 + p.eta) * phi.norm_pow(Norm::L2)
        + 0.5 * p.eps * p.eps * lap.norm_pow(Norm::L2)
        + h_energy(phi, p)
}

pub fn concave_energy(phi: &CellField, p: &ModelParams) -> f64 {
    let ie2 = p.inv_eps2();
    let l4 = phi.norm_pow(Norm::L4);
    (ie2 + 0.25 * p.eta) * l4
        + (1.0 + 0.5 * p.eta * p.eps * p.eps) * grad_norm_sq(phi)
        + p.a * l4
        + p.a * grad_norm_4(phi)
}

pub fn energy_split(phi: &CellField, p: &ModelParams) -> EnergySplit {
    let convex = convex_energy(phi, p);
    let concave = concave_energy(phi, p);
    EnergySplit {
        total: convex - concave,
        convex,
        concave,
    }
}

/// `F_h = F_c,h - F_e,h`.
pub fn energy(phi: &CellField, p: &ModelParams) -> f64 {
    energy_split(phi, p).total
}

/// First variation of `H_h`:
/// `4Aφ³ - 4A ∇ᵥ·(|∇ᵥφ|²∇ᵥφ) + 6φ 𝔄|∇ᵥφ|² - 6 ∇ᵥ·(𝔞(φ²) ∇ᵥφ)`.
pub fn delta_h(phi: &CellField, p: &ModelParams) -> CellField {
    let a = p.a;
    let plap = p_laplacian_4(phi);
    let w_cell = avg_v2c(&grad_sq(phi));
    let a_phi2 = avg_c2v(&phi.map(|v| v * v));
    let (mut gx, mut gy) = grad_v(phi);
    for ((x, y), &w) in gx
        .values_mut()
        .iter_mut()
        .zip(gy.values_mut().iter_mut())
        .zip(a_phi2.values())
    {
        *x *= w;
        *y *= w;
    }
    let cross_div = div_v(&gx, &gy).expect("same grid");
    let mut out = CellField::zeros(*phi.grid());
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        let v = phi.values()[k];
        *o = 4.0 * a * v * v * v - 4.0 * a * plap.values()[k] + 6.0 * v * w_cell.values()[k]
            - 6.0 * cross_div.values()[k];
    }
    out
}

/// Explicit concave-part source
/// `f = -(4ε⁻² + η)(φᵏ)³ + (2 + ηε²) Δᵥφᵏ - 4A(φᵏ)³ + 4A ∇ᵥ·(|∇ᵥφᵏ|²∇ᵥφᵏ)`,
/// which equals `-δF_e,h(φᵏ)`.
pub fn assemble_f(phi_k: &CellField, p: &ModelParams) -> CellField {
    let ie2 = p.inv_eps2();
    let skew = laplacian_skew(phi_k);
    let plap = p_laplacian_4(phi_k);
    let c3 = 4.0 * ie2 + p.eta + 4.0 * p.a;
    let c_lap = 2.0 + p.eta * p.eps * p.eps;
    let mut out = CellField::zeros(*phi_k.grid());
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        let v = phi_k.values()[k];
        *o = -c3 * v * v * v + c_lap * skew.values()[k] + 4.0 * p.a * plap.values()[k];
    }
    out
}

/// Right-hand side `b = -s f = s δF_e,h(φᵏ)` of the per-step equation
/// `N_h[φ] = b`.
pub fn explicit_rhs(phi_k: &CellField, p: &ModelParams) -> CellField {
    let mut b = assemble_f(phi_k, p);
    b.scale(-p.dt);
    b
}

pub(crate) fn check_same_mean(
    phi: &CellField,
    g: &CellField,
    what: &'static str,
) -> Result<()> {
    phi.grid().check(g.grid())?;
    let diff = (phi.mean() - g.mean()).abs();
    let allowed = 1e-8 * g.max_abs().max(phi.max_abs()).max(f64::MIN_POSITIVE);
    if diff > allowed {
        return Err(FchError::MeanMismatch {
            what,
            diff,
            allowed,
        });
    }
    Ok(())
}

pub(crate) fn check_mean_zero(d: &CellField, what: &'static str) -> Result<()> {
    let diff = d.mean().abs();
    let allowed = 1e-8 * d.max_abs();
    if diff > allowed {
        return Err(FchError::MeanMismatch {
            what,
            diff,
            allowed,
        });
    }
    Ok(())
}

/// Per-step objective `E_h[φ] = ½‖φ - g‖₋₁² + s F_c,h(φ) - (b, φ)₂`, whose
/// variation is `N_h[φ] - b`.
pub fn scheme_energy(
    phi: &CellField,
    g: &CellField,
    rhs: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
) -> Result<f64> {
    check_same_mean(phi, g, "scheme energy: mean(phi) != mean(g)")?;
    phi.grid().check(rhs.grid())?;
    let mut diff = phi.zip_with(g, |a, b| a - b)?;
    diff.project_mean_zero();
    let hm1 = plan.hm1_inner(&diff, &diff)?;
    Ok(0.5 * hm1 + p.dt * convex_energy(phi, p) - phi.inner_unchecked(rhs))
}

/// Directional derivative `δE_h[φ](d) = (N_h[φ] - b, d)₂` for mean-zero `d`.
pub fn dir_deriv(
    phi: &CellField,
    d: &CellField,
    g: &CellField,
    rhs: &CellField,
    p: &ModelParams,
    plan: &SpectralPlan,
) -> Result<f64> {
    check_mean_zero(d, "direction must be mean-zero")?;
    let n = apply_n(phi, g, p, plan)?;
    let grad = n.zip_with(rhs, |a, b| a - b)?;
    grad.inner(d)
}
