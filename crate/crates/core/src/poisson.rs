//! FFT-diagonalized periodic solves: the inverse of `-Δ_h` on mean-zero
//! fields, the discrete `H^{-1}` inner product it induces, and the
//! constant-coefficient preconditioner used by the descent solver.
//!
//! Every constant-coefficient operator here is a polynomial in `-Δ_h`, whose
//! eigenvalue on the Fourier mode `(k, l)` is
//! `λ(k, l) = (4 / h^2) (sin^2(π k / m) + sin^2(π l / m))`.
//! A solve is therefore a forward real FFT, a pointwise multiply by the
//! inverse symbol and an inverse FFT. The zero mode is always sent to zero.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::energy::ModelParams;
use crate::error::{FchError, Result};
use crate::grid::{max_abs, CellField, GridSpec};

/// Relative size of the mean beyond which a "mean-zero" input is treated as
/// a caller bug rather than roundoff drift.
pub const MEAN_ZERO_GUARD: f64 = 1e-8;

/// Immutable per-grid FFT plans and Laplacian eigenvalues.
///
/// Spectra use a half layout: `kx` in `0..=m/2` (real-to-complex along x),
/// `ky` in `0..m`, flattened as `kx * m + ky` so each `ky` column is
/// contiguous for the second transform pass.
#[derive(Clone)]
pub struct SpectralPlan {
    grid: GridSpec,
    eig_half: Vec<f64>,
    inv_eig_half: Vec<f64>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish()
    }
}

const ROW_BLOCK: usize = 8;

/// Scratch buffers for one transform at a time.
pub struct SpectralWorkspace {
    row: Vec<f64>,
    row_spec: Vec<Complex<f64>>,
    spec: Vec<Complex<f64>>,
    spec_aux: Vec<Complex<f64>>,
    r2c_scratch: Vec<Complex<f64>>,
    c2r_scratch: Vec<Complex<f64>>,
    col_scratch: Vec<Complex<f64>>,
}

impl SpectralPlan {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.m();
        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(m);
        let c2r = real_planner.plan_fft_inverse(m);
        let mut planner = FftPlanner::<f64>::new();
        let col_fwd = planner.plan_fft_forward(m);
        let col_inv = planner.plan_fft_inverse(m);

        let half = m / 2 + 1;
        let mut eig_half = vec![0.0; half * m];
        let mut inv_eig_half = vec![0.0; half * m];
        let norm = 1.0 / (m * m) as f64;
        for kx in 0..half {
            for ky in 0..m {
                let lam = laplacian_eigenvalue(grid, kx, ky);
                eig_half[kx * m + ky] = lam;
                if kx != 0 || ky != 0 {
                    inv_eig_half[kx * m + ky] = norm / lam;
                }
            }
        }
        Self {
            grid,
            eig_half,
            inv_eig_half,
            r2c,
            c2r,
            col_fwd,
            col_inv,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Eigenvalue of `-Δ_h` for mode `(k, l)`, both in `0..m`.
    pub fn eig(&self, k: usize, l: usize) -> f64 {
        let m = self.grid.m();
        assert!(k < m && l < m, "mode ({k}, {l}) out of range");
        let kx = if k > m / 2 { m - k } else { k };
        self.eig_half[kx * m + l]
    }

    pub fn workspace(&self) -> SpectralWorkspace {
        let m = self.grid.m();
        let half = m / 2 + 1;
        SpectralWorkspace {
            row: self.r2c.make_input_vec(),
            row_spec: vec![Complex::new(0.0, 0.0); ROW_BLOCK * half],
            spec: vec![Complex::new(0.0, 0.0); half * m],
            spec_aux: vec![Complex::new(0.0, 0.0); half * m],
            r2c_scratch: self.r2c.make_scratch_vec(),
            c2r_scratch: self.c2r.make_scratch_vec(),
            col_scratch: vec![
                Complex::new(0.0, 0.0);
                self.col_fwd
                    .get_inplace_scratch_len()
                    .max(self.col_inv.get_inplace_scratch_len())
            ],
        }
    }

    fn forward(&self, ws: &mut SpectralWorkspace, input: &[f64]) {
        let m = self.grid.m();
        let half = m / 2 + 1;
        // Rows are transformed a block at a time so the transpose into the
        // column-major half spectrum writes short contiguous runs.
        for j0 in (0..m).step_by(ROW_BLOCK) {
            let nb = ROW_BLOCK.min(m - j0);
            for b in 0..nb {
                let j = j0 + b;
                ws.row.copy_from_slice(&input[j * m..(j + 1) * m]);
                self.r2c
                    .process_with_scratch(
                        &mut ws.row,
                        &mut ws.row_spec[b * half..(b + 1) * half],
                        &mut ws.r2c_scratch,
                    )
                    .expect("buffer sizes fixed by plan");
            }
            for kx in 0..half {
                let dst = &mut ws.spec[kx * m + j0..kx * m + j0 + nb];
                for (b, d) in dst.iter_mut().enumerate() {
                    *d = ws.row_spec[b * half + kx];
                }
            }
        }
        self.col_fwd
            .process_with_scratch(&mut ws.spec, &mut ws.col_scratch);
    }

    /// Inverse of `forward` without the `1/m^2` factor (symbols carry it).
    fn inverse(&self, ws: &mut SpectralWorkspace, use_aux: bool, out: &mut [f64]) {
        let m = self.grid.m();
        let half = m / 2 + 1;
        let spec = if use_aux { &mut ws.spec_aux } else { &mut ws.spec };
        self.col_inv.process_with_scratch(spec, &mut ws.col_scratch);
        for j0 in (0..m).step_by(ROW_BLOCK) {
            let nb = ROW_BLOCK.min(m - j0);
            for kx in 0..half {
                let src = &spec[kx * m + j0..kx * m + j0 + nb];
                for (b, &c) in src.iter().enumerate() {
                    ws.row_spec[b * half + kx] = c;
                }
            }
            for b in 0..nb {
                let j = j0 + b;
                let rs = &mut ws.row_spec[b * half..(b + 1) * half];
                // Exactly real for Hermitian data; clear roundoff so c2r accepts it.
                rs[0].im = 0.0;
                rs[half - 1].im = 0.0;
                self.c2r
                    .process_with_scratch(rs, &mut ws.row, &mut ws.c2r_scratch)
                    .expect("buffer sizes fixed by plan");
                out[j * m..(j + 1) * m].copy_from_slice(&ws.row);
            }
        }
    }

    /// Mean of the data currently held in the forward spectrum.
    fn spectral_mean(&self, ws: &SpectralWorkspace) -> f64 {
        let m = self.grid.m();
        ws.spec[0].re / (m * m) as f64
    }

    fn check_mean(&self, ws: &SpectralWorkspace, input: &[f64]) -> Result<()> {
        self.check_mean_scaled(ws, max_abs(input))
    }

    /// [`Self::check_mean`] with `‖input‖∞` already known.
    fn check_mean_scaled(&self, ws: &SpectralWorkspace, scale: f64) -> Result<()> {
        let mean = self.spectral_mean(ws);
        let allowed = MEAN_ZERO_GUARD * scale;
        if mean.abs() > allowed {
            return Err(FchError::MeanMismatch {
                what: "input to a periodic solve is not mean-zero",
                diff: mean.abs(),
                allowed,
            });
        }
        Ok(())
    }

    /// Multiplies every mode by `symbol` (half layout, already scaled by
    /// `1/m^2`) and writes the real result into `out`.
    pub(crate) fn apply_symbol(
        &self,
        ws: &mut SpectralWorkspace,
        input: &[f64],
        symbol: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.forward(ws, input);
        self.check_mean(ws, input)?;
        for (c, &s) in ws.spec.iter_mut().zip(symbol) {
            *c *= s;
        }
        self.inverse(ws, false, out);
        Ok(())
    }

    /// Applies two symbols to the same input with one forward transform.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn apply_two_symbols(
        &self,
        ws: &mut SpectralWorkspace,
        input: &[f64],
        input_max: f64,
        first: &[f64],
        second: &[f64],
        out_first: &mut [f64],
        out_second: &mut [f64],
    ) -> Result<()> {
        self.forward(ws, input);
        self.check_mean_scaled(ws, input_max)?;
        for k in 0..ws.spec.len() {
            let c = ws.spec[k];
            ws.spec_aux[k] = c * second[k];
            ws.spec[k] = c * first[k];
        }
        self.inverse(ws, false, out_first);
        self.inverse(ws, true, out_second);
        Ok(())
    }

    /// `T_h[ζ] = (-Δ_h)^{-1} ζ`, the unique mean-zero solution.
    pub fn inv_neg_laplacian(&self, zeta: &CellField) -> Result<CellField> {
        let mut ws = self.workspace();
        let mut out = CellField::zeros(self.grid);
        self.inv_neg_laplacian_into(&mut ws, zeta, &mut out)?;
        Ok(out)
    }

    pub fn inv_neg_laplacian_into(
        &self,
        ws: &mut SpectralWorkspace,
        zeta: &CellField,
        out: &mut CellField,
    ) -> Result<()> {
        self.grid.check(zeta.grid())?;
        self.grid.check(out.grid())?;
        self.apply_symbol(ws, zeta.values(), &self.inv_eig_half, out.values_mut())
    }

    /// Discrete `H^{-1}` inner product `<ζ, T_h ξ>`.
    pub fn hm1_inner(&self, zeta: &CellField, xi: &CellField) -> Result<f64> {
        let t_xi = self.inv_neg_laplacian(xi)?;
        self.grid.check(zeta.grid())?;
        let mut ws = self.workspace();
        // Only the mean-zero part of ζ pairs with T_h ξ; the guard still applies.
        self.forward(&mut ws, zeta.values());
        self.check_mean(&ws, zeta.values())?;
        zeta.inner(&t_xi)
    }

    pub fn hm1_norm(&self, zeta: &CellField) -> Result<f64> {
        Ok(self.hm1_inner(zeta, zeta)?.max(0.0).sqrt())
    }

    /// Builds the preconditioner for a given set of model parameters.
    pub fn preconditioner(&self, params: &ModelParams) -> Result<Preconditioner> {
        Preconditioner::new(self.clone(), params)
    }
}

/// `-Δ_h` eigenvalue for mode `(k, l)`.
pub fn laplacian_eigenvalue(grid: GridSpec, k: usize, l: usize) -> f64 {
    let m = grid.m() as f64;
    let h = grid.h();
    let sx = (PI * k as f64 / m).sin();
    let sy = (PI * l as f64 / m).sin();
    4.0 / (h * h) * (sx * sx + sy * sy)
}

/// Symbol of the linearized operator
/// `L_h ψ = T_h ψ + s c0 ψ - s c1 Δ_h ψ + s ε^2 Δ_h^2 ψ`
/// with `c0 = 4/ε^2 + η + 4A + 6` and `c1 = 6 + 4A`.
pub fn preconditioner_symbol(params: &ModelParams, lambda: f64) -> f64 {
    let (c0, c1) = params.preconditioner_coefficients();
    let s = params.dt();
    let e2 = params.eps() * params.eps();
    1.0 / lambda + s * c0 + s * c1 * lambda + s * e2 * lambda * lambda
}

/// FFT solve of `L_h d = r` on mean-zero fields.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    plan: SpectralPlan,
    params: ModelParams,
    inv_sigma: Vec<f64>,
    inv_sigma_lambda: Vec<f64>,
}

impl Preconditioner {
    pub fn new(plan: SpectralPlan, params: &ModelParams) -> Result<Self> {
        plan.grid.check(params.grid())?;
        let m = plan.grid.m();
        let half = m / 2 + 1;
        let norm = 1.0 / (m * m) as f64;
        let mut inv_sigma = vec![0.0; half * m];
        let mut inv_sigma_lambda = vec![0.0; half * m];
        for kx in 0..half {
            for ky in 0..m {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let lam = plan.eig_half[kx * m + ky];
                let sigma = preconditioner_symbol(params, lam);
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(FchError::IndefinitePreconditioner(format!(
                        "sigma({kx},{ky}) = {sigma:e} for eps = {}, eta = {}, A = {}, s = {}",
                        params.eps(),
                        params.eta(),
                        params.a(),
                        params.dt()
                    )));
                }
                inv_sigma[kx * m + ky] = norm / sigma;
                inv_sigma_lambda[kx * m + ky] = norm / (sigma * lam);
            }
        }
        Ok(Self {
            plan,
            params: params.clone(),
            inv_sigma,
            inv_sigma_lambda,
        })
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Solves `L_h d = r`.
    pub fn solve(&self, r: &CellField) -> Result<CellField> {
        let mut ws = self.plan.workspace();
        let mut out = CellField::zeros(self.plan.grid);
        self.plan.grid.check(r.grid())?;
        self.plan
            .apply_symbol(&mut ws, r.values(), &self.inv_sigma, out.values_mut())?;
        Ok(out)
    }

    /// Solves `L_h d = r` and also returns `T_h d`, sharing the forward
    /// transform.
    pub fn solve_with_inverse_laplacian(
        &self,
        ws: &mut SpectralWorkspace,
        r: &CellField,
        d: &mut CellField,
        t_d: &mut CellField,
    ) -> Result<()> {
        self.plan.grid.check(r.grid())?;
        self.plan.grid.check(d.grid())?;
        self.plan.grid.check(t_d.grid())?;
        self.solve_scaled(ws, r.values(), r.max_abs(), d.values_mut(), t_d.values_mut())
    }

    /// Slice form of [`Self::solve_with_inverse_laplacian`] for a residual
    /// whose `‖r‖∞` is already known.
    pub(crate) fn solve_scaled(
        &self,
        ws: &mut SpectralWorkspace,
        r: &[f64],
        r_max: f64,
        d: &mut [f64],
        t_d: &mut [f64],
    ) -> Result<()> {
        self.plan.apply_two_symbols(
            ws,
            r,
            r_max,
            &self.inv_sigma,
            &self.inv_sigma_lambda,
            d,
            t_d,
        )
    }
}

/// Free-function form of [`Preconditioner::solve`] that builds the symbol on
/// the fly.
pub fn precond_solve(plan: &SpectralPlan, r: &CellField, params: &ModelParams) -> Result<CellField> {
    plan.preconditioner(params)?.solve(r)
}
