//! Periodic cell-, vertex- and edge-centered grid functions on a square
//! domain `[0, L]^2`, together with the staggered difference, average and
//! divergence operators that act on them.
//!
//! Storage is row-major with `i` (the x index) fastest: value `(i, j)` lives
//! at `j * m + i`. Cell `(i, j)` has its center at `((i + 1/2) h, (j + 1/2) h)`,
//! vertex `(i, j)` sits at `((i + 1) h, (j + 1) h)` (the upper-right corner of
//! cell `(i, j)`), the east-west edge `(i, j)` at `((i + 1) h, (j + 1/2) h)`
//! and the north-south edge `(i, j)` at `((i + 1/2) h, (j + 1) h)`.
//! All index arithmetic is modulo `m`.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Index, IndexMut};

use crate::error::{FchError, Result};

/// Uniform periodic grid: `m` cells per side on a square of side `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    m: usize,
    length: f64,
    h: f64,
}

impl GridSpec {
    /// `m` must be even and at least 4. The stored length is recomputed as
    /// `h * m`, so the two always agree exactly.
    pub fn new(m: usize, length: f64) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(FchError::InvalidGrid(format!(
                "m = {m}: need an even number of cells, at least 4"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(FchError::InvalidGrid(format!("domain length {length}")));
        }
        let h = length / m as f64;
        Ok(Self {
            m,
            length: h * m as f64,
            h,
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m * self.m
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.m && j < self.m);
        j * self.m + i
    }

    /// Cell-center coordinate for index `i` (0-based).
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    /// Same grid size and spacing.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.m == other.m && self.h == other.h
    }

    pub(crate) fn check(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(FchError::GridMismatch {
                left: self.m,
                right: other.m,
            })
        }
    }
}

/// Marker trait for the staggered locations a grid function can live on.
pub trait Location: Copy + Clone + fmt::Debug + PartialEq + 'static {
    const NAME: &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEw;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeNs;

impl Location for Cell {
    const NAME: &'static str = "cell";
}
impl Location for Vertex {
    const NAME: &'static str = "vertex";
}
impl Location for EdgeEw {
    const NAME: &'static str = "east-west edge";
}
impl Location for EdgeNs {
    const NAME: &'static str = "north-south edge";
}

/// A periodic grid function collocated at location `L`.
#[derive(Clone, PartialEq)]
pub struct Field<L: Location> {
    grid: GridSpec,
    values: Vec<f64>,
    _loc: PhantomData<L>,
}

pub type CellField = Field<Cell>;
pub type VertexField = Field<Vertex>;
pub type EdgeFieldEw = Field<EdgeEw>;
pub type EdgeFieldNs = Field<EdgeNs>;

impl<L: Location> fmt::Debug for Field<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("location", &L::NAME)
            .field("m", &self.grid.m)
            .field("h", &self.grid.h)
            .finish()
    }
}

impl<L: Location> Field<L> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            _loc: PhantomData,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FchError::InvalidGrid(format!(
                "{} values supplied for a {}x{} {} field",
                values.len(),
                grid.m,
                grid.m,
                L::NAME
            )));
        }
        Ok(Self {
            grid,
            values,
            _loc: PhantomData,
        })
    }

    /// Builds a field from its integer indices.
    pub fn from_index_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let m = grid.m;
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..m {
            for i in 0..m {
                values.push(f(i, j));
            }
        }
        Self {
            grid,
            values,
            _loc: PhantomData,
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Periodic access with signed indices.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let m = self.grid.m as isize;
        let ii = i.rem_euclid(m) as usize;
        let jj = j.rem_euclid(m) as usize;
        self.values[self.grid.idx(ii, jj)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn fill(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v = c);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            _loc: PhantomData,
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            _loc: PhantomData,
        })
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.grid.check(&other.grid)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    /// Plain `h^2`-weighted sum; for a vertex or edge field this is the
    /// location's own inner product with the constant 1.
    pub fn integral(&self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        h2 * pairwise_sum(self.values.len(), |k| self.values[k])
    }

    /// `|Omega|`-normalized mean, i.e. `sum / m^2`.
    pub fn mean(&self) -> f64 {
        pairwise_sum(self.values.len(), |k| self.values[k]) / self.values.len() as f64
    }

    /// Subtracts the mean so the result lies in the mean-zero subspace.
    pub fn project_mean_zero(&mut self) {
        let mu = self.mean();
        self.add_constant(-mu);
    }

    /// Grid inner product `h^2 * sum(a * b)`. For vertex and edge fields this
    /// coincides with the averaged inner products built on the cell one, since
    /// the averages only reindex a periodic sum.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        let (a, b) = (&self.values, &other.values);
        h2 * pairwise_sum(a.len(), |k| a[k] * b[k])
    }

    pub fn norm(&self, p: Norm) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        let v = &self.values;
        let n = v.len();
        match p {
            Norm::L1 => h2 * pairwise_sum(n, |k| v[k].abs()),
            Norm::L2 => (h2 * pairwise_sum(n, |k| v[k] * v[k])).sqrt(),
            Norm::L4 => (h2 * pairwise_sum(n, |k| (v[k] * v[k]).powi(2))).powf(0.25),
            Norm::L6 => (h2 * pairwise_sum(n, |k| (v[k] * v[k]).powi(3))).powf(1.0 / 6.0),
            Norm::Inf => self.max_abs(),
        }
    }

    /// `||v||_p^p` for finite `p` (no root taken); `||v||_inf` for `Inf`.
    pub fn norm_pow(&self, p: Norm) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        let v = &self.values;
        let n = v.len();
        match p {
            Norm::L1 => h2 * pairwise_sum(n, |k| v[k].abs()),
            Norm::L2 => h2 * pairwise_sum(n, |k| v[k] * v[k]),
            Norm::L4 => h2 * pairwise_sum(n, |k| (v[k] * v[k]).powi(2)),
            Norm::L6 => h2 * pairwise_sum(n, |k| (v[k] * v[k]).powi(3)),
            Norm::Inf => self.max_abs(),
        }
    }
}

impl<L: Location> Index<(usize, usize)> for Field<L> {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[self.grid.idx(i, j)]
    }
}

impl<L: Location> IndexMut<(usize, usize)> for Field<L> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        let k = self.grid.idx(i, j);
        &mut self.values[k]
    }
}

impl CellField {
    /// Samples `f(x, y)` at the cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_index_fn(grid, |i, j| f(grid.center(i), grid.center(j)))
    }
}

/// Supported discrete `l^p` norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    L4,
    L6,
    Inf,
}

impl TryFrom<f64> for Norm {
    type Error = FchError;

    fn try_from(p: f64) -> Result<Self> {
        match p {
            p if p == 1.0 => Ok(Norm::L1),
            p if p == 2.0 => Ok(Norm::L2),
            p if p == 4.0 => Ok(Norm::L4),
            p if p == 6.0 => Ok(Norm::L6),
            p if p == f64::INFINITY => Ok(Norm::Inf),
            p => Err(FchError::UnsupportedNorm(p)),
        }
    }
}

/// Largest absolute value; NaN entries propagate.
pub fn max_abs(v: &[f64]) -> f64 {
    let mut acc = [0.0_f64; 4];
    let mut chunks = v.chunks_exact(4);
    for c in &mut chunks {
        for l in 0..4 {
            let a = c[l].abs();
            acc[l] = if a > acc[l] || a.is_nan() { a } else { acc[l] };
        }
    }
    let mut best = 0.0_f64;
    for a in acc.into_iter().chain(chunks.remainder().iter().map(|x| x.abs())) {
        if a > best || a.is_nan() {
            best = a;
        }
    }
    best
}

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation of `term(0) + ... + term(n - 1)`.
pub fn pairwise_sum(n: usize, term: impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut s = 0.0;
            for k in lo..hi {
                s += term(k);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, term) + go(mid, hi, term)
        }
    }
    go(0, n, &term)
}

#[inline(always)]
pub(crate) fn up(i: usize, m: usize) -> usize {
    if i + 1 == m {
        0
    } else {
        i + 1
    }
}

#[inline(always)]
pub(crate) fn down(i: usize, m: usize) -> usize {
    if i == 0 {
        m - 1
    } else {
        i - 1
    }
}

// Slice kernels. All take the side length `m` and write every entry of `out`.
// Inner loops run over the interior of a row with the periodic wrap peeled
// off, so they index without modular arithmetic.

pub(crate) fn grad_v_kernel(phi: &[f64], m: usize, h: f64, gx: &mut [f64], gy: &mut [f64]) {
    let c = 0.5 / h;
    for j in 0..m {
        let r0 = j * m;
        let r1 = up(j, m) * m;
        let a = &phi[r0..r0 + m];
        let b = &phi[r1..r1 + m];
        let gxr = &mut gx[r0..r0 + m];
        let gyr = &mut gy[r0..r0 + m];
        for i in 0..m - 1 {
            let (a0, a1, b0, b1) = (a[i], a[i + 1], b[i], b[i + 1]);
            gxr[i] = c * (b1 - b0 + a1 - a0);
            gyr[i] = c * (b1 - a1 + b0 - a0);
        }
        let (a0, a1, b0, b1) = (a[m - 1], a[0], b[m - 1], b[0]);
        gxr[m - 1] = c * (b1 - b0 + a1 - a0);
        gyr[m - 1] = c * (b1 - a1 + b0 - a0);
    }
}

pub(crate) fn div_v_kernel(p: &[f64], q: &[f64], m: usize, h: f64, out: &mut [f64]) {
    let c = 0.5 / h;
    for j in 0..m {
        let r0 = j * m;
        let rm = down(j, m) * m;
        let (p0, pm) = (&p[r0..r0 + m], &p[rm..rm + m]);
        let (q0, qm) = (&q[r0..r0 + m], &q[rm..rm + m]);
        let o = &mut out[r0..r0 + m];
        let f = |i: usize, im: usize| {
            let dx = p0[i] - p0[im] + pm[i] - pm[im];
            let dy = q0[i] - qm[i] + q0[im] - qm[im];
            c * (dx + dy)
        };
        o[0] = f(0, m - 1);
        for i in 1..m {
            o[i] = f(i, i - 1);
        }
    }
}

pub(crate) fn laplacian_kernel(phi: &[f64], m: usize, h: f64, out: &mut [f64]) {
    let c = 1.0 / (h * h);
    for j in 0..m {
        let r0 = j * m;
        let rp = up(j, m) * m;
        let rm = down(j, m) * m;
        let (a, n, s) = (&phi[r0..r0 + m], &phi[rp..rp + m], &phi[rm..rm + m]);
        let o = &mut out[r0..r0 + m];
        o[0] = c * (a[1] + a[m - 1] + n[0] + s[0] - 4.0 * a[0]);
        for i in 1..m - 1 {
            o[i] = c * (a[i + 1] + a[i - 1] + n[i] + s[i] - 4.0 * a[i]);
        }
        o[m - 1] = c * (a[0] + a[m - 2] + n[m - 1] + s[m - 1] - 4.0 * a[m - 1]);
    }
}

pub(crate) fn laplacian_skew_kernel(phi: &[f64], m: usize, h: f64, out: &mut [f64]) {
    let c = 0.5 / (h * h);
    for j in 0..m {
        let r0 = j * m;
        let rp = up(j, m) * m;
        let rm = down(j, m) * m;
        let (a, n, s) = (&phi[r0..r0 + m], &phi[rp..rp + m], &phi[rm..rm + m]);
        let o = &mut out[r0..r0 + m];
        let f = |i: usize, ip: usize, im: usize| c * (n[ip] + n[im] + s[ip] + s[im] - 4.0 * a[i]);
        o[0] = f(0, 1, m - 1);
        for i in 1..m - 1 {
            o[i] = f(i, i + 1, i - 1);
        }
        o[m - 1] = f(m - 1, 0, m - 2);
    }
}

pub(crate) fn avg_v2c_kernel(nu: &[f64], m: usize, out: &mut [f64]) {
    for j in 0..m {
        let r0 = j * m;
        let rm = down(j, m) * m;
        let (a, s) = (&nu[r0..r0 + m], &nu[rm..rm + m]);
        let o = &mut out[r0..r0 + m];
        o[0] = 0.25 * (s[m - 1] + a[m - 1] + a[0] + s[0]);
        for i in 1..m {
            o[i] = 0.25 * (s[i - 1] + a[i - 1] + a[i] + s[i]);
        }
    }
}

pub(crate) fn avg_c2v_kernel(nu: &[f64], m: usize, out: &mut [f64]) {
    for j in 0..m {
        let r0 = j * m;
        let r1 = up(j, m) * m;
        let (a, b) = (&nu[r0..r0 + m], &nu[r1..r1 + m]);
        let o = &mut out[r0..r0 + m];
        for i in 0..m - 1 {
            o[i] = 0.25 * (a[i] + a[i + 1] + b[i] + b[i + 1]);
        }
        o[m - 1] = 0.25 * (a[m - 1] + a[0] + b[m - 1] + b[0]);
    }
}

/// `d_x(w * D_x phi) + d_y(w * D_y phi)` for a vertex weight `w`; `flux_x`
/// and `flux_y` are scratch of length `m^2`.
pub(crate) fn weighted_div_grad_kernel(
    w: &[f64],
    phi: &[f64],
    m: usize,
    h: f64,
    flux_x: &mut [f64],
    flux_y: &mut [f64],
    out: &mut [f64],
) {
    grad_v_kernel(phi, m, h, flux_x, flux_y);
    for k in 0..w.len() {
        flux_x[k] *= w[k];
        flux_y[k] *= w[k];
    }
    div_v_kernel(flux_x, flux_y, m, h, out);
}

/// Discrete vertex gradient `(D_x phi, D_y phi)`.
pub fn grad_v(phi: &CellField) -> (VertexField, VertexField) {
    let g = *phi.grid();
    let mut gx = VertexField::zeros(g);
    let mut gy = VertexField::zeros(g);
    grad_v_kernel(phi.values(), g.m, g.h, &mut gx.values, &mut gy.values);
    (gx, gy)
}

pub fn grad_v_into(phi: &CellField, gx: &mut VertexField, gy: &mut VertexField) -> Result<()> {
    phi.grid.check(&gx.grid)?;
    phi.grid.check(&gy.grid)?;
    let g = phi.grid;
    grad_v_kernel(&phi.values, g.m, g.h, &mut gx.values, &mut gy.values);
    Ok(())
}

/// Vertex-to-center divergence `d_x p + d_y q`.
pub fn div_v(p: &VertexField, q: &VertexField) -> Result<CellField> {
    p.grid.check(&q.grid)?;
    let g = p.grid;
    let mut out = CellField::zeros(g);
    div_v_kernel(&p.values, &q.values, g.m, g.h, &mut out.values);
    Ok(out)
}

/// Standard five-point Laplacian.
pub fn laplacian(phi: &CellField) -> CellField {
    let g = phi.grid;
    let mut out = CellField::zeros(g);
    laplacian_kernel(&phi.values, g.m, g.h, &mut out.values);
    out
}

pub fn laplacian_into(phi: &CellField, out: &mut CellField) -> Result<()> {
    phi.grid.check(&out.grid)?;
    let g = phi.grid;
    laplacian_kernel(&phi.values, g.m, g.h, &mut out.values);
    Ok(())
}

/// Diagonal-stencil ("skew") Laplacian, equal to `div_v(grad_v(phi))`.
pub fn laplacian_skew(phi: &CellField) -> CellField {
    let g = phi.grid;
    let mut out = CellField::zeros(g);
    laplacian_skew_kernel(&phi.values, g.m, g.h, &mut out.values);
    out
}

/// Vertex-to-center four-point average.
pub fn avg_v2c(nu: &VertexField) -> CellField {
    let g = nu.grid;
    let mut out = CellField::zeros(g);
    avg_v2c_kernel(&nu.values, g.m, &mut out.values);
    out
}

/// Center-to-vertex four-point average.
pub fn avg_c2v(nu: &CellField) -> VertexField {
    let g = nu.grid;
    let mut out = VertexField::zeros(g);
    avg_c2v_kernel(&nu.values, g.m, &mut out.values);
    out
}

/// `|grad_v phi|^2` at the vertices.
pub fn grad_sq(phi: &CellField) -> VertexField {
    let (mut gx, gy) = grad_v(phi);
    for (a, &b) in gx.values.iter_mut().zip(&gy.values) {
        *a = *a * *a + b * b;
    }
    gx
}

/// `div_v(w * grad_v phi)` for a vertex weight `w`.
pub fn weighted_div_grad(w: &VertexField, phi: &CellField) -> Result<CellField> {
    w.grid.check(&phi.grid)?;
    let g = phi.grid;
    let n = g.len();
    let (mut fx, mut fy) = (vec![0.0; n], vec![0.0; n]);
    let mut out = CellField::zeros(g);
    weighted_div_grad_kernel(&w.values, &phi.values, g.m, g.h, &mut fx, &mut fy, &mut out.values);
    Ok(out)
}

/// Discrete 4-Laplacian `div_v(|grad_v phi|^2 grad_v phi)`.
pub fn p_laplacian_4(phi: &CellField) -> CellField {
    let w = grad_sq(phi);
    weighted_div_grad(&w, phi).expect("same grid")
}

/// Variable-mobility operator `div_v(a(M) grad_v phi)`.
pub fn mobility_div(mobility: &CellField, phi: &CellField) -> Result<CellField> {
    mobility.grid.check(&phi.grid)?;
    let m = mobility.grid.m;
    for (k, &v) in mobility.values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(FchError::NonPositiveMobility {
                i: k % m,
                j: k / m,
                value: v,
            });
        }
    }
    weighted_div_grad(&avg_c2v(mobility), phi)
}

/// `||grad_v phi||_2^2` (vertex gradient).
pub fn grad_norm_sq(phi: &CellField) -> f64 {
    grad_sq(phi).integral()
}

/// `||grad_v phi||_4^4`.
pub fn grad_norm_4(phi: &CellField) -> f64 {
    let w = grad_sq(phi);
    let h2 = w.grid.h * w.grid.h;
    h2 * pairwise_sum(w.values.len(), |k| w.values[k] * w.values[k])
}

/// Edge-centered differences and the standard gradient norm they induce.
pub mod edge {
    use super::*;

    /// `D_x phi` on east-west edges.
    pub fn diff_x(phi: &CellField) -> EdgeFieldEw {
        let g = phi.grid;
        let inv_h = 1.0 / g.h;
        EdgeFieldEw::from_index_fn(g, |i, j| inv_h * (phi[(up(i, g.m), j)] - phi[(i, j)]))
    }

    /// `D_y phi` on north-south edges.
    pub fn diff_y(phi: &CellField) -> EdgeFieldNs {
        let g = phi.grid;
        let inv_h = 1.0 / g.h;
        EdgeFieldNs::from_index_fn(g, |i, j| inv_h * (phi[(i, up(j, g.m))] - phi[(i, j)]))
    }

    /// `d_x` back to cell centers.
    pub fn div_x(nu: &EdgeFieldEw) -> CellField {
        let g = nu.grid;
        let inv_h = 1.0 / g.h;
        CellField::from_index_fn(g, |i, j| inv_h * (nu[(i, j)] - nu[(down(i, g.m), j)]))
    }

    pub fn div_y(nu: &EdgeFieldNs) -> CellField {
        let g = nu.grid;
        let inv_h = 1.0 / g.h;
        CellField::from_index_fn(g, |i, j| inv_h * (nu[(i, j)] - nu[(i, down(j, g.m))]))
    }

    /// Standard gradient norm `[D_x v, D_x v]_ew + [D_y v, D_y v]_ns`.
    pub fn grad_norm_sq(phi: &CellField) -> f64 {
        let dx = diff_x(phi);
        let dy = diff_y(phi);
        dx.inner_unchecked(&dx) + dy.inner_unchecked(&dy)
    }
}
