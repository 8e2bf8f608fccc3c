//! Brute-force reference implementations written straight from the stencil
//! definitions with explicit modular indexing, plus random-field helpers.
//! Nothing here calls the library's kernels.

#![allow(dead_code)]

use fch_core::grid::{CellField, GridSpec, VertexField};
use fch_core::ModelParams;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Arr = Vec<Vec<f64>>;

pub fn grid(m: usize, length: f64) -> GridSpec {
    GridSpec::new(m, length).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_cell(g: GridSpec, amp: f64, rng: &mut StdRng) -> CellField {
    CellField::from_index_fn(g, |_, _| amp * rng.random_range(-1.0..1.0))
}

pub fn random_vertex(g: GridSpec, amp: f64, rng: &mut StdRng) -> VertexField {
    VertexField::from_index_fn(g, |_, _| amp * rng.random_range(-1.0..1.0))
}

/// Random field with exactly zero grid mean (up to roundoff).
pub fn random_mean_zero(g: GridSpec, amp: f64, rng: &mut StdRng) -> CellField {
    let mut f = random_cell(g, amp, rng);
    f.project_mean_zero();
    f
}

pub fn to_arr<L: fch_core::grid::Location>(f: &fch_core::grid::Field<L>) -> Arr {
    let m = f.grid().m();
    (0..m).map(|i| (0..m).map(|j| f[(i, j)]).collect()).collect()
}

pub fn from_arr(g: GridSpec, a: &Arr) -> CellField {
    CellField::from_index_fn(g, |i, j| a[i][j])
}

fn at(a: &Arr, i: isize, j: isize) -> f64 {
    let m = a.len() as isize;
    a[i.rem_euclid(m) as usize][j.rem_euclid(m) as usize]
}

fn build(m: usize, f: impl Fn(isize, isize) -> f64) -> Arr {
    (0..m)
        .map(|i| (0..m).map(|j| f(i as isize, j as isize)).collect())
        .collect()
}

/// Vertex `(i, j)` sits at the upper-right corner of cell `(i, j)`.
pub fn dx(a: &Arr, h: f64) -> Arr {
    build(a.len(), |i, j| {
        (at(a, i + 1, j + 1) - at(a, i, j + 1) + at(a, i + 1, j) - at(a, i, j)) / (2.0 * h)
    })
}

pub fn dy(a: &Arr, h: f64) -> Arr {
    build(a.len(), |i, j| {
        (at(a, i + 1, j + 1) - at(a, i + 1, j) + at(a, i, j + 1) - at(a, i, j)) / (2.0 * h)
    })
}

/// Vertex-to-cell divergence: cell `(i, j)` reads vertices `i-1..=i`, `j-1..=j`.
pub fn div(p: &Arr, q: &Arr, h: f64) -> Arr {
    build(p.len(), |i, j| {
        let px = at(p, i, j) - at(p, i - 1, j) + at(p, i, j - 1) - at(p, i - 1, j - 1);
        let qy = at(q, i, j) - at(q, i, j - 1) + at(q, i - 1, j) - at(q, i - 1, j - 1);
        (px + qy) / (2.0 * h)
    })
}

pub fn lap5(a: &Arr, h: f64) -> Arr {
    build(a.len(), |i, j| {
        (at(a, i + 1, j) + at(a, i - 1, j) + at(a, i, j + 1) + at(a, i, j - 1) - 4.0 * at(a, i, j))
            / (h * h)
    })
}

pub fn lap_skew(a: &Arr, h: f64) -> Arr {
    build(a.len(), |i, j| {
        (at(a, i + 1, j + 1) + at(a, i - 1, j + 1) + at(a, i + 1, j - 1) + at(a, i - 1, j - 1)
            - 4.0 * at(a, i, j))
            / (2.0 * h * h)
    })
}

pub fn v2c(a: &Arr) -> Arr {
    build(a.len(), |i, j| {
        0.25 * (at(a, i, j) + at(a, i - 1, j) + at(a, i, j - 1) + at(a, i - 1, j - 1))
    })
}

pub fn c2v(a: &Arr) -> Arr {
    build(a.len(), |i, j| {
        0.25 * (at(a, i, j) + at(a, i + 1, j) + at(a, i, j + 1) + at(a, i + 1, j + 1))
    })
}

pub fn zip(a: &Arr, b: &Arr, f: impl Fn(f64, f64) -> f64) -> Arr {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| f(x, y)).collect())
        .collect()
}

pub fn map(a: &Arr, f: impl Fn(f64) -> f64) -> Arr {
    a.iter().map(|r| r.iter().map(|&x| f(x)).collect()).collect()
}

pub fn grad_sq(a: &Arr, h: f64) -> Arr {
    zip(&dx(a, h), &dy(a, h), |x, y| x * x + y * y)
}

/// `div(w ∇φ)` with a vertex weight.
pub fn weighted(w: &Arr, a: &Arr, h: f64) -> Arr {
    let p = zip(w, &dx(a, h), |w, g| w * g);
    let q = zip(w, &dy(a, h), |w, g| w * g);
    div(&p, &q, h)
}

pub fn plap4(a: &Arr, h: f64) -> Arr {
    weighted(&grad_sq(a, h), a, h)
}

/// `h² Σ a b`, accumulated in plain order.
pub fn inner(a: &Arr, b: &Arr, h: f64) -> f64 {
    let mut s = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            s += x * y;
        }
    }
    h * h * s
}

pub fn sum_pow(a: &Arr, p: i32, h: f64) -> f64 {
    h * h * a.iter().flatten().map(|x| x.powi(p)).sum::<f64>()
}

/// `-Δ_h⁻¹` by a dense real Fourier sum over all modes (O(m⁴)).
pub fn inv_neg_lap(a: &Arr, h: f64) -> Arr {
    use std::f64::consts::PI;
    let m = a.len();
    let mf = m as f64;
    let mut out = vec![vec![0.0; m]; m];
    for k in 0..m {
        for l in 0..m {
            if k == 0 && l == 0 {
                continue;
            }
            let lam = 4.0 / (h * h)
                * ((PI * k as f64 / mf).sin().powi(2) + (PI * l as f64 / mf).sin().powi(2));
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..m {
                for j in 0..m {
                    let th = 2.0 * PI * (k * i + l * j) as f64 / mf;
                    re += a[i][j] * th.cos();
                    im -= a[i][j] * th.sin();
                }
            }
            for i in 0..m {
                for j in 0..m {
                    let th = 2.0 * PI * (k * i + l * j) as f64 / mf;
                    out[i][j] += (re * th.cos() - im * th.sin()) / (lam * mf * mf);
                }
            }
        }
    }
    out
}

pub struct Naive {
    pub eps: f64,
    pub eta: f64,
    pub a: f64,
    pub s: f64,
    pub h: f64,
}

impl Naive {
    pub fn from(p: &ModelParams) -> Self {
        Self {
            eps: p.eps(),
            eta: p.eta(),
            a: p.a(),
            s: p.dt(),
            h: p.grid().h(),
        }
    }

    fn ie2(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    pub fn h_energy(&self, a: &Arr) -> f64 {
        let h = self.h;
        let w = grad_sq(a, h);
        let cross = inner(&map(a, |x| x * x), &v2c(&w), h);
        self.a * sum_pow(a, 4, h) + self.a * sum_pow(&w, 2, h) + 3.0 * cross
    }

    pub fn convex(&self, a: &Arr) -> f64 {
        let h = self.h;
        let l = lap5(a, h);
        0.5 * self.ie2() * sum_pow(a, 6, h)
            + 0.5 * (self.ie2() + self.eta) * sum_pow(a, 2, h)
            + 0.5 * self.eps * self.eps * sum_pow(&l, 2, h)
            + self.h_energy(a)
    }

    pub fn concave(&self, a: &Arr) -> f64 {
        let h = self.h;
        let w = grad_sq(a, h);
        (self.ie2() + 0.25 * self.eta) * sum_pow(a, 4, h)
            + (1.0 + 0.5 * self.eta * self.eps * self.eps) * w.iter().flatten().sum::<f64>() * h * h
            + self.a * sum_pow(a, 4, h)
            + self.a * sum_pow(&w, 2, h)
    }

    pub fn delta_h(&self, a: &Arr) -> Arr {
        let h = self.h;
        let w = grad_sq(a, h);
        let pl = plap4(a, h);
        let cross = weighted(&c2v(&map(a, |x| x * x)), a, h);
        let aw = v2c(&w);
        build(a.len(), |i, j| {
            let (i, j) = (i as usize, j as usize);
            let v = a[i][j];
            4.0 * self.a * v.powi(3) - 4.0 * self.a * pl[i][j] + 6.0 * v * aw[i][j]
                - 6.0 * cross[i][j]
        })
    }

    pub fn f(&self, a: &Arr) -> Arr {
        let h = self.h;
        let sk = lap_skew(a, h);
        let pl = plap4(a, h);
        build(a.len(), |i, j| {
            let (i, j) = (i as usize, j as usize);
            -(4.0 * self.ie2() + self.eta) * a[i][j].powi(3)
                + (2.0 + self.eta * self.eps * self.eps) * sk[i][j]
                - 4.0 * self.a * a[i][j].powi(3)
                + 4.0 * self.a * pl[i][j]
        })
    }

    /// `N_h[φ]`, term by term.
    pub fn n(&self, a: &Arr, g: &Arr) -> Arr {
        let h = self.h;
        let s = self.s;
        let mut diff = zip(a, g, |x, y| x - y);
        let m = a.len();
        let mean = diff.iter().flatten().sum::<f64>() / (m * m) as f64;
        diff = map(&diff, |x| x - mean);
        let t = inv_neg_lap(&diff, h);
        let w = grad_sq(a, h);
        let aw = v2c(&w);
        let cross = weighted(&c2v(&map(a, |x| x * x)), a, h);
        let pl = plap4(a, h);
        let bih = lap5(&lap5(a, h), h);
        build(m, |i, j| {
            let (i, j) = (i as usize, j as usize);
            let v = a[i][j];
            t[i][j]
                + 3.0 * s * self.ie2() * v.powi(5)
                + 4.0 * s * self.a * v.powi(3)
                + s * (self.ie2() + self.eta) * v
                + 6.0 * s * v * aw[i][j]
                - 6.0 * s * cross[i][j]
                - 4.0 * s * self.a * pl[i][j]
                + s * self.eps * self.eps * bih[i][j]
        })
    }
}

/// Largest entrywise difference, relative to the larger of the two maxima.
pub fn rel_diff(a: &Arr, b: &Arr) -> f64 {
    let scale = a
        .iter()
        .flatten()
        .chain(b.iter().flatten())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
