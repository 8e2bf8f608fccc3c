//! Scalar and four-lane arithmetic shared by the hot stencil kernels.
//!
//! Reductions do not auto-vectorize, so kernels that sum over the grid are
//! written once, generic over [`Lane`], and run four cells at a time with
//! `f64x4` plus a scalar tail.

use std::ops::{Add, Mul, Sub};

use wide::f64x4;

pub(crate) trait Lane: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn splat(x: f64) -> Self;
    fn load(x: &[f64], i: usize) -> Self;
    fn total(self) -> f64;
}

impl Lane for f64 {
    #[inline(always)]
    fn splat(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn load(x: &[f64], i: usize) -> Self {
        x[i]
    }
    #[inline(always)]
    fn total(self) -> f64 {
        self
    }
}

impl Lane for f64x4 {
    #[inline(always)]
    fn splat(x: f64) -> Self {
        f64x4::splat(x)
    }
    #[inline(always)]
    fn load(x: &[f64], i: usize) -> Self {
        let a: [f64; 4] = x[i..i + 4].try_into().expect("four lanes");
        f64x4::from(a)
    }
    #[inline(always)]
    fn total(self) -> f64 {
        let a = self.to_array();
        (a[0] + a[1]) + (a[2] + a[3])
    }
}
