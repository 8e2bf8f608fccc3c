//! Transfers between cell-centered grids whose sizes differ by a factor 2.

use crate::error::{FchError, Result};
use crate::grid::{CellField, GridSpec};

fn fine_grid_for(coarse: &GridSpec) -> Result<GridSpec> {
    GridSpec::new(2 * coarse.m(), coarse.length())
}

fn check_ratio(coarse: &GridSpec, fine: &GridSpec) -> Result<()> {
    let same_length = (fine.length() - coarse.length()).abs() <= 1e-12 * coarse.length();
    if fine.m() != 2 * coarse.m() || !same_length {
        return Err(FchError::InvalidGrid(format!(
            "expected a factor-2 refinement of {} cells on L = {}, got {} cells on L = {}",
            coarse.m(),
            coarse.length(),
            fine.m(),
            fine.length()
        )));
    }
    Ok(())
}

/// Periodic bilinear interpolation from coarse to fine cell centers.
///
/// Fine center `2i + a` sits a quarter of a coarse cell from coarse center
/// `i`, towards `i - 1` when `a = 0` and towards `i + 1` when `a = 1`, so
/// each fine value is `9/16` of the nearest coarse value, `3/16` of each
/// of the two edge neighbors and `1/16` of the diagonal one.
pub fn prolong_bilinear(coarse: &CellField) -> Result<CellField> {
    let fine = fine_grid_for(coarse.grid())?;
    prolong_bilinear_to(coarse, fine)
}

/// [`prolong_bilinear`] onto an explicitly given fine grid, which must have
/// twice as many cells on the same domain.
pub fn prolong_bilinear_to(coarse: &CellField, fine: GridSpec) -> Result<CellField> {
    let cg = *coarse.grid();
    check_ratio(&cg, &fine)?;
    let side = |a: usize| if a == 0 { -1 } else { 1 };
    Ok(CellField::from_index_fn(fine, |fi, fj| {
        let (i, a) = ((fi / 2) as isize, fi % 2);
        let (j, b) = ((fj / 2) as isize, fj % 2);
        let (ni, nj) = (i + side(a), j + side(b));
        (9.0 * coarse.at(i, j) + 3.0 * (coarse.at(ni, j) + coarse.at(i, nj)) + coarse.at(ni, nj))
            / 16.0
    }))
}

/// Average of each 2x2 block of fine cells onto the coarse cell they tile.
pub fn restrict_average(fine: &CellField) -> Result<CellField> {
    let fg = *fine.grid();
    if fg.m() % 4 != 0 {
        return Err(FchError::InvalidGrid(format!(
            "cannot halve {} cells per side into an even grid",
            fg.m()
        )));
    }
    let coarse = GridSpec::new(fg.m() / 2, fg.length())?;
    Ok(CellField::from_index_fn(coarse, |i, j| {
        let (fi, fj) = (2 * i, 2 * j);
        0.25 * (fine[(fi, fj)] + fine[(fi + 1, fj)] + fine[(fi, fj + 1)] + fine[(fi + 1, fj + 1)])
    }))
}
