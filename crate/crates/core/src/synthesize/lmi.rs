use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Row/column offsets of the four block rows for state dimension `n` and
/// measurement-update channel dimension `q`.
fn offsets(n: usize, q: usize) -> [usize; 5] {
    [0, n, 2 * n, 3 * n + q, 4 * n + q]
}

pub fn block_size(n: usize, q: usize) -> usize {
    4 * n + q
}

/// Assembles the LMI block of vertex `vertex`:
///
/// ```text
/// [ S   Abar^T (S - C2^T Y^T)   0             I   ]
/// [ *   S                       [S - Y C2, -Y] 0   ]
/// [ *   *                       eta I          0   ]
/// [ *   *                       *              eta I ]
/// ```
///
/// Only the upper triangle is filled from the stated blocks; the lower
/// triangle is its mirror, so the result is exactly symmetric.
pub fn lmi_block(dm: &DecoupledModel, vertex: usize, s: &Mat, y: &Mat, eta: f64) -> Result<Mat> {
    let n = dm.n();
    let q = dm.q();
    if vertex >= dm.vertices() {
        return Err(Error::Structural(format!(
            "vertex {vertex} out of range (N = {})",
            dm.vertices()
        )));
    }
    if s.shape() != (n, n) {
        return Err(Error::Structural(format!(
            "S is {}x{}, expected {n}x{n}",
            s.nrows(),
            s.ncols()
        )));
    }
    if y.shape() != (n, q) {
        return Err(Error::Structural(format!(
            "Y is {}x{}, expected {n}x{q}",
            y.nrows(),
            y.ncols()
        )));
    }
    let a_bar = &dm.a_bar[vertex];
    let c2 = &dm.c2;
    let [r0, r1, r2, r3, size] = offsets(n, q);

    let mut upper = Mat::zeros(size, size);
    upper.view_mut((r0, r0), (n, n)).copy_from(s);
    let coupling = a_bar.transpose() * (s - c2.transpose() * y.transpose());
    upper.view_mut((r0, r1), (n, n)).copy_from(&coupling);
    upper
        .view_mut((r0, r3), (n, n))
        .copy_from(&Mat::identity(n, n));
    upper.view_mut((r1, r1), (n, n)).copy_from(s);
    upper.view_mut((r1, r2), (n, n)).copy_from(&(s - y * c2));
    upper.view_mut((r1, r2 + n), (n, q)).copy_from(&(-y));
    for i in r2..size {
        upper[(i, i)] = eta;
    }

    let mut block = upper.clone();
    for i in 0..size {
        for j in 0..i {
            block[(i, j)] = upper[(j, i)];
        }
    }
    Ok(block)
}

/// Checks the certificate by direct eigenvalue computation: true iff the
/// smallest eigenvalue of every vertex block is at least `margin`.
pub fn verify_lmi(
    dm: &DecoupledModel,
    s: &Mat,
    y: &Mat,
    eta: f64,
    margin: f64,
) -> Result<(bool, f64)> {
    let mut min_eig = f64::INFINITY;
    for i in 0..dm.vertices() {
        let block = lmi_block(dm, i, s, y, eta)?;
        min_eig = min_eig.min(linalg::min_sym_eigenvalue(&block));
    }
    Ok((min_eig >= margin, min_eig))
}
