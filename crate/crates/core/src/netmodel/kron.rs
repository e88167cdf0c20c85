use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Schur complement `Z_kk - Z_ke Z_ee^-1 Z_ek`, eliminating the conductors in `eliminate`.
pub fn kron_reduce(z: &ComplexMatrix, eliminate: &[usize]) -> Result<ComplexMatrix> {
    if !z.is_square() {
        return Err(Error::Contract("kron reduction needs a square matrix".into()));
    }
    let n = z.nrows();
    let mut elim: Vec<usize> = eliminate.to_vec();
    elim.sort_unstable();
    elim.dedup();
    if elim.iter().any(|&e| e >= n) {
        return Err(Error::Contract(format!("eliminated index out of range for {n}x{n} matrix")));
    }
    let keep: Vec<usize> = (0..n).filter(|k| !elim.contains(k)).collect();
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::<Complex64>::from_fn(rows.len(), cols.len(), |r, c| z[(rows[r], cols[c])])
    };
    let z_kk = block(&keep, &keep);
    if elim.is_empty() {
        return Ok(ComplexMatrix(z_kk));
    }
    let z_ee = block(&elim, &elim);
    let z_ke = block(&keep, &elim);
    let z_ek = block(&elim, &keep);
    let lu = z_ee.lu();
    let x = lu
        .solve(&z_ek)
        .filter(|_| lu.u().diagonal().iter().all(|p| p.norm() > 1e-14))
        .ok_or_else(|| Error::Singular("eliminated block is singular".into()))?;
    Ok(ComplexMatrix(z_kk - z_ke * x))
}
