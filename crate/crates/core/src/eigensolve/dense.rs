use nalgebra::DMatrix;

use super::{PhotonRepr, PolaritonModes};
use crate::error::{Error, Result};
use crate::hamiltonian::CoupledSystem;

pub const DEFAULT_DENSE_CAP: usize = 4000;

pub fn eigensolve_dense(system: &CoupledSystem) -> Result<PolaritonModes> {
    eigensolve_dense_capped(system, DEFAULT_DENSE_CAP)
}

/// Full symmetric diagonalization of the materialized matrix.
pub fn eigensolve_dense_capped(system: &CoupledSystem, cap: usize) -> Result<PolaritonModes> {
    let size = system.dim();
    if size > cap {
        return Err(Error::DenseCapExceeded { size, cap });
    }
    let (values, vectors) = symmetric_eigen(system.to_dense())?;
    let m = system.n_levels();
    let el_components = vectors.rows(0, m).transpose();
    let el_weight: Vec<f64> = el_components.row_iter().map(|r| r.norm_squared()).collect();
    let photon = vectors.rows(m, size - m).into_owned();
    let ph_weight = photon.column_iter().map(|c| c.norm_squared()).collect();
    Ok(PolaritonModes {
        eigenvalues: values,
        el_components,
        el_weight,
        ph_weight,
        photon: PhotonRepr::Explicit(photon),
    })
}

/// Ascending eigenvalues and matching column eigenvectors of a real symmetric matrix.
pub(crate) fn symmetric_eigen(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "dense diagonalization produced non-finite eigenvalues".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let values = order.iter().map(|&p| eig.eigenvalues[p]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}
