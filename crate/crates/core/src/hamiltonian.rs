//! Single-excitation rotating-wave Hamiltonian of M electronic levels bordering
//! N photon modes:
//!
//! ```text
//!     ⎡ diag(ħω_el)   G          ⎤
//! H = ⎣ Gᵀ            diag(ħω_k) ⎦
//! ```
//!
//! with G_ik = ħg_{i,k}. Only the border block couples the two diagonals.
//!
//! # Binary dump layout
//!
//! All values little-endian:
//!
//! | offset | content |
//! |--------|---------|
//! | 0      | magic `FCQDHAM1` (8 bytes) |
//! | 8      | M as u64 |
//! | 16     | N as u64 |
//! | 24     | M × f64 electronic energies (eV) |
//! | ..     | N × f64 photon energies (eV) |
//! | ..     | M·N × f64 couplings ħg (eV), row-major, row i = level i |

use std::io::{Read, Write};

use nalgebra::{Complex, DMatrix};

use crate::discretize::PhotonGrid;
use crate::error::{Error, Result};
use crate::model::{ElectronicLevels, Vec3, ANGSTROM_TO_NM};

pub type Complex64 = Complex<f64>;

pub const DUMP_MAGIC: &[u8; 8] = b"FCQDHAM1";

/// Coupling energy ħg = −√(ħω_k/2)·(λ_k·d) in eV, with d given in e·Å.
///
/// The projection λ_k·d selects the dipole component along the cavity field.
pub fn coupling_rate(omega_k: f64, lambda_k: Vec3, dipole: Vec3) -> f64 {
    -(0.5 * omega_k).sqrt() * lambda_k.dot(dipole * ANGSTROM_TO_NM)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    el_energies: Vec<f64>,
    el_labels: Vec<String>,
    ph_energies: Vec<f64>,
    /// M × N border block, column k holds the couplings of photon mode k.
    coupling: DMatrix<f64>,
}

impl CoupledSystem {
    pub fn new(
        el_energies: Vec<f64>,
        el_labels: Vec<String>,
        ph_energies: Vec<f64>,
        coupling: DMatrix<f64>,
    ) -> Result<Self> {
        let (m, n) = (el_energies.len(), ph_energies.len());
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least one electronic level and one photon mode (M = {m}, N = {n})"
            )));
        }
        if el_labels.len() != m || coupling.nrows() != m || coupling.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch: {} labels, coupling {}x{} for M = {m}, N = {n}",
                el_labels.len(),
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        let finite = el_energies.iter().chain(&ph_energies).all(|v| v.is_finite())
            && coupling.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "system contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            el_energies,
            el_labels,
            ph_energies,
            coupling,
        })
    }

    /// Same system with default labels `e1..eM`.
    pub fn from_parts(
        el_energies: Vec<f64>,
        ph_energies: Vec<f64>,
        coupling: DMatrix<f64>,
    ) -> Result<Self> {
        let labels = (1..=el_energies.len()).map(|i| format!("e{i}")).collect();
        Self::new(el_energies, labels, ph_energies, coupling)
    }

    pub fn n_levels(&self) -> usize {
        self.el_energies.len()
    }

    pub fn n_modes(&self) -> usize {
        self.ph_energies.len()
    }

    pub fn dim(&self) -> usize {
        self.n_levels() + self.n_modes()
    }

    pub fn el_energies(&self) -> &[f64] {
        &self.el_energies
    }

    pub fn el_labels(&self) -> &[String] {
        &self.el_labels
    }

    pub fn ph_energies(&self) -> &[f64] {
        &self.ph_energies
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.el_labels.iter().position(|l| l == label)
    }

    /// Copy with every coupling multiplied by `s`.
    pub fn scaled_coupling(&self, s: f64) -> Self {
        Self {
            coupling: &self.coupling * s,
            ..self.clone()
        }
    }

    /// Materializes the full (M+N)² real symmetric matrix, electrons first.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (m, n) = (self.n_levels(), self.n_modes());
        let mut h = DMatrix::<f64>::zeros(m + n, m + n);
        for i in 0..m {
            h[(i, i)] = self.el_energies[i];
        }
        for k in 0..n {
            h[(m + k, m + k)] = self.ph_energies[k];
            for i in 0..m {
                let g = self.coupling[(i, k)];
                h[(i, m + k)] = g;
                h[(m + k, i)] = g;
            }
        }
        h
    }

    /// Photon-block Schur complement Σ_ij(z) = Σ_k G_ik G_jk/(z − ω_k).
    pub fn self_energy(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        if z.im == 0.0 {
            if let Some(&w) = self.ph_energies.iter().find(|&&w| w == z.re) {
                return Err(Error::Pole { z: w });
            }
        }
        let m = self.n_levels();
        let mut sigma = DMatrix::<Complex64>::zeros(m, m);
        for (k, &w) in self.ph_energies.iter().enumerate() {
            let r = (z - w).inv();
            let col = self.coupling.column(k);
            for j in 0..m {
                let gj = col[j];
                if gj == 0.0 {
                    continue;
                }
                let rj = r * gj;
                for i in j..m {
                    sigma[(i, j)] += rj * col[i];
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                sigma[(i, j)] = sigma[(j, i)];
            }
        }
        Ok(sigma)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, n) = (self.n_levels(), self.n_modes());
        let mut buf = Vec::with_capacity(24 + 8 * (m + n + m * n));
        buf.extend_from_slice(DUMP_MAGIC);
        buf.extend_from_slice(&(m as u64).to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        for v in self.el_energies.iter().chain(&self.ph_energies) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..m {
            for k in 0..n {
                buf.extend_from_slice(&self.coupling[(i, k)].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |message: &str| Error::Format {
            path: "<hamiltonian dump>".into(),
            message: message.into(),
        };
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if &head[..8] != DUMP_MAGIC {
            return Err(bad("bad magic"));
        }
        let m = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
        let count = m
            .checked_add(n)
            .and_then(|s| m.checked_mul(n).and_then(|p| p.checked_add(s)))
            .ok_or_else(|| bad("dimensions overflow"))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != 8 * count {
            return Err(bad("payload length does not match dimensions"));
        }
        let vals: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let el = vals[..m].to_vec();
        let ph = vals[m..m + n].to_vec();
        let coupling = DMatrix::from_row_slice(m, n, &vals[m + n..]);
        Self::from_parts(el, ph, coupling)
    }
}

/// Builds the coupled system for a set of levels and a photon grid.
pub fn assemble(levels: &ElectronicLevels, grid: &PhotonGrid) -> Result<CoupledSystem> {
    let (m, n) = (levels.len(), grid.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least one level and one mode (M = {m}, N = {n})"
        )));
    }
    let lv = levels.as_slice();
    let coupling = DMatrix::from_fn(m, n, |i, k| {
        let mode = &grid.modes()[k];
        coupling_rate(mode.omega, mode.lambda, lv[i].dipole)
    });
    CoupledSystem::new(
        lv.iter().map(|l| l.energy).collect(),
        levels.labels(),
        grid.omegas(),
        coupling,
    )
}
