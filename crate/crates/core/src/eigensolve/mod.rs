//! Eigenpairs of the bordered-diagonal Hamiltonian.
//!
//! Two solvers share one output type. [`eigensolve_structured`] finds roots of the
//! M×M secular matrix between photon poles and never forms (M+N)-vectors, while
//! [`eigensolve_dense`] diagonalizes the explicit matrix and serves as an oracle.

mod dense;
mod structured;

use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hamiltonian::CoupledSystem;

pub use dense::{eigensolve_dense, eigensolve_dense_capped, DEFAULT_DENSE_CAP};
pub use structured::{eigensolve_structured, CLUSTER_TOLERANCE};

/// How the photon part of eigenvector l is stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonPart {
    /// Implied by the electronic part: C_kl = Σ_i G_ik C_il / (ω_l − ω_k), with
    /// ω_l − ω_k evaluated as `offset − (ω_k − ω_anchor)` to keep near-pole roots exact.
    Secular { anchor: usize, offset: f64 },
    /// A photon mode with no coupling, passed through unchanged.
    BareMode(usize),
    /// An electronic level with no coupling; photon part is zero.
    Absent,
}

#[derive(Debug, Clone)]
enum PhotonRepr {
    Implicit(Vec<PhotonPart>),
    /// N × (M+N) photon block of the eigenvector matrix.
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct PolaritonModes {
    eigenvalues: Vec<f64>,
    el_components: DMatrix<f64>,
    el_weight: Vec<f64>,
    ph_weight: Vec<f64>,
    photon: PhotonRepr,
}

impl PolaritonModes {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        self.el_components.ncols()
    }

    pub fn n_modes(&self) -> usize {
        self.len() - self.n_levels()
    }

    /// ħω_l in eV, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// (M+N) × M matrix of C_il, row l = eigenstate.
    pub fn el_components(&self) -> &DMatrix<f64> {
        &self.el_components
    }

    pub fn el_weight(&self) -> &[f64] {
        &self.el_weight
    }

    pub fn ph_weight(&self) -> &[f64] {
        &self.ph_weight
    }

    pub fn photon_part(&self, l: usize) -> Option<PhotonPart> {
        match &self.photon {
            PhotonRepr::Implicit(parts) => Some(parts[l]),
            PhotonRepr::Explicit(_) => None,
        }
    }

    /// Σ_i C_il·p_i for every eigenstate, with p the projected dipoles.
    pub fn bright_amplitudes(&self, projected: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|l| {
                self.el_components
                    .row(l)
                    .iter()
                    .zip(projected)
                    .map(|(c, d)| c * d)
                    .sum()
            })
            .collect()
    }

    /// Photon components C_kl for the eigenstates in `cols`, as an N × |cols| matrix.
    pub fn photon_block(&self, system: &CoupledSystem, cols: Range<usize>) -> DMatrix<f64> {
        match &self.photon {
            PhotonRepr::Explicit(v) => v.columns(cols.start, cols.len()).into_owned(),
            PhotonRepr::Implicit(parts) => {
                let n = system.n_modes();
                let ph = system.ph_energies();
                let g = system.coupling();
                let active: Vec<bool> = (0..n).map(|k| g.column(k).iter().any(|&x| x != 0.0)).collect();
                let mut out = DMatrix::zeros(n, cols.len());
                for (c, l) in cols.enumerate() {
                    match parts[l] {
                        PhotonPart::Absent => {}
                        PhotonPart::BareMode(k) => out[(k, c)] = 1.0,
                        PhotonPart::Secular { anchor, offset } => {
                            let el = self.el_components.row(l);
                            let o = ph[anchor];
                            for k in (0..n).filter(|&k| active[k]) {
                                let proj: f64 = g.column(k).iter().zip(el.iter()).map(|(a, b)| a * b).sum();
                                out[(k, c)] = proj / (offset - (ph[k] - o));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub fn weights(&self) -> WeightTable {
        WeightTable {
            eigenvalues: self.eigenvalues.clone(),
            components: self.el_components.clone(),
            el_weight: self.el_weight.clone(),
            ph_weight: self.ph_weight.clone(),
        }
    }
}

/// Per-state decomposition: W_il = |C_il|², w_l^el = Σ_i W_il, w_l^ph = 1 − w_l^el.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub eigenvalues: Vec<f64>,
    pub components: DMatrix<f64>,
    pub el_weight: Vec<f64>,
    pub ph_weight: Vec<f64>,
}

impl WeightTable {
    pub fn weight(&self, l: usize, i: usize) -> f64 {
        self.components[(l, i)].powi(2)
    }

    /// CSV with header `omega_l_eV,w_el,w_ph,C_1,...,C_M`, preceded by a `# columns` line naming the levels.
    pub fn write_csv<W: Write>(&self, mut w: W, labels: &[String]) -> Result<()> {
        if !labels.is_empty() {
            writeln!(w, "# columns C_1..C_M = {}", labels.join(","))?;
        }
        write!(w, "omega_l_eV,w_el,w_ph")?;
        for i in 0..self.components.ncols() {
            write!(w, ",C_{}", i + 1)?;
        }
        writeln!(w)?;
        for l in 0..self.eigenvalues.len() {
            write!(
                w,
                "{},{},{}",
                crate::output::fmt(self.eigenvalues[l]),
                crate::output::fmt(self.el_weight[l]),
                crate::output::fmt(self.ph_weight[l])
            )?;
            for c in self.components.row(l).iter() {
                write!(w, ",{}", crate::output::fmt(*c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resonant_pair(g: f64) -> CoupledSystem {
        CoupledSystem::from_parts(vec![2.0], vec![2.0], DMatrix::from_element(1, 1, g)).unwrap()
    }

    #[test]
    fn resonant_two_level_both_solvers() {
        for modes in [
            eigensolve_structured(&resonant_pair(0.01)).unwrap(),
            eigensolve_dense(&resonant_pair(0.01)).unwrap(),
        ] {
            assert!((modes.eigenvalues()[0] - 1.99).abs() < 1e-14);
            assert!((modes.eigenvalues()[1] - 2.01).abs() < 1e-14);
            for l in 0..2 {
                assert!((modes.el_weight()[l] - 0.5).abs() < 1e-13);
                assert!((modes.weights().weight(l, 0) - 0.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn three_level_characteristic_polynomial() {
        let (w0, d, g) = (3.0, 0.02, 0.005);
        let s = CoupledSystem::from_parts(
            vec![w0],
            vec![w0 - d, w0 + d],
            DMatrix::from_row_slice(1, 2, &[g, g]),
        )
        .unwrap();
        let r = (2.0 * g * g + d * d).sqrt();
        let expect = [w0 - r, w0, w0 + r];
        for modes in [eigensolve_structured(&s).unwrap(), eigensolve_dense(&s).unwrap()] {
            for (a, b) in modes.eigenvalues().iter().zip(expect) {
                assert!((a - b).abs() < 1e-13, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn decoupled_weights_are_exact() {
        let s = CoupledSystem::from_parts(vec![1.5, 2.5], vec![1.0, 2.0, 3.0], DMatrix::zeros(2, 3))
            .unwrap();
        for modes in [eigensolve_structured(&s).unwrap(), eigensolve_dense(&s).unwrap()] {
            assert_eq!(modes.eigenvalues(), &[1.0, 1.5, 2.0, 2.5, 3.0]);
            let w = modes.weights();
            for l in 0..5 {
                for i in 0..2 {
                    let x = w.weight(l, i);
                    assert!(x == 0.0 || x == 1.0);
                }
            }
            assert_eq!(modes.el_weight(), &[0.0, 1.0, 0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn photon_block_matches_dense_up_to_sign() {
        let s = CoupledSystem::from_parts(
            vec![1.0, 1.2],
            vec![0.9, 1.05, 1.1, 1.3],
            DMatrix::from_row_slice(2, 4, &[0.02, -0.01, 0.03, 0.0, 0.01, 0.02, 0.0, 0.0]),
        )
        .unwrap();
        let a = eigensolve_structured(&s).unwrap();
        let b = eigensolve_dense(&s).unwrap();
        let pa = a.photon_block(&s, 0..6);
        let pb = b.photon_block(&s, 0..6);
        for l in 0..6 {
            let ea = a.el_components().row(l);
            let eb = b.el_components().row(l);
            let full_a: Vec<f64> = ea.iter().chain(pa.column(l).iter()).copied().collect();
            let full_b: Vec<f64> = eb.iter().chain(pb.column(l).iter()).copied().collect();
            let dot: f64 = full_a.iter().zip(&full_b).map(|(x, y)| x * y).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10, "state {l}: overlap {dot}");
        }
    }
}
