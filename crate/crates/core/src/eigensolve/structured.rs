//! Secular-equation eigensolver for the bordered-diagonal Hamiltonian.
//!
//! Eliminating the photon block gives F(z) = E − z + Σ(z). By Haynsworth inertia,
//! the number of eigenvalues below z is #{poles < z} + neg(F(z)), so the number of
//! roots in each gap between poles follows from the inertia of F restricted to the
//! complement of the pole's coupling vector. Each eigenvalue of F decreases strictly
//! in z, so the q-th root of a gap is the zero of one sorted eigenvalue branch of F.
//!
//! Coordinates are shifted to the nearer pole so that z − ω_k is formed without
//! cancellation, and every root is stored as (anchor pole, offset).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{PhotonPart, PhotonRepr, PolaritonModes};
use crate::error::{Error, Result};
use crate::hamiltonian::CoupledSystem;

/// Roots closer than this (eV) inside one gap are refined jointly.
pub const CLUSTER_TOLERANCE: f64 = 1e-11;

const MAX_ITER: usize = 500;
/// Relative singular value below which a coupling direction is dropped.
const RANK_TOLERANCE: f64 = 1e-13;

pub fn eigensolve_structured(system: &CoupledSystem) -> Result<PolaritonModes> {
    let m = system.n_levels();
    let g = system.coupling();
    let rows: Vec<usize> = (0..m)
        .filter(|&i| g.row(i).iter().any(|&x| x != 0.0))
        .collect();
    let cols: Vec<usize> = (0..system.n_modes())
        .filter(|&k| g.column(k).iter().any(|&x| x != 0.0))
        .collect();

    let mut pairs: Vec<Pair> = Vec::with_capacity(system.dim());
    for i in (0..m).filter(|i| !rows.contains(i)) {
        let mut c = vec![0.0; m];
        c[i] = 1.0;
        pairs.push(Pair {
            value: system.el_energies()[i],
            el: c,
            w_el: 1.0,
            w_ph: 0.0,
            part: PhotonPart::Absent,
        });
    }
    let active_col = {
        let mut a = vec![false; system.n_modes()];
        cols.iter().for_each(|&k| a[k] = true);
        a
    };
    for (k, &w) in system.ph_energies().iter().enumerate() {
        if !active_col[k] {
            pairs.push(Pair {
                value: w,
                el: vec![0.0; m],
                w_el: 0.0,
                w_ph: 1.0,
                part: PhotonPart::BareMode(k),
            });
        }
    }

    if !rows.is_empty() {
        let sec = Secular::new(system, rows, cols)?;
        pairs.extend(sec.solve()?);
    }

    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    let n = pairs.len();
    let mut el_components = DMatrix::zeros(n, m);
    for (l, p) in pairs.iter().enumerate() {
        for i in 0..m {
            el_components[(l, i)] = p.el[i];
        }
    }
    Ok(PolaritonModes {
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        el_components,
        el_weight: pairs.iter().map(|p| p.w_el).collect(),
        ph_weight: pairs.iter().map(|p| p.w_ph).collect(),
        photon: PhotonRepr::Implicit(pairs.iter().map(|p| p.part).collect()),
    })
}

struct Pair {
    value: f64,
    el: Vec<f64>,
    w_el: f64,
    w_ph: f64,
    part: PhotonPart,
}

#[derive(Clone, Copy)]
enum End {
    Pole(usize),
    Bound(f64),
}

#[derive(Clone, Copy)]
struct Root {
    anchor: usize,
    x: f64,
    branch: usize,
}

/// Coupled sub-problem in a rotated electronic basis where only the first `rank`
/// directions see the photons.
struct Secular {
    m_total: usize,
    rows: Vec<usize>,
    poles: Vec<f64>,
    pole_index: Vec<usize>,
    rot: DMatrix<f64>,
    e_rot: DMatrix<f64>,
    rank: usize,
    /// rank entries per pole, pole-major.
    b: Vec<f64>,
    b_norm_sq: Vec<f64>,
}

impl Secular {
    fn new(system: &CoupledSystem, rows: Vec<usize>, mut cols: Vec<usize>) -> Result<Self> {
        let ph = system.ph_energies();
        cols.sort_by(|&a, &b| ph[a].total_cmp(&ph[b]));
        for w in cols.windows(2) {
            if ph[w[0]] == ph[w[1]] {
                return Err(Error::DegenerateModes {
                    first: w[0].min(w[1]),
                    second: w[0].max(w[1]),
                    energy: ph[w[0]],
                });
            }
        }
        let g = system.coupling();
        let m = rows.len();
        let gred = DMatrix::from_fn(m, cols.len(), |i, k| g[(rows[i], cols[k])]);
        let svd = gred.transpose().svd(false, true);
        let sv = &svd.singular_values;
        let vt = svd.v_t.as_ref().expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let top = sv[order[0]];
        let rank = order
            .iter()
            .filter(|&&a| sv[a] > top * RANK_TOLERANCE)
            .count()
            .max(1);
        let mut rot = DMatrix::zeros(m, m);
        for (a, &c) in order.iter().enumerate() {
            rot.set_column(a, &vt.row(c).transpose());
        }
        if order.len() < m {
            // fewer coupled modes than levels
            rot = complete_basis(rot.columns(0, order.len()).into_owned(), m);
        }
        let e = DMatrix::from_diagonal(&DVector::from_iterator(
            m,
            rows.iter().map(|&i| system.el_energies()[i]),
        ));
        let mut e_rot = rot.transpose() * e * &rot;
        e_rot = (&e_rot + e_rot.transpose()) * 0.5;
        let brot = rot.columns(0, rank).transpose() * &gred;
        let mut b = Vec::with_capacity(rank * cols.len());
        for k in 0..cols.len() {
            b.extend(brot.column(k).iter());
        }
        let b_norm_sq = b.chunks_exact(rank).map(|c| c.iter().map(|x| x * x).sum()).collect();
        Ok(Self {
            m_total: system.n_levels(),
            rows,
            poles: cols.iter().map(|&k| ph[k]).collect(),
            pole_index: cols,
            rot,
            e_rot,
            rank,
            b,
            b_norm_sq,
        })
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    /// F at z = o + x, optionally dropping the term of pole `skip`.
    fn f_matrix(&self, o: f64, x: f64, skip: Option<usize>) -> DMatrix<f64> {
        let m = self.dim();
        let mut f = self.e_rot.clone();
        for d in 0..m {
            f[(d, d)] = (f[(d, d)] - o) - x;
        }
        let n = self.poles.len();
        let (a, b) = match skip {
            Some(j) => (j, j + 1),
            None => (n, n),
        };
        let r = self.rank;
        if r == 1 {
            let s = sum_rank1(&self.b_norm_sq[..a], &self.poles[..a], o, x)
                + sum_rank1(&self.b_norm_sq[b..], &self.poles[b..], o, x);
            f[(0, 0)] += s;
        } else {
            let mut acc = vec![0.0; r * r];
            for k in (0..a).chain(b..n) {
                let w = 1.0 / (x - (self.poles[k] - o));
                let bk = &self.b[k * r..(k + 1) * r];
                for p in 0..r {
                    let wp = w * bk[p];
                    for q in p..r {
                        acc[p * r + q] += wp * bk[q];
                    }
                }
            }
            for p in 0..r {
                for q in p..r {
                    f[(p, q)] += acc[p * r + q];
                    if q != p {
                        f[(q, p)] += acc[p * r + q];
                    }
                }
            }
        }
        f
    }

    fn branch_value(&self, o: f64, x: f64, s: usize) -> f64 {
        let f = self.f_matrix(o, x, None);
        if self.dim() == 1 {
            return f[(0, 0)];
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(f).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[s]
    }

    /// Ascending eigenvalues of the regular part of F at pole j, restricted to the
    /// orthogonal complement of that pole's coupling vector.
    fn reduced(&self, j: usize) -> Vec<f64> {
        let m = self.dim();
        if m == 1 {
            return Vec::new();
        }
        let f = self.f_matrix(self.poles[j], 0.0, Some(j));
        let mut v = DVector::zeros(m);
        for p in 0..self.rank {
            v[p] = self.b[j * self.rank + p];
        }
        let q = complement(&v);
        let red = q.transpose() * f * &q;
        let red = (&red + red.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(red).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn solve(&self) -> Result<Vec<Pair>> {
        let m = self.dim();
        let n = self.poles.len();
        let reduced: Vec<Vec<f64>> = (0..n).into_par_iter().map(|j| self.reduced(j)).collect();
        let neg: Vec<usize> = reduced
            .iter()
            .map(|r| r.iter().filter(|&&v| v < 0.0).count())
            .collect();

        let gnorm = self.b_norm_sq.iter().sum::<f64>().sqrt();
        let e_diag = (0..m).map(|d| self.e_rot[(d, d)]);
        let e_spread = e_diag.clone().fold(f64::INFINITY, f64::min);
        let e_top = e_diag.fold(f64::NEG_INFINITY, f64::max);
        // Gershgorin-style padding on the dense electronic block
        let e_off: f64 = (0..m)
            .map(|p| (0..m).filter(|&q| q != p).map(|q| self.e_rot[(p, q)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let pad = 2.0 * gnorm + e_off + 1e-6;
        let lower = e_spread.min(self.poles[0]) - pad;
        let upper = e_top.max(self.poles[n - 1]) + pad;

        let gaps: Vec<(End, End, usize, usize)> = (0..=n)
            .map(|t| {
                if t == 0 {
                    (End::Bound(lower), End::Pole(0), 0, 1 + neg[0])
                } else if t == n {
                    (End::Pole(n - 1), End::Bound(upper), neg[n - 1], m - neg[n - 1])
                } else {
                    let c = (1 + neg[t]) as isize - neg[t - 1] as isize;
                    (End::Pole(t - 1), End::Pole(t), neg[t - 1], c.max(0) as usize)
                }
            })
            .collect();
        let total: usize = gaps.iter().map(|g| g.3).sum();
        if total != m + n {
            return Err(Error::Bracketing {
                lo: lower,
                hi: upper,
                reason: format!("inertia count gives {total} roots, expected {}", m + n),
            });
        }

        let per_gap: Vec<Vec<Pair>> = gaps
            .par_iter()
            .map(|&(lo, hi, base, count)| {
                let roots = (0..count)
                    .map(|q| self.solve_branch(lo, hi, base + q, &reduced))
                    .collect::<Result<Vec<_>>>()?;
                Ok(self.finish_gap(&roots))
            })
            .collect::<Result<_>>()?;
        Ok(per_gap.into_iter().flatten().collect())
    }

    fn end_z(&self, e: End) -> f64 {
        match e {
            End::Pole(j) => self.poles[j],
            End::Bound(z) => z,
        }
    }

    fn solve_branch(&self, lo: End, hi: End, s: usize, reduced: &[Vec<f64>]) -> Result<Root> {
        let top = self.dim() - 1;
        let (zl, zh) = (self.end_z(lo), self.end_z(hi));
        let width = zh - zl;
        let lo_scaled = matches!(lo, End::Pole(_)) && s == top;
        let hi_scaled = matches!(hi, End::Pole(_)) && s == 0;
        let psi = |o: f64, x: f64, x_lo: f64, x_hi: f64| {
            let mut v = self.branch_value(o, x, s);
            if lo_scaled {
                v *= (x - x_lo) / width;
            }
            if hi_scaled {
                v *= (x_hi - x) / width;
            }
            v
        };
        let lim_lo = |j: usize| {
            if s == top {
                self.b_norm_sq[j] / width
            } else {
                reduced[j][s]
            }
        };
        let lim_hi = |j: usize| {
            if s == 0 {
                -self.b_norm_sq[j] / width
            } else {
                reduced[j][s - 1]
            }
        };

        // (origin pole, bracket in shifted coordinates, values at bracket ends, interval ends)
        let (anchor, a, b, fa, fb, x_lo, x_hi) = match (lo, hi) {
            (End::Pole(pa), End::Pole(pb)) => {
                let o = self.poles[pa];
                let half = 0.5 * width;
                let fm = psi(o, half, 0.0, width);
                if fm == 0.0 {
                    return Ok(Root { anchor: pa, x: half, branch: s });
                }
                if fm < 0.0 {
                    (pa, 0.0, half, lim_lo(pa), fm, 0.0, width)
                } else {
                    (pb, -half, 0.0, fm, lim_hi(pb), -width, 0.0)
                }
            }
            (End::Bound(z), End::Pole(pb)) => {
                let o = self.poles[pb];
                let xl = z - o;
                (pb, xl, 0.0, psi(o, xl, xl, 0.0), lim_hi(pb), xl, 0.0)
            }
            (End::Pole(pa), End::Bound(z)) => {
                let o = self.poles[pa];
                let xh = z - o;
                (pa, 0.0, xh, lim_lo(pa), psi(o, xh, 0.0, xh), 0.0, xh)
            }
            (End::Bound(_), End::Bound(_)) => unreachable!("at least one pole exists"),
        };
        if !(fa > 0.0 && fb < 0.0) {
            return Err(Error::Bracketing {
                lo: zl,
                hi: zh,
                reason: format!("branch {s} has no sign change (ends {fa:e}, {fb:e})"),
            });
        }
        let o = self.poles[anchor];
        brent(|x| psi(o, x, x_lo, x_hi), a, b, fa, fb)
            .map(|x| Root { anchor, x, branch: s })
            .ok_or_else(|| Error::Bracketing {
                lo: zl,
                hi: zh,
                reason: format!("no convergence for branch {s} after {MAX_ITER} iterations"),
            })
    }

    fn finish_gap(&self, roots: &[Root]) -> Vec<Pair> {
        let mut out = Vec::with_capacity(roots.len());
        let mut start = 0;
        while start < roots.len() {
            let mut end = start + 1;
            while end < roots.len() && self.separation(&roots[end - 1], &roots[end]) < CLUSTER_TOLERANCE {
                end += 1;
            }
            if end - start == 1 {
                out.push(self.single_pair(&roots[start]));
            } else {
                out.extend(self.cluster_pairs(&roots[start..end]));
            }
            start = end;
        }
        out
    }

    fn separation(&self, a: &Root, b: &Root) -> f64 {
        ((self.poles[b.anchor] - self.poles[a.anchor]) + (b.x - a.x)).abs()
    }

    fn sorted_eigen(&self, o: f64, x: f64) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.f_matrix(o, x, None));
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        let vecs = DMatrix::from_fn(self.dim(), self.dim(), |i, a| eig.eigenvectors[(i, order[a])]);
        (vals, vecs)
    }

    /// Σ_k (B_k·y)² / (x − δ_k)², the photon norm of the vector extended from y.
    fn photon_sum(&self, o: f64, x: f64, y: &[f64]) -> f64 {
        let r = self.rank;
        self.b
            .chunks_exact(r)
            .zip(&self.poles)
            .map(|(bk, &p)| {
                let proj: f64 = bk.iter().zip(y).map(|(a, b)| a * b).sum();
                let d = x - (p - o);
                (proj / d).powi(2)
            })
            .sum()
    }

    fn make_pair(&self, anchor: usize, x: f64, y: &[f64]) -> Pair {
        let o = self.poles[anchor];
        let s = self.photon_sum(o, x, y);
        let w_el = 1.0 / (1.0 + s);
        let u = &self.rot * DVector::from_column_slice(y);
        let scale = w_el.sqrt() / u.norm();
        let mut el = vec![0.0; self.m_total];
        for (i, &row) in self.rows.iter().enumerate() {
            el[row] = u[i] * scale;
        }
        Pair {
            value: o + x,
            el,
            w_el,
            w_ph: s / (1.0 + s),
            part: PhotonPart::Secular {
                anchor: self.pole_index[anchor],
                offset: x,
            },
        }
    }

    fn single_pair(&self, root: &Root) -> Pair {
        let o = self.poles[root.anchor];
        let (_, vecs) = self.sorted_eigen(o, root.x);
        let y: Vec<f64> = vecs.column(root.branch).iter().copied().collect();
        self.make_pair(root.anchor, root.x, &y)
    }

    /// Rayleigh-Ritz on the span of the cluster's null-vector extensions, all built at
    /// the cluster mean x̄: overlap S = uᵀ(−F′)u and projected H = x̄·S + diag(μ).
    fn cluster_pairs(&self, roots: &[Root]) -> Vec<Pair> {
        let anchor = roots[0].anchor;
        let o = self.poles[anchor];
        let xs: Vec<f64> = roots
            .iter()
            .map(|r| (self.poles[r.anchor] - o) + r.x)
            .collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let (vals, vecs) = self.sorted_eigen(o, xbar);
        let c = roots.len();
        let ys: Vec<Vec<f64>> = roots
            .iter()
            .map(|r| vecs.column(r.branch).iter().copied().collect())
            .collect();
        let r = self.rank;
        let mut s = DMatrix::<f64>::identity(c, c);
        for (bk, &p) in self.b.chunks_exact(r).zip(&self.poles) {
            let d2 = (xbar - (p - o)).powi(2);
            let proj: Vec<f64> = ys
                .iter()
                .map(|y| bk.iter().zip(y).map(|(a, b)| a * b).sum())
                .collect();
            for a in 0..c {
                for b in 0..c {
                    s[(a, b)] += proj[a] * proj[b] / d2;
                }
            }
        }
        let mut k = &s * xbar;
        for (a, root) in roots.iter().enumerate() {
            k[(a, a)] += vals[root.branch];
        }
        let Some(chol) = s.clone().cholesky() else {
            return roots.iter().map(|r| self.single_pair(r)).collect();
        };
        let l_inv = chol.l().try_inverse().expect("Cholesky factor is invertible");
        let reduced = &l_inv * k * l_inv.transpose();
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let coef = l_inv.transpose() * &eig.eigenvectors;
        order
            .iter()
            .map(|&q| {
                let mut y = vec![0.0; self.dim()];
                for a in 0..c {
                    for (yd, ya) in y.iter_mut().zip(&ys[a]) {
                        *yd += coef[(a, q)] * ya;
                    }
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                y.iter_mut().for_each(|v| *v /= norm);
                self.make_pair(anchor, eig.eigenvalues[q], &y)
            })
            .collect()
    }
}

fn sum_rank1(b2: &[f64], poles: &[f64], o: f64, x: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let bc = b2.chunks_exact(4);
    let pc = poles.chunks_exact(4);
    let (br, pr) = (bc.remainder(), pc.remainder());
    for (bb, pp) in bc.zip(pc) {
        for t in 0..4 {
            acc[t] += bb[t] / (x - (pp[t] - o));
        }
    }
    let tail: f64 = br.iter().zip(pr).map(|(b, p)| b / (x - (p - o))).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Extends orthonormal columns to a full orthonormal basis of R^m.
fn complete_basis(mut basis: DMatrix<f64>, m: usize) -> DMatrix<f64> {
    for i in 0..m {
        if basis.ncols() == m {
            break;
        }
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        for _ in 0..2 {
            let proj = basis.transpose() * &v;
            v -= &basis * proj;
        }
        let norm = v.norm();
        if norm > 0.5 {
            let c = basis.ncols();
            basis = basis.insert_column(c, 0.0);
            basis.set_column(c, &(v / norm));
        }
    }
    basis
}

/// Orthonormal basis of the complement of v, from a Householder reflector.
fn complement(v: &DVector<f64>) -> DMatrix<f64> {
    let m = v.len();
    let u = v / v.norm();
    let mut w = u.clone();
    w[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let h = DMatrix::identity(m, m) - (&w * w.transpose()) * (2.0 / w.norm_squared());
    h.columns(1, m - 1).into_owned()
}

/// Brent's zero finder on a bracket with f(a)·f(b) < 0.
fn brent(mut f: impl FnMut(f64) -> f64, a0: f64, b0: f64, fa0: f64, fb0: f64) -> Option<f64> {
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let mid = 0.5 * (c - b);
        if mid.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * mid * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * mid * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * mid * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = mid;
                e = mid;
            }
        } else {
            d = mid;
            e = mid;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(mid) };
        fb = f(b);
    }
    None
}
