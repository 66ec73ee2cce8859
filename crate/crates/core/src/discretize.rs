//! Discretization of the lossy cavity into a Lorentzian-weighted photon
//! continuum, and re-sampling of that continuum on non-uniform grids.
//!
//! A grid mode carries its frequency ω_k, its cavity strength λ_k and the
//! quadrature weight Δω_k it represents. The continuum strength density is
//! λ_k/√Δω_k; a change of variables ω(Ω) with density of states D = dω/dΩ
//! rescales the discrete strengths by √(D·ΔΩ), which keeps the commutation
//! relations of the rescaled mode operators canonical.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CavityModel, Vec3};

/// Default hard cap on the number of photon modes in a grid.
pub const DEFAULT_MODE_CAP: usize = 1_000_000;

/// Header of the grid CSV format.
pub const GRID_CSV_HEADER: &str = "omega_eV,lambda_x,lambda_y,lambda_z,weight_eV";

/// Discrete Lorentzian weight Δω·(1/2π)·κ/(ω_kc² + (κ/2)²).
pub fn lorentzian_weight(delta_omega: f64, kappa: f64, omega_kc: f64) -> Result<f64> {
    if !(delta_omega > 0.0) || !delta_omega.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lorentzian spacing must be positive, got {delta_omega}"
        )));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lorentzian width must be positive, got {kappa}"
        )));
    }
    Ok(lorentzian_unchecked(delta_omega, kappa, omega_kc))
}

#[inline]
fn lorentzian_unchecked(delta_omega: f64, kappa: f64, omega_kc: f64) -> f64 {
    let hw = 0.5 * kappa;
    delta_omega * kappa / (2.0 * PI * (omega_kc * omega_kc + hw * hw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonMode {
    /// Mode energy ħω_k (eV).
    pub omega: f64,
    /// Cavity strength λ_k (eV^½/nm).
    pub lambda: Vec3,
    /// Effective spacing Δω_k represented by the mode (eV).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridProvenance {
    Uniform,
    Transformed(String),
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonGrid {
    modes: Vec<PhotonMode>,
    provenance: GridProvenance,
}

impl PhotonGrid {
    /// Wraps a list of modes after checking that frequencies are positive and
    /// strictly increasing and that weights are positive.
    pub fn from_modes(modes: Vec<PhotonMode>, provenance: GridProvenance) -> Result<Self> {
        for (k, m) in modes.iter().enumerate() {
            if !(m.omega > 0.0) || !m.omega.is_finite() {
                return Err(Error::NonPositiveFrequency { omega: m.omega });
            }
            if !(m.weight > 0.0) || !m.weight.is_finite() || !m.lambda.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "mode {k} has a non-positive weight or non-finite strength"
                )));
            }
            if k > 0 && modes[k - 1].omega >= m.omega {
                return Err(Error::InvalidArgument(format!(
                    "mode frequencies must be strictly increasing (mode {k})"
                )));
            }
        }
        Ok(Self { modes, provenance })
    }

    pub fn modes(&self) -> &[PhotonMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn provenance(&self) -> &GridProvenance {
        &self.provenance
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.omega).collect()
    }

    pub fn first_omega(&self) -> Option<f64> {
        self.modes.first().map(|m| m.omega)
    }

    pub fn last_omega(&self) -> Option<f64> {
        self.modes.last().map(|m| m.omega)
    }

    /// Σ_k |λ_k|².
    pub fn total_strength_sq(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda.norm_sq()).sum()
    }

    /// Writes the grid as CSV with `GRID_CSV_HEADER`; values use the shortest
    /// representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = String::with_capacity(self.modes.len() * 96);
        writeln!(buf, "# provenance={}", self.provenance.tag()).unwrap();
        writeln!(buf, "{GRID_CSV_HEADER}").unwrap();
        for m in &self.modes {
            writeln!(
                buf,
                "{:e},{:e},{:e},{:e},{:e}",
                m.omega, m.lambda.0[0], m.lambda.0[1], m.lambda.0[2], m.weight
            )
            .unwrap();
        }
        w.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Parses the format written by `write_csv`. Grids without a provenance
    /// line are marked imported.
    pub fn read_csv<R: Read>(mut r: R, source: &str) -> Result<Self> {
        let fmt_err = |message: String| Error::Format {
            path: source.to_string(),
            message,
        };
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let provenance = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("provenance="))
            .map_or(GridProvenance::Imported, GridProvenance::from_tag);
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| fmt_err(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != GRID_CSV_HEADER {
            return Err(fmt_err(format!(
                "expected header '{GRID_CSV_HEADER}', found '{header}'"
            )));
        }
        let mut modes = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
            let v = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| fmt_err(format!("row {}: {e}", row + 1)))?;
            if v.len() != 5 {
                return Err(fmt_err(format!("row {}: expected 5 columns", row + 1)));
            }
            modes.push(PhotonMode {
                omega: v[0],
                lambda: Vec3::new(v[1], v[2], v[3]),
                weight: v[4],
            });
        }
        Self::from_modes(modes, provenance)
    }
}

impl GridProvenance {
    pub fn tag(&self) -> String {
        match self {
            GridProvenance::Uniform => "uniform".into(),
            GridProvenance::Transformed(id) => format!("transformed:{id}"),
            GridProvenance::Imported => "imported".into(),
        }
    }

    fn from_tag(tag: &str) -> Self {
        match tag {
            "uniform" => GridProvenance::Uniform,
            t => t
                .strip_prefix("transformed:")
                .map_or(GridProvenance::Imported, |id| GridProvenance::Transformed(id.into())),
        }
    }
}

/// Number of uniform grid points for a window, N = round(span/Δω) + 1.
pub fn mode_count(cavity: &CavityModel) -> usize {
    let span = cavity.window[1] - cavity.window[0];
    (span / cavity.spacing).round().max(0.0) as usize + 1
}

pub fn build_photon_grid(cavity: &CavityModel) -> Result<PhotonGrid> {
    build_photon_grid_capped(cavity, DEFAULT_MODE_CAP)
}

/// Uniform Lorentzian grid: |λ_k|² = |λ_c|²·L(Δω, κ, ω_k − ω_c) with λ_k ∥ λ_c.
///
/// Points are laid out symmetrically about the window centre. A window
/// centred on ω_c to within 1e-9 spacings is treated as exactly centred, so
/// the strength profile is mirror symmetric bit for bit.
pub fn build_photon_grid_capped(cavity: &CavityModel, cap: usize) -> Result<PhotonGrid> {
    let [lo, hi] = cavity.window;
    if !(lo < cavity.omega_c && cavity.omega_c < hi) {
        return Err(Error::InvalidArgument(format!(
            "window [{lo}, {hi}] excludes the cavity frequency {}",
            cavity.omega_c
        )));
    }
    if !(cavity.spacing > 0.0) || !(cavity.kappa > 0.0) {
        return Err(Error::InvalidArgument(
            "spacing and loss must be positive".into(),
        ));
    }
    let n = mode_count(cavity);
    if n > cap {
        return Err(Error::GridTooLarge { modes: n, cap });
    }
    let dw = cavity.spacing;
    let mid = 0.5 * (n - 1) as f64;
    let mut offset = 0.5 * (lo + hi) - cavity.omega_c;
    if offset.abs() <= 1e-9 * dw {
        offset = 0.0;
    }
    let modes = (0..n)
        .map(|k| {
            let kc = offset + (k as f64 - mid) * dw;
            let l = lorentzian_unchecked(dw, cavity.kappa, kc);
            PhotonMode {
                omega: cavity.omega_c + kc,
                lambda: cavity.lambda_c * l.sqrt(),
                weight: dw,
            }
        })
        .collect();
    PhotonGrid::from_modes(modes, GridProvenance::Uniform)
}

/// Fraction Σ_k |λ_k|²/|λ_c|² of the total cavity strength captured by the
/// grid; `None` when λ_c = 0 and the fraction is undefined.
pub fn check_sum_rule(grid: &PhotonGrid, cavity: &CavityModel) -> Option<f64> {
    let total = cavity.lambda_c.norm_sq();
    (total > 0.0).then(|| grid.total_strength_sq() / total)
}

/// Closed-form coverage (2/π)·arctan(2W/κ) of a symmetric window of
/// half-width W in the continuum limit.
pub fn continuum_coverage(half_width: f64, kappa: f64) -> f64 {
    2.0 / PI * (2.0 * half_width / kappa).atan()
}

/// Strictly increasing change of variables ω(Ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrequencyMapping {
    Identity,
    /// ω = scale·Ω.
    Linear { scale: f64 },
    /// ω = center + width·tan Ω. Points concentrate within ~width of center.
    ArctanStretch { center: f64, width: f64 },
    /// Piecewise-linear table of (Ω, ω) knots.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl FrequencyMapping {
    pub fn arctan_focus(center: f64, width: f64) -> Self {
        FrequencyMapping::ArctanStretch { center, width }
    }

    pub fn id(&self) -> String {
        match self {
            FrequencyMapping::Identity => "identity".into(),
            FrequencyMapping::Linear { scale } => format!("linear(scale={scale})"),
            FrequencyMapping::ArctanStretch { center, width } => {
                format!("arctan(center={center},width={width})")
            }
            FrequencyMapping::Tabulated { knots } => format!("tabulated(knots={})", knots.len()),
        }
    }

    /// Checks the mapping parameters; tabulated knots must increase strictly
    /// in both coordinates.
    pub fn validate(&self) -> Result<()> {
        match self {
            FrequencyMapping::Identity => Ok(()),
            FrequencyMapping::Linear { scale } => {
                if *scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonMonotoneMapping { at: 0.0 })
                }
            }
            FrequencyMapping::ArctanStretch { center, width } => {
                if *width > 0.0 && width.is_finite() && center.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonMonotoneMapping { at: 0.0 })
                }
            }
            FrequencyMapping::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "tabulated mapping needs at least two knots".into(),
                    ));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1) {
                        return Err(Error::NonMonotoneMapping { at: w[1].0 });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn omega(&self, big: f64) -> f64 {
        match self {
            FrequencyMapping::Identity => big,
            FrequencyMapping::Linear { scale } => scale * big,
            FrequencyMapping::ArctanStretch { center, width } => center + width * big.tan(),
            FrequencyMapping::Tabulated { knots } => {
                let j = segment(knots, |k| k.0, big);
                let (a, b) = (knots[j], knots[j + 1]);
                a.1 + (big - a.0) * (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    /// Density of states D(Ω) = dω/dΩ.
    pub fn density(&self, big: f64) -> f64 {
        match self {
            FrequencyMapping::Identity => 1.0,
            FrequencyMapping::Linear { scale } => *scale,
            FrequencyMapping::ArctanStretch { width, .. } => {
                let c = big.cos();
                width / (c * c)
            }
            FrequencyMapping::Tabulated { knots } => {
                let j = segment(knots, |k| k.0, big);
                let (a, b) = (knots[j], knots[j + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    pub fn inverse(&self, omega: f64) -> f64 {
        match self {
            FrequencyMapping::Identity => omega,
            FrequencyMapping::Linear { scale } => omega / scale,
            FrequencyMapping::ArctanStretch { center, width } => ((omega - center) / width).atan(),
            FrequencyMapping::Tabulated { knots } => {
                let j = segment(knots, |k| k.1, omega);
                let (a, b) = (knots[j], knots[j + 1]);
                a.0 + (omega - a.1) * (b.0 - a.0) / (b.1 - a.1)
            }
        }
    }

    /// Uniform Ω spacing that maps the grid's frequency range onto `modes` points.
    pub fn spacing_for_modes(&self, grid: &PhotonGrid, modes: usize) -> Result<f64> {
        let (a, b) = self.image_of(grid)?;
        if modes < 2 {
            return Err(Error::InvalidArgument("need at least two modes".into()));
        }
        Ok((b - a) / (modes - 1) as f64)
    }

    fn image_of(&self, grid: &PhotonGrid) -> Result<(f64, f64)> {
        let (lo, hi) = match (grid.first_omega(), grid.last_omega()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::InvalidArgument("empty photon grid".into())),
        };
        Ok((self.inverse(lo), self.inverse(hi)))
    }
}

/// Index j of the segment [x_j, x_{j+1}] containing `x`, clamped to the ends.
fn segment(knots: &[(f64, f64)], coord: impl Fn(&(f64, f64)) -> f64, x: f64) -> usize {
    let p = knots.partition_point(|k| coord(k) <= x);
    p.clamp(1, knots.len() - 1) - 1
}

/// Re-samples a grid on the uniform Ω lattice of spacing `new_spacing` under
/// the mapping ω(Ω). New modes sit at ω(Ω_k) with strengths
/// λ̃_k = √(D(Ω_k)·ΔΩ)·Λ(ω(Ω_k)), where Λ = λ/√Δω is the continuum strength
/// density of the input grid, interpolated linearly between its modes.
pub fn transform_grid(
    grid: &PhotonGrid,
    mapping: &FrequencyMapping,
    new_spacing: f64,
) -> Result<PhotonGrid> {
    transform_grid_capped(grid, mapping, new_spacing, DEFAULT_MODE_CAP)
}

pub fn transform_grid_capped(
    grid: &PhotonGrid,
    mapping: &FrequencyMapping,
    new_spacing: f64,
    cap: usize,
) -> Result<PhotonGrid> {
    mapping.validate()?;
    if !(new_spacing > 0.0) || !new_spacing.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "new spacing must be positive, got {new_spacing}"
        )));
    }
    let (big_a, big_b) = mapping.image_of(grid)?;
    if !(big_b > big_a) {
        return Err(Error::NonMonotoneMapping { at: big_a });
    }
    let n = ((big_b - big_a) / new_spacing).round() as usize + 1;
    if n > cap {
        return Err(Error::GridTooLarge { modes: n, cap });
    }

    let src = grid.modes();
    let src_omega: Vec<f64> = src.iter().map(|m| m.omega).collect();
    let density: Vec<Vec3> = src.iter().map(|m| m.lambda * m.weight.sqrt().recip()).collect();
    let (lo, hi) = (src_omega[0], src_omega[src_omega.len() - 1]);

    let big_mid = 0.5 * (big_a + big_b);
    let mid = 0.5 * (n - 1) as f64;
    let mut modes = Vec::with_capacity(n);
    for k in 0..n {
        let big = big_mid + (k as f64 - mid) * new_spacing;
        let omega = mapping.omega(big);
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::NonPositiveFrequency { omega });
        }
        let d = mapping.density(big);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NonMonotoneMapping { at: big });
        }
        let lam = interpolate(&src_omega, &density, omega.clamp(lo, hi));
        let w = d * new_spacing;
        modes.push(PhotonMode {
            omega,
            lambda: lam * w.sqrt(),
            weight: w,
        });
    }
    for k in 1..modes.len() {
        if modes[k].omega <= modes[k - 1].omega {
            return Err(Error::NonMonotoneMapping {
                at: big_mid + (k as f64 - mid) * new_spacing,
            });
        }
    }
    PhotonGrid::from_modes(modes, GridProvenance::Transformed(mapping.id()))
}

fn interpolate(xs: &[f64], ys: &[Vec3], x: f64) -> Vec3 {
    if xs.len() == 1 {
        return ys[0];
    }
    let j = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
    let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
    if t == 0.0 {
        return ys[j];
    }
    ys[j] * (1.0 - t) + ys[j + 1] * t
}
