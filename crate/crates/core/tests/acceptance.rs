//! Acceptance checks: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p polariton --test acceptance -- --nocapture` to see
//! the report.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polariton::config::RunConfig;
use polariton::discretize::{
    build_photon_grid, check_sum_rule, continuum_coverage, transform_grid, FrequencyMapping,
};
use polariton::dynamics::{
    extract_rabi_frequency, fit_decay_rate, time_grid, AmplitudeTrajectory, InitialState,
    Propagator, RabiEstimate,
};
use polariton::eigensolve::{eigensolve_dense, eigensolve_structured, PolaritonModes};
use polariton::hamiltonian::{assemble, Complex64, CoupledSystem};
use polariton::model::{CavityModel, ElectronicLevels, Vec3, HBAR_EV_FS};
use polariton::observables::{
    absorption_spectrum, dip_depth, find_peaks, fwhm, linf_relative, peak_el_weights,
    resolvent_spectrum, uniform_grid, Spectrum,
};
use polariton::{presets, runner};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n:>2} {name}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// ħg = √(ħω/2)·λ·d with d converted from e·Å to e·nm.
fn g_oracle(omega: f64, lambda: f64, dipole_angstrom: f64) -> f64 {
    (omega / 2.0).sqrt() * lambda * dipole_angstrom * 0.1
}

fn preset(id: &str) -> RunConfig {
    presets::get(id).unwrap().config
}

fn probe(c: &RunConfig) -> Vec<f64> {
    let [lo, hi] = c.run.omega_range.unwrap_or(c.cavity.window);
    uniform_grid(lo, hi, c.run.points)
}

fn solved(c: &RunConfig) -> (CoupledSystem, PolaritonModes) {
    let s = runner::build_system(c).unwrap();
    let m = eigensolve_structured(&s).unwrap();
    (s, m)
}

fn spectrum_of(c: &RunConfig, modes: &PolaritonModes, gamma: f64) -> Spectrum {
    absorption_spectrum(modes, &c.levels, gamma, &probe(c), c.run.polarization).unwrap()
}

/// Toluene (iii) on the full 36001-mode grid, shared by several criteria.
fn toluene_iii() -> &'static (RunConfig, CoupledSystem, PolaritonModes, f64) {
    static CELL: OnceLock<(RunConfig, CoupledSystem, PolaritonModes, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let c = preset("fig2d-iii");
        let t = Instant::now();
        let (s, m) = solved(&c);
        (c, s, m, t.elapsed().as_secs_f64())
    })
}

fn two_highest(s: &Spectrum) -> Option<f64> {
    let mut p = find_peaks(s, 0.01);
    p.sort_by(|a, b| b.height.total_cmp(&a.height));
    (p.len() >= 2).then(|| (p[0].omega - p[1].omega).abs())
}

#[test]
fn criterion_01_coupling_ratios() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    let cases = [
        ("fig1d-i", 6.93, 0.96, 0.18),
        ("fig1d-ii", 6.93, 0.96, 0.36),
        ("fig1d-iii", 6.93, 0.96, 1.43),
        ("fig2d-i", 6.64, 0.76, 0.14),
        ("fig2d-ii", 6.64, 0.76, 1.4),
        ("fig2d-iii", 6.64, 0.76, 6.0),
        ("fig2d-iv", 6.64, 0.76, 0.74),
    ];
    for (id, omega, d, expect) in cases {
        let c = preset(id);
        let level = c.levels.iter().find(|l| l.label == "e1").unwrap();
        let g = polariton::hamiltonian::coupling_rate(c.cavity.omega_c, c.cavity.lambda_c, level.dipole).abs();
        let oracle = g_oracle(omega, c.cavity.lambda_c.norm(), d);
        assert!((g - oracle).abs() < 1e-15, "{id}: {g} vs {oracle}");
        let ratio = g / c.cavity.kappa;
        worst = worst.max((ratio - expect).abs());
        rows.push(format!("{id} {ratio:.3}"));
    }
    let elapsed = t.elapsed().as_secs_f64();
    report(
        1,
        "coupling ratios",
        worst <= 0.01 && elapsed < 1.0,
        format!("max |g/kappa - target| = {worst:.4} ({}) in {elapsed:.3} s", rows.join(", ")),
    );
}

#[test]
fn criterion_02_regime_transitions() {
    let t = Instant::now();
    let mut counts = Vec::new();
    let mut widths = Vec::new();
    let mut mixed = Vec::new();
    for id in ["fig1d-i", "fig1d-ii", "fig1d-iii", "fig1d-iv", "fig1d-v"] {
        let c = preset(id);
        let (_, m) = solved(&c);
        let s = spectrum_of(&c, &m, c.run.gamma);
        let peaks = find_peaks(&s, 0.01);
        counts.push(peaks.len());
        widths.push(fwhm(&s, s.max_index()).unwrap_or(f64::NAN));
        if id == "fig1d-iii" {
            mixed = peak_el_weights(&s, &peaks, &m);
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    let pass = counts[0] == 1
        && counts[2] == 2
        && mixed.len() == 2
        && mixed.iter().all(|&w| w > 0.2 && w < 0.8)
        && counts[4] == 1
        && widths[4] > widths[0]
        && elapsed <= 120.0;
    report(
        2,
        "regime transitions",
        pass,
        format!(
            "maxima {counts:?}, (iii) peak w_el {mixed:.3?}, FWHM(i) {:.3} meV, FWHM(v) {:.3} meV, {elapsed:.1} s",
            1e3 * widths[0],
            1e3 * widths[4]
        ),
    );
}

#[test]
fn criterion_03_splitting_magnitude() {
    let target = 2.0 * g_oracle(6.93, 0.008, 0.96);
    let c = preset("fig1d-iii");
    let (_, m) = solved(&c);
    let full = two_highest(&spectrum_of(&c, &m, c.run.gamma)).unwrap_or(f64::NAN);

    // dense oracle on a ±0.05 eV sub-window
    let sub = CavityModel::centered_with_modes(6.93, Vec3::x(0.008), 0.001, 1001, 1e-4);
    let s = assemble(&c.levels, &build_photon_grid(&sub).unwrap()).unwrap();
    let dm = eigensolve_dense(&s).unwrap();
    let grid = uniform_grid(6.88, 6.98, 3000);
    let dense = two_highest(&absorption_spectrum(&dm, &c.levels, c.run.gamma, &grid, Vec3::x(1.0)).unwrap())
        .unwrap_or(f64::NAN);

    let rel = |x: f64| (x - target).abs() / target;
    report(
        3,
        "splitting magnitude",
        rel(full) <= 0.15 && rel(dense) <= 0.15,
        format!(
            "2g = {:.3} meV, structured {:.3} meV ({:.1}%), dense oracle {:.3} meV ({:.1}%)",
            1e3 * target,
            1e3 * full,
            100.0 * rel(full),
            1e3 * dense,
            100.0 * rel(dense)
        ),
    );
}

#[test]
fn criterion_04_sum_rule() {
    let half = 0.25;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for kappa in [1e-3, 1e-2, 0.32] {
        let c = CavityModel::centered(6.93, Vec3::x(0.01), kappa, half, 1e-4);
        let cov = check_sum_rule(&build_photon_grid(&c).unwrap(), &c).unwrap();
        let oracle = 2.0 / std::f64::consts::PI * (2.0 * half / kappa).atan();
        assert!((continuum_coverage(half, kappa) - oracle).abs() < 1e-15);
        worst = worst.max((cov - oracle).abs());
        rows.push(format!("kappa {kappa}: {cov:.6} vs {oracle:.6}"));
    }
    report(4, "sum rule", worst <= 1e-4, format!("max error {worst:.2e} ({})", rows.join("; ")));
}

fn random_system(seed: u64) -> CoupledSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=4);
    let n = rng.random_range(1..=1000);
    let span = rng.random_range(0.05..1.0);
    let mut ph: Vec<f64> = (0..n).map(|_| 6.0 + rng.random_range(0.0..span)).collect();
    ph.sort_by(f64::total_cmp);
    ph.dedup();
    let mut el: Vec<f64> = (0..m).map(|_| 6.0 + rng.random_range(0.0..span)).collect();
    el.sort_by(f64::total_cmp);
    let scale = rng.random_range(1e-4..1e-2);
    let g = DMatrix::from_fn(m, ph.len(), |_, _| rng.random_range(-scale..scale));
    CoupledSystem::from_parts(el, ph, g).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_05_solver_equivalence() {
    let (mut de, mut dw) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let s = random_system(seed);
        let a = eigensolve_structured(&s).unwrap();
        let b = eigensolve_dense(&s).unwrap();
        assert_eq!(a.len(), b.len());
        de = de.max(max_diff(a.eigenvalues(), b.eigenvalues()));
        dw = dw.max(max_diff(a.el_weight(), b.el_weight()));
    }
    report(
        5,
        "solver equivalence",
        de <= 1e-10 && dw <= 1e-8,
        format!("20 systems: max eigenvalue diff {de:.2e} eV, max w_el diff {dw:.2e}"),
    );
}

#[test]
fn criterion_06_resolvent_fast_path() {
    let b = preset("fig1d-iii");
    let (bs, bm) = solved(&b);
    let eig_b = spectrum_of(&b, &bm, b.run.gamma);
    let res_b = resolvent_spectrum(&bs, &b.levels, b.run.gamma, &probe(&b), Vec3::x(1.0)).unwrap();
    let err_b = linf_relative(&eig_b, &res_b);

    let (c, s, m, solve_time) = toluene_iii();
    let eig_t = spectrum_of(c, m, c.run.gamma);
    let t = Instant::now();
    let res_t = resolvent_spectrum(s, &c.levels, c.run.gamma, &probe(c), Vec3::x(1.0)).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let err_t = linf_relative(&eig_t, &res_t);
    report(
        6,
        "resolvent fast path",
        err_b <= 0.01 && err_t <= 0.01 && elapsed <= 60.0 && probe(c).len() == 3000,
        format!(
            "benzene (iii) {:.3}%, toluene (iii) {:.3}%, N = {} resolvent {elapsed:.1} s (eigen solve {solve_time:.1} s)",
            100.0 * err_b,
            100.0 * err_t,
            s.n_modes()
        ),
    );
}

#[test]
fn criterion_07_grid_transformation() {
    let (c, _, m, _) = toluene_iii();
    let reference = spectrum_of(c, m, c.run.gamma);
    let uniform = build_photon_grid(&c.cavity).unwrap();
    let modes = uniform.len() / 10;
    let mapping = FrequencyMapping::arctan_focus(c.cavity.omega_c, 5.0 * c.cavity.kappa);
    let sp = mapping.spacing_for_modes(&uniform, modes).unwrap();
    let grid = transform_grid(&uniform, &mapping, sp).unwrap();
    let s = assemble(&c.levels, &grid).unwrap();
    let tm = eigensolve_structured(&s).unwrap();
    let err = linf_relative(&reference, &spectrum_of(c, &tm, c.run.gamma));
    report(
        7,
        "grid transformation",
        err <= 0.01,
        format!("{} arctan modes vs {} uniform: L-inf {:.3}% of peak", grid.len(), uniform.len(), 100.0 * err),
    );
}

/// Classical RK4 on i·dc/dt = (H − E_ref)c/ħ using the arrowhead structure of H.
fn rk4_trajectory(s: &CoupledSystem, start: usize, times: &[f64], dt: f64) -> Vec<Vec<f64>> {
    let (m, g) = (s.n_levels(), s.coupling());
    let e_ref = s.el_energies()[start];
    let diag: Vec<f64> = s.el_energies().iter().chain(s.ph_energies()).map(|e| e - e_ref).collect();
    let deriv = |c: &[Complex64]| -> Vec<Complex64> {
        let mut hc: Vec<Complex64> = c.iter().zip(&diag).map(|(x, d)| x * d).collect();
        for i in 0..m {
            for (k, &gik) in g.row(i).iter().enumerate() {
                hc[i] += c[m + k] * gik;
                hc[m + k] += c[i] * gik;
            }
        }
        hc.into_iter().map(|x| Complex64::new(x.im, -x.re) / HBAR_EV_FS).collect()
    };
    let axpy = |a: &[Complex64], b: &[Complex64], f: f64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * f).collect()
    };
    let mut c = vec![Complex64::new(0.0, 0.0); diag.len()];
    c[start] = Complex64::new(1.0, 0.0);
    let mut t = 0.0;
    let mut out = Vec::new();
    for &target in times {
        while t < target - 1e-12 {
            let step = dt.min(target - t);
            let k1 = deriv(&c);
            let k2 = deriv(&axpy(&c, &k1, 0.5 * step));
            let k3 = deriv(&axpy(&c, &k2, 0.5 * step));
            let k4 = deriv(&axpy(&c, &k3, step));
            for i in 0..c.len() {
                c[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (step / 6.0);
            }
            t += step;
        }
        out.push(c[..m].iter().map(|x| x.norm_sqr()).collect());
    }
    out
}

#[test]
fn criterion_08_weak_coupling_decay() {
    let c = preset("fig1d-i");
    let (s, m) = solved(&c);
    let g = g_oracle(6.93, 0.001, 0.96);
    let oracle = 4.0 * g * g / c.cavity.kappa;
    let span = 5.0 * HBAR_EV_FS / oracle;
    let times = time_grid(span, 2001);
    let traj = Propagator::new(&s, &m).trajectory(&InitialState::Level("e1".into()), &times).unwrap();
    let fit = fit_decay_rate(&traj, 0, (0.0, span)).unwrap();
    let drift = traj.max_norm_drift();
    let rel = (fit - oracle) / oracle;
    report(
        8,
        "weak-coupling decay",
        rel.abs() <= 0.05 && drift <= 1e-10,
        format!(
            "fit {fit:.4e} eV vs 4g^2/kappa {oracle:.4e} eV ({:+.1}%), norm drift {drift:.1e} over {span:.0} fs",
            100.0 * rel
        ),
    );
}

/// Exact population decay of a level resonant with one Lorentzian mode:
/// 2(κ/4 − √(κ²/16 − g²)). At g/κ = 0.18 it exceeds the golden-rule rate.
#[test]
fn weak_coupling_decay_matches_two_pole_rate() {
    let c = preset("fig1d-i");
    let (s, m) = solved(&c);
    let g = g_oracle(6.93, 0.001, 0.96);
    let k4 = c.cavity.kappa / 4.0;
    let exact = 2.0 * (k4 - (k4 * k4 - g * g).sqrt());
    // late window, after the initial non-exponential transient
    let tau = HBAR_EV_FS / exact;
    let times = time_grid(5.0 * tau, 2001);
    let traj = Propagator::new(&s, &m).trajectory(&InitialState::Level("e1".into()), &times).unwrap();
    let fit = fit_decay_rate(&traj, 0, (2.0 * tau, 5.0 * tau)).unwrap();
    println!("two-pole decay: fit {fit:.4e} eV vs exact {exact:.4e} eV");
    assert!((fit - exact).abs() <= 0.02 * exact, "{fit} vs {exact}");
}

fn preset_trajectory(id: &str) -> (RunConfig, CoupledSystem, AmplitudeTrajectory) {
    let c = runner::resolve(&preset(id)).unwrap();
    let (s, m) = solved(&c);
    let times = time_grid(c.run.duration_fs.unwrap(), c.run.time_points);
    let traj = Propagator::new(&s, &m)
        .trajectory(&InitialState::Level(c.run.initial_state.clone().unwrap()), &times)
        .unwrap();
    (c, s, traj)
}

fn peak_population(traj: &AmplitudeTrajectory, label: &str) -> f64 {
    let i = traj.state_index(label).unwrap();
    traj.el_populations[i].iter().copied().fold(0.0, f64::max)
}

#[test]
fn criterion_09_strong_coupling_dynamics() {
    let target = 2.0 * g_oracle(6.64, 0.10, 0.76);
    let (_, s2, t2) = preset_trajectory("fig3-ii");
    let e1 = t2.state_index("e1").unwrap();
    let rabi = match extract_rabi_frequency(&t2, e1).unwrap() {
        RabiEstimate::Oscillating { hbar_omega } => hbar_omega,
        RabiEstimate::Overdamped => f64::NAN,
    };
    let e2_ii = peak_population(&t2, "e2");

    // independent check of the spectral propagator against RK4 on the first 100 fs
    let check_times: Vec<f64> = t2.times.iter().copied().filter(|&t| t <= 100.0).collect();
    let rk = rk4_trajectory(&s2, e1, &check_times, 0.02);
    let rk_err = check_times
        .iter()
        .enumerate()
        .flat_map(|(j, _)| (0..s2.n_levels()).map(move |i| (i, j)))
        .map(|(i, j)| (rk[j][i] - t2.el_populations[i][j]).abs())
        .fold(0.0, f64::max);

    let (_, _, t3) = preset_trajectory("fig3-iii");
    let e2_iii = peak_population(&t3, "e2");
    let (_, _, t5) = preset_trajectory("fig3-v");
    let e3_v = peak_population(&t5, "e3");

    let rel = (rabi - target).abs() / target;
    report(
        9,
        "strong-coupling dynamics",
        rel <= 0.10 && e2_ii < 0.01 && e2_iii >= 0.10 && e3_v > 1e-4 && rk_err < 1e-8,
        format!(
            "(ii) Rabi {:.2} meV vs 2g {:.2} meV ({:.1}%), max P_e2 {e2_ii:.2e}; (iii) max P_e2 {e2_iii:.3}; (v) max P_e3 {e3_v:.2e}; RK4 deviation {rk_err:.1e}",
            1e3 * rabi,
            1e3 * target,
            100.0 * rel
        ),
    );
}

#[test]
fn criterion_10_fano_dip_sweep() {
    let (c, _, m, _) = toluene_iii();
    let gammas = [0.005, 0.002, 0.001, 0.0005, 0.0002];
    let depths: Vec<f64> = gammas
        .iter()
        .map(|&g| dip_depth(&spectrum_of(c, m, g), 6.58, runner::DIP_HALF_WIDTH))
        .collect();
    let monotone = depths.windows(2).all(|w| w[1] > w[0]);
    report(
        10,
        "Fano dip sweep",
        monotone && depths[4] > 0.0,
        format!("dip depth near 6.58 eV for gamma {gammas:?}: {depths:.3?}"),
    );
}

/// Σ_l W_e1,l·W_e2,l: eigenstates carrying both e1 and e2 character.
fn shared_character(c: &RunConfig, m: &PolaritonModes) -> f64 {
    let w = m.weights();
    let (i1, i2) = (c.levels.index_of("e1").unwrap(), c.levels.index_of("e2").unwrap());
    (0..m.len()).map(|l| w.weight(l, i1) * w.weight(l, i2)).sum()
}

/// Transfer into e2 appears exactly when the eigenstates mix e1 and e2.
#[test]
fn toluene_transfer_matches_shared_weights() {
    let (c3, _, t3) = preset_trajectory("fig3-iii");
    let (c2, _, t2) = preset_trajectory("fig3-ii");
    let o3 = shared_character(&c3, &solved(&c3).1);
    let o2 = shared_character(&c2, &solved(&c2).1);
    let (p3, p2) = (peak_population(&t3, "e2"), peak_population(&t2, "e2"));
    println!("shared e1/e2 character: (ii) {o2:.2e}, (iii) {o3:.2e}; max P_e2: (ii) {p2:.2e}, (iii) {p3:.3}");
    assert!(p3 > 10.0 * p2 && o3 > 10.0 * o2);
}

#[test]
fn levels_in_presets_are_the_tabulated_values() {
    let t: &ElectronicLevels = &preset("fig2d-iii").levels;
    let got: Vec<(f64, f64)> = t.iter().map(|l| (l.energy, l.dipole.0[0])).collect();
    assert_eq!(got, vec![(6.58, 0.01), (6.64, 0.76), (6.71, 0.11), (6.78, 0.08)]);
}
