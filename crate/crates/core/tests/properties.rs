//! Property tests over randomly generated inputs.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use polariton::config::RunConfig;
use polariton::discretize::{
    build_photon_grid, check_sum_rule, transform_grid, FrequencyMapping, PhotonGrid,
};
use polariton::dynamics::{InitialState, Propagator};
use polariton::eigensolve::{eigensolve_dense, eigensolve_structured};
use polariton::hamiltonian::{assemble, Complex64, CoupledSystem};
use polariton::model::{validate_inputs, CavityModel, ElectronicLevel, ElectronicLevels, Vec3};
use polariton::observables::{absorption_spectrum, oscillator_strength, uniform_grid};

fn vec3() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn levels() -> impl Strategy<Value = ElectronicLevels> {
    prop::collection::vec((0.5..10.0f64, vec3()), 1..5).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.into_iter()
            .enumerate()
            .map(|(i, (e, d))| ElectronicLevel::new(format!("s{i}"), e, d))
            .collect()
    })
}

fn cavity() -> impl Strategy<Value = CavityModel> {
    (1.0..10.0f64, vec3(), 1e-3..0.3f64, 0.01..0.5f64, 1.0..50.0f64).prop_map(
        |(omega_c, lambda_c, kappa, half, per)| CavityModel {
            omega_c,
            lambda_c,
            kappa,
            window: [omega_c - half.min(0.9 * omega_c), omega_c + half],
            spacing: kappa / 10.0 / per,
        },
    )
}

/// M ≤ 4 levels and N ≤ `max_n` distinct modes with dense random couplings.
fn system(max_n: usize) -> impl Strategy<Value = CoupledSystem> {
    (1usize..=4, 2usize..=max_n, any::<u64>()).prop_map(|(m, n, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let span = rng.random_range(0.05..0.5);
        let mut ph: Vec<f64> = (0..n).map(|_| 2.0 + rng.random_range(0.0..span)).collect();
        ph.sort_by(f64::total_cmp);
        ph.dedup();
        let mut el: Vec<f64> = (0..m).map(|_| 2.0 + rng.random_range(0.0..span)).collect();
        el.sort_by(f64::total_cmp);
        let scale = rng.random_range(1e-4..1e-2);
        let g = DMatrix::from_fn(m, ph.len(), |_, _| rng.random_range(-scale..scale));
        CoupledSystem::from_parts(el, ph, g).unwrap()
    })
}

fn benzene() -> ElectronicLevels {
    ElectronicLevels::new(vec![ElectronicLevel::new("e1", 6.93, Vec3::x(0.96))])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_json_round_trip_is_bit_exact(l in levels(), c in cavity()) {
        let cfg = RunConfig { levels: l, cavity: c, run: Default::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn validation_is_idempotent(l in levels(), c in cavity()) {
        let once = validate_inputs(l, c);
        prop_assert!(once.is_ok());
        let (l, c) = once.unwrap();
        let twice = validate_inputs(l.clone(), c.clone()).unwrap();
        prop_assert_eq!(twice, (l, c));
    }

    #[test]
    fn strength_profile_is_mirror_symmetric(
        omega_c in 2.0..8.0f64, kappa in 1e-3..0.1f64, half_modes in 10usize..400,
    ) {
        prop_assume!(half_modes as f64 * kappa / 10.0 < 0.9 * omega_c);
        let c = CavityModel::centered_with_modes(omega_c, Vec3::x(0.1), kappa, 2 * half_modes + 1, kappa / 10.0);
        let g = build_photon_grid(&c).unwrap();
        let m = g.modes();
        for k in 0..m.len() / 2 {
            prop_assert_eq!(m[k].lambda.norm(), m[m.len() - 1 - k].lambda.norm());
        }
    }

    #[test]
    fn enlarging_window_never_reduces_coverage(
        kappa in 1e-3..0.1f64, half in 1usize..200, extra in 1usize..200,
    ) {
        let sp = kappa / 10.0;
        let small = CavityModel::centered_with_modes(5.0, Vec3::x(0.1), kappa, 2 * half + 1, sp);
        let large = CavityModel::centered_with_modes(5.0, Vec3::x(0.1), kappa, 2 * (half + extra) + 1, sp);
        let a = check_sum_rule(&build_photon_grid(&small).unwrap(), &small).unwrap();
        let b = check_sum_rule(&build_photon_grid(&large).unwrap(), &large).unwrap();
        prop_assert!(b >= a);
        prop_assert!(b <= 1.0);
    }

    #[test]
    fn grid_csv_round_trip(c in cavity()) {
        prop_assume!(polariton::discretize::mode_count(&c) <= 5000);
        let g = build_photon_grid(&c).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = PhotonGrid::read_csv(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binary_dump_round_trip(s in system(300)) {
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        prop_assert_eq!(CoupledSystem::read_binary(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn assembled_hamiltonian_is_symmetric(s in system(200)) {
        let h = s.to_dense();
        prop_assert_eq!(&h, &h.transpose());
    }

    #[test]
    fn completeness_and_trace(s in system(400)) {
        let modes = eigensolve_structured(&s).unwrap();
        let (m, n) = (s.n_levels() as f64, s.n_modes() as f64);
        prop_assert!((modes.el_weight().iter().sum::<f64>() - m).abs() < 1e-6);
        prop_assert!((modes.ph_weight().iter().sum::<f64>() - n).abs() < 1e-6);
        let trace: f64 = s.el_energies().iter().chain(s.ph_energies()).sum();
        let sum: f64 = modes.eigenvalues().iter().sum();
        prop_assert!((sum - trace).abs() < 1e-8 * (m + n));
    }

    #[test]
    fn dipole_sign_is_unobservable(s in system(300), flip in 0usize..4) {
        let i = flip % s.n_levels();
        let mut g = s.coupling().clone();
        g.row_mut(i).neg_mut();
        let t = CoupledSystem::new(s.el_energies().to_vec(), s.el_labels().to_vec(), s.ph_energies().to_vec(), g).unwrap();
        let (a, b) = (eigensolve_structured(&s).unwrap(), eigensolve_structured(&t).unwrap());
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let (wa, wb) = (a.weights(), b.weights());
        for l in 0..a.len() {
            for k in 0..s.n_levels() {
                prop_assert!((wa.weight(l, k) - wb.weight(l, k)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn single_level_eigenvalues_interlace_photon_grid(s in system(300)) {
        let g = DMatrix::from_fn(1, s.n_modes(), |_, k| s.coupling()[(0, k)].abs().max(1e-5));
        let one = CoupledSystem::from_parts(vec![s.el_energies()[0]], s.ph_energies().to_vec(), g).unwrap();
        let ph = one.ph_energies();
        for scale in [0.25, 0.5, 1.0] {
            let ev = eigensolve_structured(&one.scaled_coupling(scale)).unwrap();
            let ev = ev.eigenvalues();
            prop_assert_eq!(ev.len(), ph.len() + 1);
            for (l, &w) in ev.iter().enumerate() {
                if l > 0 { prop_assert!(w > ph[l - 1]); }
                if l < ph.len() { prop_assert!(w < ph[l]); }
            }
        }
    }

    #[test]
    fn eigenvalues_are_schur_complement_roots(s in system(150)) {
        let modes = eigensolve_dense(&s).unwrap();
        for &w in modes.eigenvalues() {
            if s.ph_energies().iter().any(|p| (p - w).abs() < 1e-6) {
                continue;
            }
            let sigma = s.self_energy(Complex64::new(w, 0.0)).unwrap();
            let f = DMatrix::from_fn(s.n_levels(), s.n_levels(), |i, j| {
                sigma[(i, j)].re + if i == j { s.el_energies()[i] - w } else { 0.0 }
            });
            let e = f.clone().symmetric_eigen().eigenvalues;
            let smallest = e.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(smallest <= 1e-7 * (1.0 + f.norm()), "{smallest:e} at {w}");
        }
    }

    #[test]
    fn propagation_is_unitary_and_reversible(s in system(300), t in 10.0..5000.0f64) {
        let modes = eigensolve_structured(&s).unwrap();
        let p = Propagator::new(&s, &modes);
        let traj = p.trajectory(&InitialState::Level("e1".into()), &[0.0, 0.5 * t, t]).unwrap();
        prop_assert!(traj.max_norm_drift() <= 1e-10);
        let mut c0 = vec![Complex64::new(0.0, 0.0); s.dim()];
        c0[0] = Complex64::new(1.0, 0.0);
        let back = p.state_at(&p.state_at(&c0, t), -t);
        let err = back.iter().zip(&c0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-9, "{err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn oscillator_strength_is_conserved(lambda in 1e-3..8e-3f64, kappa in 1e-3..8e-3f64) {
        let probe = uniform_grid(6.68, 7.18, 3000);
        let strength = |lambda: f64, kappa: f64| {
            let c = CavityModel::centered_with_modes(6.93, Vec3::x(lambda), kappa, 5000, 1e-4);
            let s = assemble(&benzene(), &build_photon_grid(&c).unwrap()).unwrap();
            let m = eigensolve_structured(&s).unwrap();
            oscillator_strength(&absorption_spectrum(&m, &benzene(), 1e-3, &probe, Vec3::x(1.0)).unwrap())
        };
        let reference = strength(1e-3, 1e-3);
        let v = strength(lambda, kappa);
        prop_assert!((v - reference).abs() < 1e-3 * reference, "{v} vs {reference}");
    }
}

#[test]
fn narrow_broadening_puts_peaks_on_eigenvalues() {
    let c = CavityModel::centered_with_modes(6.93, Vec3::x(0.008), 0.001, 2001, 1e-4);
    let s = assemble(&benzene(), &build_photon_grid(&c).unwrap()).unwrap();
    let m = eigensolve_structured(&s).unwrap();
    let probe = uniform_grid(6.92, 6.94, 4001);
    let step = probe[1] - probe[0];
    let s = absorption_spectrum(&m, &benzene(), 1e-6, &probe, Vec3::x(1.0)).unwrap();
    let peak = s.omega[s.max_index()];
    let amps = m.bright_amplitudes(&benzene().projected_dipoles(Vec3::x(1.0)));
    let nearest_bright = (0..m.len())
        .filter(|&l| amps[l] * amps[l] > 1e-3)
        .map(|l| (peak - m.eigenvalues()[l]).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(nearest_bright <= step);
}

#[test]
fn transformed_grid_error_shrinks_with_resolution() {
    let c = CavityModel::centered_with_modes(6.93, Vec3::x(0.008), 0.001, 5000, 1e-4);
    let uniform = build_photon_grid(&c).unwrap();
    let probe = uniform_grid(6.9, 6.96, 1500);
    let spectrum = |g: &PhotonGrid| {
        let s = assemble(&benzene(), g).unwrap();
        let m = eigensolve_structured(&s).unwrap();
        absorption_spectrum(&m, &benzene(), 1e-3, &probe, Vec3::x(1.0)).unwrap()
    };
    let mapping = FrequencyMapping::arctan_focus(6.93, 0.005);
    let spectra: Vec<Vec<f64>> = [250, 500, 1000]
        .iter()
        .map(|&n| {
            let sp = mapping.spacing_for_modes(&uniform, n).unwrap();
            spectrum(&transform_grid(&uniform, &mapping, sp).unwrap()).raw_values()
        })
        .collect();
    let peak = spectra[2].iter().copied().fold(0.0, f64::max);
    // successive differences shrink as ΔΩ halves
    let errors: Vec<f64> = spectra
        .windows(2)
        .map(|w| {
            let d = DVector::from_vec(w[0].clone()) - DVector::from_vec(w[1].clone());
            d.amax() / peak
        })
        .collect();
    let reference = spectrum(&uniform).raw_values();
    let d = DVector::from_vec(spectra[2].clone()) - DVector::from_vec(reference);
    assert!(d.amax() / peak < 0.01);
    assert!(errors[1] < 0.5 * errors[0], "{errors:?}");
}
