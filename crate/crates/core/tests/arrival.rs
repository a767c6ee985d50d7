mod common;

use common::{sinc, SplitMix};
use photonkin::arrival::*;
use photonkin::dynamics::evolve;
use photonkin::photon_state::{from_spec, HelicityAmplitude, StateSpec};
use photonkin::position_op::{Derivative, GaussianState};
use photonkin::{GridParams, Helicity, MomentumGrid, PolarMap, RadialMap, Vec3, C64};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn cis(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

/// Resolves `e^{ikn·d}` for `kd ≲ 20`.
fn grid() -> Arc<MomentumGrid> {
    MomentumGrid::build(GridParams::new(40, 24, 32, 1e-3, 6.5, RadialMap::Linear)).unwrap()
}

fn radial(k: f64) -> f64 {
    (-(k - 2.0) * (k - 2.0)).exp()
}

/// `e^{-ip·z} f(k)` with distinct helicity profiles.
fn s_wave(g: &Arc<MomentumGrid>, z: Vec3) -> HelicityAmplitude {
    HelicityAmplitude::from_fn(g, |n, h| {
        let w = match h {
            Helicity::Plus => C64::new(0.6, 0.2),
            Helicity::Minus => C64::new(-0.1, 0.7) * n.k.cos(),
        };
        w * radial(n.k) * cis(-n.p.dot(&z))
    })
}

fn gaussian(g: &Arc<MomentumGrid>, p0: Vec3, sigma: f64, x0: Vec3) -> HelicityAmplitude {
    from_spec(&StateSpec::gaussian(p0, sigma, x0, [re(0.6), C64::new(0.0, 0.8)]), g).unwrap().state
}

fn difference_norm(a: &HelicityAmplitude, b: &HelicityAmplitude) -> f64 {
    let d = a.map(|i, _, h, z| z - b.component(h)[i]);
    d.norm()
}

#[test]
fn projection_fixes_the_detected_subspace() {
    let g = grid();
    let z = Vec3::new(0.4, -0.3, 0.9);
    let psi = s_wave(&g, z);
    let p = project_detected(&psi, &z).to_amplitude();
    assert!(difference_norm(&p, &psi) < 1e-10 * psi.norm());
    assert!(detected_defect(&psi, &z) < 1e-10);

    let generic = gaussian(&g, Vec3::new(0.5, 0.0, 1.0), 0.8, Vec3::new(0.0, 1.0, 0.0));
    let once = project_detected(&generic, &z).to_amplitude();
    let twice = project_detected(&once, &z).to_amplitude();
    assert!(difference_norm(&twice, &once) < 1e-12 * generic.norm());
    assert!(once.norm() < generic.norm());
}

#[test]
fn odd_angular_state_has_no_s_wave() {
    let g = grid();
    let z = Vec3::new(0.2, 0.5, -0.4);
    let axis = Vec3::new(1.0, 2.0, -0.5).normalize();
    let psi = HelicityAmplitude::from_fn(&g, |n, _| re(radial(n.k)) * (n.p.dot(&axis) / n.k) * cis(-n.p.dot(&z)));
    let det = project_detected(&psi, &z);
    assert!(det.to_amplitude().norm() < 1e-10 * psi.norm());
    let total = density_of(&det, (-30.0, 30.0), 1201).unwrap().total_probability;
    assert!(total < 1e-8, "{total}");
}

#[test]
fn constraint_residual_separates_projected_and_generic_states() {
    let g = grid();
    let z = Vec3::new(0.3, -0.2, 0.5);
    let probes = [Vec3::new(0.5, 1.0, 1.5), Vec3::new(-1.2, 0.4, 2.0), Vec3::new(2.0, -1.0, -0.7)];
    let generic = gaussian(&g, Vec3::new(0.5, 0.0, 1.0), 0.8, Vec3::new(0.0, 1.0, 0.0));
    let det = project_detected(&generic, &z);
    let r = constraint_residual(&det, &probes, Derivative::Richardson { h: 1e-3 }).unwrap();
    assert!(r < 1e-10, "projected {r:e}");

    let spec = StateSpec::gaussian(Vec3::new(0.5, 0.0, 1.0), 0.8, Vec3::new(0.0, 1.0, 0.0), [re(0.6), C64::new(0.0, 0.8)]);
    let raw = constraint_residual_analytic(&GaussianState(spec.clone()), &z, &probes).unwrap();
    assert!(raw > 0.1, "generic {raw}");

    // moving the state and the detector together changes nothing
    let a = Vec3::new(1.0, -2.0, 0.5);
    let mut moved = spec;
    moved.center_x = (Vec3::from(moved.center_x) + a).into();
    let shifted = constraint_residual_analytic(&GaussianState(moved), &(z + a), &probes).unwrap();
    assert!((shifted - raw).abs() < 1e-12 * raw, "{shifted} vs {raw}");
    let det_moved = project_detected(&generic.translated(&a), &(z + a));
    let r_moved = constraint_residual(&det_moved, &probes, Derivative::Richardson { h: 1e-3 }).unwrap();
    assert!(r_moved < 1e-10);
}

#[test]
fn radial_amplitude_matches_the_shell_oracle() {
    let g = grid();
    let z = Vec3::new(0.5, 0.2, -0.3);
    let x0 = Vec3::new(-0.4, 1.1, 0.6);
    let d = (z - x0).norm();
    let psi = HelicityAmplitude::from_fn(&g, |n, _| re(radial(n.k)) * cis(-n.p.dot(&x0)));
    let det = project_detected(&psi, &z);
    let gk = radial_detected_amplitude(&psi, &z);
    for (i, &k) in g.k_nodes().iter().enumerate() {
        let phi = det.profile(Helicity::Plus)[i];
        assert!((gk[0][i] - phi * (4.0 * PI * k)).norm() < 1e-13 * (1.0 + gk[0][i].norm()));
        let oracle = 4.0 * PI * k * radial(k) * sinc(k * d);
        assert!((gk[0][i] - oracle).norm() < 1e-8, "k={k}: {} vs {oracle}", gk[0][i]);
    }
    // isotropic state seen from the origin
    let iso = HelicityAmplitude::from_fn(&g, |n, _| re(radial(n.k)));
    let gi = radial_detected_amplitude(&iso, &Vec3::zeros());
    for (i, &k) in g.k_nodes().iter().enumerate() {
        assert!((gi[1][i] - 4.0 * PI * k * radial(k)).norm() < 1e-13 * 4.0 * PI * k);
    }
}

#[test]
fn time_translation_covariance_and_reality() {
    let g = grid();
    let z = Vec3::new(0.0, 0.0, 0.5);
    let psi = gaussian(&g, Vec3::new(0.0, 0.3, 1.2), 0.8, Vec3::new(0.2, 0.0, -1.0));
    let t0 = 1.7;
    let later = evolve(&psi, t0).state;
    let ts: Vec<f64> = (0..41).map(|i| -6.0 + 0.3 * i as f64).collect();
    let shifted: Vec<f64> = ts.iter().map(|t| t + t0).collect();
    let a_new = time_amplitudes(&project_detected(&later, &z), &ts);
    let a_old = time_amplitudes(&project_detected(&psi, &z), &shifted);
    for l in 0..2 {
        for i in 0..ts.len() {
            assert!((a_new[l][i] - a_old[l][i]).norm() < 1e-10, "t={}", ts[i]);
        }
    }

    // real g: isotropic real profile at the origin
    let iso = HelicityAmplitude::from_fn(&g, |n, _| re(radial(n.k)));
    for t in [0.3, 1.0, 4.5] {
        let (p, m) = (time_amplitude(&iso, &Vec3::zeros(), t), time_amplitude(&iso, &Vec3::zeros(), -t));
        assert!((m[0] - p[0].conj()).norm() < 1e-14 && (m[1] - p[1].conj()).norm() < 1e-14);
    }
}

fn flight_grid(n_k: usize, n_theta: usize) -> Arc<MomentumGrid> {
    MomentumGrid::build(GridParams::new(n_k, n_theta, 4, 6.0, 14.0, RadialMap::Linear).with_polar_map(PolarMap::North { power: 3 })).unwrap()
}

fn flight_state(g: &Arc<MomentumGrid>) -> HelicityAmplitude {
    gaussian(g, Vec3::new(0.0, 0.0, 10.0), 0.5, Vec3::new(0.0, 0.0, -5.0))
}

#[test]
fn gaussian_arrives_at_the_classical_flight_time() {
    let mut means = Vec::new();
    for (n_k, n_theta) in [(40, 48), (48, 48), (64, 64)] {
        let g = flight_grid(n_k, n_theta);
        let d = arrival_density(&flight_state(&g), &Vec3::zeros(), (-5.0, 15.0), 801).unwrap();
        assert!(d.window_warning.is_none());
        assert!((d.total_probability - d.detected_norm).abs() < 1e-3 * d.detected_norm);
        means.push(d.mean_time.unwrap());
    }
    let last = *means.last().unwrap();
    assert!((last - 5.0).abs() < 0.1, "{means:?}");
    // refinement has converged well inside the tolerance
    assert!((means[2] - means[1]).abs() < 1e-6, "{means:?}");

    let g = flight_grid(48, 48);
    let d = arrival_density(&flight_state(&g), &Vec3::zeros(), (-5.0, 15.0), 801).unwrap();
    let peak = d.t_samples[d.density.iter().enumerate().fold(0, |b, (i, &v)| if v > d.density[b] { i } else { b })];
    let mean = d.mean_time.unwrap();
    let var = d.t_samples.iter().zip(&d.density).map(|(t, p)| (t - mean).powi(2) * p).sum::<f64>() * 0.025 / d.total_probability;
    assert!((peak - 5.0).abs() < var.sqrt(), "peak {peak}, σ_t {}", var.sqrt());
}

#[test]
fn translating_the_setup_leaves_the_density_unchanged() {
    let g = flight_grid(48, 48);
    let psi = flight_state(&g);
    let a = Vec3::new(1.5, -0.7, 3.0);
    let d0 = arrival_density(&psi, &Vec3::zeros(), (-5.0, 15.0), 401).unwrap();
    let d1 = arrival_density(&psi.translated(&a), &a, (-5.0, 15.0), 401).unwrap();
    for (x, y) in d0.density.iter().zip(&d1.density) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn time_operator_moment_matches_the_povm_mean() {
    let g = flight_grid(48, 48);
    let det = project_detected(&flight_state(&g), &Vec3::zeros());
    let d = density_of(&det, (-5.0, 15.0), 801).unwrap();
    let m = det.time_expectation(RadialDerivative::Spectral);
    assert!(m.im.abs() < 1e-8, "{m}");
    assert!((m.re - d.mean_time.unwrap()).abs() < 1e-3, "{m} vs {:?}", d.mean_time);
    // a generic near-field state; k_min is lowered so the kink of kΦ at
    // the origin leaks nothing through the cutoff
    let g = MomentumGrid::build(GridParams::new(40, 24, 32, 1e-5, 6.5, RadialMap::Linear)).unwrap();
    let z = Vec3::new(0.0, 0.0, 1.0);
    let det = project_detected(&gaussian(&g, Vec3::new(0.0, 0.0, 2.0), 0.6, Vec3::new(0.0, 0.0, -2.0)), &z);
    let d = density_of(&det, (-30.0, 30.0), 2401).unwrap();
    let m = det.time_expectation(RadialDerivative::default());
    assert!(m.im.abs() < 1e-8, "{m}");
    assert!((m.re - d.mean_time.unwrap()).abs() < 1e-3, "{m} vs {:?}", d.mean_time);
}

#[test]
fn spline_time_operator_converges_at_second_order() {
    // u = kΦ = e^{ikt₀} e^{-2(k-4)²} has ⟨t̂⟩ = t₀ exactly
    let t0 = 1.5;
    let mut errs = Vec::new();
    for n_k in [48, 96, 192] {
        let g = MomentumGrid::build(GridParams::new(n_k, 2, 2, 0.5, 7.5, RadialMap::Linear)).unwrap();
        let prof: Vec<C64> = g.k_nodes().iter().map(|&k| cis(k * t0) * (-2.0 * (k - 4.0) * (k - 4.0)).exp() / k).collect();
        let det = DetectedState::new(&g, Vec3::zeros(), prof, vec![C64::new(0.0, 0.0); n_k]).unwrap();
        let spectral = det.time_expectation(RadialDerivative::Spectral);
        assert!((spectral - t0).norm() < 1e-10, "{spectral}");
        errs.push((det.time_expectation(RadialDerivative::Spline) - t0).norm());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }
}

#[test]
fn completeness_holds_for_random_states() {
    let g = grid();
    let mut rng = SplitMix(0xA11);
    for _ in 0..12 {
        let p0 = rng.vec_in_cube(1.0);
        let sigma = rng.range(0.5, 0.7);
        let x0 = rng.vec_in_cube(1.5);
        let z = rng.vec_in_cube(1.5);
        let psi = gaussian(&g, p0, sigma, x0);
        let d = arrival_density(&psi, &z, (-30.0, 30.0), 2401).unwrap();
        assert!(d.density.iter().all(|&p| p >= 0.0));
        assert!((d.total_probability - d.detected_norm).abs() < 1e-3 * d.detected_norm, "{} vs {}", d.total_probability, d.detected_norm);
        assert!(d.total_probability <= psi.norm_sqr() * (1.0 + 1e-3));
    }
}

#[test]
fn window_growth_never_loses_probability() {
    let g = grid();
    let psi = gaussian(&g, Vec3::new(0.0, 0.0, 1.0), 0.7, Vec3::new(0.3, 0.0, -1.0));
    let det = project_detected(&psi, &Vec3::zeros());
    let mut last = 0.0;
    for half in [1.0f64, 2.0, 4.0, 8.0, 16.0] {
        let n = (2.0 * half / 0.05).round() as usize + 1;
        let d = density_of(&det, (-half, half), n).unwrap();
        assert!(d.total_probability >= last * (1.0 - 1e-12), "{half}: {} < {last}", d.total_probability);
        last = d.total_probability;
    }
    let narrow = density_of(&det, (-1.0, 1.0), 41).unwrap();
    assert!(narrow.window_warning.is_some());
}

#[test]
fn csv_has_the_expected_columns() {
    let g = flight_grid(40, 48);
    let d = arrival_density(&flight_state(&g), &Vec3::zeros(), (0.0, 10.0), 5).unwrap();
    let csv = d.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,density,cumulative");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 10.0);
    assert_eq!(last[2], d.total_probability);
}

#[test]
fn kernel_reproduces_the_regularized_overlap() {
    let r = kernel_overlap(0.0, 0.1, 400.0).unwrap();
    assert!((r.quadrature.re - 5.0 / (PI * PI)).abs() < 1e-6);
    assert!(r.quadrature.im.abs() < 1e-12);
    for (dt, eps, k) in [(0.0, 0.1, 400.0), (1.3, 0.05, 80.0), (-7.0, 0.2, 30.0), (50.0, 0.01, 200.0)] {
        let r = kernel_overlap(dt, eps, k).unwrap();
        assert!((r.quadrature - r.truncated).norm() < 1e-10 * r.truncated.norm(), "{dt} {eps} {k}");
    }
    let mut prev = f64::INFINITY;
    for dt in [1.0, 10.0, 100.0, 1000.0] {
        let v = kernel_overlap(dt, 0.1, 400.0).unwrap().quadrature.norm();
        assert!(v < prev);
        prev = v;
    }
    assert!(prev < 1e-3);
    assert!((default_epsilon(100.0) - 0.1).abs() < 1e-16);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn density_is_positive_and_translation_invariant(
        ax in -2.0f64..2.0, ay in -2.0f64..2.0, az in -2.0f64..2.0,
        zx in -1.0f64..1.0, zz in -1.0f64..1.0,
    ) {
        let g = MomentumGrid::build(GridParams::new(24, 16, 24, 1e-3, 6.5, RadialMap::Linear)).unwrap();
        let psi = gaussian(&g, Vec3::new(0.3, 0.0, 1.0), 0.8, Vec3::new(0.0, 0.5, -0.5));
        let z = Vec3::new(zx, 0.0, zz);
        let a = Vec3::new(ax, ay, az);
        let d0 = arrival_density(&psi, &z, (-10.0, 10.0), 201).unwrap();
        let d1 = arrival_density(&psi.translated(&a), &(z + a), (-10.0, 10.0), 201).unwrap();
        for (x, y) in d0.density.iter().zip(&d1.density) {
            prop_assert!(*x >= 0.0);
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}
