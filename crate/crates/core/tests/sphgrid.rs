mod common;

use common::adaptive_simpson;
use photonkin::{GridParams, MomentumGrid, PolarMap, RadialMap, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn radial_oracle<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    4.0 * PI * adaptive_simpson(&|k: f64| k * k * f(k), a, b, 1e-14)
}

#[test]
fn isotropic_gaussian_matches_radial_oracle() {
    let (a, b) = (0.01, 12.0);
    let g = MomentumGrid::build(GridParams::new(64, 4, 4, a, b, RadialMap::Linear)).unwrap();
    let got = g.integrate_flat_with(|_, n| C64::new((-n.k * n.k).exp(), 0.0)).re;
    let oracle = radial_oracle(|k| (-k * k).exp(), a, b);
    assert!((got - oracle).abs() < 1e-10 * oracle, "{got} vs {oracle}");
    // the excluded ball k < 0.01 accounts for the rest of π^{3/2}
    assert!((got - PI.powf(1.5)).abs() < 1e-5);
}

#[test]
fn shifted_shell_and_exponential_profiles() {
    for map in [RadialMap::Linear, RadialMap::Log] {
        let g = MomentumGrid::build(GridParams::new(64, 6, 6, 0.05, 14.0, map)).unwrap();
        let f1 = |k: f64| (-(k - 3.0) * (k - 3.0)).exp();
        let got = g.integrate_flat_with(|_, n| C64::new(f1(n.k), 0.0)).re;
        let oracle = radial_oracle(f1, 0.05, 14.0);
        assert!((got - oracle).abs() < 1e-10 * oracle, "{map:?}: {got} vs {oracle}");
        // the invariant measure d³p/(2|p|) on k e^{-k}
        let inv = g.integrate_invariant_with(|_, n| C64::new(n.k * (-n.k).exp(), 0.0)).re;
        let oracle = radial_oracle(|k| 0.5 * (-k).exp(), 0.05, 14.0);
        assert!((inv - oracle).abs() < 1e-10 * oracle, "{map:?}: {inv} vs {oracle}");
    }
}

#[test]
fn collimated_gaussian_on_a_north_mapped_grid() {
    // e^{-|p-p0|²} with p0 = 10 ẑ integrates to π^{3/2}
    let g = MomentumGrid::build(GridParams::new(48, 48, 12, 5.0, 15.0, RadialMap::Linear).with_polar_map(PolarMap::North { power: 3 })).unwrap();
    let got = g.integrate_flat_with(|_, n| C64::new((-(n.p - photonkin::Vec3::new(0.0, 0.0, 10.0)).norm_squared()).exp(), 0.0)).re;
    assert!((got - PI.powf(1.5)).abs() < 1e-10 * PI.powf(1.5), "{got}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn azimuthal_modes_vanish(n_phi in 3usize..20, m_frac in 0.0f64..1.0) {
        let g = MomentumGrid::build(GridParams::new(4, 4, n_phi, 0.5, 2.0, RadialMap::Linear)).unwrap();
        let m_max = (n_phi - 1) / 2;
        prop_assume!(m_max >= 1);
        let m = 1 + ((m_frac * m_max as f64) as usize).min(m_max - 1);
        let v = g.integrate_flat_with(|_, n| C64::from_polar(1.0, m as f64 * n.phi));
        prop_assert!(v.norm() < 1e-12);
    }

    #[test]
    fn weights_are_positive_and_sum_to_the_shell_volume(
        n_k in 2usize..12, n_t in 2usize..12, n_p in 2usize..12, lo in 0.01f64..1.0, span in 0.1f64..10.0, log in any::<bool>(),
    ) {
        let map = if log { RadialMap::Log } else { RadialMap::Linear };
        let n_k = if log { 24 + n_k } else { n_k };
        let g = MomentumGrid::build(GridParams::new(n_k, n_t, n_p, lo, lo + span, map)).unwrap();
        prop_assert!(g.nodes().iter().all(|n| n.weight > 0.0 && n.sin_theta > 0.0));
        let vol = g.integrate_flat_with(|_, _| C64::new(1.0, 0.0)).re;
        let exact = 4.0 * PI / 3.0 * ((lo + span).powi(3) - lo.powi(3));
        // the linear map integrates k² exactly; the log map converges spectrally
        let tol = if log { 1e-6 } else { 1e-12 };
        prop_assert!((vol - exact).abs() < tol * exact, "{vol} vs {exact}");
    }
}
