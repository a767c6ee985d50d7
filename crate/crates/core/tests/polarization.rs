use photonkin::polarization::*;
use photonkin::{Helicity, Mat3C, Vec3, C64};
use proptest::prelude::*;

fn momentum() -> impl Strategy<Value = Vec3> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
        .prop_filter("off the polar axis", |p| p.x.hypot(p.y) > 1e-6 * p.norm() && p.norm() > 1e-3)
}

fn matrix() -> impl Strategy<Value = Mat3C> {
    prop::collection::vec(-1.0f64..1.0, 18).prop_map(|v| Mat3C::from_fn(|i, j| C64::new(v[2 * (3 * i + j)], v[2 * (3 * i + j) + 1])))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn helicity_vectors_are_an_orthonormal_transverse_eigenbasis(p in momentum()) {
        let e = [polarization_vector(&p, 1).unwrap().eps, polarization_vector(&p, -1).unwrap().eps];
        let w = helicity_matrix(&p).unwrap();
        let u = p / p.norm();
        for (i, h) in Helicity::BOTH.iter().enumerate() {
            for j in 0..2 {
                let d = e[i].dotc(&e[j]) - if i == j { 1.0 } else { 0.0 };
                prop_assert!(d.norm() < 1e-14);
            }
            prop_assert!((e[i].x * p.x + e[i].y * p.y + e[i].z * p.z).norm() < 1e-14 * p.norm());
            prop_assert!((w * e[i] - e[i] * C64::new(h.sign(), 0.0)).norm() < 1e-13);
        }
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let s = e[0][a] * e[0][b].conj() + e[1][a] * e[1][b].conj() + u[a] * u[b];
                prop_assert!((s - delta).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn frame_is_right_handed_and_rotates_the_z_axis(p in momentum()) {
        let f = frame(&p).unwrap();
        let [t, ph, k] = f.axes();
        prop_assert!((t.cross(&ph) - k).norm() < 1e-14);
        prop_assert!(t.dot(&ph).abs() < 1e-14 && t.dot(&k).abs() < 1e-14 && ph.dot(&k).abs() < 1e-14);
        let r = rotation_r(&p).unwrap();
        prop_assert!((r * Vec3::z() - p / p.norm()).norm() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn photon_frame_projection_reproduces_the_helicity_matrix(p in momentum(), m in matrix()) {
        let direct = to_helicity_rep(&m, &p).unwrap();
        let via = helicity_from_frame(&to_photon_frame(&m, &p).unwrap());
        prop_assert!((direct - via).norm() < 1e-13 * (1.0 + m.norm()));
    }
}

#[test]
fn frame_approaches_the_north_pole_convention() {
    let theta: f64 = 1e-9;
    let near = frame(&Vec3::new(theta.sin(), 0.0, theta.cos())).unwrap();
    let pole = pole_frame(1).unwrap();
    for (a, b) in near.axes().iter().zip(pole.axes().iter()) {
        assert!((a - b).norm() < 1e-8);
    }
    assert!(frame(&Vec3::new(0.0, 0.0, 2.0)).is_err());
    assert!(frame(&Vec3::zeros()).is_err());
    assert!(pole_frame(0).is_err());
}
