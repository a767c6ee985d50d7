mod common;

use common::SplitMix;
use photonkin::photon_state::{from_spec, StateSpec};
use photonkin::polarization::{frame, Frame};
use photonkin::position_op::*;
use photonkin::{GridParams, Helicity, MomentumGrid, RadialMap, Vec3, Vec3C, C64};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn gaussian() -> GaussianState {
    GaussianState(StateSpec::gaussian(Vec3::new(0.3, -0.2, 1.0), 0.5, Vec3::new(0.5, 0.0, -0.4), [re(0.6), C64::new(0.0, 0.8)]))
}

fn probes(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = SplitMix(seed);
    (0..n).map(|_| Vec3::new(0.3, -0.2, 1.0) + rng.vec_in_cube(0.5)).collect()
}

#[test]
fn commutators_with_default_steps() {
    let field = VectorRep(gaussian());
    let ps = probes(20, 1);
    let scale = ps.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let qq = commutator_check(CommutatorKind::Qq, &field, &ps, PositionForm::Expanded, Derivative::default_for(scale)).unwrap();
    println!("qq {:e}", qq.residual_max);
    assert!(qq.residual_max < 1e-5, "{qq:?}");
    let qp = commutator_check(CommutatorKind::Qp, &field, &ps, PositionForm::Expanded, Derivative::Exact).unwrap();
    println!("qp {:e}", qp.residual_max);
    assert!(qp.residual_max < 1e-6);
    let qw = commutator_check(CommutatorKind::QW, &field, &ps, PositionForm::Expanded, Derivative::Exact).unwrap();
    println!("qW {:e}", qw.residual_max);
    assert!(qw.residual_max < 1e-7);
    let qw_fd = commutator_check(CommutatorKind::QW, &field, &ps, PositionForm::Expanded, Derivative::default_for(scale)).unwrap();
    println!("qW fd {:e}", qw_fd.residual_max);
    assert!(qw_fd.residual_max < 1e-5);
    let json = serde_json::to_string(&qq).unwrap();
    assert!(json.contains("\"kind\":\"qq\""));
}

#[test]
fn commutator_residuals_converge_at_second_order() {
    let field = VectorRep(gaussian());
    let ps = probes(6, 2);
    let steps = [0.04, 0.02, 0.01];
    for kind in [CommutatorKind::Qq, CommutatorKind::QW, CommutatorKind::Qp] {
        let study = convergence_study(kind, &field, &ps, PositionForm::Expanded, &steps).unwrap();
        println!("{kind:?} {:?} order {}", study.residuals, study.order);
        assert!(study.order >= 1.9, "{kind:?}: {study:?}");
    }
}

#[test]
fn pryce_operator_alone_does_not_commute() {
    let field = VectorRep(gaussian());
    let ps = probes(6, 3);
    let r = commutator_check(CommutatorKind::Qq, &field, &ps, PositionForm::PryceOnly, Derivative::Richardson { h: 1e-3 }).unwrap();
    println!("pryce {:e}", r.residual_max);
    assert!(r.residual_max > 1e-2);
}

#[test]
fn compact_and_expanded_forms_agree() {
    let field = VectorRep(gaussian());
    for p in probes(50, 4) {
        for a in 0..3 {
            let e = apply_position_vector(&field, a, &p, PositionForm::Expanded, Derivative::Exact).unwrap();
            let c = apply_position_vector(&field, a, &p, PositionForm::Compact, Derivative::Exact).unwrap();
            assert!((e - c).norm() < 1e-9 * (1.0 + e.norm()), "{}", (e - c).norm());
            let cf = apply_position_vector(&field, a, &p, PositionForm::Compact, Derivative::Richardson { h: 1e-3 }).unwrap();
            assert!((e - cf).norm() < 1e-9 * (1.0 + e.norm()), "fd {}", (e - cf).norm());
        }
    }
}

#[test]
fn localized_states_are_eigenfunctions() {
    let mut rng = SplitMix(5);
    for _ in 0..50 {
        let q = rng.vec_in_cube(3.0);
        let h = if rng.uniform() < 0.5 { Helicity::Plus } else { Helicity::Minus };
        let v = VectorRep(PositionEigenstate { q, helicity: h });
        let p = rng.vec_in_cube(2.0);
        let val = v.value(&p).unwrap();
        for a in 0..3 {
            let r = apply_position_vector(&v, a, &p, PositionForm::Expanded, Derivative::Exact).unwrap();
            assert!((r - val * re(q[a])).norm() < 1e-8 * val.norm());
        }
    }
}

#[test]
fn position_keeps_states_transverse_and_maps_to_i_d_dp() {
    let st = gaussian();
    let field = VectorRep(st.clone());
    for p in probes(40, 6) {
        let f = frame(&p).unwrap();
        let k = p.norm();
        for a in 0..3 {
            let q = apply_position_vector(&field, a, &p, PositionForm::Expanded, Derivative::Exact).unwrap();
            let along = q.x * p.x + q.y * p.y + q.z * p.z;
            assert!(along.norm() < 1e-8 * k * q.norm());
            // project through ε*/√(2k) and compare with i∂ψ
            let hel = apply_position_helicity(&st, a, &p, Derivative::Exact).unwrap();
            for l in Helicity::BOTH {
                let proj = f.polarization(l).dotc(&q) / (2.0 * k).sqrt();
                assert!((proj - hel[l.index()]).norm() < 1e-7 * (1.0 + hel[l.index()].norm()));
            }
            let fd = apply_position_helicity(&st, a, &p, Derivative::Richardson { h: 1e-3 }).unwrap();
            assert!((fd[0] - hel[0]).norm() < 1e-8 && (fd[1] - hel[1]).norm() < 1e-8);
        }
    }
}

/// Spinless `i∇^a` acting on the vector representation.
fn spinless(field: &dyn VectorField, a: usize, p: &Vec3) -> Vec3C {
    nabla_weighted(field, a, p, Derivative::Exact).unwrap() * C64::new(0.0, 1.0)
}

#[test]
fn covariant_derivative_is_spinless_gradient_in_helicity_basis() {
    let st = gaussian();
    let field = VectorRep(st.clone());
    for p in probes(40, 7) {
        let f = Frame::at(&p).unwrap();
        let s = (2.0 * p.norm()).sqrt();
        for a in 0..3 {
            let v = spinless(&field, a, &p);
            let cov = covariant_derivative(&st, a, &p, Derivative::Exact).unwrap();
            for l in Helicity::BOTH {
                let proj = f.polarization(l).dotc(&v) / s;
                assert!((proj - cov[l.index()]).norm() < 1e-8 * (1.0 + cov[l.index()].norm()));
            }
        }
    }
}

#[test]
fn exact_gradient_matches_richardson_differences() {
    let field = VectorRep(gaussian());
    for p in probes(30, 8) {
        let exact = field.jacobian(&p).unwrap().unwrap();
        for a in 0..3 {
            let fd = nabla_weighted(&field, a, &p, Derivative::Central { h: 1e-4 * p.norm() }).unwrap();
            let ex = nabla_weighted(&field, a, &p, Derivative::Exact).unwrap();
            assert!((fd - ex).norm() < 1e-6 * (1.0 + ex.norm()));
            assert!(exact[a].iter().all(|z| z.re.is_finite()));
        }
    }
}

#[test]
fn helicity_blocks_stay_separate() {
    let st = GaussianState(StateSpec::gaussian(Vec3::new(0.3, -0.2, 1.0), 0.5, Vec3::zeros(), [re(1.0), re(0.0)]));
    for p in probes(10, 9) {
        for a in 0..3 {
            let q = apply_position_helicity(&st, a, &p, Derivative::Exact).unwrap();
            assert_eq!(q[1], re(0.0));
            let c = covariant_derivative(&st, a, &p, Derivative::Exact).unwrap();
            assert_eq!(c[1], re(0.0));
        }
    }
}

#[test]
fn expectation_of_position() {
    // the imaginary part is a surface flux of |ψ|², so the shell must reach its tail
    let g = MomentumGrid::build(GridParams::new(28, 24, 24, 1e-3, 8.5, RadialMap::Linear)).unwrap();
    let x0 = Vec3::new(0.7, -0.4, 1.5);
    let spec = StateSpec::gaussian(Vec3::new(0.0, 0.0, 1.0), 1.0, x0, [re(0.6), re(0.8)]);
    let e = expectation_position_analytic(&GaussianState(spec.clone()), &g).unwrap();
    for a in 0..3 {
        assert!((e.value[a] - x0[a]).abs() < 1e-6, "{e:?}");
        assert!(e.imaginary_residue[a].abs() < 1e-8);
    }
    // same result from gridded samples when the state is smooth in (k, cosθ, φ)
    let on_axis = StateSpec::gaussian(Vec3::new(0.0, 0.0, 1.0), 1.0, Vec3::new(0.0, 0.0, -2.0), [re(1.0), re(0.0)]);
    let psi = from_spec(&on_axis, &g).unwrap().state;
    let e = expectation_position(&psi);
    assert!((e.value[2] + 2.0).abs() < 1e-6 && e.value[0].abs() < 1e-6 && e.value[1].abs() < 1e-6, "{e:?}");
    // parity and translation
    let sym = StateSpec::gaussian(Vec3::new(0.0, 0.0, 1.0), 1.0, Vec3::zeros(), [re(1.0), re(0.0)]);
    let e0 = expectation_position(&from_spec(&sym, &g).unwrap().state);
    assert!(e0.value.iter().all(|x| x.abs() < 1e-10), "{e0:?}");
    let shifted = expectation_position(&from_spec(&sym, &g).unwrap().state.translated(&Vec3::new(0.0, 0.0, 0.75)));
    assert!((shifted.value[2] - 0.75).abs() < 1e-6);
}
