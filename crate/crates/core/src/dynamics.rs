//! Free evolution under `H = |p|`, Heisenberg-picture expectation checks and
//! residuals of the first-order Maxwell equations for reconstructed fields.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::photon_state::{riemann_silberstein, HelicityAmplitude};
use crate::polarization::{spin_dot, Frame, Helicity};
use crate::position_op::{expectation_position_analytic, AnalyticState, Evolved};
use crate::sphgrid::MomentumGrid;
use crate::{Vec3, Vec3C, C64};

fn cis(x: f64) -> C64 {
    let (s, c) = x.sin_cos();
    C64::new(c, s)
}

/// State after free evolution for a time `t`.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub state: HelicityAmplitude,
    pub t: f64,
}

/// `ψ_λ(p) ↦ e^{-i|p|t} ψ_λ(p)`.
pub fn evolve(psi: &HelicityAmplitude, t: f64) -> EvolutionResult {
    EvolutionResult { state: psi.map(|_, n, _, z| z * cis(-n.k * t)), t }
}

/// `⟨H⟩ = Σ_λ ∫d³p |p| |ψ_λ|²` (not divided by the norm).
pub fn energy(psi: &HelicityAmplitude) -> f64 {
    let [a, b] = psi.components();
    psi.grid().integrate_flat_with(|i, n| C64::new(n.k * (a[i].norm_sqr() + b[i].norm_sqr()), 0.0)).re
}

/// `⟨p̂⟩` and `⟨p̂/|p|⟩`, normalized.
pub fn momentum_moments(psi: &HelicityAmplitude) -> ([f64; 3], [f64; 3]) {
    let [a, b] = psi.components();
    let g = psi.grid();
    let norm = psi.norm_sqr();
    let m = |f: &(dyn Fn(&crate::sphgrid::Node) -> f64 + Sync)| g.integrate_flat_with(|i, n| C64::new(f(n) * (a[i].norm_sqr() + b[i].norm_sqr()), 0.0)).re / norm;
    let p = std::array::from_fn(|ax| m(&|n| n.p[ax]));
    let v = std::array::from_fn(|ax| m(&|n| n.p[ax] / n.k));
    (p, v)
}

/// One row of the Ehrenfest table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestRow {
    pub t: f64,
    pub position: [f64; 3],
    pub predicted: [f64; 3],
    /// `|⟨q̂^a⟩_t - ⟨q̂^a⟩_0 - t⟨p̂^a/|p|⟩|` per axis.
    pub residual: [f64; 3],
    /// `⟨p̂^a⟩_t - ⟨p̂^a⟩_0` per axis.
    pub momentum_drift: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestReport {
    pub initial_position: [f64; 3],
    pub velocity: [f64; 3],
    pub rows: Vec<EhrenfestRow>,
    pub residual_max: f64,
    pub momentum_drift_max: f64,
}

fn sample(state: &dyn AnalyticState, grid: &Arc<MomentumGrid>) -> Result<HelicityAmplitude> {
    let amps: Vec<[C64; 2]> = grid.nodes().iter().map(|n| state.amplitude(&n.p)).collect();
    HelicityAmplitude::new(grid, amps.iter().map(|x| x[0]).collect(), amps.iter().map(|x| x[1]).collect())
}

/// Checks `⟨q̂⟩_t = ⟨q̂⟩_0 + t⟨p̂/|p|⟩` with exact gradients of the evolved state.
pub fn ehrenfest_check<S: AnalyticState + Clone>(state: &S, grid: &Arc<MomentumGrid>, t_samples: &[f64]) -> Result<EhrenfestReport> {
    let x0 = expectation_position_analytic(state, grid)?.value;
    let psi0 = sample(state, grid)?;
    let (p0, v) = momentum_moments(&psi0);
    let mut rows = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let evolved = Evolved { state: state.clone(), t };
        let q = expectation_position_analytic(&evolved, grid)?.value;
        let (pt, _) = momentum_moments(&sample(&evolved, grid)?);
        let predicted: [f64; 3] = std::array::from_fn(|a| x0[a] + t * v[a]);
        rows.push(EhrenfestRow {
            t,
            position: q,
            predicted,
            residual: std::array::from_fn(|a| (q[a] - predicted[a]).abs()),
            momentum_drift: std::array::from_fn(|a| pt[a] - p0[a]),
        });
    }
    let residual_max = rows.iter().flat_map(|r| r.residual).fold(0.0, f64::max);
    let momentum_drift_max = rows.iter().flat_map(|r| r.momentum_drift.map(f64::abs)).fold(0.0, f64::max);
    Ok(EhrenfestReport { initial_position: x0, velocity: v, rows, residual_max, momentum_drift_max })
}

/// Cubic lattice of evaluation points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub shape: [usize; 3],
}

impl Lattice {
    /// Lattice centred on `center`.
    pub fn centered(center: Vec3, spacing: f64, shape: [usize; 3]) -> Self {
        let origin = std::array::from_fn(|a| center[a] - 0.5 * spacing * (shape[a].max(1) - 1) as f64);
        Self { origin, spacing, shape }
    }

    pub fn points(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                for k in 0..self.shape[2] {
                    out.push(Vec3::new(
                        self.origin[0] + self.spacing * i as f64,
                        self.origin[1] + self.spacing * j as f64,
                        self.origin[2] + self.spacing * k as f64,
                    ));
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!("{}x{}x{} points, spacing {}, origin {:?}", self.shape[0], self.shape[1], self.shape[2], self.spacing, self.origin)
    }
}

/// Per-helicity Maxwell residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelicityResidual {
    pub helicity: Helicity,
    pub div_residual: f64,
    pub curl_residual: f64,
    pub field_rms: f64,
}

/// Residuals of `∇·F = 0` and `i∂_tF = λ∇×F`, both divided by `k_max ‖F‖`
/// (root mean square over the lattice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResidualReport {
    pub div_residual: f64,
    pub curl_residual: f64,
    pub per_helicity: Vec<HelicityResidual>,
    pub dt_step: f64,
    pub fd_step: f64,
    pub t: f64,
    pub x_lattice: String,
}

/// Finite-difference steps for [`maxwell_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellSteps {
    pub h: f64,
    pub dt: f64,
}

impl MaxwellSteps {
    /// `h = dt = 0.01/k_max`.
    pub fn default_for(k_max: f64) -> Self {
        Self { h: 0.01 / k_max, dt: 0.01 / k_max }
    }
}

pub fn maxwell_residual(psi: &HelicityAmplitude, lattice: &Lattice, t: f64, steps: MaxwellSteps) -> Result<MaxwellResidualReport> {
    let k_max = psi.grid().params().k_max;
    let limit = std::f64::consts::PI / k_max;
    if lattice.spacing > limit {
        return Err(Error::LatticeTooCoarse { spacing: lattice.spacing, limit });
    }
    if !(steps.h > 0.0 && steps.dt > 0.0 && steps.h.is_finite() && steps.dt.is_finite()) {
        return Err(Error::InvalidInput(format!("finite-difference steps must be positive: {steps:?}")));
    }
    let centers = lattice.points();
    let n = centers.len();
    // centre, then ±h along each axis
    let mut pts = Vec::with_capacity(7 * n);
    for c in &centers {
        pts.push(*c);
        for a in 0..3 {
            let mut d = Vec3::zeros();
            d[a] = steps.h;
            pts.push(c + d);
            pts.push(c - d);
        }
    }
    let now = riemann_silberstein(psi, &pts, t);
    let later = riemann_silberstein(psi, &centers, t + steps.dt);
    let earlier = riemann_silberstein(psi, &centers, t - steps.dt);
    let mut per_helicity = Vec::new();
    for h in Helicity::BOTH {
        let l = h.index();
        let f = &now[l].values;
        let (mut div2, mut curl2, mut f2) = (0.0f64, 0.0f64, 0.0f64);
        for c in 0..n {
            let at = |j: usize| f[7 * c + j];
            // d[a] = ∂_a F (vector)
            let d: [Vec3C; 3] = std::array::from_fn(|a| (at(1 + 2 * a) - at(2 + 2 * a)) / C64::new(2.0 * steps.h, 0.0));
            let div = d[0][0] + d[1][1] + d[2][2];
            let curl = Vec3C::new(d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]);
            let dt = (later[l].values[c] - earlier[l].values[c]) / C64::new(2.0 * steps.dt, 0.0);
            let r = dt * C64::new(0.0, 1.0) - curl * C64::new(h.sign(), 0.0);
            div2 += div.norm_sqr();
            curl2 += r.norm_squared();
            f2 += at(0).norm_squared();
        }
        let scale = k_max * f2.sqrt();
        let ratio = |x: f64| if scale > 0.0 { x.sqrt() / scale } else { 0.0 };
        per_helicity.push(HelicityResidual { helicity: h, div_residual: ratio(div2), curl_residual: ratio(curl2), field_rms: (f2 / n.max(1) as f64).sqrt() });
    }
    Ok(MaxwellResidualReport {
        div_residual: per_helicity.iter().map(|r| r.div_residual).fold(0.0, f64::max),
        curl_residual: per_helicity.iter().map(|r| r.curl_residual).fold(0.0, f64::max),
        per_helicity,
        dt_step: steps.dt,
        fd_step: steps.h,
        t,
        x_lattice: lattice.describe(),
    })
}

/// `‖(S·p)F̂ - λ|p|F̂‖ / ‖|p|F̂‖` for one momentum-space field value.
pub fn transport_residual(f_hat: &Vec3C, p: &Vec3, h: Helicity) -> Result<f64> {
    Frame::at(p)?;
    let k = p.norm();
    let norm = k * f_hat.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let r = spin_dot(p) * f_hat - f_hat * C64::new(h.sign() * k, 0.0);
    Ok(r.norm() / norm)
}

/// `F̂(p,λ) = √(2|p|) i ε(p,λ) ψ_λ(p)`.
pub fn rs_integrand(state: &dyn AnalyticState, p: &Vec3, h: Helicity) -> Result<Vec3C> {
    let f = Frame::at(p)?;
    let psi = state.amplitude(p)[h.index()];
    Ok(f.polarization(h) * (psi * C64::new(0.0, (2.0 * p.norm()).sqrt())))
}

/// Worst [`transport_residual`] of the field integrand over probes and helicities.
pub fn helicity_transport_check(state: &dyn AnalyticState, probes: &[Vec3]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in probes {
        for h in Helicity::BOTH {
            worst = worst.max(transport_residual(&rs_integrand(state, p, h)?, p, h)?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_state::{inner, StateSpec};
    use crate::sphgrid::{GridParams, RadialMap};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn state() -> HelicityAmplitude {
        let g = MomentumGrid::build(GridParams::new(12, 12, 12, 0.2, 5.0, RadialMap::Linear)).unwrap();
        let spec = StateSpec::gaussian(Vec3::new(0.2, 0.3, 1.5), 0.6, Vec3::new(0.1, 0.0, 0.0), [re(0.6), C64::new(0.0, 0.8)]);
        HelicityAmplitude::from_fn(&g, |n, h| spec.amplitude(&n.p, h))
    }

    #[test]
    fn evolution_is_unitary_and_a_group() {
        let psi = state();
        let zero = evolve(&psi, 0.0).state;
        assert_eq!(zero.components(), psi.components());
        let a = evolve(&evolve(&psi, 1.3).state, 2.1).state;
        let b = evolve(&psi, 3.4).state;
        for l in 0..2 {
            for (x, y) in a.components()[l].iter().zip(&b.components()[l]) {
                assert!((x - y).norm() < 1e-14);
            }
        }
        assert!((evolve(&psi, 7.0).state.norm_sqr() - psi.norm_sqr()).abs() < 1e-13);
        assert!((energy(&evolve(&psi, 7.0).state) - energy(&psi)).abs() < 1e-13);
        let phi = psi.translated(&Vec3::new(0.3, 0.0, 0.0));
        let before = inner(&psi, &phi).unwrap();
        let after = inner(&evolve(&psi, 4.0).state, &evolve(&phi, 4.0).state).unwrap();
        assert!((before - after).norm() < 1e-13);
    }

    #[test]
    fn coarse_lattice_is_rejected() {
        let psi = state();
        let lat = Lattice::centered(Vec3::zeros(), 1.0, [2, 2, 2]);
        assert!(matches!(maxwell_residual(&psi, &lat, 0.0, MaxwellSteps::default_for(5.0)), Err(Error::LatticeTooCoarse { .. })));
    }

    #[test]
    fn zero_state_has_zero_residuals() {
        let psi = state();
        let zero = HelicityAmplitude::zeros(psi.grid());
        let lat = Lattice::centered(Vec3::zeros(), 0.3, [2, 1, 1]);
        let r = maxwell_residual(&zero, &lat, 0.0, MaxwellSteps::default_for(5.0)).unwrap();
        assert_eq!(r.div_residual, 0.0);
        assert_eq!(r.curl_residual, 0.0);
    }

    #[test]
    fn transport_negative_control_and_sign() {
        let p = Vec3::new(0.3, -0.4, 1.0);
        let f = Frame::at(&p).unwrap();
        let ep = f.polarization(Helicity::Plus);
        assert!(transport_residual(&ep, &p, Helicity::Plus).unwrap() < 1e-15);
        // the opposite helicity fails by 2
        assert!((transport_residual(&ep, &p, Helicity::Minus).unwrap() - 2.0).abs() < 1e-12);
        let dirty = ep + f.e_k.map(re);
        assert!(transport_residual(&dirty, &p, Helicity::Plus).unwrap() > 0.5);
    }
}
