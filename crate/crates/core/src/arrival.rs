//! Time of arrival at a detector point `z`.
//!
//! The detected subspace `H_z` holds the states `e^{-ip·z} Φ(|p|, λ)`, the
//! s-wave sector about `z`. The arrival amplitude is
//! `A_λ(t; z) = √π (2π)^{-3/2} ∫dk e^{-ikt} g_λ(k; z)` with
//! `g = 4πkΦ`; the `√π` makes `∫dt Σ_λ |A_λ|² = ‖P_zψ‖²` exact, so
//! `P_ψ(t; z) = Σ_λ |A_λ|²` is a normalized POVM density on `H_z`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::photon_state::HelicityAmplitude;
use crate::polarization::Helicity;
use crate::position_op::{AnalyticState, Derivative};
use crate::quadrature::{composite_gauss_legendre, CubicSpline};
use crate::sphgrid::MomentumGrid;
use crate::state_io::format_float;
use crate::{Vec3, C64};

/// Total probability below which the mean arrival time is undefined.
pub const MEAN_TIME_THRESHOLD: f64 = 1e-6;

/// Boundary density, relative to the peak, above which the window is flagged.
pub const WINDOW_TOLERANCE: f64 = 1e-6;

fn cis(x: f64) -> C64 {
    let (s, c) = x.sin_cos();
    C64::new(c, s)
}

/// A state in `H_z`, stored by its radial profile `Φ(k, λ)` on the grid's radial nodes.
#[derive(Debug, Clone)]
pub struct DetectedState {
    pub z: [f64; 3],
    grid: Arc<MomentumGrid>,
    profile: [Vec<C64>; 2],
}

impl DetectedState {
    pub fn new(grid: &Arc<MomentumGrid>, z: Vec3, plus: Vec<C64>, minus: Vec<C64>) -> Result<Self> {
        if plus.len() != grid.params().n_k || minus.len() != grid.params().n_k {
            return Err(Error::InvalidState("radial profile length must equal n_k".into()));
        }
        Ok(Self { z: z.into(), grid: grid.clone(), profile: [plus, minus] })
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn detector(&self) -> Vec3 {
        Vec3::from(self.z)
    }

    pub fn profile(&self, h: Helicity) -> &[C64] {
        &self.profile[h.index()]
    }

    /// `‖Φ_z‖² = 4π Σ_λ ∫dk k² |Φ|²`.
    pub fn norm_sqr(&self) -> f64 {
        let k = self.grid.k_nodes();
        let w = self.grid.k_weights();
        4.0 * PI * (0..k.len()).map(|i| w[i] * k[i] * k[i] * (self.profile[0][i].norm_sqr() + self.profile[1][i].norm_sqr())).sum::<f64>()
    }

    /// `⟨pλ|Φ_z⟩ = e^{-ip·z} Φ(|p|, λ)` at every grid node.
    pub fn to_amplitude(&self) -> HelicityAmplitude {
        let z = self.detector();
        let shell = self.grid.shell_len();
        HelicityAmplitude::zeros(&self.grid).map(|i, node, h, _| self.profile[h.index()][i / shell] * cis(-node.p.dot(&z)))
    }

    /// `Φ(|p|, λ) e^{-ip·z}` off the grid, through the spectral radial interpolant.
    pub fn amplitude_at(&self, p: &Vec3) -> [C64; 2] {
        let k = p.norm();
        let ph = cis(-p.dot(&self.detector()));
        [0, 1].map(|l| self.grid.radial_interpolate(&self.profile[l], k).0 * ph)
    }

    /// `g_λ(k) = 4πkΦ(k, λ)`.
    pub fn radial_amplitude(&self) -> [Vec<C64>; 2] {
        let k = self.grid.k_nodes();
        [0, 1].map(|l| self.profile[l].iter().zip(k).map(|(f, k)| f * (4.0 * PI * k)).collect())
    }

    /// `⟨Φ|t̂|Φ⟩ / ‖Φ‖²`; the imaginary part measures boundary leakage.
    pub fn time_expectation(&self, method: RadialDerivative) -> C64 {
        let t = apply_time_operator(self, method).state;
        let k = self.grid.k_nodes();
        let w = self.grid.k_weights();
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..2 {
            for i in 0..k.len() {
                acc += self.profile[l][i].conj() * t.profile[l][i] * (w[i] * k[i] * k[i]);
            }
        }
        acc * (4.0 * PI) / self.norm_sqr()
    }
}

/// Orthogonal projection onto `H_z`:
/// `Φ(k, λ) = (1/4π) ∫dΩ e^{ikn·z} ψ_λ(kn)`.
pub fn project_detected(psi: &HelicityAmplitude, z: &Vec3) -> DetectedState {
    let g = psi.grid();
    let shell = g.shell_len();
    let nk = g.params().n_k;
    let profile = Helicity::BOTH.map(|h| {
        let v = psi.component(h);
        par::map_range(nk, |ik| {
            let base = ik * shell;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..shell {
                let n = &g.nodes()[base + j];
                acc += v[base + j] * cis(n.p.dot(z)) * g.solid_angle_weight(base + j);
            }
            acc / (4.0 * PI)
        })
    });
    DetectedState { z: (*z).into(), grid: g.clone(), profile }
}

/// `‖ψ - P_zψ‖ / ‖ψ‖`: zero exactly on `H_z`.
pub fn detected_defect(psi: &HelicityAmplitude, z: &Vec3) -> f64 {
    let p = project_detected(psi, z).to_amplitude();
    let diff = HelicityAmplitude::new(
        psi.grid(),
        psi.component(Helicity::Plus).iter().zip(p.component(Helicity::Plus)).map(|(a, b)| a - b).collect(),
        psi.component(Helicity::Minus).iter().zip(p.component(Helicity::Minus)).map(|(a, b)| a - b).collect(),
    )
    .expect("same grid");
    let n = psi.norm();
    if n == 0.0 {
        0.0
    } else {
        diff.norm() / n
    }
}

/// `L_a(z) ψ_λ = ε_abc p_c (i∂_b - z_b) ψ_λ` from a gradient.
fn angular_momentum(p: &Vec3, z: &Vec3, psi: [C64; 2], grad: [[C64; 3]; 2]) -> [[C64; 3]; 2] {
    let i = C64::new(0.0, 1.0);
    std::array::from_fn(|l| {
        let d: [C64; 3] = std::array::from_fn(|b| i * grad[l][b] - psi[l] * z[b]);
        [d[1] * p.z - d[2] * p.y, d[2] * p.x - d[0] * p.z, d[0] * p.y - d[1] * p.x]
    })
}

fn constraint_from<F>(probes: &[Vec3], z: &Vec3, f: F) -> Result<f64>
where
    F: Fn(&Vec3) -> Result<([C64; 2], [[C64; 3]; 2])>,
{
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in probes {
        let (psi, grad) = f(p)?;
        scale = scale.max(psi[0].norm().max(psi[1].norm()));
        for row in angular_momentum(p, z, psi, grad) {
            for x in row {
                worst = worst.max(x.norm());
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// Worst `|L_a(z) ψ|` over probes divided by the largest `|ψ|`, with the
/// derivative of the radial interpolant taken by finite differences.
pub fn constraint_residual(det: &DetectedState, probes: &[Vec3], deriv: Derivative) -> Result<f64> {
    let h = match deriv {
        Derivative::Central { h } | Derivative::Richardson { h } => h,
        Derivative::Exact => return Err(Error::GradientUnavailable),
    };
    let z = det.detector();
    constraint_from(probes, &z, |p| {
        if h > 0.1 * p.norm() {
            return Err(Error::StepTooLarge { h, limit: 0.1 * p.norm() });
        }
        let central = |a: usize, h: f64| {
            let mut d = Vec3::zeros();
            d[a] = h;
            let (fp, fm) = (det.amplitude_at(&(p + d)), det.amplitude_at(&(p - d)));
            [0, 1].map(|l| (fp[l] - fm[l]) / (2.0 * h))
        };
        let grad_a = |a: usize| match deriv {
            Derivative::Richardson { .. } => {
                let (c, f) = (central(a, h), central(a, 0.5 * h));
                [0, 1].map(|l| (f[l] * 4.0 - c[l]) / 3.0)
            }
            _ => central(a, h),
        };
        let g = [grad_a(0), grad_a(1), grad_a(2)];
        Ok((det.amplitude_at(p), std::array::from_fn(|l| std::array::from_fn(|a| g[a][l]))))
    })
}

/// As [`constraint_residual`] for a closed-form state with an exact gradient.
pub fn constraint_residual_analytic(state: &dyn AnalyticState, z: &Vec3, probes: &[Vec3]) -> Result<f64> {
    constraint_from(probes, z, |p| Ok((state.amplitude(p), state.gradient(p).ok_or(Error::GradientUnavailable)?)))
}

/// `g_λ(k; z) = k ∫dΩ e^{ikn·z} ψ_λ(kn) = 4πkΦ`.
pub fn radial_detected_amplitude(psi: &HelicityAmplitude, z: &Vec3) -> [Vec<C64>; 2] {
    project_detected(psi, z).radial_amplitude()
}

/// `√π (2π)^{-3/2}`.
pub const TIME_NORM: f64 = 0.112_539_539_519_638_24;

/// `A_λ(t; z)` at every requested time.
///
/// A bare sum over the grid's radial nodes is almost periodic in `t` and
/// aliases once `|t|` approaches the node spacing's reciprocal, so `g` is
/// carried by its radial interpolant onto a composite Gauss-Legendre rule
/// fine enough for the largest `|t|` requested.
pub fn time_amplitudes(det: &DetectedState, times: &[f64]) -> [Vec<C64>; 2] {
    let g = det.radial_amplitude();
    let p = det.grid.params();
    let t_ext = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    // at most ~3 rad of phase per 16-point panel
    let panels = ((p.k_max - p.k_min) * t_ext / 3.0).ceil().max((p.n_k as f64 / 8.0).ceil()).max(1.0) as usize;
    let (k, w) = composite_gauss_legendre(16, panels, p.k_min, p.k_max);
    let gk = par::map_slice(&k, |&k| [det.grid.radial_interpolate(&g[0], k).0, det.grid.radial_interpolate(&g[1], k).0]);
    let both = par::map_slice(times, |&t| {
        let mut acc = [C64::new(0.0, 0.0); 2];
        for i in 0..k.len() {
            let e = cis(-k[i] * t) * (w[i] * TIME_NORM);
            acc[0] += gk[i][0] * e;
            acc[1] += gk[i][1] * e;
        }
        acc
    });
    [both.iter().map(|a| a[0]).collect(), both.iter().map(|a| a[1]).collect()]
}

/// `A_λ(t; z)` for a grid state.
pub fn time_amplitude(psi: &HelicityAmplitude, z: &Vec3, t: f64) -> [C64; 2] {
    let a = time_amplitudes(&project_detected(psi, z), &[t]);
    [a[0][0], a[1][0]]
}

/// Sampled arrival-time density at a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalDensity {
    pub z: [f64; 3],
    pub window: (f64, f64),
    pub t_samples: Vec<f64>,
    pub density: Vec<f64>,
    /// Running trapezoidal integral of the density.
    pub cumulative: Vec<f64>,
    pub total_probability: f64,
    /// `‖P_zψ‖²`, which the total probability approximates.
    pub detected_norm: f64,
    /// `None` when the total probability is below [`MEAN_TIME_THRESHOLD`].
    pub mean_time: Option<f64>,
    /// Set when the density at either end of the window exceeds
    /// [`WINDOW_TOLERANCE`] times the peak.
    pub window_warning: Option<String>,
    pub normalization: String,
}

impl ArrivalDensity {
    /// `t,density,cumulative` with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,density,cumulative\n");
        for i in 0..self.t_samples.len() {
            s.push_str(&format!("{},{},{}\n", format_float(self.t_samples[i]), format_float(self.density[i]), format_float(self.cumulative[i])));
        }
        s
    }
}

/// `P_ψ(t; z) = Σ_λ |A_λ(t; z)|²` on `n_t` uniform samples of `window`.
pub fn arrival_density(psi: &HelicityAmplitude, z: &Vec3, window: (f64, f64), n_t: usize) -> Result<ArrivalDensity> {
    density_of(&project_detected(psi, z), window, n_t)
}

pub fn density_of(det: &DetectedState, window: (f64, f64), n_t: usize) -> Result<ArrivalDensity> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidBounds(format!("time window [{t0}, {t1}]")));
    }
    if n_t < 2 {
        return Err(Error::TooSmall { name: "n_t", value: n_t });
    }
    let dt = (t1 - t0) / (n_t - 1) as f64;
    let t: Vec<f64> = (0..n_t).map(|i| t0 + dt * i as f64).collect();
    let a = time_amplitudes(det, &t);
    let density: Vec<f64> = (0..n_t).map(|i| a[0][i].norm_sqr() + a[1][i].norm_sqr()).collect();
    let mut cumulative = vec![0.0; n_t];
    let mut first = 0.0;
    for i in 1..n_t {
        cumulative[i] = cumulative[i - 1] + 0.5 * dt * (density[i - 1] + density[i]);
        first += 0.5 * dt * (t[i - 1] * density[i - 1] + t[i] * density[i]);
    }
    let total = cumulative[n_t - 1];
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let edge = density[0].max(density[n_t - 1]);
    let window_warning = (peak > 0.0 && edge > WINDOW_TOLERANCE * peak)
        .then(|| format!("boundary density {edge:e} exceeds {WINDOW_TOLERANCE:e} of the peak {peak:e}; widen the window"));
    Ok(ArrivalDensity {
        z: det.z,
        window,
        t_samples: t,
        density,
        cumulative,
        total_probability: total,
        detected_norm: det.norm_sqr(),
        mean_time: (total >= MEAN_TIME_THRESHOLD).then(|| first / total),
        window_warning,
        normalization: "sqrt(pi) (2 pi)^(-3/2) int dk exp(-ikt) g(k)".into(),
    })
}

/// How `d/dk` acts on the radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadialDerivative {
    /// Derivative of the Legendre interpolant through the radial nodes.
    #[default]
    Spectral,
    /// Natural cubic spline through `(k, kΦ)`. Second order in the node
    /// spacing `h`, so it needs `h·t ≪ 1` for arrival times near `t`.
    Spline,
}

/// `t̂Φ` together with the radial nodes whose values are boundary-limited.
#[derive(Debug, Clone)]
pub struct TimeOperatorResult {
    pub state: DetectedState,
    pub boundary_nodes: Vec<usize>,
}

/// `(t̂Φ)(k) = -i (1/k) d[kΦ(k)]/dk`.
pub fn apply_time_operator(det: &DetectedState, method: RadialDerivative) -> TimeOperatorResult {
    let k = det.grid.k_nodes();
    let n = k.len();
    let mut boundary = std::collections::BTreeSet::new();
    let profile = [0, 1].map(|l| {
        let u: Vec<C64> = det.profile[l].iter().zip(k).map(|(f, k)| f * k).collect();
        let du = match method {
            RadialDerivative::Spectral => det.grid.radial_derivative(&u),
            RadialDerivative::Spline => CubicSpline::natural(k, &u).knot_derivatives(),
        };
        let peak = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 1e-8 * peak;
        match method {
            // the natural end conditions bias the two outermost intervals
            RadialDerivative::Spline if n >= 4 => {
                if u[0].norm() > tol || u[1].norm() > tol {
                    boundary.extend([0, 1]);
                }
                if u[n - 1].norm() > tol || u[n - 2].norm() > tol {
                    boundary.extend([n - 2, n - 1]);
                }
            }
            _ => {
                // a profile not vanishing at the cutoffs is truncated there
                if u[0].norm() > tol {
                    boundary.insert(0);
                }
                if u[n - 1].norm() > tol {
                    boundary.insert(n - 1);
                }
            }
        }
        du.iter().zip(k).map(|(d, k)| C64::new(0.0, -1.0) * d / *k).collect()
    });
    TimeOperatorResult {
        state: DetectedState { z: det.z, grid: det.grid.clone(), profile },
        boundary_nodes: boundary.into_iter().collect(),
    }
}

/// Quadrature and closed form of `(1/2π²) ∫_0^{k_max} dk e^{ikΔt - εk}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOverlap {
    pub dt: f64,
    pub epsilon: f64,
    pub k_max: f64,
    pub quadrature: C64,
    /// `(1/2π²)(1 - e^{(iΔt-ε)k_max})/(ε - iΔt)`.
    pub truncated: C64,
    /// `k_max → ∞` limit `(1/2π²) i/(Δt + iε)`.
    pub limit: C64,
}

/// Default regulator `ε = 10/k_max`.
pub fn default_epsilon(k_max: f64) -> f64 {
    10.0 / k_max
}

pub fn kernel_overlap(dt: f64, epsilon: f64, k_max: f64) -> Result<KernelOverlap> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("regulator must be positive, got {epsilon}")));
    }
    if !(k_max > 0.0 && k_max.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("kernel needs finite Δt and positive k_max, got {dt}, {k_max}")));
    }
    let c = 1.0 / (2.0 * PI * PI);
    // ~4 nodes per radian of phase and per e-fold of decay
    let span = k_max * (dt.abs() + epsilon);
    let panels = (span / 4.0).ceil().max(1.0) as usize + 4;
    let (x, w) = composite_gauss_legendre(16, panels, 0.0, k_max);
    let rate = C64::new(-epsilon, dt);
    let quadrature: C64 = x.iter().zip(&w).map(|(k, w)| (rate * k).exp() * *w).sum::<C64>() * c;
    let truncated = (C64::new(1.0, 0.0) - (rate * k_max).exp()) / C64::new(epsilon, -dt) * c;
    let limit = C64::new(0.0, 1.0) / C64::new(dt, epsilon) * c;
    Ok(KernelOverlap { dt, epsilon, k_max, quadrature, truncated, limit })
}
