//! The photon position operator on closed-form states.
//!
//! In the vector representation
//! `q̂^a = i Σ_σ e(σ) ∇^a e(σ)ᵀ` with the weighted derivative
//! `∇^a = √(2|p|) ∂_a (1/√(2|p|))`; expanded, this is the Pryce operator plus
//! the `-cot θ e_φ^a Ŵ/|p|` term. In the helicity representation it is
//! simply `i ∂/∂p^a`.
//!
//! Derivatives act on closed-form states, exactly when a gradient is known
//! and by central differences otherwise, so nested commutators can be probed
//! pointwise.

use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::photon_state::{HelicityAmplitude, StateSpec, FOURIER_NORM};
use crate::polarization::{spin, spin_dot, Frame, Helicity};
use crate::sphgrid::MomentumGrid;
use crate::{Vec3, Vec3C, C64};

const I: C64 = C64::new(0.0, 1.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn cis(x: f64) -> C64 {
    let (s, c) = x.sin_cos();
    C64::new(c, s)
}

/// Helicity amplitude known in closed form.
pub trait AnalyticState: Sync {
    /// `(ψ₊(p), ψ₋(p))`.
    fn amplitude(&self, p: &Vec3) -> [C64; 2];

    /// `∂ψ_λ/∂p^a`, indexed `[λ][a]`, when known exactly.
    fn gradient(&self, _p: &Vec3) -> Option<[[C64; 3]; 2]> {
        None
    }

    /// Human-readable closed form.
    fn describe(&self) -> String;
}

/// The Gaussian of a [`StateSpec`], continuum normalized.
#[derive(Debug, Clone)]
pub struct GaussianState(pub StateSpec);

impl AnalyticState for GaussianState {
    fn amplitude(&self, p: &Vec3) -> [C64; 2] {
        Helicity::BOTH.map(|h| self.0.amplitude(p, h))
    }

    fn gradient(&self, p: &Vec3) -> Option<[[C64; 3]; 2]> {
        Some(Helicity::BOTH.map(|h| self.0.gradient(p, h)))
    }

    fn describe(&self) -> String {
        let s = &self.0;
        format!(
            "w_l N exp(-|p-{:?}|^2/(4*{}^2)) exp(-i p.{:?}), w = {:?}",
            s.center_p, s.width, s.center_x, s.helicity_weights
        )
    }
}

/// Momentum amplitude of the position eigenstate, `δ_λλ' (2π)^{-3/2} e^{-ip·q}`.
#[derive(Debug, Clone, Copy)]
pub struct PositionEigenstate {
    pub q: Vec3,
    pub helicity: Helicity,
}

impl AnalyticState for PositionEigenstate {
    fn amplitude(&self, p: &Vec3) -> [C64; 2] {
        let mut out = [C64::new(0.0, 0.0); 2];
        out[self.helicity.index()] = cis(-p.dot(&self.q)) * FOURIER_NORM;
        out
    }

    fn gradient(&self, p: &Vec3) -> Option<[[C64; 3]; 2]> {
        let v = self.amplitude(p)[self.helicity.index()];
        let mut out = [[C64::new(0.0, 0.0); 3]; 2];
        out[self.helicity.index()] = std::array::from_fn(|a| -I * self.q[a] * v);
        Some(out)
    }

    fn describe(&self) -> String {
        format!("(2pi)^(-3/2) exp(-i p.{:?}) in helicity {:?}", self.q, self.helicity)
    }
}

/// Free evolution `e^{-i|p|t} ψ(p)` of another state.
#[derive(Debug, Clone)]
pub struct Evolved<S> {
    pub state: S,
    pub t: f64,
}

impl<S: AnalyticState> AnalyticState for Evolved<S> {
    fn amplitude(&self, p: &Vec3) -> [C64; 2] {
        let ph = cis(-p.norm() * self.t);
        self.state.amplitude(p).map(|z| z * ph)
    }

    fn gradient(&self, p: &Vec3) -> Option<[[C64; 3]; 2]> {
        let g = self.state.gradient(p)?;
        let psi = self.state.amplitude(p);
        let k = p.norm();
        let ph = cis(-k * self.t);
        // ∂_a e^{-ikt} = -i t p_a/k e^{-ikt}
        Some(std::array::from_fn(|l| std::array::from_fn(|a| (g[l][a] - I * (self.t * p[a] / k) * psi[l]) * ph)))
    }

    fn describe(&self) -> String {
        format!("exp(-i|p|*{}) [{}]", self.t, self.state.describe())
    }
}

/// Vector amplitude `Ψ̃(p)` as a differentiable function.
pub trait VectorField: Sync {
    fn value(&self, p: &Vec3) -> Result<Vec3C>;

    /// `∂Ψ̃/∂p^a` indexed by `a`, when known exactly.
    fn jacobian(&self, _p: &Vec3) -> Option<Result<[Vec3C; 3]>> {
        None
    }
}

/// `Ψ̃(p) = √(2|p|) Σ_λ ε(p,λ) ψ_λ(p)` for a closed-form helicity state.
#[derive(Debug, Clone)]
pub struct VectorRep<S>(pub S);

impl<S: AnalyticState> VectorField for VectorRep<S> {
    fn value(&self, p: &Vec3) -> Result<Vec3C> {
        let f = Frame::at(p)?;
        let psi = self.0.amplitude(p);
        let s = (2.0 * p.norm()).sqrt();
        Ok((f.polarization(Helicity::Plus) * psi[0] + f.polarization(Helicity::Minus) * psi[1]) * re(s))
    }

    fn jacobian(&self, p: &Vec3) -> Option<Result<[Vec3C; 3]>> {
        let g = self.0.gradient(p)?;
        Some((|| {
            let f = Frame::at(p)?;
            let k = p.norm();
            let s = (2.0 * k).sqrt();
            let psi = self.0.amplitude(p);
            let eps = Helicity::BOTH.map(|h| f.polarization(h));
            let deps = Helicity::BOTH.map(|h| f.polarization_derivatives(k, h));
            Ok(std::array::from_fn(|a| {
                let mut acc = Vec3C::zeros();
                for l in 0..2 {
                    // ∂_a √(2k) = √(2k) p_a / 2k²
                    acc += eps[l] * (psi[l] * (p[a] / (2.0 * k * k)) + g[l][a]) + deps[l][a] * psi[l];
                }
                acc * re(s)
            }))
        })())
    }
}

/// How derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Derivative {
    /// Closed-form gradient; fails with `GradientUnavailable` otherwise.
    Exact,
    /// Central difference with absolute step `h`.
    Central { h: f64 },
    /// Richardson-extrapolated central difference (`O(h⁴)`).
    Richardson { h: f64 },
}

impl Derivative {
    /// `h = ε^{1/3} max(|p|, k_min)` with Richardson extrapolation.
    pub fn default_for(scale: f64) -> Self {
        Derivative::Richardson { h: f64::EPSILON.cbrt() * scale }
    }

    pub fn step(&self) -> f64 {
        match *self {
            Derivative::Exact => 0.0,
            Derivative::Central { h } | Derivative::Richardson { h } => h,
        }
    }

    fn check(&self, p: &Vec3) -> Result<()> {
        let h = self.step();
        let limit = 0.1 * p.norm();
        if h > limit || h < 0.0 || !h.is_finite() {
            return Err(Error::StepTooLarge { h, limit });
        }
        Ok(())
    }

    fn apply<const D: usize, F>(&self, f: &F, p: &Vec3, a: usize) -> Result<SVector<C64, D>>
    where
        F: Fn(&Vec3) -> Result<SVector<C64, D>>,
    {
        let central = |h: f64| -> Result<SVector<C64, D>> {
            let mut d = Vec3::zeros();
            d[a] = h;
            Ok((f(&(p + d))? - f(&(p - d))?) / re(2.0 * h))
        };
        match *self {
            Derivative::Exact => Err(Error::GradientUnavailable),
            Derivative::Central { h } => central(h),
            Derivative::Richardson { h } => {
                let coarse = central(h)?;
                let fine = central(0.5 * h)?;
                Ok((fine * re(4.0) - coarse) / re(3.0))
            }
        }
    }
}

/// `∂Ψ̃/∂p^a`: exact when available and `prefer_exact`, by differences otherwise.
fn partial(field: &dyn VectorField, p: &Vec3, a: usize, deriv: Derivative, prefer_exact: bool) -> Result<Vec3C> {
    if prefer_exact || deriv == Derivative::Exact {
        if let Some(j) = field.jacobian(p) {
            return Ok(j?[a]);
        }
        if deriv == Derivative::Exact {
            return Err(Error::GradientUnavailable);
        }
    }
    deriv.check(p)?;
    deriv.apply(&|x: &Vec3| field.value(x), p, a)
}

fn axis(a: usize) -> Result<usize> {
    if a < 3 {
        Ok(a)
    } else {
        Err(Error::BadAxis(a))
    }
}

/// `∇^a Ψ̃ = √(2|p|) ∂_a [Ψ̃/√(2|p|)] = ∂_a Ψ̃ - p_a Ψ̃/(2|p|²)`, with `a ∈ {0,1,2}`.
pub fn nabla_weighted(field: &dyn VectorField, a: usize, p: &Vec3, deriv: Derivative) -> Result<Vec3C> {
    let a = axis(a)?;
    Frame::at(p)?;
    let d = partial(field, p, a, deriv, false)?;
    let v = field.value(p)?;
    Ok(d - v * re(p[a] / (2.0 * p.norm_squared())))
}

/// Which algebraic form of `q̂^a` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionForm {
    /// `i Σ_σ e(σ) ∇^a (e(σ)·Ψ̃)`, the frame projections differentiated as wholes.
    Compact,
    /// `i∇^a + [e_k ∧ S]^a/|p| - cot θ e_φ^a Ŵ/|p|`.
    Expanded,
    /// Expanded form without the `cot θ` term; its components do not commute.
    PryceOnly,
}

/// `(q̂^a Ψ̃)(p)`.
pub fn apply_position_vector(field: &dyn VectorField, a: usize, p: &Vec3, form: PositionForm, deriv: Derivative) -> Result<Vec3C> {
    apply_q(field, a, p, form, deriv, false)
}

fn apply_q(field: &dyn VectorField, a: usize, p: &Vec3, form: PositionForm, deriv: Derivative, prefer_exact: bool) -> Result<Vec3C> {
    let a = axis(a)?;
    let f = Frame::at(p)?;
    let k = p.norm();
    let v = field.value(p)?;
    let weight = p[a] / (2.0 * k * k);
    match form {
        PositionForm::Compact => {
            let axes = f.axes();
            let jac = if prefer_exact || deriv == Derivative::Exact { field.jacobian(p) } else { None };
            let mut out = Vec3C::zeros();
            match jac {
                Some(j) => {
                    let da = j?[a];
                    let de = f.derivatives(k);
                    for (s, e) in axes.iter().enumerate() {
                        let ec = e.map(re);
                        let proj_d = de[a][s].map(re).dot(&v) + ec.dot(&da) - ec.dot(&v) * weight;
                        out += ec * (I * proj_d);
                    }
                }
                None if deriv == Derivative::Exact => return Err(Error::GradientUnavailable),
                None => {
                    deriv.check(p)?;
                    for s in 0..3 {
                        let proj = |x: &Vec3| -> Result<SVector<C64, 1>> {
                            let e = Frame::at(x)?.axes()[s].map(re);
                            Ok(SVector::from([e.dot(&field.value(x)?)]))
                        };
                        let d = deriv.apply(&proj, p, a)?[0];
                        let ec = axes[s].map(re);
                        out += ec * (I * (d - ec.dot(&v) * weight));
                    }
                }
            }
            Ok(out)
        }
        PositionForm::Expanded | PositionForm::PryceOnly => {
            let d = partial(field, p, a, deriv, prefer_exact)?;
            let nabla = d - v * re(weight);
            // [e_k ∧ S]^a = ε_abc e_k^b S^c
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let cross = (spin(c) * re(f.e_k[b]) - spin(b) * re(f.e_k[c])) * v;
            let mut out = nabla * I + cross / re(k);
            if form == PositionForm::Expanded {
                out -= spin_dot(&f.e_k) * v * re(f.cot_theta() * f.e_phi[a] / k);
            }
            Ok(out)
        }
    }
}

/// `(q̂^a ψ)_λ = i ∂ψ_λ/∂p^a`.
pub fn apply_position_helicity(state: &dyn AnalyticState, a: usize, p: &Vec3, deriv: Derivative) -> Result<[C64; 2]> {
    let a = axis(a)?;
    Frame::at(p)?;
    let d = helicity_partial(state, p, a, deriv)?;
    Ok(d.map(|z| z * I))
}

fn helicity_partial(state: &dyn AnalyticState, p: &Vec3, a: usize, deriv: Derivative) -> Result<[C64; 2]> {
    if deriv == Derivative::Exact {
        let g = state.gradient(p).ok_or(Error::GradientUnavailable)?;
        return Ok([g[0][a], g[1][a]]);
    }
    deriv.check(p)?;
    let f = |x: &Vec3| -> Result<Vector2<C64>> { Ok(Vector2::from(state.amplitude(x))) };
    let d = deriv.apply(&f, p, a)?;
    Ok([d[0], d[1]])
}

/// `D^a(p) = cot θ e_φ^a / |p|`.
pub fn connection(p: &Vec3, a: usize) -> Result<f64> {
    let a = axis(a)?;
    let f = Frame::at(p)?;
    Ok(f.cot_theta() * f.e_phi[a] / p.norm())
}

/// `[i∂/∂p^a + λ D^a(p)] ψ_λ`, the spinless `i∇^a` seen in the helicity basis.
pub fn covariant_derivative(state: &dyn AnalyticState, a: usize, p: &Vec3, deriv: Derivative) -> Result<[C64; 2]> {
    let q = apply_position_helicity(state, a, p, deriv)?;
    let d = connection(p, a)?;
    let psi = state.amplitude(p);
    Ok([q[0] + psi[0] * d, q[1] - psi[1] * d])
}

/// `q̂^b Ψ̃` as a field (no closed-form Jacobian).
struct PositionApplied<'a> {
    field: &'a dyn VectorField,
    a: usize,
    form: PositionForm,
    deriv: Derivative,
}

impl VectorField for PositionApplied<'_> {
    fn value(&self, p: &Vec3) -> Result<Vec3C> {
        apply_q(self.field, self.a, p, self.form, self.deriv, true)
    }
}

/// `Ŵ(p) Ψ̃(p)`.
struct HelicityApplied<'a>(&'a dyn VectorField);

impl VectorField for HelicityApplied<'_> {
    fn value(&self, p: &Vec3) -> Result<Vec3C> {
        let k = p.norm();
        if k == 0.0 {
            return Err(Error::ZeroMomentum);
        }
        Ok(spin_dot(&(p / k)) * self.0.value(p)?)
    }

    fn jacobian(&self, p: &Vec3) -> Option<Result<[Vec3C; 3]>> {
        let j = self.0.jacobian(p)?;
        Some((|| {
            let j = j?;
            let f = Frame::at(p)?;
            let k = p.norm();
            let v = self.0.value(p)?;
            let de = f.derivatives(k);
            let w = spin_dot(&f.e_k);
            Ok(std::array::from_fn(|a| spin_dot(&de[a][2]) * v + w * j[a]))
        })())
    }
}

/// `p^b Ψ̃(p)`.
struct MomentumApplied<'a> {
    field: &'a dyn VectorField,
    b: usize,
}

impl VectorField for MomentumApplied<'_> {
    fn value(&self, p: &Vec3) -> Result<Vec3C> {
        Ok(self.field.value(p)? * re(p[self.b]))
    }

    fn jacobian(&self, p: &Vec3) -> Option<Result<[Vec3C; 3]>> {
        let j = self.field.jacobian(p)?;
        Some((|| {
            let j = j?;
            let v = self.field.value(p)?;
            Ok(std::array::from_fn(|a| j[a] * re(p[self.b]) + if a == self.b { v } else { Vec3C::zeros() }))
        })())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorKind {
    /// `[q̂^a, q̂^b]`
    Qq,
    /// `[q̂^a, p̂^b] - iδ_ab`
    Qp,
    /// `[q̂^a, Ŵ]`
    QW,
}

/// Outcome of a pointwise commutator probe.
///
/// Residuals are `|R(p)|` over every component pair, divided by the largest
/// `|Ψ̃|` among the probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub kind: CommutatorKind,
    pub form: PositionForm,
    pub probes: Vec<[f64; 3]>,
    pub residual_max: f64,
    pub residual_rms: f64,
    pub fd_step: f64,
    pub deriv: Derivative,
    /// Observed convergence order, filled by [`convergence_study`].
    pub order_estimate: Option<f64>,
}

fn commutator_residual(kind: CommutatorKind, field: &dyn VectorField, p: &Vec3, form: PositionForm, deriv: Derivative) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    match kind {
        CommutatorKind::Qq => {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let qb = PositionApplied { field, a: b, form, deriv };
                    let qa = PositionApplied { field, a, form, deriv };
                    let ab = apply_q(&qb, a, p, form, deriv, false)?;
                    let ba = apply_q(&qa, b, p, form, deriv, false)?;
                    out.push((ab - ba).norm());
                }
            }
        }
        CommutatorKind::Qp => {
            let v = field.value(p)?;
            for a in 0..3 {
                let qa = apply_q(field, a, p, form, deriv, true)?;
                for b in 0..3 {
                    let pb = MomentumApplied { field, b };
                    let qpb = apply_q(&pb, a, p, form, deriv, false)?;
                    let mut r = qpb - qa * re(p[b]);
                    if a == b {
                        r -= v * I;
                    }
                    out.push(r.norm());
                }
            }
        }
        CommutatorKind::QW => {
            let w = spin_dot(&(p / p.norm()));
            let wf = HelicityApplied(field);
            for a in 0..3 {
                let qw = apply_q(&wf, a, p, form, deriv, false)?;
                let wq = w * apply_q(field, a, p, form, deriv, true)?;
                out.push((qw - wq).norm());
            }
        }
    }
    Ok(out)
}

/// Evaluates a commutator by nested application at every probe.
///
/// The inner operator uses the closed-form Jacobian when the state has one;
/// the outer one uses `deriv`.
pub fn commutator_check(kind: CommutatorKind, field: &dyn VectorField, probes: &[Vec3], form: PositionForm, deriv: Derivative) -> Result<CommutatorReport> {
    let per_probe = par::map_slice(probes, |p| -> Result<(Vec<f64>, f64)> {
        Ok((commutator_residual(kind, field, p, form, deriv)?, field.value(p)?.norm()))
    });
    let mut all = Vec::new();
    let mut scale = 0.0f64;
    for r in per_probe {
        let (res, norm) = r?;
        all.extend(res);
        scale = scale.max(norm);
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let residual_max = all.iter().fold(0.0f64, |m, x| m.max(*x)) / scale;
    let residual_rms = (all.iter().map(|x| x * x).sum::<f64>() / all.len().max(1) as f64).sqrt() / scale;
    Ok(CommutatorReport {
        kind,
        form,
        probes: probes.iter().map(|p| [p.x, p.y, p.z]).collect(),
        residual_max,
        residual_rms,
        fd_step: deriv.step(),
        deriv,
        order_estimate: None,
    })
}

/// Central-difference residuals at decreasing steps and the fitted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order: f64,
}

/// Least-squares slope of `log r` against `log h`.
pub fn fitted_order(steps: &[f64], residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps.iter().zip(residuals).map(|(h, r)| (h.ln(), r.max(f64::MIN_POSITIVE).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn convergence_study(kind: CommutatorKind, field: &dyn VectorField, probes: &[Vec3], form: PositionForm, steps: &[f64]) -> Result<ConvergenceStudy> {
    let residuals = steps
        .iter()
        .map(|&h| commutator_check(kind, field, probes, form, Derivative::Central { h }).map(|r| r.residual_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy { order: fitted_order(steps, &residuals), steps: steps.to_vec(), residuals })
}

/// `⟨q̂⟩` with its discarded imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionExpectation {
    pub value: [f64; 3],
    pub imaginary_residue: [f64; 3],
}

fn expectation_from(psi: &HelicityAmplitude, grad: &[[Vec<C64>; 3]; 2]) -> PositionExpectation {
    let g = psi.grid();
    let norm = psi.norm_sqr();
    let mut value = [0.0; 3];
    let mut imag = [0.0; 3];
    for a in 0..3 {
        let z = g.integrate_flat_with(|i, _| {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..2 {
                acc += psi.components()[l][i].conj() * I * grad[l][a][i];
            }
            acc
        }) / norm;
        value[a] = z.re;
        imag[a] = z.im;
    }
    PositionExpectation { value, imaginary_residue: imag }
}

/// `⟨q̂^a⟩ = Σ_λ ∫d³p ψ*_λ i∂_aψ_λ / ‖ψ‖²` with the spectral grid gradient.
pub fn expectation_position(psi: &HelicityAmplitude) -> PositionExpectation {
    let g = psi.grid();
    let grad = [g.gradient(&psi.components()[0]), g.gradient(&psi.components()[1])];
    expectation_from(psi, &grad)
}

/// As [`expectation_position`], sampling a closed-form state and its exact gradient.
pub fn expectation_position_analytic(state: &dyn AnalyticState, grid: &std::sync::Arc<MomentumGrid>) -> Result<PositionExpectation> {
    let nodes = grid.nodes();
    let grads: Vec<[[C64; 3]; 2]> = par::map_slice(nodes, |n| state.gradient(&n.p)).into_iter().collect::<Option<_>>().ok_or(Error::GradientUnavailable)?;
    let amps: Vec<[C64; 2]> = par::map_slice(nodes, |n| state.amplitude(&n.p));
    let psi = HelicityAmplitude::new(grid, amps.iter().map(|x| x[0]).collect(), amps.iter().map(|x| x[1]).collect())?;
    let grad: [[Vec<C64>; 3]; 2] = std::array::from_fn(|l| std::array::from_fn(|a| grads.iter().map(|g| g[l][a]).collect()));
    Ok(expectation_from(&psi, &grad))
}
