//! One-photon states in the momentum-helicity representation and their
//! vector, position and coordinate-space images.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::polarization::Helicity;
use crate::quadrature::gauss_legendre_on;
use crate::sphgrid::{MomentumGrid, Node};
use crate::{Vec3, Vec3C, C64};

/// `(2π)^{-3/2}`.
pub const FOURIER_NORM: f64 = 0.063_493_635_934_240_97;

/// Captured norm a constructor must report before it is accepted.
pub const CAPTURE_THRESHOLD: f64 = 1.0 - 1e-6;

/// Largest tolerated `|p·Ψ̃|/(|p||Ψ̃|)` when leaving the vector representation.
pub const TRANSVERSE_TOLERANCE: f64 = 1e-8;

fn cis(x: f64) -> C64 {
    let (s, c) = x.sin_cos();
    C64::new(c, s)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Gaussian,
}

/// Recipe for a Gaussian test state
/// `ψ_λ(p) = w_λ N exp(-|p-p₀|²/4σ²) e^{-ip·x₀}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    pub center_p: [f64; 3],
    pub width: f64,
    #[serde(default)]
    pub center_x: [f64; 3],
    pub helicity_weights: [C64; 2],
}

impl StateSpec {
    pub fn gaussian(center_p: Vec3, width: f64, center_x: Vec3, helicity_weights: [C64; 2]) -> Self {
        Self {
            kind: StateKind::Gaussian,
            center_p: center_p.into(),
            width,
            center_x: center_x.into(),
            helicity_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidState(format!("width must be positive, got {}", self.width)));
        }
        if self.center_p.iter().chain(&self.center_x).any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite center".into()));
        }
        let w2: f64 = self.helicity_weights.iter().map(|w| w.norm_sqr()).sum();
        if (w2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("helicity weights must have unit norm, got {w2}")));
        }
        Ok(())
    }

    pub fn p0(&self) -> Vec3 {
        Vec3::from(self.center_p)
    }

    pub fn x0(&self) -> Vec3 {
        Vec3::from(self.center_x)
    }

    /// Continuum normalization `(2πσ²)^{-3/4}`.
    pub fn norm_constant(&self) -> f64 {
        (2.0 * PI * self.width * self.width).powf(-0.75)
    }

    /// Continuum-normalized amplitude.
    pub fn amplitude(&self, p: &Vec3, h: Helicity) -> C64 {
        let d = p - self.p0();
        let s2 = self.width * self.width;
        self.helicity_weights[h.index()] * re(self.norm_constant() * (-d.norm_squared() / (4.0 * s2)).exp()) * cis(-p.dot(&self.x0()))
    }

    /// `∂ψ_λ/∂p^a` of [`StateSpec::amplitude`].
    pub fn gradient(&self, p: &Vec3, h: Helicity) -> [C64; 3] {
        let psi = self.amplitude(p, h);
        let d = p - self.p0();
        let x0 = self.x0();
        let s2 = self.width * self.width;
        std::array::from_fn(|a| psi * C64::new(-d[a] / (2.0 * s2), -x0[a]))
    }
}

/// `ψ_λ(p)` on a grid, slot 0 for `λ = +1` and slot 1 for `λ = -1`.
#[derive(Debug, Clone)]
pub struct HelicityAmplitude {
    grid: Arc<MomentumGrid>,
    psi: [Vec<C64>; 2],
}

/// A constructed state together with its normalization audit.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: HelicityAmplitude,
    /// Fraction of the continuum norm seen by the grid quadrature.
    pub captured_fraction: f64,
}

impl HelicityAmplitude {
    pub fn new(grid: &Arc<MomentumGrid>, plus: Vec<C64>, minus: Vec<C64>) -> Result<Self> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "amplitude length {}/{} does not match grid size {}",
                plus.len(),
                minus.len(),
                grid.len()
            )));
        }
        if plus.iter().chain(&minus).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { grid: grid.clone(), psi: [plus, minus] })
    }

    pub fn zeros(grid: &Arc<MomentumGrid>) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid: grid.clone(), psi: [z.clone(), z] }
    }

    pub fn from_fn<F>(grid: &Arc<MomentumGrid>, f: F) -> Self
    where
        F: Fn(&Node, Helicity) -> C64 + Sync + Send,
    {
        let psi = Helicity::BOTH.map(|h| par::map_slice(grid.nodes(), |n| f(n, h)));
        Self { grid: grid.clone(), psi }
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn component(&self, h: Helicity) -> &[C64] {
        &self.psi[h.index()]
    }

    pub fn components(&self) -> &[Vec<C64>; 2] {
        &self.psi
    }

    pub fn into_components(self) -> [Vec<C64>; 2] {
        self.psi
    }

    /// Pointwise map that keeps the helicity blocks apart.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(usize, &Node, Helicity, C64) -> C64 + Sync + Send,
    {
        let nodes = self.grid.nodes();
        let psi = Helicity::BOTH.map(|h| {
            let src = &self.psi[h.index()];
            par::map_range(nodes.len(), |i| f(i, &nodes[i], h, src[i]))
        });
        Self { grid: self.grid.clone(), psi }
    }

    pub fn scaled(&self, c: C64) -> Self {
        self.map(|_, _, _, z| z * c)
    }

    /// Multiplies by `e^{-ip·a}`, which translates the state by `a`.
    pub fn translated(&self, a: &Vec3) -> Self {
        self.map(|_, n, _, z| z * cis(-n.p.dot(a)))
    }

    pub fn helicity_norm_sqr(&self, h: Helicity) -> f64 {
        let v = &self.psi[h.index()];
        self.grid.integrate_flat_with(|i, _| re(v[i].norm_sqr())).re
    }

    pub fn norm_sqr(&self) -> f64 {
        self.helicity_norm_sqr(Helicity::Plus) + self.helicity_norm_sqr(Helicity::Minus)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

fn same_grid(a: &MomentumGrid, b: &MomentumGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Builds a grid-normalized Gaussian and audits how much norm the grid sees.
pub fn from_spec(spec: &StateSpec, grid: &Arc<MomentumGrid>) -> Result<PreparedState> {
    spec.validate()?;
    let raw = HelicityAmplitude::from_fn(grid, |n, h| spec.amplitude(&n.p, h));
    let captured = raw.norm_sqr();
    // a fraction above one means the quadrature does not resolve the state
    if !(CAPTURE_THRESHOLD..=2.0 - CAPTURE_THRESHOLD).contains(&captured) {
        return Err(Error::NormLeak { captured, threshold: CAPTURE_THRESHOLD });
    }
    Ok(PreparedState { state: raw.scaled(re(1.0 / captured.sqrt())), captured_fraction: captured })
}

/// `Σ_λ ∫d³p ψ*_λ φ_λ`.
pub fn inner(psi: &HelicityAmplitude, phi: &HelicityAmplitude) -> Result<C64> {
    same_grid(&psi.grid, &phi.grid)?;
    let [a0, a1] = &psi.psi;
    let [b0, b1] = &phi.psi;
    Ok(psi.grid.integrate_flat_with(|i, _| a0[i].conj() * b0[i] + a1[i].conj() * b1[i]))
}

/// Transverse vector amplitude `Ψ̃_i(p)`.
#[derive(Debug, Clone)]
pub struct VectorAmplitude {
    grid: Arc<MomentumGrid>,
    values: Vec<Vec3C>,
}

impl VectorAmplitude {
    pub fn new(grid: &Arc<MomentumGrid>, values: Vec<Vec3C>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidState(format!("vector amplitude length {} does not match grid size {}", values.len(), grid.len())));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_fn<F>(grid: &Arc<MomentumGrid>, f: F) -> Self
    where
        F: Fn(&Node) -> Vec3C + Sync + Send,
    {
        Self { grid: grid.clone(), values: par::map_slice(grid.nodes(), f) }
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3C] {
        &self.values
    }

    /// Worst `|p·Ψ̃|/(|p||Ψ̃|)` over nodes with nonzero amplitude.
    pub fn transversality_residual(&self) -> f64 {
        self.grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(n, v)| {
                let norm = v.norm();
                if norm == 0.0 {
                    0.0
                } else {
                    (v.x * n.frame.e_k.x + v.y * n.frame.e_k.y + v.z * n.frame.e_k.z).norm() / norm
                }
            })
            .fold(0.0, f64::max)
    }

    /// Applies `δ⊥(p)` at every node.
    pub fn project_transverse(&self) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(n, v)| {
                let ek = n.frame.e_k.map(re);
                v - ek * (ek.x * v.x + ek.y * v.y + ek.z * v.z)
            })
            .collect();
        Self { grid: self.grid.clone(), values }
    }
}

/// `Ψ̃_i(p) = √(2|p|) Σ_λ ε_i(p,λ) ψ_λ(p)`.
pub fn to_vector(psi: &HelicityAmplitude) -> VectorAmplitude {
    let nodes = psi.grid.nodes();
    let [a, b] = &psi.psi;
    let values = par::map_range(nodes.len(), |i| {
        let n = &nodes[i];
        let f = &n.frame;
        (f.polarization(Helicity::Plus) * a[i] + f.polarization(Helicity::Minus) * b[i]) * re((2.0 * n.k).sqrt())
    });
    VectorAmplitude { grid: psi.grid.clone(), values }
}

/// `ψ_λ(p) = ε*(p,λ)·Ψ̃(p)/√(2|p|)`.
pub fn from_vector(v: &VectorAmplitude) -> Result<HelicityAmplitude> {
    let residual = v.transversality_residual();
    if residual > TRANSVERSE_TOLERANCE {
        return Err(Error::NotTransverse(residual));
    }
    let nodes = v.grid.nodes();
    let psi = Helicity::BOTH.map(|h| {
        par::map_range(nodes.len(), |i| {
            let n = &nodes[i];
            n.frame.polarization(h).dotc(&v.values[i]) / (2.0 * n.k).sqrt()
        })
    });
    Ok(HelicityAmplitude { grid: v.grid.clone(), psi })
}

/// `(A, A') = ∫dσ(p) Ã*·Ã'` with `dσ = d³p/2|p|`.
pub fn vector_inner(a: &VectorAmplitude, b: &VectorAmplitude) -> Result<C64> {
    same_grid(&a.grid, &b.grid)?;
    Ok(a.grid.integrate_invariant_with(|i, _| a.values[i].dotc(&b.values[i])))
}

/// `⟨qλ|ψ⟩` at a set of points.
#[derive(Debug, Clone)]
pub struct HelicitySamples {
    pub points: Vec<Vec3>,
    pub values: [Vec<C64>; 2],
}

/// Vector-valued samples such as `Ψ̃(x)` or `F(x)`.
#[derive(Debug, Clone)]
pub struct VectorSamples {
    pub points: Vec<Vec3>,
    pub values: Vec<Vec3C>,
}

/// `Σ_i c_i e^{i p_i·x}` at every point, evaluated directly.
pub(crate) fn fourier_sum<const M: usize>(grid: &MomentumGrid, coeffs: &[[C64; M]], points: &[Vec3]) -> Vec<[C64; M]> {
    let nodes = grid.nodes();
    par::map_slice(points, |x| {
        let mut acc = [C64::new(0.0, 0.0); M];
        for (n, c) in nodes.iter().zip(coeffs) {
            let e = cis(n.p.dot(x));
            for m in 0..M {
                acc[m] += c[m] * e;
            }
        }
        acc
    })
}

fn helicity_coeffs(psi: &HelicityAmplitude) -> Vec<[C64; 2]> {
    let [a, b] = &psi.psi;
    psi.grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let w = n.weight * FOURIER_NORM;
            [a[i] * w, b[i] * w]
        })
        .collect()
}

fn split2(points: &[Vec3], v: Vec<[C64; 2]>) -> HelicitySamples {
    let (a, b) = v.into_iter().map(|[x, y]| (x, y)).unzip();
    HelicitySamples { points: points.to_vec(), values: [a, b] }
}

fn collect3(points: &[Vec3], v: Vec<[C64; 3]>) -> VectorSamples {
    VectorSamples { points: points.to_vec(), values: v.into_iter().map(Vec3C::from).collect() }
}

/// `⟨qλ|ψ⟩ = (2π)^{-3/2} ∫d³p e^{ip·q} ψ_λ(p)`.
pub fn to_position_rep(psi: &HelicityAmplitude, q_points: &[Vec3]) -> HelicitySamples {
    split2(q_points, fourier_sum(&psi.grid, &helicity_coeffs(psi), q_points))
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Region {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Self { lo: lo.into(), hi: hi.into() }
    }

    pub fn cube(half: f64) -> Self {
        Self { lo: [-half; 3], hi: [half; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.lo[a].is_finite() && self.hi[a].is_finite() && self.lo[a] <= self.hi[a]) {
                return Err(Error::InvalidBounds(format!("region axis {a}: [{}, {}]", self.lo[a], self.hi[a])));
            }
        }
        Ok(())
    }
}

/// Tensor Gauss-Legendre rule on a box, flattened row-major `(x, y, z)`.
#[derive(Debug, Clone)]
pub struct BoxQuadrature {
    axes: [(Vec<f64>, Vec<f64>); 3],
}

impl BoxQuadrature {
    pub fn new(region: &Region, n: [usize; 3]) -> Result<Self> {
        region.validate()?;
        if n.contains(&0) {
            return Err(Error::TooSmall { name: "q_quadrature", value: 0 });
        }
        Ok(Self { axes: std::array::from_fn(|a| gauss_legendre_on(n[a], region.lo[a], region.hi[a])) })
    }

    pub fn shape(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.axes[a].0.len())
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis(&self, a: usize) -> (&[f64], &[f64]) {
        (&self.axes[a].0, &self.axes[a].1)
    }

    pub fn points(&self) -> Vec<Vec3> {
        let [x, y, z] = &self.axes;
        let mut out = Vec::with_capacity(self.len());
        for &qx in &x.0 {
            for &qy in &y.0 {
                for &qz in &z.0 {
                    out.push(Vec3::new(qx, qy, qz));
                }
            }
        }
        out
    }

    pub fn weights(&self) -> Vec<f64> {
        let [x, y, z] = &self.axes;
        let mut out = Vec::with_capacity(self.len());
        for &wx in &x.1 {
            for &wy in &y.1 {
                for &wz in &z.1 {
                    out.push(wx * wy * wz);
                }
            }
        }
        out
    }

    /// `e^{s i p_a q}` for every node and every abscissa of axis `a`.
    fn phase_table(&self, grid: &MomentumGrid, a: usize, sign: f64) -> Vec<C64> {
        let q = &self.axes[a].0;
        let nq = q.len();
        let mut t = Vec::with_capacity(grid.len() * nq);
        for n in grid.nodes() {
            t.extend(q.iter().map(|&qa| cis(sign * n.p[a] * qa)));
        }
        debug_assert_eq!(t.len(), grid.len() * nq);
        t
    }

    /// `Σ_i c_i e^{ip_i·q}` on the box points, using separable phases.
    pub(crate) fn forward<const M: usize>(&self, grid: &MomentumGrid, coeffs: &[[C64; M]]) -> Vec<[C64; M]> {
        let [na, nb, nc] = self.shape();
        let tx = self.phase_table(grid, 0, 1.0);
        let ty = self.phase_table(grid, 1, 1.0);
        let tz = self.phase_table(grid, 2, 1.0);
        let slabs = par::map_range(na, |ia| {
            let mut out = vec![[C64::new(0.0, 0.0); M]; nb * nc];
            for (i, c) in coeffs.iter().enumerate() {
                let ex = tx[i * na + ia];
                let ey = &ty[i * nb..(i + 1) * nb];
                let ez = &tz[i * nc..(i + 1) * nc];
                let t: [C64; M] = std::array::from_fn(|m| c[m] * ex);
                for (ib, &y) in ey.iter().enumerate() {
                    let t2: [C64; M] = std::array::from_fn(|m| t[m] * y);
                    let row = &mut out[ib * nc..(ib + 1) * nc];
                    for (slot, &z) in row.iter_mut().zip(ez) {
                        for m in 0..M {
                            slot[m] += t2[m] * z;
                        }
                    }
                }
            }
            out
        });
        slabs.into_iter().flatten().collect()
    }

    /// `Σ_q w_q e^{-ip_i·q} f(q)` at every grid node.
    pub(crate) fn backward<const M: usize>(&self, grid: &MomentumGrid, values: &[[C64; M]]) -> Vec<[C64; M]> {
        let [nb, nc] = [self.axes[1].0.len(), self.axes[2].0.len()];
        let wq: Vec<[C64; M]> = values.iter().zip(self.weights()).map(|(v, w)| v.map(|z| z * w)).collect();
        let zero = [C64::new(0.0, 0.0); M];
        par::map_slice(grid.nodes(), |n| {
            let ex: Vec<C64> = self.axes[0].0.iter().map(|&q| cis(-n.p.x * q)).collect();
            let ey: Vec<C64> = self.axes[1].0.iter().map(|&q| cis(-n.p.y * q)).collect();
            let ez: Vec<C64> = self.axes[2].0.iter().map(|&q| cis(-n.p.z * q)).collect();
            let mut acc = zero;
            for (ia, &x) in ex.iter().enumerate() {
                let mut sa = zero;
                for (ib, &y) in ey.iter().enumerate() {
                    let base = (ia * nb + ib) * nc;
                    let mut sb = zero;
                    for (ic, &z) in ez.iter().enumerate() {
                        let v = &wq[base + ic];
                        for m in 0..M {
                            sb[m] += v[m] * z;
                        }
                    }
                    for m in 0..M {
                        sa[m] += sb[m] * y;
                    }
                }
                for m in 0..M {
                    acc[m] += sa[m] * x;
                }
            }
            acc
        })
    }
}

/// `⟨qλ|ψ⟩` on all points of a box rule.
pub fn position_rep_on_box(psi: &HelicityAmplitude, quad: &BoxQuadrature) -> HelicitySamples {
    let points = quad.points();
    split2(&points, quad.forward(&psi.grid, &helicity_coeffs(psi)))
}

/// `P_ψ(Δ, λ) = ∫_Δ d³q |⟨qλ|ψ⟩|²` with a tensor Gauss-Legendre rule.
pub fn probability_in_region(psi: &HelicityAmplitude, region: &Region, h: Helicity, q_quadrature: [usize; 3]) -> Result<f64> {
    let quad = BoxQuadrature::new(region, q_quadrature)?;
    let v = psi.component(h);
    let coeffs: Vec<[C64; 1]> = psi.grid.nodes().iter().zip(v).map(|(n, z)| [z * (n.weight * FOURIER_NORM)]).collect();
    let samples = quad.forward(&psi.grid, &coeffs);
    Ok(samples.iter().zip(quad.weights()).map(|(s, w)| s[0].norm_sqr() * w).sum())
}

/// `Σ_λ P_ψ(Δ, λ)`.
pub fn total_probability_in_region(psi: &HelicityAmplitude, region: &Region, q_quadrature: [usize; 3]) -> Result<f64> {
    let quad = BoxQuadrature::new(region, q_quadrature)?;
    let s = position_rep_on_box(psi, &quad);
    let w = quad.weights();
    Ok((0..w.len()).map(|i| w[i] * (s.values[0][i].norm_sqr() + s.values[1][i].norm_sqr())).sum())
}

/// Grid sample of the position eigenstate `ψ_λ'(p) = δ_λλ' (2π)^{-3/2} e^{-ip·q}`.
///
/// Not normalizable; meant for overlaps only.
pub fn localized_state(q: &Vec3, h: Helicity, grid: &Arc<MomentumGrid>) -> HelicityAmplitude {
    HelicityAmplitude::from_fn(grid, |n, l| if l == h { cis(-n.p.dot(q)) * FOURIER_NORM } else { C64::new(0.0, 0.0) })
}

fn vector_coeffs(psi: &HelicityAmplitude, weight: impl Fn(&Node) -> C64 + Sync + Send) -> Vec<[C64; 3]> {
    let nodes = psi.grid.nodes();
    let [a, b] = &psi.psi;
    par::map_range(nodes.len(), |i| {
        let n = &nodes[i];
        let f = &n.frame;
        let v = (f.polarization(Helicity::Plus) * a[i] + f.polarization(Helicity::Minus) * b[i]) * (weight(n) * (n.weight * FOURIER_NORM));
        [v.x, v.y, v.z]
    })
}

/// `Ψ̃_i(x) = (2π)^{-3/2} Σ_λ ∫d³p e^{ip·x} ε_i(p,λ) ψ_λ(p)`.
pub fn coordinate_wavefunction(psi: &HelicityAmplitude, x_points: &[Vec3]) -> VectorSamples {
    collect3(x_points, fourier_sum(&psi.grid, &vector_coeffs(psi, |_| re(1.0)), x_points))
}

/// Field amplitude `A(x) = (2π)^{-3/2} Σ_λ ∫d³p/√(2|p|) e^{ip·x} ε ψ_λ` (the potential form).
pub fn potential(psi: &HelicityAmplitude, x_points: &[Vec3]) -> VectorSamples {
    collect3(x_points, fourier_sum(&psi.grid, &vector_coeffs(psi, |n| re(1.0 / (2.0 * n.k).sqrt())), x_points))
}

/// `Ψ̃(x)` through the position representation:
/// `Σ_λ ∫d³q V_{qλ}(x) ⟨qλ|ψ⟩`, with the `q` integral on a box rule.
pub fn coordinate_wavefunction_via_positions(psi: &HelicityAmplitude, quad: &BoxQuadrature, x_points: &[Vec3]) -> VectorSamples {
    let at_q = quad.forward(&psi.grid, &helicity_coeffs(psi));
    // ∫d³q e^{-ip·q} ⟨qλ|ψ⟩ (2π)^{-3/2} rebuilds the momentum amplitude
    let back = quad.backward(&psi.grid, &at_q);
    let (plus, minus) = back.into_iter().map(|[x, y]| (x * FOURIER_NORM, y * FOURIER_NORM)).unzip();
    let rebuilt = HelicityAmplitude { grid: psi.grid.clone(), psi: [plus, minus] };
    coordinate_wavefunction(&rebuilt, x_points)
}

/// Riemann-Silberstein field `F(x, λ)` at time `t`, per helicity.
pub fn riemann_silberstein(psi: &HelicityAmplitude, x_points: &[Vec3], t: f64) -> [VectorSamples; 2] {
    Helicity::BOTH.map(|h| collect3(x_points, fourier_sum(&psi.grid, &field_coeffs(psi, h, t, FieldPart::Rs), x_points)))
}

#[derive(Clone, Copy)]
enum FieldPart {
    Rs,
    Electric,
    Magnetic,
}

fn field_coeffs(psi: &HelicityAmplitude, h: Helicity, t: f64, part: FieldPart) -> Vec<[C64; 3]> {
    let nodes = psi.grid.nodes();
    let v = psi.component(h);
    par::map_range(nodes.len(), |i| {
        let n = &nodes[i];
        let eps = n.frame.polarization(h);
        let amp = v[i] * cis(-n.k * t) * (n.weight * FOURIER_NORM);
        let w = C64::new(0.0, 1.0) / (2.0 * n.k).sqrt();
        let f = match part {
            // √(2k) i ε
            FieldPart::Rs => eps * (w * (2.0 * n.k)),
            // E = -∂_t A
            FieldPart::Electric => eps * (w * n.k),
            // B = ∇ × A
            FieldPart::Magnetic => n.p.map(re).cross(&eps) * w,
        } * amp;
        [f.x, f.y, f.z]
    })
}

/// Electric and magnetic fields of one helicity sector, derived from the potential.
#[derive(Debug, Clone)]
pub struct FieldDecomposition {
    pub helicity: Helicity,
    pub e: VectorSamples,
    pub b: VectorSamples,
}

impl FieldDecomposition {
    /// `E + iλB`.
    pub fn combine(&self) -> Vec<Vec3C> {
        let il = C64::new(0.0, self.helicity.sign());
        self.e.values.iter().zip(&self.b.values).map(|(e, b)| e + b * il).collect()
    }
}

pub fn field_decomposition(psi: &HelicityAmplitude, x_points: &[Vec3], t: f64, h: Helicity) -> FieldDecomposition {
    let e = collect3(x_points, fourier_sum(&psi.grid, &field_coeffs(psi, h, t, FieldPart::Electric), x_points));
    let b = collect3(x_points, fourier_sum(&psi.grid, &field_coeffs(psi, h, t, FieldPart::Magnetic), x_points));
    FieldDecomposition { helicity: h, e, b }
}
