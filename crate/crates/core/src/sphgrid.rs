//! Spherical momentum grid with product Gauss rules.
//!
//! Nodes are Gauss-Legendre in a (possibly mapped) radial variable, Gauss-Legendre
//! in `cos θ` (possibly clustered towards the north pole) and uniform in `φ`.
//! The flat measure `d³p = k² dk dcosθ dφ` and the light-cone measure
//! `dσ = d³p / 2k` are both realised from the same node weights. The shell is
//! truncated to `[k_min, k_max]` with `k_min > 0`, and the poles are never
//! sampled.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::polarization::Frame;
use crate::quadrature::{gauss_legendre, LegendreInterpolant};
use crate::{Vec3, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialMap {
    /// Gauss-Legendre directly in `k`.
    Linear,
    /// Gauss-Legendre in `ln k`.
    Log,
}

/// Distribution of the polar nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolarMap {
    /// Gauss-Legendre in `cos θ`.
    #[default]
    Uniform,
    /// Gauss-Legendre in `s` with `1 - cos θ = 2 ((1 - s)/2)^power`; resolves
    /// states collimated along `+z`.
    North { power: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n_k: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub radial_map: RadialMap,
    #[serde(default)]
    pub polar_map: PolarMap,
}

impl GridParams {
    pub fn new(n_k: usize, n_theta: usize, n_phi: usize, k_min: f64, k_max: f64, radial_map: RadialMap) -> Self {
        Self {
            n_k,
            n_theta,
            n_phi,
            k_min,
            k_max,
            radial_map,
            polar_map: PolarMap::Uniform,
        }
    }

    pub fn with_polar_map(mut self, polar_map: PolarMap) -> Self {
        self.polar_map = polar_map;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("n_k", self.n_k), ("n_theta", self.n_theta), ("n_phi", self.n_phi)] {
            if value < 2 {
                return Err(Error::TooSmall { name, value });
            }
        }
        if !(self.k_min.is_finite() && self.k_max.is_finite()) || self.k_min <= 0.0 || self.k_min >= self.k_max {
            return Err(Error::InvalidBounds(format!(
                "need 0 < k_min < k_max, got k_min = {}, k_max = {}",
                self.k_min, self.k_max
            )));
        }
        if let PolarMap::North { power } = self.polar_map {
            if power == 0 {
                return Err(Error::InvalidBounds("polar map power must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// One quadrature node with its precomputed geometry.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub p: Vec3,
    pub k: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub phi: f64,
    /// Weight of the flat measure `d³p`.
    pub weight: f64,
    pub frame: Frame,
}

#[derive(Debug, Clone)]
pub struct MomentumGrid {
    params: GridParams,
    k_nodes: Vec<f64>,
    k_weights: Vec<f64>,
    radial_interp: LegendreInterpolant,
    dk_ds: Vec<f64>,
    polar_interp: LegendreInterpolant,
    dc_ds: Vec<f64>,
    cos_nodes: Vec<f64>,
    cos_weights: Vec<f64>,
    phi_nodes: Vec<f64>,
    phi_weight: f64,
    nodes: Vec<Node>,
}

impl PartialEq for MomentumGrid {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl MomentumGrid {
    /// Builds the grid; all invariants are established here.
    pub fn build(params: GridParams) -> Result<Arc<Self>> {
        params.validate()?;
        let (s_k, w_k) = gauss_legendre(params.n_k);
        let (k_nodes, dk_ds): (Vec<f64>, Vec<f64>) = match params.radial_map {
            RadialMap::Linear => {
                let half = 0.5 * (params.k_max - params.k_min);
                s_k.iter().map(|s| (params.k_min + half * (s + 1.0), half)).unzip()
            }
            RadialMap::Log => {
                let span = (params.k_max / params.k_min).ln();
                s_k.iter()
                    .map(|s| {
                        let k = params.k_min * (0.5 * span * (s + 1.0)).exp();
                        (k, 0.5 * span * k)
                    })
                    .unzip()
            }
        };
        let k_weights: Vec<f64> = w_k.iter().zip(&dk_ds).map(|(w, j)| w * j).collect();

        let (s_t, w_t) = gauss_legendre(params.n_theta);
        // (cos θ, 1 - cos θ, weight, dcosθ/ds)
        let polar: Vec<(f64, f64, f64, f64)> = match params.polar_map {
            PolarMap::Uniform => s_t.iter().zip(&w_t).map(|(s, w)| (*s, 1.0 - s, *w, 1.0)).collect(),
            PolarMap::North { power } => {
                let m = power as i32;
                s_t.iter()
                    .zip(&w_t)
                    .map(|(s, w)| {
                        let r = 0.5 * (1.0 - s);
                        let one_minus = 2.0 * r.powi(m);
                        let jac = m as f64 * r.powi(m - 1);
                        (1.0 - one_minus, one_minus, w * jac, jac)
                    })
                    .collect()
            }
        };
        let cos_nodes: Vec<f64> = polar.iter().map(|t| t.0).collect();
        let dc_ds: Vec<f64> = polar.iter().map(|t| t.3).collect();
        let cos_weights: Vec<f64> = polar.iter().map(|t| t.2).collect();
        let phi_weight = 2.0 * PI / params.n_phi as f64;
        let phi_nodes: Vec<f64> = (0..params.n_phi).map(|j| j as f64 * phi_weight).collect();

        let mut nodes = Vec::with_capacity(params.n_k * params.n_theta * params.n_phi);
        for (&k, &wk) in k_nodes.iter().zip(&k_weights) {
            for &(ct, one_minus, wt, _) in &polar {
                let st = (one_minus * (2.0 - one_minus)).sqrt();
                for &phi in &phi_nodes {
                    let frame = Frame::from_angles(ct, st, phi);
                    nodes.push(Node {
                        p: frame.e_k * k,
                        k,
                        cos_theta: ct,
                        sin_theta: st,
                        phi,
                        weight: k * k * wk * wt * phi_weight,
                        frame,
                    });
                }
            }
        }
        Ok(Arc::new(Self {
            radial_interp: LegendreInterpolant::new(&s_k, &w_k),
            polar_interp: LegendreInterpolant::new(&s_t, &w_t),
            dc_ds,
            params,
            k_nodes,
            k_weights,
            dk_ds,
            cos_nodes,
            cos_weights,
            phi_nodes,
            phi_weight,
            nodes,
        }))
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }
    pub fn k_nodes(&self) -> &[f64] {
        &self.k_nodes
    }
    /// Radial weights for `∫ dk` (no `k²` factor).
    pub fn k_weights(&self) -> &[f64] {
        &self.k_weights
    }
    pub fn cos_theta_nodes(&self) -> &[f64] {
        &self.cos_nodes
    }
    pub fn cos_theta_weights(&self) -> &[f64] {
        &self.cos_weights
    }
    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi_nodes
    }
    pub fn phi_weight(&self) -> f64 {
        self.phi_weight
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    /// Number of angular nodes on one radial shell.
    pub fn shell_len(&self) -> usize {
        self.params.n_theta * self.params.n_phi
    }
    pub fn index(&self, ik: usize, itheta: usize, iphi: usize) -> usize {
        (ik * self.params.n_theta + itheta) * self.params.n_phi + iphi
    }
    /// Angular weight (`dcosθ dφ`) of the node at flat index `i`.
    pub fn solid_angle_weight(&self, i: usize) -> f64 {
        let it = (i / self.params.n_phi) % self.params.n_theta;
        self.cos_weights[it] * self.phi_weight
    }

    /// `Σ w f(node)` for the flat measure, with `f` given per flat index.
    pub fn integrate_flat_with<F>(&self, f: F) -> C64
    where
        F: Fn(usize, &Node) -> C64 + Sync + Send,
    {
        par::sum_range(self.nodes.len(), |i| {
            let n = &self.nodes[i];
            f(i, n) * n.weight
        })
    }

    /// `∫ d³p/(2k) f` with `f` given per flat index.
    pub fn integrate_invariant_with<F>(&self, f: F) -> C64
    where
        F: Fn(usize, &Node) -> C64 + Sync + Send,
    {
        par::sum_range(self.nodes.len(), |i| {
            let n = &self.nodes[i];
            f(i, n) * (n.weight / (2.0 * n.k))
        })
    }

    /// Spectral `d/dk` of a radial profile sampled on `k_nodes`.
    pub fn radial_derivative(&self, values: &[C64]) -> Vec<C64> {
        self.radial_interp
            .differentiate(values)
            .into_iter()
            .zip(&self.dk_ds)
            .map(|(d, j)| d / *j)
            .collect()
    }

    /// Spectral Cartesian gradient `∂f/∂p^a` of a field sampled at every node.
    ///
    /// Differentiates the polynomial interpolants in the radial and polar
    /// variables and the trigonometric interpolant in `φ`, then applies the
    /// chain rule. Exact for fields smooth in `(k, cos θ, φ)`; fields with a
    /// `sin θ` dependence converge only algebraically.
    pub fn gradient(&self, values: &[C64]) -> [Vec<C64>; 3] {
        assert_eq!(values.len(), self.nodes.len());
        let (nk, nt, np) = (self.params.n_k, self.params.n_theta, self.params.n_phi);
        let mut d_k = vec![C64::new(0.0, 0.0); values.len()];
        let mut d_c = d_k.clone();
        let mut d_phi = d_k.clone();
        for it in 0..nt {
            for ip in 0..np {
                let line: Vec<C64> = (0..nk).map(|ik| values[self.index(ik, it, ip)]).collect();
                for (ik, d) in self.radial_derivative(&line).into_iter().enumerate() {
                    d_k[self.index(ik, it, ip)] = d;
                }
            }
        }
        for ik in 0..nk {
            for ip in 0..np {
                let line: Vec<C64> = (0..nt).map(|it| values[self.index(ik, it, ip)]).collect();
                for (it, d) in self.polar_interp.differentiate(&line).into_iter().enumerate() {
                    d_c[self.index(ik, it, ip)] = d / self.dc_ds[it];
                }
            }
            for it in 0..nt {
                let start = self.index(ik, it, 0);
                let line = &values[start..start + np];
                d_phi[start..start + np].copy_from_slice(&trig_derivative(line));
            }
        }
        let grad = |a: usize| {
            par::map_range(self.nodes.len(), |i| {
                let n = &self.nodes[i];
                let f = &n.frame;
                // ∂_θ = -sin θ ∂_cosθ
                let d_theta = -d_c[i] * n.sin_theta;
                d_k[i] * f.e_k[a] + d_theta * (f.e_theta[a] / n.k) + d_phi[i] * (f.e_phi[a] / (n.k * n.sin_theta))
            })
        };
        [grad(0), grad(1), grad(2)]
    }

    /// Spectral interpolant of a radial profile and its `k` derivative at `k`.
    pub fn radial_interpolate(&self, values: &[C64], k: f64) -> (C64, C64) {
        let (s, ds_dk) = match self.params.radial_map {
            RadialMap::Linear => {
                let half = 0.5 * (self.params.k_max - self.params.k_min);
                ((k - self.params.k_min) / half - 1.0, 1.0 / half)
            }
            RadialMap::Log => {
                let span = (self.params.k_max / self.params.k_min).ln();
                (2.0 * (k / self.params.k_min).ln() / span - 1.0, 2.0 / (span * k))
            }
        };
        let (v, d) = self.radial_interp.eval_with_derivative(values, s);
        (v, d * ds_dk)
    }
}

/// Derivative of the trigonometric interpolant through `n` equispaced samples
/// on `[0, 2π)`; the Nyquist mode of an even `n` is dropped.
fn trig_derivative(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    let half = n / 2;
    let coeffs: Vec<(f64, C64)> = (0..n)
        .filter_map(|j| {
            let m = if j <= half { j as i64 } else { j as i64 - n as i64 };
            if n.is_multiple_of(2) && j == half {
                return None;
            }
            let c: C64 = values
                .iter()
                .enumerate()
                .map(|(l, v)| v * C64::from_polar(1.0, -2.0 * PI * (m * l as i64) as f64 / n as f64))
                .sum::<C64>()
                / n as f64;
            Some((m as f64, c))
        })
        .collect();
    (0..n)
        .map(|l| {
            let phi = 2.0 * PI * l as f64 / n as f64;
            coeffs.iter().map(|(m, c)| c * C64::new(0.0, *m) * C64::from_polar(1.0, m * phi)).sum()
        })
        .collect()
}

/// Scalar field sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: Arc<MomentumGrid>,
    pub values: Vec<C64>,
}

impl GridField {
    pub fn from_fn<F>(grid: &Arc<MomentumGrid>, f: F) -> Self
    where
        F: Fn(&Node) -> C64 + Sync + Send,
    {
        let values = par::map_slice(grid.nodes(), f);
        Self { grid: Arc::clone(grid), values }
    }

    pub fn new(grid: &Arc<MomentumGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }
}

/// `Σ_nodes w f`, approximating `∫ d³p f`.
pub fn integrate_flat(f: &GridField) -> C64 {
    f.grid.integrate_flat_with(|i, _| f.values[i])
}

/// Approximates `∫ d³p/(2|p|) f`.
pub fn integrate_invariant(f: &GridField) -> C64 {
    f.grid.integrate_invariant_with(|i, _| f.values[i])
}
