//! Spherical frames, helicity polarization vectors and spin-1 algebra.
//!
//! Conventions: `(S^a)_ij = -i ε_aij`, the photon frame is ordered
//! `(e_θ, e_φ, e_k)` with `e_θ × e_φ = e_k`, and
//! `ε(p, λ) = -(λ/√2)(e_θ + iλ e_φ)`, i.e. `R(p) = R_z(φ) R_y(θ)` applied
//! to the standard vectors along `+z`.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::{Mat3C, Vec3, Vec3C, C64};

/// Smallest `sin θ` accepted away from the poles.
pub const POLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub const BOTH: [Helicity; 2] = [Helicity::Plus, Helicity::Minus];

    pub fn from_int(lambda: i32) -> Result<Self> {
        match lambda {
            1 => Ok(Helicity::Plus),
            -1 => Ok(Helicity::Minus),
            other => Err(Error::BadHelicity(other)),
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Helicity::Plus => 1.0,
            Helicity::Minus => -1.0,
        }
    }

    /// Storage slot: 0 for `+1`, 1 for `-1`.
    pub fn index(self) -> usize {
        match self {
            Helicity::Plus => 0,
            Helicity::Minus => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Helicity::Plus => Helicity::Minus,
            Helicity::Minus => Helicity::Plus,
        }
    }
}

/// Right-handed spherical triad at a momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e_k: Vec3,
    pub e_theta: Vec3,
    pub e_phi: Vec3,
    pub cos_theta: f64,
    pub sin_theta: f64,
}

impl Frame {
    pub fn from_angles(cos_theta: f64, sin_theta: f64, phi: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        Self {
            e_k: Vec3::new(sin_theta * cp, sin_theta * sp, cos_theta),
            e_theta: Vec3::new(cos_theta * cp, cos_theta * sp, -sin_theta),
            e_phi: Vec3::new(-sp, cp, 0.0),
            cos_theta,
            sin_theta,
        }
    }

    /// Frame at an off-pole momentum.
    pub fn at(p: &Vec3) -> Result<Self> {
        let k = p.norm();
        if k == 0.0 {
            return Err(Error::ZeroMomentum);
        }
        let rho = p.x.hypot(p.y);
        let sin_theta = rho / k;
        if sin_theta <= POLE_TOLERANCE {
            return Err(Error::Pole([p.x, p.y, p.z]));
        }
        let phi = p.y.atan2(p.x).rem_euclid(2.0 * std::f64::consts::PI);
        Ok(Self::from_angles(p.z / k, sin_theta, phi))
    }

    /// `φ = 0` limit frame on the `±z` axis.
    pub fn pole(north: bool) -> Self {
        if north {
            Self::from_angles(1.0, 0.0, 0.0)
        } else {
            Self::from_angles(-1.0, 0.0, 0.0)
        }
    }

    /// Frame vectors in photon-frame order `(θ, φ, k)`.
    pub fn axes(&self) -> [Vec3; 3] {
        [self.e_theta, self.e_phi, self.e_k]
    }

    pub fn cot_theta(&self) -> f64 {
        self.cos_theta / self.sin_theta
    }

    /// `ε(p, λ)` in this frame.
    pub fn polarization(&self, helicity: Helicity) -> Vec3C {
        let l = helicity.sign();
        let c = C64::new(-l * FRAC_1_SQRT_2, 0.0);
        let t = self.e_theta.map(|x| C64::new(x, 0.0));
        let f = self.e_phi.map(|x| C64::new(0.0, l * x));
        (t + f) * c
    }

    /// `∂/∂p^a` of `(e_θ, e_φ, e_k)` at radius `k`, indexed `[a][σ]`.
    pub fn derivatives(&self, k: f64) -> [[Vec3; 3]; 3] {
        let cot = self.cot_theta();
        let mut out = [[Vec3::zeros(); 3]; 3];
        for (a, slot) in out.iter_mut().enumerate() {
            let th = self.e_theta[a];
            let ph = self.e_phi[a];
            let d_theta = (self.e_phi * (cot * ph) - self.e_k * th) / k;
            let d_phi = -(self.e_k + self.e_theta * cot) * (ph / k);
            let d_k = (self.e_theta * th + self.e_phi * ph) / k;
            *slot = [d_theta, d_phi, d_k];
        }
        out
    }

    /// `∂ε(p, λ)/∂p^a` for `a = 0, 1, 2`.
    pub fn polarization_derivatives(&self, k: f64, helicity: Helicity) -> [Vec3C; 3] {
        let l = helicity.sign();
        let d = self.derivatives(k);
        let c = C64::new(-l * FRAC_1_SQRT_2, 0.0);
        std::array::from_fn(|a| {
            let t = d[a][0].map(|x| C64::new(x, 0.0));
            let f = d[a][1].map(|x| C64::new(0.0, l * x));
            (t + f) * c
        })
    }
}

/// Polarization vector together with its helicity label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolVector {
    pub eps: Vec3C,
    pub helicity: Helicity,
}

pub fn frame(p: &Vec3) -> Result<Frame> {
    Frame::at(p)
}

/// Pole-frame convention for `sign = +1` (north) or `-1` (south).
pub fn pole_frame(sign: i32) -> Result<Frame> {
    match sign {
        1 => Ok(Frame::pole(true)),
        -1 => Ok(Frame::pole(false)),
        other => Err(Error::InvalidInput(format!("pole sign must be +1 or -1, got {other}"))),
    }
}

pub fn polarization_vector(p: &Vec3, lambda: i32) -> Result<PolVector> {
    let helicity = Helicity::from_int(lambda)?;
    let f = Frame::at(p)?;
    Ok(PolVector { eps: f.polarization(helicity), helicity })
}

fn real(m: Matrix3<f64>) -> Mat3C {
    m.map(|x| C64::new(x, 0.0))
}

/// Spin-1 matrix `(S^a)_ij = -i ε_aij`, `a ∈ {1, 2, 3}`.
pub fn spin_matrix(a: usize) -> Result<Mat3C> {
    if !(1..=3).contains(&a) {
        return Err(Error::BadAxis(a));
    }
    Ok(spin(a - 1))
}

/// Zero-based spin matrix.
pub(crate) fn spin(a: usize) -> Mat3C {
    let mut s = Mat3C::zeros();
    let (i, j) = ((a + 1) % 3, (a + 2) % 3);
    s[(i, j)] = C64::new(0.0, -1.0);
    s[(j, i)] = C64::new(0.0, 1.0);
    s
}

/// `Σ_a S^a v^a` for a real vector.
pub(crate) fn spin_dot(v: &Vec3) -> Mat3C {
    spin(0) * C64::new(v.x, 0.0) + spin(1) * C64::new(v.y, 0.0) + spin(2) * C64::new(v.z, 0.0)
}

/// Helicity operator `Ŵ = S·p/|p|`.
pub fn helicity_matrix(p: &Vec3) -> Result<Mat3C> {
    let k = p.norm();
    if k == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    Ok(spin_dot(&(p / k)))
}

/// `δ_ij - p_i p_j / |p|²`.
pub fn transverse_projector(p: &Vec3) -> Result<Mat3C> {
    let k2 = p.norm_squared();
    if k2 == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    Ok(real(Matrix3::identity() - p * p.transpose() / k2))
}

/// `O_λλ' = ε*(λ)·O·ε(λ')`, rows/columns ordered `(+1, -1)`.
pub fn to_helicity_rep(op: &Mat3C, p: &Vec3) -> Result<Matrix2<C64>> {
    let f = Frame::at(p)?;
    Ok(helicity_rep_in_frame(op, &f))
}

pub(crate) fn helicity_rep_in_frame(op: &Mat3C, f: &Frame) -> Matrix2<C64> {
    let eps = Helicity::BOTH.map(|h| f.polarization(h));
    Matrix2::from_fn(|r, c| eps[r].dotc(&(op * eps[c])))
}

/// `O_σσ' = e(σ)·O·e(σ')` in the photon frame `(θ, φ, k)`.
pub fn to_photon_frame(op: &Mat3C, p: &Vec3) -> Result<Mat3C> {
    let r = real(rotation_r(p)?);
    Ok(r.transpose() * op * r)
}

/// Rotation `R = R_z(φ) R_y(θ)`; its columns are `(e_θ, e_φ, e_k)`.
pub fn rotation_r(p: &Vec3) -> Result<Matrix3<f64>> {
    let f = Frame::at(p)?;
    Ok(Matrix3::from_columns(&f.axes()))
}

/// Projects a photon-frame matrix on the fixed helicity vectors
/// `ε(λ) = -(λ/√2)(x̂ + iλŷ)`.
pub fn helicity_from_frame(op_frame: &Mat3C) -> Matrix2<C64> {
    helicity_rep_in_frame(op_frame, &Frame::pole(true))
}
