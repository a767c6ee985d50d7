//! State import/export and output formatting.
//!
//! A state document is JSON holding grid parameters and a [`StateSpec`].
//! Raw amplitudes go to a little-endian binary file, row-major over
//! `[λ, k, θ, φ]` as `(re, im)` pairs, with a JSON sidecar describing it.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::photon_state::{HelicityAmplitude, StateSpec};
use crate::sphgrid::{GridParams, MomentumGrid};
use crate::C64;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Grid parameters plus a state recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub grid: GridParams,
    pub state: StateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeDtype {
    /// `f32` pairs.
    #[default]
    Complex64,
    /// `f64` pairs.
    Complex128,
}

impl AmplitudeDtype {
    fn pair_bytes(self) -> usize {
        match self {
            AmplitudeDtype::Complex64 => 8,
            AmplitudeDtype::Complex128 => 16,
        }
    }
}

/// Sidecar describing a binary amplitude file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSidecar {
    pub dtype: AmplitudeDtype,
    pub byte_order: String,
    pub layout: String,
    /// `[2, n_k, n_θ, n_φ]`.
    pub shape: [usize; 4],
    pub grid: GridParams,
    /// Binary file name, relative to the sidecar.
    pub data: String,
}

/// Encodes amplitudes row-major over `[λ, k, θ, φ]`.
pub fn encode_amplitudes(psi: &HelicityAmplitude, dtype: AmplitudeDtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * psi.grid().len() * dtype.pair_bytes());
    for comp in psi.components() {
        for z in comp {
            match dtype {
                AmplitudeDtype::Complex64 => {
                    out.extend_from_slice(&(z.re as f32).to_le_bytes());
                    out.extend_from_slice(&(z.im as f32).to_le_bytes());
                }
                AmplitudeDtype::Complex128 => {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn decode_amplitudes(bytes: &[u8], dtype: AmplitudeDtype, grid: &Arc<MomentumGrid>) -> Result<HelicityAmplitude> {
    let n = grid.len();
    let expected = 2 * n * dtype.pair_bytes();
    if bytes.len() != expected {
        return Err(Error::InvalidInput(format!("amplitude file has {} bytes, expected {expected}", bytes.len())));
    }
    let values: Vec<C64> = match dtype {
        AmplitudeDtype::Complex64 => bytes
            .chunks_exact(8)
            .map(|c| C64::new(f32::from_le_bytes(c[..4].try_into().unwrap()) as f64, f32::from_le_bytes(c[4..].try_into().unwrap()) as f64))
            .collect(),
        AmplitudeDtype::Complex128 => bytes
            .chunks_exact(16)
            .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect(),
    };
    let (plus, minus) = values.split_at(n);
    HelicityAmplitude::new(grid, plus.to_vec(), minus.to_vec())
}

/// Writes `<stem>.bin` and `<stem>.json` into `dir`; returns both paths.
pub fn write_amplitudes(psi: &HelicityAmplitude, dir: &Path, stem: &str, dtype: AmplitudeDtype) -> Result<(PathBuf, PathBuf)> {
    let p = psi.grid().params();
    let data = format!("{stem}.bin");
    let sidecar = AmplitudeSidecar {
        dtype,
        byte_order: "little".into(),
        layout: "row-major [helicity(+1,-1), k, theta, phi], (re, im) pairs".into(),
        shape: [2, p.n_k, p.n_theta, p.n_phi],
        grid: p.clone(),
        data: data.clone(),
    };
    let bin = dir.join(&data);
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&bin, encode_amplitudes(psi, dtype))?;
    std::fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok((bin, json))
}

/// Reads a sidecar and the binary file it names.
pub fn read_amplitudes(sidecar_path: &Path) -> Result<HelicityAmplitude> {
    let sidecar: AmplitudeSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
    let g = MomentumGrid::build(sidecar.grid.clone())?;
    let expected = [2, g.params().n_k, g.params().n_theta, g.params().n_phi];
    if sidecar.shape != expected {
        return Err(Error::InvalidInput(format!("sidecar shape {:?} does not match grid {:?}", sidecar.shape, expected)));
    }
    let dir = sidecar_path.parent().unwrap_or_else(|| Path::new("."));
    let bytes = std::fs::read(dir.join(&sidecar.data))?;
    decode_amplitudes(&bytes, sidecar.dtype, &g)
}
