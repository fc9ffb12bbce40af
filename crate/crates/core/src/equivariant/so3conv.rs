//! SO(3) convolution with a locally supported filter.
//!
//! The filter is a weighted sum of point masses `Σ_s v_s δ(g_s)` at grid
//! rotations `g_s` near the identity. Its Wigner coefficients are
//! `(2l+1)/pi² Σ_s v_s D(l, g_s)`, so the layer computes
//!
//! ```text
//! out(g) = Σ_s v_s f(g g_s)      out(l) = F(l) K(l)ᵀ,  K(l) = Σ_s v_s D(l, g_s)
//! ```
//!
//! A unit sample at the identity reproduces the input exactly.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{add_matmul, add_matmul_at, add_matmul_bt};
use crate::error::{Error, Result};
use crate::grids::{healpix_so3, SO3Grid};
use crate::harmonics::{so3_block_offset, so3_len, wigner_D_all, SO3Coeffs};
use crate::rotation::{Rotation, geodesic_distance};

/// 22.5 degrees.
pub const DEFAULT_SUPPORT_ANGLE: f64 = std::f64::consts::PI / 8.0;
/// SO(3) grid recursion whose points carry the filter samples.
pub const DEFAULT_SUPPORT_RECURSION: u32 = 3;

/// Grid rotations within `angle` of the identity and their Wigner blocks.
#[derive(Clone, Debug)]
pub struct SO3Support {
    pub lmax: usize,
    pub angle: f64,
    pub rotations: Vec<Rotation>,
    wigner: Vec<f64>,
}

impl SO3Support {
    pub fn new(lmax: usize, grid: &SO3Grid, angle: f64) -> Result<Self> {
        if !(angle > 0.0 && angle <= std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "support angle {angle} must be in (0, pi]"
            )));
        }
        let rotations: Vec<Rotation> = grid
            .rotations
            .iter()
            .filter(|r| geodesic_distance(r, &Rotation::identity()) <= angle + 1e-12)
            .copied()
            .collect();
        if rotations.is_empty() {
            return Err(Error::Empty(format!(
                "no recursion-{} grid rotation within {angle} rad of identity",
                grid.recursion
            )));
        }
        Self::from_rotations(lmax, rotations, angle)
    }

    /// Support on an explicit rotation list; every rotation must lie within
    /// `angle` of the identity.
    pub fn from_rotations(lmax: usize, rotations: Vec<Rotation>, angle: f64) -> Result<Self> {
        if let Some(r) = rotations.iter().find(|r| r.angle() > angle + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "support rotation {r} lies beyond {angle} rad"
            )));
        }
        let mut wigner = Vec::with_capacity(rotations.len() * so3_len(lmax));
        for r in &rotations {
            wigner.extend(wigner_D_all(lmax, r)?);
        }
        Ok(SO3Support {
            lmax,
            angle,
            rotations,
            wigner,
        })
    }

    /// Support on the default grid with the default 22.5 degree radius.
    pub fn default_for(lmax: usize) -> Result<Self> {
        Self::new(lmax, &healpix_so3(DEFAULT_SUPPORT_RECURSION)?, DEFAULT_SUPPORT_ANGLE)
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    fn wigner(&self, s: usize) -> &[f64] {
        let n = so3_len(self.lmax);
        &self.wigner[s * n..(s + 1) * n]
    }
}

/// Locally supported SO(3) filter; values ordered input channel, output
/// channel, support point.
#[derive(Clone, Debug)]
pub struct SO3Filter {
    pub c_in: usize,
    pub c_out: usize,
    pub support: Arc<SO3Support>,
    pub values: Vec<f64>,
}

impl SO3Filter {
    pub fn new(c_in: usize, c_out: usize, support: Arc<SO3Support>) -> Self {
        let n = c_in * c_out * support.len();
        SO3Filter {
            c_in,
            c_out,
            support,
            values: vec![0.0; n],
        }
    }

    /// Zero-mean Gaussian samples with variance `1 / (c_in |support|)`.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let var = 1.0 / (self.c_in * self.support.len()) as f64;
        let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
        for v in &mut self.values {
            *v = normal.sample(rng);
        }
    }

    /// `K(l) = Σ_s v_s D(l, g_s)` per channel pair, `c_in x c_out x so3_len`.
    pub fn kernel(&self) -> Vec<f64> {
        let n = so3_len(self.support.lmax);
        let ns = self.support.len();
        let mut out = vec![0.0; self.c_in * self.c_out * n];
        for (pair, k) in out.chunks_mut(n).enumerate() {
            for s in 0..ns {
                let v = self.values[pair * ns + s];
                if v == 0.0 {
                    continue;
                }
                for (kk, d) in k.iter_mut().zip(self.support.wigner(s)) {
                    *kk += v * d;
                }
            }
        }
        out
    }

    /// Gradient with respect to `values` from the gradient with respect to
    /// [`SO3Filter::kernel`].
    pub fn values_grad(&self, dkernel: &[f64]) -> Vec<f64> {
        let n = so3_len(self.support.lmax);
        let ns = self.support.len();
        let mut out = vec![0.0; self.values.len()];
        for pair in 0..self.c_in * self.c_out {
            let dk = &dkernel[pair * n..(pair + 1) * n];
            for s in 0..ns {
                out[pair * ns + s] = dk
                    .iter()
                    .zip(self.support.wigner(s))
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        out
    }

    /// Wigner coefficients of the filter as a function on SO(3), one channel
    /// per `(input, output)` pair.
    pub fn coefficients(&self) -> SO3Coeffs {
        let lmax = self.support.lmax;
        let mut c = SO3Coeffs::from_vec(lmax, self.c_in * self.c_out, self.kernel())
            .expect("kernel sized from support");
        for ch in 0..c.channels {
            crate::harmonics::scale_degrees(lmax, c.channel_mut(ch));
        }
        c
    }
}

/// SO(3) convolution with a point-mass filter.
pub fn so3_conv(signal: &SO3Coeffs, filter: &SO3Filter) -> Result<SO3Coeffs> {
    if signal.band_limit != filter.support.lmax {
        return Err(Error::ShapeMismatch(format!(
            "signal band limit {} but filter band limit {}",
            signal.band_limit, filter.support.lmax
        )));
    }
    if signal.channels != filter.c_in {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} channels but filter expects {}",
            signal.channels, filter.c_in
        )));
    }
    Ok(so3_conv_raw(signal, &filter.kernel(), filter.c_out))
}

/// SO(3) convolution with a filter given by Wigner coefficients (channels
/// ordered `(input, output)` pairs): `out(l) = pi²/(2l+1) F(l) Psi(l)ᵀ`.
pub fn so3_conv_fourier(signal: &SO3Coeffs, psi: &SO3Coeffs, c_out: usize) -> Result<SO3Coeffs> {
    if psi.band_limit != signal.band_limit || psi.channels != signal.channels * c_out {
        return Err(Error::ShapeMismatch(format!(
            "filter with {} channels at band limit {} does not fit {} -> {} channels at band limit {}",
            psi.channels, psi.band_limit, signal.channels, c_out, signal.band_limit
        )));
    }
    let lmax = signal.band_limit;
    let mut kernel = psi.data.clone();
    for ch in kernel.chunks_mut(so3_len(lmax)) {
        for l in 0..=lmax {
            let s = std::f64::consts::PI.powi(2) / (2 * l + 1) as f64;
            let off = so3_block_offset(l);
            ch[off..off + (2 * l + 1) * (2 * l + 1)]
                .iter_mut()
                .for_each(|v| *v *= s);
        }
    }
    Ok(so3_conv_raw(signal, &kernel, c_out))
}

/// `out[o](l) = Σ_i F[i](l) K[i][o](l)ᵀ`.
pub fn so3_conv_raw(signal: &SO3Coeffs, kernel: &[f64], c_out: usize) -> SO3Coeffs {
    let lmax = signal.band_limit;
    let n = so3_len(lmax);
    let mut out = SO3Coeffs::zeros(lmax, c_out).expect("band limit already validated");
    for i in 0..signal.channels {
        let f = signal.channel(i);
        for o in 0..c_out {
            let k = &kernel[(i * c_out + o) * n..(i * c_out + o + 1) * n];
            let dst = out.channel_mut(o);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let r = so3_block_offset(l)..so3_block_offset(l) + d * d;
                add_matmul_bt(&f[r.clone()], &k[r.clone()], d, &mut dst[r]);
            }
        }
    }
    out
}

/// Gradients of [`so3_conv_raw`] with respect to the signal and kernel.
pub fn so3_conv_backward(
    signal: &SO3Coeffs,
    kernel: &[f64],
    grad_out: &SO3Coeffs,
) -> (SO3Coeffs, Vec<f64>) {
    let lmax = signal.band_limit;
    let n = so3_len(lmax);
    let c_out = grad_out.channels;
    let mut dsig = SO3Coeffs::zeros(lmax, signal.channels).expect("band limit already validated");
    let mut dk = vec![0.0; kernel.len()];
    for i in 0..signal.channels {
        let f = signal.channel(i);
        for o in 0..c_out {
            let pair = i * c_out + o;
            let k = &kernel[pair * n..(pair + 1) * n];
            let g = grad_out.channel(o);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let r = so3_block_offset(l)..so3_block_offset(l) + d * d;
                // dF = G K ; dK = Gᵀ F
                add_matmul(&g[r.clone()], &k[r.clone()], d, &mut dsig.channel_mut(i)[r.clone()]);
                add_matmul_at(&g[r.clone()], &f[r.clone()], d, &mut dk[pair * n..][r]);
            }
        }
    }
    (dsig, dk)
}
