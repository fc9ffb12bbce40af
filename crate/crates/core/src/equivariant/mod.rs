//! Rotation-equivariant layers on S² and SO(3).
//!
//! Conventions, with `D` the real Wigner matrices of [`crate::harmonics`]:
//!
//! * S² convolution (correlation) `[f * psi](g) = ∫ f(x) psi(g⁻¹ x) dx`
//!   has Wigner coefficients `H(l) = c(l) psi(l)ᵀ`, an outer product.
//! * SO(3) convolution `[f * psi](g) = ∫ f(h) psi(g⁻¹ h) dh` has
//!   coefficients `pi²/(2l+1) F(l) Psi(l)ᵀ`.
//! * Rotating a signal by `g` multiplies every degree block by `D(l, g)` on
//!   the left, which is `f(g⁻¹ x)` in the spatial domain. Both convolutions
//!   commute with it.

mod relu;
mod s2conv;
mod so3conv;

pub use relu::{spatial_relu, ReluCache, SpatialRelu};
pub use s2conv::{
    s2_conv, s2_conv_backward, s2_conv_raw, FilterMode, S2Filter, SPATIAL_FILTER_RECURSION,
};
pub use so3conv::{
    so3_conv, so3_conv_backward, so3_conv_fourier, so3_conv_raw, SO3Filter, SO3Support,
    DEFAULT_SUPPORT_ANGLE, DEFAULT_SUPPORT_RECURSION,
};

use crate::harmonics::{so3_block_offset, wigner_D_all, S2Coeffs, SO3Coeffs};
use crate::rotation::Rotation;

/// Signals whose coefficients transform under rotations.
pub trait Rotate: Sized {
    fn rotated(&self, g: &Rotation) -> Self;
}

/// Rotate a signal by `g`: `f ↦ f(g⁻¹ ·)`.
pub fn rotate_signal<T: Rotate>(coeffs: &T, g: &Rotation) -> T {
    coeffs.rotated(g)
}

impl Rotate for S2Coeffs {
    fn rotated(&self, g: &Rotation) -> Self {
        let lmax = self.band_limit;
        let d_all = wigner_D_all(lmax, g).expect("band limit validated on construction");
        let mut out = self.clone();
        for c in 0..self.channels {
            let src = self.channel(c);
            let dst = out.channel_mut(c);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let dl = &d_all[so3_block_offset(l)..so3_block_offset(l) + d * d];
                let s = l * l;
                for m in 0..d {
                    dst[s + m] = (0..d).map(|n| dl[m * d + n] * src[s + n]).sum();
                }
            }
        }
        out
    }
}

impl Rotate for SO3Coeffs {
    fn rotated(&self, g: &Rotation) -> Self {
        let lmax = self.band_limit;
        let d_all = wigner_D_all(lmax, g).expect("band limit validated on construction");
        let mut out = self.clone();
        for c in 0..self.channels {
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let off = so3_block_offset(l);
                let dl = &d_all[off..off + d * d];
                let src = self.block(c, l).to_vec();
                matmul_into(dl, &src, d, out.block_mut(c, l));
            }
        }
        out
    }
}

/// `out = a b` for square `d x d` row-major blocks.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
}

/// `out += a bᵀ` for square blocks.
pub(crate) fn add_matmul_bt(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        let ar = &a[i * d..(i + 1) * d];
        for j in 0..d {
            let br = &b[j * d..(j + 1) * d];
            out[i * d + j] += ar.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out += a b` for square blocks.
pub(crate) fn add_matmul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
}

/// `out += aᵀ b` for square blocks.
pub(crate) fn add_matmul_at(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for k in 0..d {
        for i in 0..d {
            let aki = a[k * d + i];
            if aki == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aki * b[k * d + j];
            }
        }
    }
}
