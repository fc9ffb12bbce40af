//! Band-limited Fourier analysis on S² and SO(3) in a real basis.
//!
//! Normalization: harmonics are orthonormal on the sphere (total area `4pi`)
//! and the Haar measure on SO(3) has total volume `pi^2`, so
//! `∫ D(l)[m][n]² dg = pi² / (2l + 1)` and the uniform density is `1/pi²`.
//!
//! S² coefficients are stored per channel at `l² + l + k`. SO(3)
//! coefficients are stored per channel as consecutive `(2l+1) x (2l+1)`
//! blocks, block `l` starting at `l (4l² - 1) / 3`.

mod sh;
mod transform;
mod wigner;

use std::f64::consts::PI;
use std::io::{Read, Write};

pub use sh::{sh, sh_all, ShBasis};
pub use transform::So3Plan;
pub use wigner::{fault, wigner_D, wigner_D_all, wigner_d, wigner_d_all, z_rotation};

use crate::error::{Error, Result};
use crate::grids::{EulerLayout, S2Quadrature, SO3Quadrature};
use crate::io::{read_f64, read_magic, read_u32};
use crate::rotation::{Rotation, Vec3};

/// Largest supported band limit.
pub const L_MAX: usize = 16;

/// Number of S² coefficients per channel, `(L+1)²`.
pub const fn s2_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

pub fn s2_index(l: usize, k: i64) -> usize {
    ((l * l + l) as i64 + k) as usize
}

/// Number of SO(3) coefficients per channel, `Σ (2l+1)²`.
pub const fn so3_len(lmax: usize) -> usize {
    (lmax + 1) * (2 * lmax + 1) * (2 * lmax + 3) / 3
}

pub const fn so3_block_offset(l: usize) -> usize {
    if l == 0 {
        0
    } else {
        l * (4 * l * l - 1) / 3
    }
}

pub fn so3_index(l: usize, m: i64, n: i64) -> usize {
    let d = 2 * l as i64 + 1;
    so3_block_offset(l) + ((m + l as i64) * d + n + l as i64) as usize
}

fn check_band(lmax: usize) -> Result<()> {
    if lmax > L_MAX {
        Err(Error::BandLimit {
            requested: lmax,
            max: L_MAX,
        })
    } else {
        Ok(())
    }
}

fn check_index(l: usize, k: i64, lmax: usize) -> Result<()> {
    if l > lmax || k.unsigned_abs() as usize > l {
        Err(Error::IndexOutOfRange {
            l: l as i64,
            k,
            max: lmax,
        })
    } else {
        Ok(())
    }
}

/// Multi-channel spherical harmonic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct S2Coeffs {
    pub band_limit: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// Multi-channel Wigner coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SO3Coeffs {
    pub band_limit: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

const S2_BLOB_MAGIC: &[u8; 4] = b"S2CF";
const SO3_BLOB_MAGIC: &[u8; 4] = b"SOCF";

macro_rules! coeff_common {
    ($ty:ident, $len:ident, $magic:ident) => {
        impl $ty {
            pub fn zeros(band_limit: usize, channels: usize) -> Result<Self> {
                check_band(band_limit)?;
                Ok($ty {
                    band_limit,
                    channels,
                    data: vec![0.0; channels * $len(band_limit)],
                })
            }

            pub fn from_vec(band_limit: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
                check_band(band_limit)?;
                let want = channels * $len(band_limit);
                if data.len() != want {
                    return Err(Error::ShapeMismatch(format!(
                        "{} channels at band limit {} need {} values, got {}",
                        channels,
                        band_limit,
                        want,
                        data.len()
                    )));
                }
                Ok($ty {
                    band_limit,
                    channels,
                    data,
                })
            }

            /// Coefficients per channel.
            pub fn per_channel(&self) -> usize {
                $len(self.band_limit)
            }

            pub fn channel(&self, c: usize) -> &[f64] {
                let n = self.per_channel();
                &self.data[c * n..(c + 1) * n]
            }

            pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
                let n = self.per_channel();
                &mut self.data[c * n..(c + 1) * n]
            }

            pub fn norm(&self) -> f64 {
                self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
            }

            /// Blob: magic, band limit (u32), channels (u32), then the
            /// coefficients as little-endian f64 in storage order.
            pub fn write_blob(&self, mut w: impl Write) -> Result<()> {
                w.write_all($magic)?;
                w.write_all(&(self.band_limit as u32).to_le_bytes())?;
                w.write_all(&(self.channels as u32).to_le_bytes())?;
                for v in &self.data {
                    w.write_all(&v.to_le_bytes())?;
                }
                Ok(())
            }

            pub fn read_blob(mut r: impl Read) -> Result<Self> {
                read_magic(&mut r, $magic)?;
                let band_limit = read_u32(&mut r)? as usize;
                let channels = read_u32(&mut r)? as usize;
                check_band(band_limit)?;
                let n = channels * $len(band_limit);
                let mut data = Vec::with_capacity(n);
                for _ in 0..n {
                    data.push(read_f64(&mut r)?);
                }
                Self::from_vec(band_limit, channels, data)
            }
        }
    };
}

coeff_common!(S2Coeffs, s2_len, S2_BLOB_MAGIC);
coeff_common!(SO3Coeffs, so3_len, SO3_BLOB_MAGIC);

impl S2Coeffs {
    pub fn get(&self, c: usize, l: usize, k: i64) -> Result<f64> {
        check_index(l, k, self.band_limit)?;
        Ok(self.channel(c)[s2_index(l, k)])
    }

    pub fn set(&mut self, c: usize, l: usize, k: i64, v: f64) -> Result<()> {
        check_index(l, k, self.band_limit)?;
        self.channel_mut(c)[s2_index(l, k)] = v;
        Ok(())
    }

    /// Degree-`l` slice of one channel.
    pub fn degree(&self, c: usize, l: usize) -> &[f64] {
        &self.channel(c)[l * l..(l + 1) * (l + 1)]
    }
}

impl SO3Coeffs {
    pub fn get(&self, c: usize, l: usize, m: i64, n: i64) -> Result<f64> {
        check_index(l, m, self.band_limit)?;
        check_index(l, n, self.band_limit)?;
        Ok(self.channel(c)[so3_index(l, m, n)])
    }

    pub fn set(&mut self, c: usize, l: usize, m: i64, n: i64, v: f64) -> Result<()> {
        check_index(l, m, self.band_limit)?;
        check_index(l, n, self.band_limit)?;
        self.channel_mut(c)[so3_index(l, m, n)] = v;
        Ok(())
    }

    /// Degree-`l` block of one channel, row-major.
    pub fn block(&self, c: usize, l: usize) -> &[f64] {
        let off = so3_block_offset(l);
        &self.channel(c)[off..off + (2 * l + 1) * (2 * l + 1)]
    }

    pub fn block_mut(&mut self, c: usize, l: usize) -> &mut [f64] {
        let off = so3_block_offset(l);
        &mut self.channel_mut(c)[off..off + (2 * l + 1) * (2 * l + 1)]
    }
}

fn check_samples(got: usize, channels: usize, points: usize) -> Result<()> {
    if got != channels * points {
        Err(Error::ShapeMismatch(format!(
            "expected {channels} x {points} samples, got {got}"
        )))
    } else {
        Ok(())
    }
}

/// Forward transform of samples (`channels x points`, channel-major) on an
/// S² quadrature grid: `c = Σ_p w_p f(x_p) Y(x_p)`.
pub fn s2_fft(
    quad: &S2Quadrature,
    samples: &[f64],
    channels: usize,
    band_limit: usize,
) -> Result<S2Coeffs> {
    check_band(band_limit)?;
    if quad.band_limit < band_limit {
        return Err(Error::BandLimit {
            requested: band_limit,
            max: quad.band_limit,
        });
    }
    check_samples(samples.len(), channels, quad.len())?;
    let basis = ShBasis::new(band_limit, &quad.points);
    let mut out = S2Coeffs::zeros(band_limit, channels)?;
    for c in 0..channels {
        let n = quad.len();
        basis.analyze(
            &samples[c * n..(c + 1) * n],
            Some(&quad.weights),
            out.channel_mut(c),
        );
    }
    Ok(out)
}

/// Evaluate S² coefficients at arbitrary unit directions; output is
/// `channels x points`, channel-major.
pub fn s2_ifft(coeffs: &S2Coeffs, points: &[Vec3]) -> Vec<f64> {
    let basis = ShBasis::new(coeffs.band_limit, points);
    let n = points.len();
    let mut out = vec![0.0; coeffs.channels * n];
    for c in 0..coeffs.channels {
        basis.synthesize(coeffs.channel(c), &mut out[c * n..(c + 1) * n]);
    }
    out
}

/// Forward transform on an SO(3) quadrature grid:
/// `F(l) = (2l+1)/pi² Σ_p w_p f(g_p) D(l, g_p)`.
pub fn so3_fft(
    quad: &SO3Quadrature,
    samples: &[f64],
    channels: usize,
    band_limit: usize,
) -> Result<SO3Coeffs> {
    check_band(band_limit)?;
    if quad.band_limit < band_limit {
        return Err(Error::BandLimit {
            requested: band_limit,
            max: quad.band_limit,
        });
    }
    check_samples(samples.len(), channels, quad.len())?;
    let plan = So3Plan::new(band_limit, &quad.layout);
    so3_fft_with(&plan, &quad.weights, samples, channels)
}

/// [`so3_fft`] with a prebuilt plan over the quadrature layout.
pub fn so3_fft_with(
    plan: &So3Plan,
    weights: &[f64],
    samples: &[f64],
    channels: usize,
) -> Result<SO3Coeffs> {
    let n = plan.len();
    check_samples(samples.len(), channels, n)?;
    let mut out = SO3Coeffs::zeros(plan.lmax, channels)?;
    let mut weighted = vec![0.0; n];
    for c in 0..channels {
        for ((o, s), w) in weighted.iter_mut().zip(&samples[c * n..(c + 1) * n]).zip(weights) {
            *o = s * w;
        }
        let ch = out.channel_mut(c);
        plan.adjoint(&weighted, ch);
        scale_degrees(plan.lmax, ch);
    }
    Ok(out)
}

/// Multiply degree `l` of one SO(3) channel by `(2l+1)/pi²`.
pub fn scale_degrees(lmax: usize, ch: &mut [f64]) {
    for l in 0..=lmax {
        let s = (2 * l + 1) as f64 / (PI * PI);
        let off = so3_block_offset(l);
        for v in &mut ch[off..off + (2 * l + 1) * (2 * l + 1)] {
            *v *= s;
        }
    }
}

/// Evaluate SO(3) coefficients on every point of an Euler layout (for
/// example the HEALPix SO(3) grid or a quadrature grid).
pub fn so3_ifft(coeffs: &SO3Coeffs, layout: &EulerLayout) -> Vec<f64> {
    let plan = So3Plan::new(coeffs.band_limit, layout);
    so3_ifft_with(&plan, coeffs)
}

pub fn so3_ifft_with(plan: &So3Plan, coeffs: &SO3Coeffs) -> Vec<f64> {
    let n = plan.len();
    let mut out = vec![0.0; coeffs.channels * n];
    for c in 0..coeffs.channels {
        plan.synthesize(coeffs.channel(c), &mut out[c * n..(c + 1) * n]);
    }
    out
}

/// Evaluate SO(3) coefficients at arbitrary rotations.
pub fn so3_ifft_at(coeffs: &SO3Coeffs, rotations: &[Rotation]) -> Vec<f64> {
    let n = rotations.len();
    let mut out = vec![0.0; coeffs.channels * n];
    for (p, r) in rotations.iter().enumerate() {
        let d = wigner_D_all(coeffs.band_limit, r).expect("band limit validated on construction");
        for c in 0..coeffs.channels {
            out[c * n + p] = d.iter().zip(coeffs.channel(c)).map(|(a, b)| a * b).sum();
        }
    }
    out
}
