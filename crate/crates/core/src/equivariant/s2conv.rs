//! S² → SO(3) convolution with a globally supported filter.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::healpix_s2;
use crate::harmonics::{s2_len, so3_block_offset, S2Coeffs, SO3Coeffs, ShBasis};

/// HEALPix recursion of the sample grid used by spatial-mode filters.
pub const SPATIAL_FILTER_RECURSION: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// Parameters are the harmonic coefficients themselves.
    Fourier,
    /// Parameters are samples on a full HEALPix grid, converted to
    /// coefficients by equal-weight quadrature.
    Spatial,
}

impl std::str::FromStr for FilterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(FilterMode::Fourier),
            "spatial" => Ok(FilterMode::Spatial),
            _ => Err(Error::Config(format!(
                "unknown filter mode '{s}' (expected fourier or spatial)"
            ))),
        }
    }
}

/// Learned S² filter for `c_in x c_out` channel pairs. Values are ordered
/// input channel, output channel, then coefficient or grid sample.
#[derive(Clone, Debug)]
pub struct S2Filter {
    pub mode: FilterMode,
    pub c_in: usize,
    pub c_out: usize,
    pub band_limit: usize,
    pub values: Vec<f64>,
    basis: Option<ShBasis>,
}

impl S2Filter {
    pub fn new(mode: FilterMode, c_in: usize, c_out: usize, band_limit: usize) -> Result<Self> {
        S2Coeffs::zeros(band_limit, 0)?;
        let basis = match mode {
            FilterMode::Fourier => None,
            FilterMode::Spatial => {
                let grid = healpix_s2(SPATIAL_FILTER_RECURSION)?;
                Some(ShBasis::new(band_limit, &grid.points))
            }
        };
        let per_pair = match &basis {
            None => s2_len(band_limit),
            Some(b) => b.n_points,
        };
        Ok(S2Filter {
            mode,
            c_in,
            c_out,
            band_limit,
            values: vec![0.0; c_in * c_out * per_pair],
            basis,
        })
    }

    fn per_pair(&self) -> usize {
        self.values.len() / (self.c_in * self.c_out).max(1)
    }

    /// Zero-mean Gaussian values giving coefficient variance
    /// `1 / (c_in (L+1)²)`.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let coeff_var = 1.0 / (self.c_in * s2_len(self.band_limit)) as f64;
        let var = match &self.basis {
            None => coeff_var,
            // coefficient variance is 4pi/N times the sample variance
            Some(b) => coeff_var * b.n_points as f64 / (4.0 * PI),
        };
        let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
        for v in &mut self.values {
            *v = normal.sample(rng);
        }
    }

    /// Harmonic coefficients, `c_in x c_out x (L+1)²`.
    pub fn coefficients(&self) -> Vec<f64> {
        let k = s2_len(self.band_limit);
        match &self.basis {
            None => self.values.clone(),
            Some(b) => {
                let n = b.n_points;
                let scale = vec![4.0 * PI / n as f64; n];
                let mut out = vec![0.0; self.c_in * self.c_out * k];
                for (pair, chunk) in out.chunks_mut(k).enumerate() {
                    b.analyze(&self.values[pair * n..(pair + 1) * n], Some(&scale), chunk);
                }
                out
            }
        }
    }

    /// Gradient with respect to `values` given the gradient with respect to
    /// [`S2Filter::coefficients`].
    pub fn values_grad(&self, dcoeffs: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => dcoeffs.to_vec(),
            Some(b) => {
                let k = s2_len(self.band_limit);
                let n = self.per_pair();
                let scale = 4.0 * PI / n as f64;
                let mut out = vec![0.0; self.values.len()];
                for (pair, chunk) in out.chunks_mut(n).enumerate() {
                    b.synthesize(&dcoeffs[pair * k..(pair + 1) * k], chunk);
                    chunk.iter_mut().for_each(|v| *v *= scale);
                }
                out
            }
        }
    }
}

/// S² convolution: `out[o](l) = Σ_i c[i](l) psi[i][o](l)ᵀ`.
pub fn s2_conv(signal: &S2Coeffs, filter: &S2Filter) -> Result<SO3Coeffs> {
    if signal.band_limit != filter.band_limit {
        return Err(Error::ShapeMismatch(format!(
            "signal band limit {} but filter band limit {}",
            signal.band_limit, filter.band_limit
        )));
    }
    if signal.channels != filter.c_in {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} channels but filter expects {}",
            signal.channels, filter.c_in
        )));
    }
    Ok(s2_conv_raw(signal, &filter.coefficients(), filter.c_out))
}

/// [`s2_conv`] with filter coefficients given directly as
/// `c_in x c_out x (L+1)²`.
pub fn s2_conv_raw(signal: &S2Coeffs, psi: &[f64], c_out: usize) -> SO3Coeffs {
    let lmax = signal.band_limit;
    let k = s2_len(lmax);
    debug_assert_eq!(psi.len(), signal.channels * c_out * k);
    let mut out = SO3Coeffs::zeros(lmax, c_out).expect("band limit already validated");
    for i in 0..signal.channels {
        let c = signal.channel(i);
        for o in 0..c_out {
            let p = &psi[(i * c_out + o) * k..(i * c_out + o + 1) * k];
            let dst = out.channel_mut(o);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let s = l * l;
                let off = so3_block_offset(l);
                for m in 0..d {
                    let cm = c[s + m];
                    if cm == 0.0 {
                        continue;
                    }
                    let row = &mut dst[off + m * d..off + (m + 1) * d];
                    for (r, pn) in row.iter_mut().zip(&p[s..s + d]) {
                        *r += cm * pn;
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`s2_conv_raw`] with respect to the signal and the filter
/// coefficients.
pub fn s2_conv_backward(signal: &S2Coeffs, psi: &[f64], grad_out: &SO3Coeffs) -> (S2Coeffs, Vec<f64>) {
    let lmax = signal.band_limit;
    let k = s2_len(lmax);
    let c_out = grad_out.channels;
    let mut dsig = S2Coeffs::zeros(lmax, signal.channels).expect("band limit already validated");
    let mut dpsi = vec![0.0; psi.len()];
    for i in 0..signal.channels {
        let c = signal.channel(i);
        for o in 0..c_out {
            let pair = i * c_out + o;
            let p = &psi[pair * k..(pair + 1) * k];
            let g = grad_out.channel(o);
            let dp = &mut dpsi[pair * k..(pair + 1) * k];
            let dc = dsig.channel_mut(i);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let s = l * l;
                let off = so3_block_offset(l);
                for m in 0..d {
                    let row = &g[off + m * d..off + (m + 1) * d];
                    dc[s + m] += row.iter().zip(&p[s..s + d]).map(|(a, b)| a * b).sum::<f64>();
                    let cm = c[s + m];
                    for (dpn, gmn) in dp[s..s + d].iter_mut().zip(row) {
                        *dpn += gmn * cm;
                    }
                }
            }
        }
    }
    (dsig, dpsi)
}
