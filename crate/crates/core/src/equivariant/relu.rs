//! Pointwise ReLU applied in the spatial domain of an SO(3) signal.

use crate::error::{Error, Result};
use crate::grids::{quadrature_so3, SO3Quadrature};
use crate::harmonics::{scale_degrees, so3_fft_with, So3Plan, SO3Coeffs};

/// `so3_fft(max(0, so3_ifft(f)))` on a fixed quadrature grid.
#[derive(Clone, Debug)]
pub struct SpatialRelu {
    plan: So3Plan,
    weights: Vec<f64>,
}

/// Which quadrature samples were positive in the forward pass, per channel.
#[derive(Clone, Debug)]
pub struct ReluCache {
    mask: Vec<bool>,
}

impl SpatialRelu {
    /// The quadrature grid should have band limit at least `2 lmax` to keep
    /// aliasing of the rectified signal small.
    pub fn new(lmax: usize, quad: &SO3Quadrature) -> Result<Self> {
        if quad.band_limit < lmax {
            return Err(Error::BandLimit {
                requested: lmax,
                max: quad.band_limit,
            });
        }
        Ok(SpatialRelu {
            plan: So3Plan::new(lmax, &quad.layout),
            weights: quad.weights.clone(),
        })
    }

    /// ReLU on the default grid of band limit `2 lmax`.
    pub fn oversampled(lmax: usize) -> Result<Self> {
        Self::new(lmax, &quadrature_so3((2 * lmax).max(1))?)
    }

    pub fn lmax(&self) -> usize {
        self.plan.lmax
    }

    pub fn forward(&self, signal: &SO3Coeffs) -> (SO3Coeffs, ReluCache) {
        let n = self.plan.len();
        let mut samples = vec![0.0; n * signal.channels];
        let mut mask = vec![false; n * signal.channels];
        for c in 0..signal.channels {
            let s = &mut samples[c * n..(c + 1) * n];
            self.plan.synthesize(signal.channel(c), s);
            for (v, m) in s.iter_mut().zip(&mut mask[c * n..(c + 1) * n]) {
                *m = *v > 0.0;
                if !*m {
                    *v = 0.0;
                }
            }
        }
        let out = so3_fft_with(&self.plan, &self.weights, &samples, signal.channels)
            .expect("sample count matches plan");
        (out, ReluCache { mask })
    }

    pub fn backward(&self, cache: &ReluCache, grad_out: &SO3Coeffs) -> SO3Coeffs {
        let n = self.plan.len();
        let lmax = self.plan.lmax;
        let mut grad_in = SO3Coeffs::zeros(lmax, grad_out.channels).expect("valid band limit");
        let mut scaled = vec![0.0; grad_out.per_channel()];
        let mut ds = vec![0.0; n];
        for c in 0..grad_out.channels {
            scaled.copy_from_slice(grad_out.channel(c));
            scale_degrees(lmax, &mut scaled);
            self.plan.synthesize(&scaled, &mut ds);
            for ((v, w), m) in ds.iter_mut().zip(&self.weights).zip(&cache.mask[c * n..(c + 1) * n]) {
                *v = if *m { *v * w } else { 0.0 };
            }
            self.plan.adjoint(&ds, grad_in.channel_mut(c));
        }
        grad_in
    }
}

/// One-shot spatial ReLU on the given quadrature grid.
pub fn spatial_relu(signal: &SO3Coeffs, quad: &SO3Quadrature) -> Result<SO3Coeffs> {
    Ok(SpatialRelu::new(signal.band_limit, quad)?.forward(signal).0)
}
