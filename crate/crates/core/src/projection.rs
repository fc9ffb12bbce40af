//! Orthographic lifting of a planar feature map onto the visible hemisphere.
//!
//! The image plane spans `[-1, 1]²` with `+x` to the right and `+y` up, and
//! inscribes the unit disk. A sphere point `(x, y, z)` with `z >= 0` reads
//! the feature map at `(x, y)`:
//!
//! ```text
//! col = (x + 1) W / 2 - 1/2        row = (1 - y) H / 2 - 1/2
//! ```
//!
//! so pixel centers sit at half-integer positions and the pole reads the
//! image center. Samples are bilinearly interpolated, tapered toward the rim,
//! and fitted with harmonics by ridge least squares on a random subset of the
//! hemisphere grid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{healpix_s2, hemisphere};
use crate::harmonics::{s2_len, S2Coeffs, ShBasis};
use crate::rotation::Vec3;

/// Ridge regularization of the harmonic fit.
pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Planar multi-channel feature map, stored channel, row, column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::ShapeMismatch(format!(
                "feature map must be at least 2x2, got {height}x{width}"
            )));
        }
        if values.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                height * width * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature map has non-finite values".into()));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            values: vec![0.0; height * width * channels],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.values[(c * self.height + row) * self.width + col]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// HEALPix recursion of the full grid whose front half is used.
    pub recursion: u32,
    /// Hemisphere points retained per forward pass.
    pub keep: usize,
    /// Radius where the cosine taper starts; `None` disables tapering.
    pub taper_start: Option<f64>,
    /// Use the fixed evaluation mask instead of a random one.
    pub eval_mode: bool,
    /// Seed of the evaluation mask.
    pub eval_seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            recursion: 2,
            keep: 20,
            taper_start: Some(0.8),
            eval_mode: false,
            eval_seed: 0,
        }
    }
}

/// 1 inside `rho0`, a cosine half-window on `[rho0, 1]`, 0 beyond.
pub fn taper_weight(x: &Vec3, rho0: f64) -> f64 {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if rho <= rho0 {
        1.0
    } else if rho >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (rho - rho0) / (1.0 - rho0)).cos())
    }
}

/// `n_keep` distinct indices below `n_total`, uniformly at random, sorted.
pub fn dropout_mask<R: Rng>(rng: &mut R, n_total: usize, n_keep: usize) -> Result<Vec<usize>> {
    if n_keep > n_total {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {n_keep} of {n_total} points"
        )));
    }
    let mut idx = rand::seq::index::sample(rng, n_total, n_keep).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Bilinear taps `(pixel index, weight)` for an image-plane point.
fn bilinear_taps(x: f64, y: f64, height: usize, width: usize) -> [(usize, f64); 4] {
    let col = ((x + 1.0) * width as f64 / 2.0 - 0.5).clamp(0.0, (width - 1) as f64);
    let row = ((1.0 - y) * height as f64 / 2.0 - 0.5).clamp(0.0, (height - 1) as f64);
    let c0 = (col.floor() as usize).min(width - 2);
    let r0 = (row.floor() as usize).min(height - 2);
    let fc = col - c0 as f64;
    let fr = row - r0 as f64;
    let at = |r: usize, c: usize| r * width + c;
    [
        (at(r0, c0), (1.0 - fr) * (1.0 - fc)),
        (at(r0, c0 + 1), (1.0 - fr) * fc),
        (at(r0 + 1, c0), fr * (1.0 - fc)),
        (at(r0 + 1, c0 + 1), fr * fc),
    ]
}

/// Bilinear interpolation of one channel at an image-plane point.
pub fn bilinear(fm: &FeatureMap, channel: usize, x: f64, y: f64) -> f64 {
    let plane = fm.plane(channel);
    bilinear_taps(x, y, fm.height, fm.width)
        .iter()
        .map(|(i, w)| plane[*i] * w)
        .sum()
}

/// Precomputed hemisphere geometry for a fixed feature-map size and band
/// limit.
#[derive(Clone, Debug)]
pub struct Projector {
    pub config: ProjectionConfig,
    pub lmax: usize,
    pub height: usize,
    pub width: usize,
    pub points: Vec<Vec3>,
    basis: ShBasis,
    /// Bilinear taps with the taper folded into the weights.
    taps: Vec<[(usize, f64); 4]>,
    eval_mask: Vec<usize>,
}

/// Forward-pass state needed by [`Projector::backward`].
#[derive(Clone, Debug)]
pub struct ProjectionCache {
    pub mask: Vec<usize>,
    /// Fit operator, `(L+1)² x mask.len()`.
    fit: Vec<f64>,
}

impl Projector {
    pub fn new(config: ProjectionConfig, lmax: usize, height: usize, width: usize) -> Result<Self> {
        S2Coeffs::zeros(lmax, 0)?;
        if height < 2 || width < 2 {
            return Err(Error::ShapeMismatch(format!(
                "feature map must be at least 2x2, got {height}x{width}"
            )));
        }
        if let Some(r) = config.taper_start {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("taper start {r} must be in [0, 1)")));
            }
        }
        let grid = hemisphere(&healpix_s2(config.recursion)?);
        if config.keep == 0 || config.keep > grid.len() {
            return Err(Error::Config(format!(
                "projection keeps {} points but the hemisphere has {}",
                config.keep,
                grid.len()
            )));
        }
        let basis = ShBasis::new(lmax, &grid.points);
        let taps = grid
            .points
            .iter()
            .map(|p| {
                let t = config.taper_start.map_or(1.0, |r| taper_weight(p, r));
                let mut taps = bilinear_taps(p[0], p[1], height, width);
                for tap in &mut taps {
                    tap.1 *= t;
                }
                taps
            })
            .collect();
        let eval_mask = {
            let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(config.eval_seed);
            dropout_mask(&mut rng, grid.len(), config.keep)?
        };
        Ok(Projector {
            config,
            lmax,
            height,
            width,
            points: grid.points,
            basis,
            taps,
            eval_mask,
        })
    }

    /// Number of hemisphere grid points.
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// The fixed mask used in eval mode.
    pub fn eval_mask(&self) -> &[usize] {
        &self.eval_mask
    }

    /// The mask for one forward pass: fixed in eval mode, random otherwise.
    pub fn mask<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        if self.config.eval_mode {
            self.eval_mask.clone()
        } else {
            dropout_mask(rng, self.n_points(), self.config.keep).expect("keep validated")
        }
    }

    /// Tapered, interpolated samples of every channel at the masked points,
    /// `channels x mask.len()`.
    pub fn samples(&self, fm: &FeatureMap, mask: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(fm.channels * mask.len());
        for c in 0..fm.channels {
            let plane = fm.plane(c);
            for &p in mask {
                out.push(self.taps[p].iter().map(|(i, w)| plane[*i] * w).sum());
            }
        }
        out
    }

    /// Ridge least-squares operator mapping samples at `mask` to coefficients.
    pub fn fit_operator(&self, mask: &[usize]) -> Vec<f64> {
        let k = s2_len(self.lmax);
        let n = mask.len();
        let y = DMatrix::from_fn(n, k, |i, j| self.basis.row(mask[i])[j]);
        let m = if n <= k {
            let g = &y * y.transpose() + DMatrix::identity(n, n) * RIDGE_LAMBDA;
            let inv = g.cholesky().expect("ridge system is positive definite").inverse();
            y.transpose() * inv
        } else {
            let g = y.transpose() * &y + DMatrix::identity(k, k) * RIDGE_LAMBDA;
            let inv = g.cholesky().expect("ridge system is positive definite").inverse();
            inv * y.transpose()
        };
        // row-major K x n
        let mut out = vec![0.0; k * n];
        for i in 0..k {
            for j in 0..n {
                out[i * n + j] = m[(i, j)];
            }
        }
        out
    }

    pub fn forward(&self, fm: &FeatureMap, mask: Vec<usize>) -> Result<(S2Coeffs, ProjectionCache)> {
        if fm.height != self.height || fm.width != self.width {
            return Err(Error::ShapeMismatch(format!(
                "projector built for {}x{} maps, got {}x{}",
                self.height, self.width, fm.height, fm.width
            )));
        }
        let k = s2_len(self.lmax);
        let n = mask.len();
        let fit = self.fit_operator(&mask);
        let samples = self.samples(fm, &mask);
        let mut out = S2Coeffs::zeros(self.lmax, fm.channels)?;
        for c in 0..fm.channels {
            let s = &samples[c * n..(c + 1) * n];
            let dst = out.channel_mut(c);
            for i in 0..k {
                dst[i] = fit[i * n..(i + 1) * n].iter().zip(s).map(|(a, b)| a * b).sum();
            }
        }
        Ok((out, ProjectionCache { mask, fit }))
    }

    /// Gradient with respect to the feature map.
    pub fn backward(&self, cache: &ProjectionCache, grad: &S2Coeffs) -> FeatureMap {
        let k = s2_len(self.lmax);
        let n = cache.mask.len();
        let mut out = FeatureMap::zeros(self.height, self.width, grad.channels);
        let plane_len = self.height * self.width;
        let mut ds = vec![0.0; n];
        for c in 0..grad.channels {
            let g = grad.channel(c);
            ds.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..k {
                let gi = g[i];
                for (d, f) in ds.iter_mut().zip(&cache.fit[i * n..(i + 1) * n]) {
                    *d += gi * f;
                }
            }
            let plane = &mut out.values[c * plane_len..(c + 1) * plane_len];
            for (j, &p) in cache.mask.iter().enumerate() {
                for (i, w) in &self.taps[p] {
                    plane[*i] += ds[j] * w;
                }
            }
        }
        out
    }
}

/// Project a feature map with a one-off projector.
pub fn project<R: Rng>(
    fm: &FeatureMap,
    cfg: &ProjectionConfig,
    lmax: usize,
    rng: &mut R,
) -> Result<S2Coeffs> {
    let p = Projector::new(cfg.clone(), lmax, fm.height, fm.width)?;
    let mask = p.mask(rng);
    Ok(p.forward(fm, mask)?.0)
}

/// Learned linear map from a flattened feature map plane straight to
/// harmonic coefficients, shared across channels.
#[derive(Clone, Debug)]
pub struct FourierProjection {
    pub lmax: usize,
    pub height: usize,
    pub width: usize,
    /// `(L+1)² x (height * width)`, row-major.
    pub weights: Vec<f64>,
}

impl FourierProjection {
    pub fn new(lmax: usize, height: usize, width: usize) -> Result<Self> {
        S2Coeffs::zeros(lmax, 0)?;
        Ok(FourierProjection {
            lmax,
            height,
            width,
            weights: vec![0.0; s2_len(lmax) * height * width],
        })
    }

    /// Zero-mean Gaussian weights with variance `1 / (height * width)`.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let sd = (1.0 / (self.height * self.width) as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("positive variance");
        for w in &mut self.weights {
            *w = normal.sample(rng);
        }
    }

    pub fn forward(&self, fm: &FeatureMap) -> Result<S2Coeffs> {
        if fm.height != self.height || fm.width != self.width {
            return Err(Error::ShapeMismatch(format!(
                "Fourier projection built for {}x{} maps, got {}x{}",
                self.height, self.width, fm.height, fm.width
            )));
        }
        let k = s2_len(self.lmax);
        let hw = self.height * self.width;
        let mut out = S2Coeffs::zeros(self.lmax, fm.channels)?;
        for c in 0..fm.channels {
            let plane = fm.plane(c);
            let dst = out.channel_mut(c);
            for i in 0..k {
                let row = &self.weights[i * hw..(i + 1) * hw];
                dst[i] = row.iter().zip(plane).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    /// Gradients with respect to the feature map and the weights.
    pub fn backward(&self, fm: &FeatureMap, grad: &S2Coeffs) -> (FeatureMap, Vec<f64>) {
        let k = s2_len(self.lmax);
        let hw = self.height * self.width;
        let mut dfm = FeatureMap::zeros(self.height, self.width, fm.channels);
        let mut dw = vec![0.0; self.weights.len()];
        for c in 0..fm.channels {
            let plane = fm.plane(c);
            let g = grad.channel(c);
            for i in 0..k {
                let gi = g[i];
                if gi == 0.0 {
                    continue;
                }
                let row = &self.weights[i * hw..(i + 1) * hw];
                let drow = &mut dw[i * hw..(i + 1) * hw];
                let dplane = &mut dfm.values[c * hw..(c + 1) * hw];
                for p in 0..hw {
                    drow[p] += gi * plane[p];
                    dplane[p] += gi * row[p];
                }
            }
        }
        (dfm, dw)
    }
}

/// Residual `|| Y c - v ||` of a fit on the retained samples, per channel
/// summed in quadrature.
pub fn fit_residual(p: &Projector, fm: &FeatureMap, mask: &[usize], coeffs: &S2Coeffs) -> f64 {
    let n = mask.len();
    let samples = p.samples(fm, mask);
    let mut total = 0.0;
    for c in 0..fm.channels {
        let cv = DVector::from_column_slice(coeffs.channel(c));
        for (j, &pt) in mask.iter().enumerate() {
            let y = DVector::from_column_slice(p.basis.row(pt));
            let r = y.dot(&cv) - samples[c * n + j];
            total += r * r;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::rotate_signal;
    use crate::harmonics::s2_ifft;
    use crate::rotation::Rotation;
    use rand::SeedableRng;

    #[test]
    fn bilinear_center_and_pole() {
        let fm = FeatureMap::new(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((bilinear(&fm, 0, 0.0, 0.0) - 1.5).abs() < 1e-15);
        // pixel centers: top-left (-0.5, 0.5) holds value 0
        assert!(bilinear(&fm, 0, -0.5, 0.5).abs() < 1e-15);
        assert!((bilinear(&fm, 0, 0.5, -0.5) - 3.0).abs() < 1e-15);
        let fm = FeatureMap::new(
            3,
            3,
            1,
            (0..9).map(|i| if i == 4 { 7.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        assert!((bilinear(&fm, 0, 0.0, 0.0) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn taper_profile() {
        assert_eq!(taper_weight(&[0.0, 0.0, 1.0], 0.8), 1.0);
        assert_eq!(taper_weight(&[1.0, 0.0, 0.0], 0.8), 0.0);
        let r = 0.9;
        let z = (1.0f64 - r * r).sqrt();
        assert!((taper_weight(&[r, 0.0, z], 0.8) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dropout_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(dropout_mask(&mut rng, 10, 10).unwrap(), (0..10).collect::<Vec<_>>());
        assert!(dropout_mask(&mut rng, 5, 6).is_err());
        let a = dropout_mask(&mut ChaCha8Rng::seed_from_u64(9), 104, 20).unwrap();
        let b = dropout_mask(&mut ChaCha8Rng::seed_from_u64(9), 104, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[0] < w[1]));

        // each index is kept with probability 20/96
        let (n, k, draws) = (96usize, 20usize, 10_000usize);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            for i in dropout_mask(&mut rng, n, k).unwrap() {
                counts[i] += 1;
            }
        }
        let p = k as f64 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{c} vs {mean} ± {sigma}");
        }
    }

    #[test]
    fn constant_map_without_taper_or_dropout() {
        let cfg = ProjectionConfig {
            keep: 104,
            taper_start: None,
            ..Default::default()
        };
        let p = Projector::new(cfg, 6, 8, 8).unwrap();
        let fm = FeatureMap::new(8, 8, 1, vec![2.5; 64]).unwrap();
        let mask: Vec<usize> = (0..p.n_points()).collect();
        let s = p.samples(&fm, &mask);
        assert!(s.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let zero = FeatureMap::zeros(8, 8, 3);
        let (c, _) = p.forward(&zero, mask).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fit_reproduces_band_limited_samples() {
        // samples of a degree-2 signal are fitted exactly at L = 2 with 20 points
        let p = Projector::new(ProjectionConfig::default(), 2, 8, 8).unwrap();
        let mask = p.mask(&mut ChaCha8Rng::seed_from_u64(3));
        let truth = S2Coeffs::from_vec(2, 1, (0..9).map(|i| (i as f64 * 0.37).sin()).collect())
            .unwrap();
        let pts: Vec<_> = mask.iter().map(|&i| p.points[i]).collect();
        let v = s2_ifft(&truth, &pts);
        let fit = p.fit_operator(&mask);
        for i in 0..9 {
            let c: f64 = (0..mask.len()).map(|j| fit[i * mask.len() + j] * v[j]).sum();
            assert!((c - truth.data[i]).abs() < 1e-4, "{i}: {c} vs {}", truth.data[i]);
        }
    }

    #[test]
    fn residual_decreases_with_band_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fm = FeatureMap::new(8, 8, 2, (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let mask = dropout_mask(&mut rng, 104, 20).unwrap();
        let mut prev = f64::INFINITY;
        for lmax in 2..=6 {
            let p = Projector::new(ProjectionConfig::default(), lmax, 8, 8).unwrap();
            let (c, _) = p.forward(&fm, mask.clone()).unwrap();
            let r = fit_residual(&p, &fm, &mask, &c);
            assert!(r <= prev + 1e-9, "L={lmax}: {r} > {prev}");
            prev = r;
        }
    }

    #[test]
    fn in_plane_rotation_matches_rotate_signal() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fm = FeatureMap::new(n, n, 1, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        // rotate the image 90 degrees counter-clockwise
        let mut rot = FeatureMap::zeros(n, n, 1);
        for r in 0..n {
            for c in 0..n {
                rot.values[r * n + c] = fm.at(0, c, n - 1 - r);
            }
        }
        let cfg = ProjectionConfig {
            recursion: 4,
            keep: hemisphere(&healpix_s2(4).unwrap()).len(),
            ..Default::default()
        };
        let p = Projector::new(cfg, 6, n, n).unwrap();
        let all: Vec<usize> = (0..p.n_points()).collect();
        let (a, _) = p.forward(&rot, all.clone()).unwrap();
        let (b, _) = p.forward(&fm, all).unwrap();
        let b = rotate_signal(&b, &Rotation::rot_z(std::f64::consts::FRAC_PI_2));
        let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(num.sqrt() / b.norm() < 0.05, "{}", num.sqrt() / b.norm());
    }

    #[test]
    fn backward_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = Projector::new(ProjectionConfig::default(), 4, 6, 6).unwrap();
        let fm = FeatureMap::new(6, 6, 2, (0..72).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let mask = p.mask(&mut rng);
        let (c, cache) = p.forward(&fm, mask).unwrap();
        let g = S2Coeffs::from_vec(4, 2, (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let dfm = p.backward(&cache, &g);
        let lhs: f64 = g.data.iter().zip(&c.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = dfm.values.iter().zip(&fm.values).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));

        let mut fp = FourierProjection::new(4, 6, 6).unwrap();
        fp.init(&mut rng);
        let c = fp.forward(&fm).unwrap();
        let (dfm, dw) = fp.backward(&fm, &g);
        let lhs: f64 = g.data.iter().zip(&c.data).map(|(a, b)| a * b).sum();
        let r1: f64 = dfm.values.iter().zip(&fm.values).map(|(a, b)| a * b).sum();
        let r2: f64 = dw.iter().zip(&fp.weights).map(|(a, b)| a * b).sum();
        assert!((lhs - r1).abs() < 1e-9 && (lhs - r2).abs() < 1e-9);
    }

    #[test]
    fn eval_mode_uses_fixed_mask() {
        let cfg = ProjectionConfig {
            eval_mode: true,
            ..Default::default()
        };
        let p = Projector::new(cfg, 6, 8, 8).unwrap();
        let a = p.mask(&mut ChaCha8Rng::seed_from_u64(1));
        let b = p.mask(&mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
    }
}
