//! The full pose network: encoder, sphere projection, S² convolution,
//! optional SO(3) convolutions with spatial ReLUs, and the grid query head.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equivariant::{
    s2_conv_backward, s2_conv_raw, so3_conv_backward, so3_conv_raw, FilterMode, ReluCache,
    S2Filter, SO3Filter, SO3Support, SpatialRelu, SPATIAL_FILTER_RECURSION,
};
use crate::error::{Error, Result};
use crate::grids::{healpix_s2, healpix_so3, SO3Grid, MAX_SO3_RECURSION};
use crate::harmonics::{s2_len, S2Coeffs, SO3Coeffs};
use crate::head::QueryHead;
use crate::projection::{FeatureMap, FourierProjection, ProjectionCache, ProjectionConfig, Projector};
use crate::trainer::encoder::{conv_out, Conv2d};

/// How encoder features reach the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    /// Orthographic lift onto a hemisphere grid plus least-squares fit.
    Spatial,
    /// Learned linear map from pixels to coefficients.
    Fourier,
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionKind::Spatial => "spatial",
            ProjectionKind::Fourier => "fourier",
        })
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(ProjectionKind::Spatial),
            "fourier" => Ok(ProjectionKind::Fourier),
            _ => Err(Error::Config(format!(
                "unknown projection '{s}' (expected spatial or fourier)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lmax: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub image_channels: usize,
    pub encoder_channels: [usize; 2],
    pub projection: ProjectionKind,
    pub projection_grid: ProjectionConfig,
    pub s2_filter: FilterMode,
    /// Channels between the spherical layers.
    pub channels: usize,
    pub n_so3_convs: usize,
    pub support_angle_deg: f64,
    pub support_recursion: u32,
    /// Output grid used for training.
    pub grid_recursion: u32,
    /// Extra factor on the initial weights of the last spherical layer.
    pub output_init_scale: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lmax: 6,
            image_height: 32,
            image_width: 32,
            image_channels: 3,
            encoder_channels: [16, 32],
            projection: ProjectionKind::Spatial,
            projection_grid: ProjectionConfig::default(),
            s2_filter: FilterMode::Fourier,
            channels: 8,
            n_so3_convs: 1,
            support_angle_deg: 22.5,
            support_recursion: 3,
            grid_recursion: 3,
            output_init_scale: 1.0,
            init_seed: 0,
        }
    }
}

/// Largest band limit whose doubled ReLU quadrature is still supported.
pub const MAX_MODEL_LMAX: usize = 8;

impl ModelConfig {
    /// A model small enough for finite-difference checks: L=2, 8x8 images
    /// and the 72-cell recursion-0 output grid.
    pub fn tiny() -> ModelConfig {
        ModelConfig {
            lmax: 2,
            image_height: 8,
            image_width: 8,
            encoder_channels: [4, 4],
            channels: 3,
            support_angle_deg: 30.0,
            support_recursion: 1,
            grid_recursion: 0,
            init_seed: 3,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lmax == 0 || self.lmax > MAX_MODEL_LMAX {
            return bad(format!("L must be in 1..={MAX_MODEL_LMAX}, got {}", self.lmax));
        }
        if self.image_height < 5 || self.image_width < 5 {
            return bad(format!(
                "image must be at least 5x5, got {}x{}",
                self.image_height, self.image_width
            ));
        }
        if self.image_channels == 0 || self.encoder_channels.contains(&0) || self.channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.n_so3_convs > 2 {
            return bad(format!("n_so3_convs must be 0, 1 or 2, got {}", self.n_so3_convs));
        }
        if !(self.support_angle_deg > 0.0 && self.support_angle_deg <= 180.0) {
            return bad(format!("support angle {} out of (0, 180]", self.support_angle_deg));
        }
        if self.support_recursion > MAX_SO3_RECURSION || self.grid_recursion > MAX_SO3_RECURSION {
            return bad(format!("grid recursions must be at most {MAX_SO3_RECURSION}"));
        }
        if !(self.output_init_scale.is_finite() && self.output_init_scale > 0.0) {
            return bad("output_init_scale must be positive".into());
        }
        if self.projection_grid.keep == 0 {
            return bad("projection must keep at least one point".into());
        }
        Ok(())
    }

    /// Height and width of the encoder output.
    pub fn feature_size(&self) -> (usize, usize) {
        (
            conv_out(conv_out(self.image_height)),
            conv_out(conv_out(self.image_width)),
        )
    }

    /// Output channels of the S² convolution.
    pub fn s2_out(&self) -> usize {
        if self.n_so3_convs == 0 {
            1
        } else {
            self.channels
        }
    }

    /// Trainable scalar count for a given SO(3) filter support size.
    pub fn param_count(&self, support_len: usize) -> usize {
        let [c1, c2] = self.encoder_channels;
        let enc = c1 * self.image_channels * 9 + c1 + c2 * c1 * 9 + c2;
        let (fh, fw) = self.feature_size();
        let k = s2_len(self.lmax);
        let proj = match self.projection {
            ProjectionKind::Spatial => 0,
            ProjectionKind::Fourier => k * fh * fw,
        };
        let per_pair = match self.s2_filter {
            FilterMode::Fourier => k,
            FilterMode::Spatial => 12 * 4usize.pow(SPATIAL_FILTER_RECURSION),
        };
        let s2 = c2 * self.s2_out() * per_pair;
        let so3 = match self.n_so3_convs {
            0 => 0,
            1 => self.channels * support_len,
            _ => (self.channels * self.channels + self.channels) * support_len,
        };
        enc + proj + s2 + so3
    }
}

#[derive(Clone, Debug)]
enum Lift {
    Spatial(Projector),
    Fourier(FourierProjection),
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    lift: Lift,
    pub s2: S2Filter,
    pub so3: Vec<SO3Filter>,
    relu: Option<SpatialRelu>,
    head: QueryHead,
    generation: u64,
}

/// Filter transforms that depend only on the parameters, computed once per
/// optimizer step and shared by every sample of a batch.
#[derive(Clone, Debug)]
pub struct Prepared {
    psi: Vec<f64>,
    kernels: Vec<Vec<f64>>,
    generation: u64,
}

/// Activations saved by [`Model::forward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    image: FeatureMap,
    h1: FeatureMap,
    feat: FeatureMap,
    proj: Option<ProjectionCache>,
    s2_in: S2Coeffs,
    so3_in: Vec<SO3Coeffs>,
    relu: Vec<ReluCache>,
    n_logits: usize,
    generation: u64,
}

/// Gradients with the spherical filters still in transform space; summing
/// these over a batch before [`Model::finish_grad`] saves the conversion per
/// sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RawGrad {
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    lift: Vec<f64>,
    psi: Vec<f64>,
    kernels: Vec<Vec<f64>>,
}

impl RawGrad {
    pub fn add(&mut self, other: &RawGrad) {
        let pairs = [
            (&mut self.conv1_w, &other.conv1_w),
            (&mut self.conv1_b, &other.conv1_b),
            (&mut self.conv2_w, &other.conv2_w),
            (&mut self.conv2_b, &other.conv2_b),
            (&mut self.lift, &other.lift),
            (&mut self.psi, &other.psi),
        ];
        for (a, b) in pairs {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.kernels.iter_mut().zip(&other.kernels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.lift,
            &mut self.psi,
        ] {
            v.iter_mut().for_each(|x| *x *= s);
        }
        for k in &mut self.kernels {
            k.iter_mut().for_each(|x| *x *= s);
        }
    }
}

impl Model {
    /// Build a model with all parameters zero.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(healpix_so3(config.grid_recursion)?);
        Self::with_grid(config, grid)
    }

    /// Build a model whose training head queries `grid`.
    pub fn with_grid(config: ModelConfig, grid: Arc<SO3Grid>) -> Result<Self> {
        config.validate()?;
        let [c1, c2] = config.encoder_channels;
        let (fh, fw) = config.feature_size();
        let lift = match config.projection {
            ProjectionKind::Spatial => Lift::Spatial(Projector::new(
                config.projection_grid.clone(),
                config.lmax,
                fh,
                fw,
            )?),
            ProjectionKind::Fourier => Lift::Fourier(FourierProjection::new(config.lmax, fh, fw)?),
        };
        let s2 = S2Filter::new(config.s2_filter, c2, config.s2_out(), config.lmax)?;
        let so3 = if config.n_so3_convs == 0 {
            Vec::new()
        } else {
            let sgrid = healpix_so3(config.support_recursion)?;
            let support = Arc::new(SO3Support::new(
                config.lmax,
                &sgrid,
                config.support_angle_deg.to_radians(),
            )?);
            let mut v = Vec::new();
            if config.n_so3_convs == 2 {
                v.push(SO3Filter::new(config.channels, config.channels, support.clone()));
            }
            v.push(SO3Filter::new(config.channels, 1, support));
            v
        };
        let relu = if config.n_so3_convs > 0 {
            Some(SpatialRelu::oversampled(config.lmax)?)
        } else {
            None
        };
        // the spatial filter grid must exist at this recursion
        healpix_s2(SPATIAL_FILTER_RECURSION)?;
        Ok(Model {
            conv1: Conv2d::new(config.image_channels, c1),
            conv2: Conv2d::new(c1, c2),
            lift,
            s2,
            so3,
            relu,
            head: QueryHead::new(config.lmax, grid),
            config,
            generation: 0,
        })
    }

    /// Random initialization seeded by `config.init_seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        let mut m = Model::new(config)?;
        m.randomize();
        Ok(m)
    }

    pub fn randomize(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.init_seed);
        self.conv1.init(&mut rng);
        self.conv2.init(&mut rng);
        if let Lift::Fourier(f) = &mut self.lift {
            f.init(&mut rng);
        }
        self.s2.init(&mut rng);
        for f in &mut self.so3 {
            f.init(&mut rng);
        }
        let scale = self.config.output_init_scale;
        let last = match self.so3.last_mut() {
            Some(f) => &mut f.values,
            None => &mut self.s2.values,
        };
        last.iter_mut().for_each(|v| *v *= scale);
        self.generation += 1;
    }

    pub fn head(&self) -> &QueryHead {
        &self.head
    }

    pub fn grid(&self) -> &Arc<SO3Grid> {
        &self.head.grid
    }

    /// A head querying a different grid, e.g. a finer one for evaluation.
    pub fn head_for(&self, grid: Arc<SO3Grid>) -> QueryHead {
        QueryHead::new(self.config.lmax, grid)
    }

    pub fn support_len(&self) -> usize {
        self.so3.first().map_or(0, |f| f.support.len())
    }

    pub fn n_params(&self) -> usize {
        let lift = match &self.lift {
            Lift::Spatial(_) => 0,
            Lift::Fourier(f) => f.weights.len(),
        };
        self.conv1.n_params()
            + self.conv2.n_params()
            + lift
            + self.s2.values.len()
            + self.so3.iter().map(|f| f.values.len()).sum::<usize>()
    }

    fn slots(&self) -> Vec<&Vec<f64>> {
        let mut v = vec![&self.conv1.weights, &self.conv1.bias, &self.conv2.weights, &self.conv2.bias];
        if let Lift::Fourier(f) = &self.lift {
            v.push(&f.weights);
        }
        v.push(&self.s2.values);
        v.extend(self.so3.iter().map(|f| &f.values));
        v
    }

    /// Names and sizes of the parameter tensors in declaration order.
    pub fn param_names(&self) -> Vec<(String, usize)> {
        let mut names = vec!["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        if matches!(self.lift, Lift::Fourier(_)) {
            names.push("projection.weight".into());
        }
        names.push("s2_conv.filter".into());
        for i in 0..self.so3.len() {
            names.push(format!("so3_conv{i}.filter"));
        }
        names.into_iter().zip(self.slots().iter().map(|s| s.len())).collect()
    }

    /// All parameters flattened in declaration order.
    pub fn params(&self) -> Vec<f64> {
        self.slots().into_iter().flatten().copied().collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        let mut rest = p;
        let mut take = |dst: &mut Vec<f64>| {
            let (a, b) = rest.split_at(dst.len());
            dst.copy_from_slice(a);
            rest = b;
        };
        take(&mut self.conv1.weights);
        take(&mut self.conv1.bias);
        take(&mut self.conv2.weights);
        take(&mut self.conv2.bias);
        if let Lift::Fourier(f) = &mut self.lift {
            take(&mut f.weights);
        }
        take(&mut self.s2.values);
        for f in &mut self.so3 {
            take(&mut f.values);
        }
        self.generation += 1;
        Ok(())
    }

    pub fn prepare(&self) -> Prepared {
        Prepared {
            psi: self.s2.coefficients(),
            kernels: self.so3.iter().map(|f| f.kernel()).collect(),
            generation: self.generation,
        }
    }

    /// Dropout mask for a training pass, or `None` for the Fourier lift.
    pub fn sample_mask<R: rand::Rng>(&self, rng: &mut R) -> Option<Vec<usize>> {
        match &self.lift {
            Lift::Spatial(p) => Some(p.mask(rng)),
            Lift::Fourier(_) => None,
        }
    }

    /// The fixed evaluation mask.
    pub fn eval_mask(&self) -> Option<Vec<usize>> {
        match &self.lift {
            Lift::Spatial(p) => Some(p.eval_mask().to_vec()),
            Lift::Fourier(_) => None,
        }
    }

    fn check_prepared(&self, prep: &Prepared) -> Result<()> {
        if prep.generation != self.generation {
            return Err(Error::StaleCache(
                "filter transforms were computed for different parameters".into(),
            ));
        }
        Ok(())
    }

    /// Logits on `head`'s grid for one image. `mask` selects the projection
    /// points and is ignored by the Fourier lift.
    pub fn forward(
        &self,
        prep: &Prepared,
        head: &QueryHead,
        image: &FeatureMap,
        mask: Option<Vec<usize>>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_prepared(prep)?;
        let cfg = &self.config;
        if image.height != cfg.image_height
            || image.width != cfg.image_width
            || image.channels != cfg.image_channels
        {
            return Err(Error::ShapeMismatch(format!(
                "model expects {}x{}x{} images, got {}x{}x{}",
                cfg.image_height,
                cfg.image_width,
                cfg.image_channels,
                image.height,
                image.width,
                image.channels
            )));
        }
        let h1 = self.conv1.forward_relu(image);
        let feat = self.conv2.forward_relu(&h1);
        let (s2_in, proj) = match &self.lift {
            Lift::Spatial(p) => {
                let mask = mask.ok_or_else(|| {
                    Error::InvalidArgument("spatial projection needs a dropout mask".into())
                })?;
                let (c, cache) = p.forward(&feat, mask)?;
                (c, Some(cache))
            }
            Lift::Fourier(f) => (f.forward(&feat)?, None),
        };
        let mut x = s2_conv_raw(&s2_in, &prep.psi, cfg.s2_out());
        let mut so3_in = Vec::with_capacity(self.so3.len());
        let mut relu = Vec::with_capacity(self.so3.len());
        for (f, k) in self.so3.iter().zip(&prep.kernels) {
            let (y, c) = self.relu.as_ref().expect("relu exists with SO(3) convs").forward(&x);
            x = so3_conv_raw(&y, k, f.c_out);
            so3_in.push(y);
            relu.push(c);
        }
        let logits = head.logits(&x)?;
        let cache = ForwardCache {
            image: image.clone(),
            h1,
            feat,
            proj,
            s2_in,
            so3_in,
            relu,
            n_logits: logits.len(),
            generation: self.generation,
        };
        Ok((logits, cache))
    }

    /// Reverse pass returning gradients in transform space.
    pub fn backward_raw(
        &self,
        prep: &Prepared,
        head: &QueryHead,
        cache: &ForwardCache,
        dlogits: &[f64],
    ) -> Result<RawGrad> {
        self.check_prepared(prep)?;
        if cache.generation != self.generation {
            return Err(Error::StaleCache("forward pass used different parameters".into()));
        }
        if dlogits.len() != cache.n_logits || head.grid.len() != cache.n_logits {
            return Err(Error::StaleCache(format!(
                "forward produced {} logits, gradient has {}",
                cache.n_logits,
                dlogits.len()
            )));
        }
        let mut g = head.backward(dlogits);
        let mut kernels = vec![Vec::new(); self.so3.len()];
        for j in (0..self.so3.len()).rev() {
            let (dx, dk) = so3_conv_backward(&cache.so3_in[j], &prep.kernels[j], &g);
            kernels[j] = dk;
            g = self.relu.as_ref().expect("relu exists with SO(3) convs").backward(&cache.relu[j], &dx);
        }
        let (ds2, psi) = s2_conv_backward(&cache.s2_in, &prep.psi, &g);
        let (dfeat, lift) = match &self.lift {
            Lift::Spatial(p) => (
                p.backward(cache.proj.as_ref().expect("spatial lift caches its fit"), &ds2),
                Vec::new(),
            ),
            Lift::Fourier(f) => f.backward(&cache.feat, &ds2),
        };
        let mut conv2_w = vec![0.0; self.conv2.weights.len()];
        let mut conv2_b = vec![0.0; self.conv2.bias.len()];
        let dh1 = self
            .conv2
            .backward_relu(&cache.h1, &cache.feat, &dfeat.values, &mut conv2_w, &mut conv2_b);
        let mut conv1_w = vec![0.0; self.conv1.weights.len()];
        let mut conv1_b = vec![0.0; self.conv1.bias.len()];
        self.conv1
            .backward_relu(&cache.image, &cache.h1, &dh1.values, &mut conv1_w, &mut conv1_b);
        Ok(RawGrad {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            lift,
            psi,
            kernels,
        })
    }

    /// Map transform-space gradients to the flat parameter layout.
    pub fn finish_grad(&self, raw: &RawGrad) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&raw.conv1_w);
        out.extend_from_slice(&raw.conv1_b);
        out.extend_from_slice(&raw.conv2_w);
        out.extend_from_slice(&raw.conv2_b);
        if matches!(self.lift, Lift::Fourier(_)) {
            out.extend_from_slice(&raw.lift);
        }
        out.extend(self.s2.values_grad(&raw.psi));
        for (f, dk) in self.so3.iter().zip(&raw.kernels) {
            out.extend(f.values_grad(dk));
        }
        out
    }

    /// Gradient of `Σ dlogits · logits` with respect to every parameter.
    pub fn backward(
        &self,
        prep: &Prepared,
        head: &QueryHead,
        cache: &ForwardCache,
        dlogits: &[f64],
    ) -> Result<Vec<f64>> {
        Ok(self.finish_grad(&self.backward_raw(prep, head, cache, dlogits)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::cross_entropy_index;
    use rand::Rng;

    pub(crate) fn tiny(projection: ProjectionKind, s2_filter: FilterMode, n_so3: usize) -> ModelConfig {
        ModelConfig {
            projection,
            s2_filter,
            n_so3_convs: n_so3,
            ..ModelConfig::tiny()
        }
    }

    fn image(seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..3 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
        FeatureMap::new(8, 8, 3, v).unwrap()
    }

    #[test]
    fn zero_image_gives_uniform_logits() {
        let m = Model::init(ModelConfig::default()).unwrap();
        assert_eq!(m.grid().len(), 36864);
        let prep = m.prepare();
        let img = FeatureMap::zeros(32, 32, 3);
        let (logits, _) = m.forward(&prep, m.head(), &img, m.eval_mask()).unwrap();
        assert_eq!(logits.len(), 36864);
        assert!(logits.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn param_roundtrip_and_count() {
        for (p, f, n) in [
            (ProjectionKind::Spatial, FilterMode::Fourier, 1),
            (ProjectionKind::Fourier, FilterMode::Spatial, 2),
            (ProjectionKind::Spatial, FilterMode::Spatial, 0),
        ] {
            let cfg = tiny(p, f, n);
            let mut m = Model::init(cfg.clone()).unwrap();
            assert_eq!(m.n_params(), cfg.param_count(m.support_len()));
            let names: usize = m.param_names().iter().map(|(_, n)| n).sum();
            assert_eq!(names, m.n_params());
            let params = m.params();
            let shifted: Vec<f64> = params.iter().map(|v| v + 1.0).collect();
            m.set_params(&shifted).unwrap();
            assert_eq!(m.params(), shifted);
            assert!(m.set_params(&params[1..]).is_err());
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut m = Model::init(tiny(ProjectionKind::Spatial, FilterMode::Fourier, 1)).unwrap();
        let prep = m.prepare();
        let (logits, cache) = m.forward(&prep, m.head(), &image(1), m.eval_mask()).unwrap();
        let p = m.params();
        m.set_params(&p).unwrap();
        assert!(matches!(
            m.backward(&prep, m.head(), &cache, &logits),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        let m = Model::init(tiny(ProjectionKind::Fourier, FilterMode::Fourier, 2)).unwrap();
        let prep = m.prepare();
        let (logits, cache) = m.forward(&prep, m.head(), &image(2), None).unwrap();
        let (_, g) = cross_entropy_index(&logits, 5);
        let g2: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        let a = m.backward(&prep, m.head(), &cache, &g).unwrap();
        let b = m.backward(&prep, m.head(), &cache, &g2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
        let zero = m.backward(&prep, m.head(), &cache, &vec![0.0; logits.len()]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }
}
