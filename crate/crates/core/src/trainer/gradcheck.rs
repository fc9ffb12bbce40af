//! Central finite-difference check of the full model gradient.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::head::cross_entropy_index;
use crate::projection::FeatureMap;
use crate::trainer::Model;

/// Gradients below this magnitude are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Parameter index with the largest error.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Relative error between an analytic and a numeric derivative.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

fn loss(model: &Model, image: &FeatureMap, target: usize, mask: &Option<Vec<usize>>) -> Result<f64> {
    let prep = model.prepare();
    let (logits, _) = model.forward(&prep, model.head(), image, mask.clone())?;
    Ok(cross_entropy_index(&logits, target).0)
}

/// Compare the analytic cross-entropy gradient for one random image against
/// central differences with step `eps` on `n` randomly chosen parameters.
/// The projection uses the model's fixed evaluation mask.
pub fn gradient_check(model: &mut Model, n: usize, eps: f64, seed: u64) -> Result<GradCheck> {
    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = cfg.image_height * cfg.image_width * cfg.image_channels;
    let image = FeatureMap::new(
        cfg.image_height,
        cfg.image_width,
        cfg.image_channels,
        (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )?;
    let target = rng.gen_range(0..model.grid().len());
    let mask = model.eval_mask();

    let prep = model.prepare();
    let (logits, cache) = model.forward(&prep, model.head(), &image, mask.clone())?;
    let (_, dlogits) = cross_entropy_index(&logits, target);
    let grad = model.backward(&prep, model.head(), &cache, &dlogits)?;

    let base = model.params();
    if n == 0 || n > base.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot check {n} of {} parameters",
            base.len()
        )));
    }
    let mut out = GradCheck {
        checked: n,
        max_rel_err: 0.0,
        worst: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut p = base.clone();
    for i in sample(&mut rng, base.len(), n).into_vec() {
        p[i] = base[i] + eps;
        model.set_params(&p)?;
        let up = loss(model, &image, target, &mask)?;
        p[i] = base[i] - eps;
        model.set_params(&p)?;
        let down = loss(model, &image, target, &mask)?;
        p[i] = base[i];
        let numeric = (up - down) / (2.0 * eps);
        let e = rel_err(grad[i], numeric);
        if e > out.max_rel_err || !e.is_finite() {
            out.max_rel_err = e;
            out.worst = i;
            out.analytic = grad[i];
            out.numeric = numeric;
        }
    }
    model.set_params(&base)?;
    Ok(out)
}
