//! Distribution head: grid query, softmax, cross-entropy and densities.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grids::{healpix_so3, SO3Grid};
use crate::harmonics::{so3_len, So3Plan, SO3Coeffs};
use crate::io::{read_f32, read_magic, read_u32, read_u64};
use crate::rotation::Rotation;

/// Probability floor applied before taking logarithms of densities.
pub const PROB_FLOOR: f64 = 1e-12;

/// Categorical distribution over the cells of an SO(3) grid.
#[derive(Clone, Debug)]
pub struct PoseDistribution {
    pub grid: Arc<SO3Grid>,
    pub probs: Vec<f64>,
}

/// Evaluates single-channel SO(3) signals on a fixed grid.
#[derive(Clone, Debug)]
pub struct QueryHead {
    pub grid: Arc<SO3Grid>,
    plan: So3Plan,
}

impl QueryHead {
    pub fn new(lmax: usize, grid: Arc<SO3Grid>) -> Self {
        let plan = So3Plan::new(lmax, &grid.layout);
        QueryHead { grid, plan }
    }

    pub fn lmax(&self) -> usize {
        self.plan.lmax
    }

    pub fn logits(&self, signal: &SO3Coeffs) -> Result<Vec<f64>> {
        check_single(signal)?;
        if signal.band_limit != self.plan.lmax {
            return Err(Error::ShapeMismatch(format!(
                "head built for band limit {}, signal has {}",
                self.plan.lmax, signal.band_limit
            )));
        }
        let mut out = vec![0.0; self.grid.len()];
        self.plan.synthesize(signal.channel(0), &mut out);
        Ok(out)
    }

    /// Gradient with respect to the signal coefficients.
    pub fn backward(&self, dlogits: &[f64]) -> SO3Coeffs {
        let mut out = SO3Coeffs::zeros(self.plan.lmax, 1).expect("valid band limit");
        self.plan.adjoint(dlogits, out.channel_mut(0));
        out
    }
}

fn check_single(signal: &SO3Coeffs) -> Result<()> {
    if signal.channels != 1 {
        return Err(Error::ShapeMismatch(format!(
            "grid query needs a single-channel signal, got {} channels",
            signal.channels
        )));
    }
    Ok(())
}

/// Logits at every rotation of `grid`.
pub fn query_logits(signal: &SO3Coeffs, grid: &Arc<SO3Grid>) -> Result<Vec<f64>> {
    check_single(signal)?;
    debug_assert_eq!(signal.per_channel(), so3_len(signal.band_limit));
    QueryHead::new(signal.band_limit, grid.clone()).logits(signal)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

pub fn softmax_distribution(logits: &[f64], grid: &Arc<SO3Grid>) -> Result<PoseDistribution> {
    if logits.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logits for a grid of {} rotations",
            logits.len(),
            grid.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite logits".into()));
    }
    Ok(PoseDistribution {
        grid: grid.clone(),
        probs: softmax(logits),
    })
}

/// Cross-entropy against a target cell, with gradient `softmax - onehot`.
pub fn cross_entropy_index(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    (lse - logits[target], grad)
}

/// Cross-entropy with the target cell nearest to `gt`.
pub fn cross_entropy(logits: &[f64], gt: &Rotation, grid: &SO3Grid) -> (f64, Vec<f64>) {
    cross_entropy_index(logits, grid.nearest_index(gt))
}

impl PoseDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Density w.r.t. the Haar measure of total volume `pi²`, in nats.
    pub fn log_likelihood(&self, r: &Rotation) -> f64 {
        let p = self.probs[self.grid.nearest_index(r)].max(PROB_FLOOR);
        (p * self.probs.len() as f64 / (PI * PI)).ln()
    }

    /// Index of the most probable cell, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax_rotation(&self) -> Rotation {
        self.grid.rotations[self.argmax()]
    }

    /// Number of cells with more than `factor` times the uniform probability.
    pub fn support_size(&self, factor: f64) -> usize {
        let t = factor / self.probs.len() as f64;
        self.probs.iter().filter(|p| **p > t).count()
    }

    /// Blob: magic, version, grid recursion, count, then probabilities as
    /// little-endian f32.
    pub fn write_blob(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DIST_MAGIC)?;
        w.write_all(&DIST_VERSION.to_le_bytes())?;
        w.write_all(&self.grid.recursion.to_le_bytes())?;
        w.write_all(&(self.probs.len() as u64).to_le_bytes())?;
        for p in &self.probs {
            w.write_all(&(*p as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a blob, rebuilding its grid.
    pub fn read_blob(mut r: impl Read) -> Result<Self> {
        read_magic(&mut r, DIST_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != DIST_VERSION {
            return Err(Error::Format(format!("unsupported distribution version {version}")));
        }
        let recursion = read_u32(&mut r)?;
        let count = read_u64(&mut r)? as usize;
        let grid = Arc::new(healpix_so3(recursion)?);
        if grid.len() != count {
            return Err(Error::Format(format!(
                "distribution has {count} cells, recursion {recursion} grid has {}",
                grid.len()
            )));
        }
        let mut probs = Vec::with_capacity(count);
        for _ in 0..count {
            probs.push(read_f32(&mut r)? as f64);
        }
        Ok(PoseDistribution { grid, probs })
    }
}

const DIST_MAGIC: &[u8; 4] = b"PDST";
const DIST_VERSION: u32 = 1;

pub fn log_likelihood(dist: &PoseDistribution, r: &Rotation) -> f64 {
    dist.log_likelihood(r)
}

pub fn argmax_rotation(dist: &PoseDistribution) -> Rotation {
    dist.argmax_rotation()
}
