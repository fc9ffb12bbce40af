//! Fast invariant suite run by the `selftest` command.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equivariant::{rotate_signal, s2_conv, so3_conv, FilterMode, S2Filter, SO3Filter, SO3Support};
use crate::error::Result;
use crate::grids::{healpix_s2, healpix_so3, quadrature_s2, quadrature_so3};
use crate::harmonics::{
    s2_fft, s2_ifft, so3_block_offset, so3_fft, so3_ifft, wigner_D_all, S2Coeffs, SO3Coeffs,
};
use crate::rotation::sample_uniform;
use crate::trainer::{gradient_check, Model, ModelConfig};

const LMAX: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured error (or mismatch count) and its tolerance.
    pub value: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn random_s2(rng: &mut ChaCha8Rng, lmax: usize, channels: usize) -> Result<S2Coeffs> {
    let mut c = S2Coeffs::zeros(lmax, channels)?;
    c.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    Ok(c)
}

fn random_so3(rng: &mut ChaCha8Rng, lmax: usize, channels: usize) -> Result<SO3Coeffs> {
    let mut c = SO3Coeffs::zeros(lmax, channels)?;
    c.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    Ok(c)
}

fn grid_counts() -> Result<f64> {
    let mut bad = 0;
    for r in 0..=3u32 {
        bad += usize::from(healpix_s2(r)?.len() != 12 * 4usize.pow(r));
    }
    for r in 0..=2u32 {
        bad += usize::from(healpix_so3(r)?.len() != 72 * 8usize.pow(r));
    }
    Ok(bad as f64)
}

fn wigner_homomorphism(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (a, b) = (sample_uniform(rng), sample_uniform(rng));
        let (da, db, dab) = (
            wigner_D_all(LMAX, &a)?,
            wigner_D_all(LMAX, &b)?,
            wigner_D_all(LMAX, &(a * b))?,
        );
        for l in 0..=LMAX {
            let d = 2 * l + 1;
            let off = so3_block_offset(l);
            let (x, y) = (&da[off..off + d * d], &db[off..off + d * d]);
            let mut prod = vec![0.0; d * d];
            for i in 0..d {
                for k in 0..d {
                    for j in 0..d {
                        prod[i * d + j] += x[i * d + k] * y[k * d + j];
                    }
                }
            }
            worst = worst.max(rel(&prod, &dab[off..off + d * d]));
        }
    }
    Ok(worst)
}

fn wigner_orthogonality(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let all = wigner_D_all(LMAX, &sample_uniform(rng))?;
        for l in 0..=LMAX {
            let d = 2 * l + 1;
            let m = &all[so3_block_offset(l)..so3_block_offset(l) + d * d];
            for i in 0..d {
                for j in 0..d {
                    let dot: f64 = (0..d).map(|k| m[i * d + k] * m[j * d + k]).sum();
                    worst = worst.max((dot - f64::from(u8::from(i == j))).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn s2_roundtrip(rng: &mut ChaCha8Rng) -> Result<f64> {
    let c = random_s2(rng, LMAX, 2)?;
    let quad = quadrature_s2(LMAX)?;
    let back = s2_fft(&quad, &s2_ifft(&c, &quad.points), 2, LMAX)?;
    Ok(rel(&back.data, &c.data))
}

fn so3_roundtrip(rng: &mut ChaCha8Rng) -> Result<f64> {
    let c = random_so3(rng, LMAX, 2)?;
    let quad = quadrature_so3(LMAX)?;
    let back = so3_fft(&quad, &so3_ifft(&c, &quad.layout), 2, LMAX)?;
    Ok(rel(&back.data, &c.data))
}

fn s2_conv_equivariance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut filter = S2Filter::new(FilterMode::Fourier, 2, 3, LMAX)?;
    filter.init(rng);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let f = random_s2(rng, LMAX, 2)?;
        let g = sample_uniform(rng);
        let a = s2_conv(&rotate_signal(&f, &g), &filter)?;
        let b = rotate_signal(&s2_conv(&f, &filter)?, &g);
        worst = worst.max(rel(&a.data, &b.data));
    }
    Ok(worst)
}

fn so3_conv_equivariance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let support = Arc::new(SO3Support::new(LMAX, &healpix_so3(1)?, 40f64.to_radians())?);
    let mut filter = SO3Filter::new(2, 2, support);
    filter.init(rng);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let f = random_so3(rng, LMAX, 2)?;
        let g = sample_uniform(rng);
        let a = so3_conv(&rotate_signal(&f, &g), &filter)?;
        let b = rotate_signal(&so3_conv(&f, &filter)?, &g);
        worst = worst.max(rel(&a.data, &b.data));
    }
    Ok(worst)
}

fn gradient() -> Result<f64> {
    let mut model = Model::init(ModelConfig::tiny())?;
    Ok(gradient_check(&mut model, 16, 1e-4, 11)?.max_rel_err)
}

type Check = (&'static str, f64, Box<dyn Fn(&mut ChaCha8Rng) -> Result<f64>>);

/// Run every check; errors inside a check count as failures.
pub fn run() -> Vec<CheckResult> {
    let checks: Vec<Check> = vec![
        ("grid counts", 0.0, Box::new(|_| grid_counts())),
        ("wigner homomorphism", 1e-10, Box::new(wigner_homomorphism)),
        ("wigner orthogonality", 1e-10, Box::new(wigner_orthogonality)),
        ("s2 transform roundtrip", 1e-10, Box::new(s2_roundtrip)),
        ("so3 transform roundtrip", 1e-10, Box::new(so3_roundtrip)),
        ("s2 conv equivariance", 1e-8, Box::new(s2_conv_equivariance)),
        ("so3 conv equivariance", 1e-8, Box::new(so3_conv_equivariance)),
        ("gradient check", 1e-3, Box::new(|_| gradient())),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    checks
        .into_iter()
        .map(|(name, tolerance, f)| {
            let start = Instant::now();
            let value = f(&mut rng).unwrap_or(f64::INFINITY);
            CheckResult {
                name,
                passed: value <= tolerance,
                value,
                tolerance,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
