//! Real orthonormal spherical harmonics.
//!
//! Convention (no Condon–Shortley phase):
//!
//! ```text
//! Y(l, 0)  = N(l,0)      P(l,0)(cos θ)
//! Y(l, k)  = √2 N(l,k)   P(l,k)(cos θ) cos(kφ)     k > 0
//! Y(l, -k) = √2 N(l,k)   P(l,k)(cos θ) sin(kφ)     k > 0
//! ```
//!
//! with `P(l,k) >= 0` near the north pole and `∮ Y Y' dΩ = δ`. For `l = 1`
//! the basis is proportional to `(y, z, x)`.

use std::f64::consts::PI;

use super::{s2_index, s2_len, L_MAX};
use crate::error::{Error, Result};
use crate::rotation::Vec3;

/// Evaluate every `Y(l, k)` with `l <= lmax` at a unit direction, written to
/// `out[l² + l + k]`.
pub fn sh_all(lmax: usize, dir: &Vec3, out: &mut [f64]) {
    debug_assert!(out.len() >= s2_len(lmax));
    let [x, y, z] = *dir;
    // normalized associated Legendre functions divided by sin^k θ; the sin^k
    // factor is carried by Re/Im (x + iy)^k
    let mut q = vec![0.0; (lmax + 1) * (lmax + 1)];
    let qi = |l: usize, k: usize| l * (lmax + 1) + k;
    q[qi(0, 0)] = 0.5 / PI.sqrt();
    for k in 0..=lmax {
        if k > 0 {
            let kf = k as f64;
            q[qi(k, k)] = q[qi(k - 1, k - 1)] * ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt();
        }
        if k < lmax {
            q[qi(k + 1, k)] = (2.0 * k as f64 + 3.0).sqrt() * z * q[qi(k, k)];
        }
        for l in (k + 2)..=lmax {
            let lf = l as f64;
            let kf = k as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - kf * kf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - kf * kf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            q[qi(l, k)] = a * (z * q[qi(l - 1, k)] - b * q[qi(l - 2, k)]);
        }
    }
    let mut re = 1.0;
    let mut im = 0.0;
    for k in 0..=lmax {
        if k > 0 {
            let nre = re * x - im * y;
            im = re * y + im * x;
            re = nre;
        }
        for l in k..=lmax {
            if k == 0 {
                out[s2_index(l, 0)] = q[qi(l, 0)];
            } else {
                let base = std::f64::consts::SQRT_2 * q[qi(l, k)];
                out[s2_index(l, k as i64)] = base * re;
                out[s2_index(l, -(k as i64))] = base * im;
            }
        }
    }
}

/// A single real spherical harmonic `Y(l, k)` at a unit direction.
pub fn sh(l: usize, k: i64, dir: &Vec3) -> Result<f64> {
    if l > L_MAX || k.unsigned_abs() as usize > l {
        return Err(Error::IndexOutOfRange {
            l: l as i64,
            k,
            max: L_MAX,
        });
    }
    let mut out = vec![0.0; s2_len(l)];
    sh_all(l, dir, &mut out);
    Ok(out[s2_index(l, k)])
}

/// Harmonic values at a fixed point set, `values[p * (L+1)² + i]`.
#[derive(Clone, Debug)]
pub struct ShBasis {
    pub lmax: usize,
    pub n_points: usize,
    pub values: Vec<f64>,
}

impl ShBasis {
    pub fn new(lmax: usize, points: &[Vec3]) -> Self {
        let k = s2_len(lmax);
        let mut values = vec![0.0; points.len() * k];
        for (p, chunk) in points.iter().zip(values.chunks_mut(k)) {
            sh_all(lmax, p, chunk);
        }
        ShBasis {
            lmax,
            n_points: points.len(),
            values,
        }
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let k = s2_len(self.lmax);
        &self.values[p * k..(p + 1) * k]
    }

    /// `f(x_p) = Σ c_i Y_i(x_p)` for one channel.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate().take(self.n_points) {
            *o = dot(self.row(p), coeffs);
        }
    }

    /// `c_i = Σ_p w_p f_p Y_i(x_p)` for one channel.
    pub fn analyze(&self, values: &[f64], weights: Option<&[f64]>, out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        for p in 0..self.n_points {
            let w = weights.map_or(1.0, |w| w[p]) * values[p];
            for (o, y) in out.iter_mut().zip(self.row(p)) {
                *o += w * y;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::quadrature_s2;

    #[test]
    fn closed_forms() {
        let c = 0.5 / PI.sqrt();
        assert!((sh(0, 0, &[0.3, 0.4, (1.0f64 - 0.25).sqrt()]).unwrap() - c).abs() < 1e-15);
        assert!((sh(0, 0, &[0.0, 0.0, 1.0]).unwrap() - 0.2820948).abs() < 1e-7);
        let v = sh(1, 0, &[0.0, 0.0, 1.0]).unwrap();
        assert!((v - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((v - 0.4886025).abs() < 1e-7);
        // l = 1 is proportional to (y, z, x)
        let d = [0.48, -0.6, 0.64];
        let n = (3.0 / (4.0 * PI)).sqrt();
        assert!((sh(1, -1, &d).unwrap() - n * d[1]).abs() < 1e-15);
        assert!((sh(1, 1, &d).unwrap() - n * d[0]).abs() < 1e-15);
        // l = 2, k = 2: √(15/16π) (x² - y²)
        let want = (15.0 / (16.0 * PI)).sqrt() * (d[0] * d[0] - d[1] * d[1]);
        assert!((sh(2, 2, &d).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn index_errors() {
        assert!(sh(2, 3, &[0.0, 0.0, 1.0]).is_err());
        assert!(sh(17, 0, &[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn orthonormal_on_quadrature() {
        for lmax in [4usize, 8, 16] {
            let q = quadrature_s2(lmax).unwrap();
            let basis = ShBasis::new(lmax, &q.points);
            let k = s2_len(lmax);
            let mut worst: f64 = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let g: f64 = (0..q.len())
                        .map(|p| q.weights[p] * basis.row(p)[i] * basis.row(p)[j])
                        .sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - want).abs());
                }
            }
            assert!(worst < 1e-10, "lmax={lmax}: {worst}");
        }
    }
}
