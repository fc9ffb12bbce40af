//! Equiangular quadrature grids with exact weights.
//!
//! Colatitude nodes are Gauss–Legendre in `cos(beta)`, longitude-like angles
//! are uniform. With `B + 1` Legendre nodes and `2B + 1` uniform angles the
//! rules integrate products of two band-`B` signals exactly, which is what
//! the forward transforms need for an exact roundtrip.

use std::f64::consts::PI;

use super::{EulerLayout, EulerRing};
use crate::error::{Error, Result};
use crate::rotation::Vec3;

pub const MAX_QUADRATURE_BAND: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes descending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on S² exact for products of two band-`band_limit` signals.
#[derive(Clone, Debug)]
pub struct S2Quadrature {
    pub band_limit: usize,
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

/// Quadrature rule on SO(3) over a Z-Y-Z Euler product grid; weights sum to
/// the total Haar volume `pi^2`.
#[derive(Clone, Debug)]
pub struct SO3Quadrature {
    pub band_limit: usize,
    pub layout: EulerLayout,
    pub weights: Vec<f64>,
}

impl S2Quadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl SO3Quadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_band(band: usize) -> Result<()> {
    if band > MAX_QUADRATURE_BAND {
        Err(Error::BandLimit {
            requested: band,
            max: MAX_QUADRATURE_BAND,
        })
    } else {
        Ok(())
    }
}

pub fn quadrature_s2(band_limit: usize) -> Result<S2Quadrature> {
    check_band(band_limit)?;
    let (xs, ws) = gauss_legendre(band_limit + 1);
    let n_phi = 2 * band_limit + 1;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut points = Vec::with_capacity(xs.len() * n_phi);
    let mut weights = Vec::with_capacity(xs.len() * n_phi);
    for (x, w) in xs.iter().zip(&ws) {
        let s = (1.0 - x * x).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            points.push([s * phi.cos(), s * phi.sin(), *x]);
            weights.push(w * dphi);
        }
    }
    Ok(S2Quadrature {
        band_limit,
        points,
        weights,
    })
}

pub fn quadrature_so3(band_limit: usize) -> Result<SO3Quadrature> {
    check_band(band_limit)?;
    let (xs, ws) = gauss_legendre(band_limit + 1);
    let n_ang = 2 * band_limit + 1;
    let dang = 2.0 * PI / n_ang as f64;
    let uniform: Vec<f64> = (0..n_ang).map(|j| j as f64 * dang).collect();
    let rings: Vec<EulerRing> = xs
        .iter()
        .map(|x| EulerRing {
            beta: x.clamp(-1.0, 1.0).acos(),
            alphas: uniform.clone(),
        })
        .collect();
    // sin(beta) d(alpha) d(beta) d(gamma) has total 8 pi^2; rescale to pi^2
    let mut weights = Vec::with_capacity(xs.len() * n_ang * n_ang);
    for w in &ws {
        let wp = w * dang * dang / 8.0;
        weights.extend(std::iter::repeat_n(wp, n_ang * n_ang));
    }
    Ok(SO3Quadrature {
        band_limit,
        layout: EulerLayout {
            rings,
            gammas: uniform,
        },
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_total_measure() {
        for b in [0, 1, 4, 6, 12, 16] {
            let s2: f64 = quadrature_s2(b).unwrap().weights.iter().sum();
            assert!((s2 - 4.0 * PI).abs() < 1e-10);
            let so3: f64 = quadrature_so3(b).unwrap().weights.iter().sum();
            assert!((so3 - PI * PI).abs() < 1e-10);
        }
    }
}
