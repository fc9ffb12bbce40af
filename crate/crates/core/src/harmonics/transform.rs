//! Synthesis and its transpose for SO(3) signals on Euler-structured grids.
//!
//! A band-limited signal is `f(g) = Σ_l Σ_mn F[l][m][n] D(l, g)[m][n]`.
//! With `D = Z(alpha) d(beta) Z(gamma)` and each `Z` entry a signed
//! `cos(k angle)` or `sin(k angle)`, the signal on one ring of constant
//! `beta` is a bilinear form in the alpha and gamma harmonics:
//!
//! ```text
//! f(alpha, gamma) = Σ_ij A_i(alpha) T[i][j] G_j(gamma)
//! ```
//!
//! where `A` and `G` stack `(cos k., sin k.)` for `k = 0..=L`. `T` is built
//! once per ring from `F` and `d(beta)`, which turns the per-point cost into
//! a `2(L+1)` dot product.

use super::wigner::wigner_d_all;
use super::{so3_block_offset, so3_len};
use crate::grids::EulerLayout;

#[derive(Clone, Copy, Debug)]
struct Term {
    coef: u32,
    t: u32,
}

/// Precomputed tables for one grid layout and band limit.
///
/// Harmonic rows are padded to a multiple of four entries so the inner
/// kernels work on fixed-size blocks.
#[derive(Clone, Debug)]
pub struct So3Plan {
    pub lmax: usize,
    /// Padded harmonic width.
    wp: usize,
    ring_sizes: Vec<usize>,
    n_gamma: usize,
    /// Per ring, the signed small-d factor of every term.
    term_weights: Vec<Vec<f64>>,
    /// Per ring, `n_alpha x wp`.
    trig_alpha: Vec<Vec<f64>>,
    /// `n_gamma x wp`.
    trig_gamma: Vec<f64>,
    /// Gamma harmonics in blocks of four gammas: `[block][j][4]`.
    gamma_blocks: Vec<f64>,
    terms: Vec<Term>,
    len: usize,
}

fn trig_row(lmax: usize, angle: f64, wp: usize, out: &mut Vec<f64>) {
    for k in 0..=lmax {
        let (s, c) = (k as f64 * angle).sin_cos();
        out.push(c);
        out.push(s);
    }
    out.resize(out.len() + wp - 2 * (lmax + 1), 0.0);
}

/// Choices `(a, trig, sign)` with `Z(angle)[m][a] = sign * trig(|m| angle)`
/// (`trig` 0 = cos, 1 = sin).
fn left_options(m: i64) -> Vec<(i64, usize, f64)> {
    match m.signum() {
        0 => vec![(0, 0, 1.0)],
        1 => vec![(m, 0, 1.0), (-m, 1, -1.0)],
        _ => vec![(m, 0, 1.0), (-m, 1, 1.0)],
    }
}

/// Choices `(b, trig, sign)` with `Z(angle)[b][n] = sign * trig(|n| angle)`.
fn right_options(n: i64) -> Vec<(i64, usize, f64)> {
    match n.signum() {
        0 => vec![(0, 0, 1.0)],
        1 => vec![(n, 0, 1.0), (-n, 1, 1.0)],
        _ => vec![(n, 0, 1.0), (-n, 1, -1.0)],
    }
}

#[inline(always)]
fn block4(s: &[f64]) -> &[f64; 4] {
    s[..4].try_into().expect("block of four")
}

/// `acc += x * row` on one block of four.
#[inline(always)]
fn fma4(acc: &mut [f64; 4], x: f64, row: &[f64; 4]) {
    for k in 0..4 {
        acc[k] += x * row[k];
    }
}

impl So3Plan {
    pub fn new(lmax: usize, layout: &EulerLayout) -> Self {
        let width = 2 * (lmax + 1);
        let wp = width.div_ceil(4) * 4;
        let mut terms = Vec::new();
        let mut sources = Vec::new();
        for l in 0..=lmax {
            let li = l as i64;
            let d = 2 * l + 1;
            let off = so3_block_offset(l);
            for m in -li..=li {
                for n in -li..=li {
                    let coef = off + (m + li) as usize * d + (n + li) as usize;
                    for (a, sa, ga) in left_options(m) {
                        for (b, sb, gb) in right_options(n) {
                            let small_d = off + (a + li) as usize * d + (b + li) as usize;
                            let row = 2 * m.unsigned_abs() as usize + sa;
                            let col = 2 * n.unsigned_abs() as usize + sb;
                            terms.push(Term {
                                coef: coef as u32,
                                t: (row * wp + col) as u32,
                            });
                            sources.push((small_d, ga * gb));
                        }
                    }
                }
            }
        }
        let term_weights = layout
            .rings
            .iter()
            .map(|r| {
                let d = wigner_d_all(lmax, r.beta).expect("band limit checked by caller");
                sources.iter().map(|(i, sign)| sign * d[*i]).collect()
            })
            .collect();
        let trig_alpha = layout
            .rings
            .iter()
            .map(|r| {
                let mut t = Vec::with_capacity(r.alphas.len() * wp);
                for &a in &r.alphas {
                    trig_row(lmax, a, wp, &mut t);
                }
                t
            })
            .collect();
        let ng = layout.gammas.len();
        let mut trig_gamma = Vec::with_capacity(ng * wp);
        for &g in &layout.gammas {
            trig_row(lmax, g, wp, &mut trig_gamma);
        }
        let n_blocks = ng.div_ceil(4);
        let mut gamma_blocks = vec![0.0; n_blocks * wp * 4];
        for g in 0..ng {
            for j in 0..wp {
                gamma_blocks[((g / 4) * wp + j) * 4 + g % 4] = trig_gamma[g * wp + j];
            }
        }
        So3Plan {
            lmax,
            wp,
            ring_sizes: layout.rings.iter().map(|r| r.alphas.len()).collect(),
            n_gamma: ng,
            term_weights,
            trig_alpha,
            trig_gamma,
            gamma_blocks,
            terms,
            len: layout.len(),
        }
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Evaluate one channel of coefficients (length `so3_len(lmax)`) at
    /// every grid point.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), so3_len(self.lmax));
        debug_assert_eq!(out.len(), self.len);
        let wp = self.wp;
        let width = 2 * (self.lmax + 1);
        let ng = self.n_gamma;
        let mut t = vec![0.0; wp * wp];
        let mut u = vec![0.0; wp];
        let mut pos = 0;
        for (ring, &n_alpha) in self.ring_sizes.iter().enumerate() {
            t.iter_mut().for_each(|v| *v = 0.0);
            for (term, w) in self.terms.iter().zip(&self.term_weights[ring]) {
                t[term.t as usize] += w * coeffs[term.coef as usize];
            }
            for ta in self.trig_alpha[ring].chunks_exact(wp).take(n_alpha) {
                // u = taᵀ T
                for (jb, ub) in u.chunks_exact_mut(4).enumerate() {
                    let mut acc = [0.0; 4];
                    for i in 0..width {
                        fma4(&mut acc, ta[i], block4(&t[i * wp + jb * 4..]));
                    }
                    ub.copy_from_slice(&acc);
                }
                // out[g] = u · G[g]
                let dst = &mut out[pos..pos + ng];
                for (gb, chunk) in dst.chunks_mut(4).enumerate() {
                    let blk = &self.gamma_blocks[gb * wp * 4..(gb + 1) * wp * 4];
                    let mut acc = [0.0; 4];
                    for j in 0..width {
                        fma4(&mut acc, u[j], block4(&blk[j * 4..]));
                    }
                    chunk.copy_from_slice(&acc[..chunk.len()]);
                }
                pos += ng;
            }
        }
    }

    /// Transpose of [`So3Plan::synthesize`]: `coeffs = S^T values`.
    pub fn adjoint(&self, values: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(values.len(), self.len);
        let wp = self.wp;
        let width = 2 * (self.lmax + 1);
        let ng = self.n_gamma;
        coeffs.iter_mut().for_each(|v| *v = 0.0);
        let mut t = vec![0.0; wp * wp];
        let mut u = vec![0.0; wp];
        let mut pos = 0;
        for (ring, &n_alpha) in self.ring_sizes.iter().enumerate() {
            t.iter_mut().for_each(|v| *v = 0.0);
            for ta in self.trig_alpha[ring].chunks_exact(wp).take(n_alpha) {
                let src = &values[pos..pos + ng];
                pos += ng;
                // u = Σ_g v[g] G[g]
                for (jb, ub) in u.chunks_exact_mut(4).enumerate() {
                    let mut acc = [0.0; 4];
                    for (g, v) in src.iter().enumerate() {
                        fma4(&mut acc, *v, block4(&self.trig_gamma[g * wp + jb * 4..]));
                    }
                    ub.copy_from_slice(&acc);
                }
                // T += ta uᵀ
                for i in 0..width {
                    let a = ta[i];
                    for (tb, ub) in t[i * wp..(i + 1) * wp].chunks_exact_mut(4).zip(u.chunks_exact(4)) {
                        for k in 0..4 {
                            tb[k] += a * ub[k];
                        }
                    }
                }
            }
            for (term, w) in self.terms.iter().zip(&self.term_weights[ring]) {
                coeffs[term.coef as usize] += w * t[term.t as usize];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{healpix_so3, quadrature_so3};
    use crate::harmonics::wigner::wigner_D_all;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synthesis_matches_direct_evaluation() {
        let lmax = 5;
        let grid = healpix_so3(1).unwrap();
        let plan = So3Plan::new(lmax, &grid.layout);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c: Vec<f64> = (0..so3_len(lmax)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut fast = vec![0.0; plan.len()];
        plan.synthesize(&c, &mut fast);
        for (i, r) in grid.rotations.iter().enumerate().step_by(7) {
            let d = wigner_D_all(lmax, r).unwrap();
            let direct: f64 = d.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!((fast[i] - direct).abs() < 1e-10, "{i}: {} vs {direct}", fast[i]);
        }
    }

    #[test]
    fn adjoint_is_transpose() {
        let lmax = 4;
        let q = quadrature_so3(6).unwrap();
        let plan = So3Plan::new(lmax, &q.layout);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c: Vec<f64> = (0..so3_len(lmax)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..plan.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sc = vec![0.0; plan.len()];
        plan.synthesize(&c, &mut sc);
        let mut stv = vec![0.0; c.len()];
        plan.adjoint(&v, &mut stv);
        let lhs: f64 = sc.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = stv.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
