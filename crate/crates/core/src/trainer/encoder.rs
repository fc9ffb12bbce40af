//! Small convolutional encoder: 3x3 kernels, stride 2, padding 1.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::projection::FeatureMap;

/// Output size of a stride-2, padding-1, 3x3 convolution.
pub fn conv_out(n: usize) -> usize {
    n.div_ceil(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub c_in: usize,
    pub c_out: usize,
    /// `c_out x c_in x 3 x 3`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(c_in: usize, c_out: usize) -> Self {
        Conv2d {
            c_in,
            c_out,
            weights: vec![0.0; c_out * c_in * 9],
            bias: vec![0.0; c_out],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// He-normal weights and zero bias.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let sd = (2.0 / (self.c_in * 9) as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("positive variance");
        for w in &mut self.weights {
            *w = normal.sample(rng);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    /// Convolution followed by ReLU.
    pub fn forward_relu(&self, x: &FeatureMap) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let (oh, ow) = (conv_out(h), conv_out(w));
        let mut out = FeatureMap::zeros(oh, ow, self.c_out);
        for o in 0..self.c_out {
            let plane = &mut out.values[o * oh * ow..(o + 1) * oh * ow];
            plane.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.c_in {
                let src = x.plane(i);
                let k = &self.weights[(o * self.c_in + i) * 9..][..9];
                for oy in 0..oh {
                    for ky in 0..3 {
                        let y = (2 * oy + ky) as isize - 1;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let row = &src[y as usize * w..(y as usize + 1) * w];
                        for ox in 0..ow {
                            let mut acc = 0.0;
                            for kx in 0..3 {
                                let xx = (2 * ox + kx) as isize - 1;
                                if xx >= 0 && xx < w as isize {
                                    acc += k[ky * 3 + kx] * row[xx as usize];
                                }
                            }
                            plane[oy * ow + ox] += acc;
                        }
                    }
                }
            }
            plane.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        out
    }

    /// Backward through ReLU and convolution given the input `x`, the
    /// post-activation output `y` and its gradient. Accumulates parameter
    /// gradients into `dw`/`db` and returns the input gradient.
    pub fn backward_relu(
        &self,
        x: &FeatureMap,
        y: &FeatureMap,
        dy: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
    ) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let (oh, ow) = (y.height, y.width);
        let mut dx = FeatureMap::zeros(h, w, self.c_in);
        let dz: Vec<f64> = dy
            .iter()
            .zip(&y.values)
            .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
            .collect();
        for o in 0..self.c_out {
            let g = &dz[o * oh * ow..(o + 1) * oh * ow];
            db[o] += g.iter().sum::<f64>();
            for i in 0..self.c_in {
                let src = x.plane(i);
                let base = (o * self.c_in + i) * 9;
                let k = &self.weights[base..base + 9];
                let dsrc = &mut dx.values[i * h * w..(i + 1) * h * w];
                for oy in 0..oh {
                    for ky in 0..3 {
                        let yy = (2 * oy + ky) as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        let yy = yy as usize;
                        for ox in 0..ow {
                            let go = g[oy * ow + ox];
                            if go == 0.0 {
                                continue;
                            }
                            for kx in 0..3 {
                                let xx = (2 * ox + kx) as isize - 1;
                                if xx >= 0 && xx < w as isize {
                                    let p = yy * w + xx as usize;
                                    dw[base + ky * 3 + kx] += go * src[p];
                                    dsrc[p] += go * k[ky * 3 + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(conv: &Conv2d, x: &FeatureMap) -> Vec<f64> {
        let (oh, ow) = (conv_out(x.height), conv_out(x.width));
        let mut out = vec![0.0; conv.c_out * oh * ow];
        for o in 0..conv.c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias[o];
                    for i in 0..conv.c_in {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let y = (2 * oy + ky) as isize - 1;
                                let xx = (2 * ox + kx) as isize - 1;
                                if y >= 0 && xx >= 0 && (y as usize) < x.height && (xx as usize) < x.width {
                                    acc += conv.weights[((o * conv.c_in + i) * 3 + ky) * 3 + kx]
                                        * x.at(i, y as usize, xx as usize);
                                }
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = acc.max(0.0);
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::new(3, 4);
        conv.init(&mut rng);
        conv.bias = vec![0.1, -0.2, 0.0, 0.3];
        let vals = (0..3 * 7 * 6).map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
        let x = FeatureMap::new(7, 6, 3, vals).unwrap();
        let y = conv.forward_relu(&x);
        assert_eq!((y.height, y.width), (4, 3));
        let want = naive(&conv, &x);
        for (a, b) in y.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut conv = Conv2d::new(2, 3);
        conv.init(&mut rng);
        let vals: Vec<f64> = (0..2 * 6 * 6).map(|i| ((i * 13) % 7) as f64 / 3.0 - 1.0).collect();
        let x = FeatureMap::new(6, 6, 2, vals).unwrap();
        let y = conv.forward_relu(&x);
        let dy: Vec<f64> = (0..y.values.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut dw = vec![0.0; conv.weights.len()];
        let mut db = vec![0.0; conv.bias.len()];
        let dx = conv.backward_relu(&x, &y, &dy, &mut dw, &mut db);
        let loss = |c: &Conv2d, x: &FeatureMap| -> f64 {
            c.forward_relu(x).values.iter().zip(&dy).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for j in [0, 5, 17, 40] {
            let mut p = conv.clone();
            p.weights[j] += h;
            let mut m = conv.clone();
            m.weights[j] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!((fd - dw[j]).abs() < 1e-6, "w{j}: {fd} vs {}", dw[j]);
        }
        for j in [0, 9, 30, 71] {
            let mut xp = x.clone();
            xp.values[j] += h;
            let mut xm = x.clone();
            xm.values[j] -= h;
            let fd = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * h);
            assert!((fd - dx.values[j]).abs() < 1e-6, "x{j}");
        }
    }
}
