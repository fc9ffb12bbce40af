//! Optimizers and the step-decay learning-rate schedule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// SGD with Nesterov momentum.
    #[default]
    Nesterov,
    /// Adam with the usual `(0.9, 0.999, 1e-8)` constants; `momentum`
    /// is used as the first-moment decay.
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nesterov" | "sgd" => Ok(OptimizerKind::Nesterov),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Config(format!(
                "unknown optimizer '{s}' (expected nesterov or adam)"
            ))),
        }
    }
}

/// Either optimizer behind one `step` call.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Nesterov(Nesterov),
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n: usize, momentum: f64) -> Self {
        match kind {
            OptimizerKind::Nesterov => Optimizer::Nesterov(Nesterov::new(n, momentum)),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(n, momentum)),
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        match self {
            Optimizer::Nesterov(o) => o.step(w, g, lr),
            Optimizer::Adam(o) => o.step(w, g, lr),
        }
    }
}

/// Nesterov momentum in the lookahead form:
///
/// ```text
/// v <- mu * v - lr * g
/// w <- w + mu * v - lr * g
/// ```
///
/// `v` starts at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Nesterov {
    pub momentum: f64,
    pub velocity: Vec<f64>,
}

impl Nesterov {
    pub fn new(n: usize, momentum: f64) -> Self {
        Nesterov {
            momentum,
            velocity: vec![0.0; n],
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        let mu = self.momentum;
        for ((w, v), g) in w.iter_mut().zip(&mut self.velocity).zip(g) {
            *v = mu * *v - lr * g;
            *w += mu * *v - lr * g;
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64) -> Self {
        Adam {
            beta1,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((w, m), v), g) in w.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(g) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// `base * factor^floor((epoch - 1) / every)` for 1-based epochs.
pub fn step_decay(base: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    let k = (epoch.max(1) - 1) / every.max(1);
    base * factor.powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_scalar_step() {
        let mut opt = Nesterov::new(1, 0.9);
        let mut w = [1.0];
        opt.step(&mut w, &[1.0], 0.1);
        // v = -0.1, w = 1 - 0.09 - 0.1
        assert!((w[0] - 0.81).abs() < 1e-15);
        assert!((opt.velocity[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        let mut opt = Adam::new(2, 0.9);
        let mut w = [0.0, 0.0];
        opt.step(&mut w, &[3.0, -1e-3], 0.01);
        assert!((w[0] + 0.01).abs() < 1e-9);
        assert!((w[1] - 0.01).abs() < 1e-6);
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn schedule_drops_every_fifteen_epochs() {
        assert_eq!(step_decay(0.001, 0.1, 15, 1), 0.001);
        assert_eq!(step_decay(0.001, 0.1, 15, 15), 0.001);
        assert!((step_decay(0.001, 0.1, 15, 16) - 0.0001).abs() < 1e-18);
        assert!((step_decay(0.001, 0.1, 15, 31) - 0.00001).abs() < 1e-19);
    }
}
