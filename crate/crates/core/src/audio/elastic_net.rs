//! Logistic regression with an elastic-net penalty, fitted by proximal
//! gradient descent with backtracking.

use serde::{Deserialize, Serialize};

use super::check_training;
use crate::numeric::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::label::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetConfig {
    pub l1: f64,
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            l1: 0.2,
            l2: 0.4,
            tol: 1e-7,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub l1: f64,
    pub l2: f64,
    pub objective_history: Vec<f64>,
}

/// `sum(log(1 + exp(-y z))) + l1 |b|_1 + l2 |b|_2^2` with `y = +1` for
/// negative rows; the intercept is not penalized.
#[derive(Debug, Clone, Copy)]
pub struct ElasticNetObjective<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub l1: f64,
    pub l2: f64,
}

impl ElasticNetObjective<'_> {
    fn margins(&self, beta: &[f64], b0: f64) -> Vec<f64> {
        self.x
            .iter()
            .map(|r| b0 + r.iter().zip(beta).map(|(a, w)| a * w).sum::<f64>())
            .collect()
    }

    /// Loss plus the L2 term.
    pub fn smooth_value(&self, beta: &[f64], b0: f64) -> f64 {
        let loss: f64 = self
            .margins(beta, b0)
            .iter()
            .zip(self.y)
            .map(|(z, y)| softplus(-y * z))
            .sum();
        loss + self.l2 * beta.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of [`Self::smooth_value`]: coefficients, then intercept.
    pub fn smooth_gradient(&self, beta: &[f64], b0: f64) -> (Vec<f64>, f64) {
        let mut g = vec![0.0; beta.len()];
        let mut g0 = 0.0;
        for ((r, z), y) in self.x.iter().zip(self.margins(beta, b0)).zip(self.y) {
            let c = -y * sigmoid(-y * z);
            for (gj, a) in g.iter_mut().zip(r) {
                *gj += c * a;
            }
            g0 += c;
        }
        for (gj, w) in g.iter_mut().zip(beta) {
            *gj += 2.0 * self.l2 * w;
        }
        (g, g0)
    }

    pub fn value(&self, beta: &[f64], b0: f64) -> f64 {
        self.smooth_value(beta, b0) + self.l1 * beta.iter().map(|w| w.abs()).sum::<f64>()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn train_elastic_net(x: &[Vec<f64>], y: &[Polarity], config: &ElasticNetConfig) -> Result<ElasticNetModel> {
    let (n_neg, n_non) = check_training(x, y)?;
    if !(config.l1 >= 0.0 && config.l2 >= 0.0) {
        return Err(Error::invalid("penalty weights must be nonnegative"));
    }
    let targets: Vec<f64> = y.iter().map(|p| if p.is_negative() { 1.0 } else { -1.0 }).collect();
    let obj = ElasticNetObjective {
        x,
        y: &targets,
        l1: config.l1,
        l2: config.l2,
    };
    let d = x[0].len();
    let mut beta = vec![0.0; d];
    // Best intercept for the all-zero model.
    let mut b0 = (n_neg as f64 / n_non as f64).ln();
    let mut f = obj.value(&beta, b0);
    let mut history = vec![f];
    let mut step = 1.0;
    for _ in 0..config.max_iter {
        let smooth = obj.smooth_value(&beta, b0);
        let (g, g0) = obj.smooth_gradient(&beta, b0);
        step *= 2.0;
        let (nb, nb0) = loop {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&g)
                .map(|(w, gw)| soft_threshold(w - step * gw, step * config.l1))
                .collect();
            let cand0 = b0 - step * g0;
            let diff: Vec<f64> = cand.iter().zip(&beta).map(|(a, b)| a - b).collect();
            let diff0 = cand0 - b0;
            let lin: f64 = diff.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() + diff0 * g0;
            let sq: f64 = diff.iter().map(|a| a * a).sum::<f64>() + diff0 * diff0;
            if obj.smooth_value(&cand, cand0) <= smooth + lin + sq / (2.0 * step) || step < 1e-20 {
                break (cand, cand0);
            }
            step *= 0.5;
        };
        let f_next = obj.value(&nb, nb0);
        if f_next > f {
            break;
        }
        beta = nb;
        b0 = nb0;
        let change = f - f_next;
        f = f_next;
        history.push(f);
        if change < config.tol {
            break;
        }
    }
    if beta.iter().any(|w| !w.is_finite()) || !b0.is_finite() {
        return Err(Error::Training("elastic net diverged".into()));
    }
    Ok(ElasticNetModel {
        coefficients: beta,
        intercept: b0,
        l1: config.l1,
        l2: config.l2,
        objective_history: history,
    })
}

impl ElasticNetModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Label and probability of the negative class.
    pub fn predict(&self, row: &[f64]) -> (Polarity, f64) {
        let z = self.decision(row);
        let label = if z > 0.0 { Polarity::Negative } else { Polarity::Nonnegative };
        (label, sigmoid(z))
    }
}
