//! Two-component diagonal Gaussian mixture fitted by EM.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Polarity;
use crate::numeric::logsumexp;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub variance_floor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Column whose higher component mean marks the negative component when
    /// labeled rows do not decide.
    pub loudness_column: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 2,
            variance_floor: 1e-6,
            tol: 1e-6,
            max_iter: 300,
            seed: 0,
            loudness_column: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub component_labels: Vec<Polarity>,
    pub ll_history: Vec<f64>,
}

impl GmmModel {
    /// Per-component `log(w_k) + log N(x | mu_k, diag(var_k))`.
    pub fn component_log_densities(&self, row: &[f64]) -> Vec<f64> {
        (0..self.weights.len())
            .map(|k| {
                self.weights[k].ln()
                    + row
                        .iter()
                        .zip(self.means[k].iter().zip(&self.variances[k]))
                        .map(|(x, (m, v))| -0.5 * (2.0 * PI * v).ln() - (x - m) * (x - m) / (2.0 * v))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn log_likelihood(&self, rows: &[Vec<f64>]) -> f64 {
        rows.iter().map(|r| logsumexp(&self.component_log_densities(r))).sum()
    }

    /// Most probable component; ties go to the lower index.
    pub fn component(&self, row: &[f64]) -> usize {
        let lp = self.component_log_densities(row);
        let mut best = 0;
        for k in 1..lp.len() {
            if lp[k] > lp[best] {
                best = k;
            }
        }
        best
    }

    /// Label of the most probable component and its posterior probability
    /// of being negative.
    pub fn predict(&self, row: &[f64]) -> (Polarity, f64) {
        let lp = self.component_log_densities(row);
        let z = logsumexp(&lp);
        let p_neg: f64 = lp
            .iter()
            .zip(&self.component_labels)
            .filter(|(_, l)| l.is_negative())
            .map(|(v, _)| (v - z).exp())
            .sum();
        (self.component_labels[self.component(row)], p_neg)
    }
}

fn initial_model(rows: &[Vec<f64>], keys: &[u64], config: &GmmConfig) -> GmmModel {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let order_key = |i: usize| seed::mix(config.seed, keys[i]);
    let first = (0..rows.len()).min_by_key(|&i| order_key(i)).expect("rows");
    let mut centers = vec![first];
    while centers.len() < config.components {
        // Farthest point from the chosen centers; ties by key.
        let next = (0..rows.len())
            .map(|i| {
                let dist = centers
                    .iter()
                    .map(|&c| rows[i].iter().zip(&rows[c]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                (dist, std::cmp::Reverse(order_key(i)), i)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("rows")
            .2;
        centers.push(next);
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let var: Vec<f64> = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).max(config.variance_floor))
        .collect();
    let k = config.components;
    GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: centers.iter().map(|&c| rows[c].clone()).collect(),
        variances: vec![var; k],
        component_labels: vec![Polarity::Nonnegative; k],
        ll_history: Vec::new(),
    }
}

/// Fits on all `rows`; `labels` (aligned, `None` for unlabeled rows) only
/// name the components afterwards.
pub fn fit_gmm(rows: &[Vec<f64>], keys: &[u64], labels: &[Option<Polarity>], config: &GmmConfig) -> Result<GmmModel> {
    let k = config.components;
    if k < 1 || rows.len() < 2 * k {
        return Err(Error::Training(format!("GMM needs at least {} rows, got {}", 2 * k, rows.len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    assert_eq!(keys.len(), rows.len(), "one key per row");
    assert_eq!(labels.len(), rows.len(), "one label slot per row");
    let d = rows[0].len();
    let mut model = initial_model(rows, keys, config);
    let mut floored = false;
    let mut resp = vec![vec![0.0; k]; rows.len()];
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..config.max_iter {
        // E-step
        let mut ll = 0.0;
        for (r, row) in resp.iter_mut().zip(rows) {
            let lp = model.component_log_densities(row);
            let z = logsumexp(&lp);
            ll += z;
            for (ri, l) in r.iter_mut().zip(&lp) {
                *ri = (l - z).exp();
            }
        }
        model.ll_history.push(ll);
        if ll - prev < config.tol {
            break;
        }
        prev = ll;
        // M-step
        let nk: Vec<f64> = (0..k).map(|c| resp.iter().map(|r| r[c]).sum()).collect();
        let total: f64 = nk.iter().sum();
        for c in 0..k {
            if nk[c] < 1e-12 {
                continue;
            }
            model.weights[c] = nk[c] / total;
            let mu: Vec<f64> = (0..d)
                .map(|j| rows.iter().zip(&resp).map(|(x, r)| r[c] * x[j]).sum::<f64>() / nk[c])
                .collect();
            let var: Vec<f64> = (0..d)
                .map(|j| {
                    let v = rows.iter().zip(&resp).map(|(x, r)| r[c] * (x[j] - mu[j]).powi(2)).sum::<f64>() / nk[c];
                    if v < config.variance_floor {
                        floored = true;
                        config.variance_floor
                    } else {
                        v
                    }
                })
                .collect();
            model.means[c] = mu;
            model.variances[c] = var;
        }
        let s: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= s);
    }
    if floored {
        log::warn!("GMM variance floor {} applied", config.variance_floor);
    }
    model.component_labels = name_components(&model, rows, labels, config.loudness_column);
    Ok(model)
}

fn name_components(model: &GmmModel, rows: &[Vec<f64>], labels: &[Option<Polarity>], loudness: usize) -> Vec<Polarity> {
    let k = model.weights.len();
    let mut votes = vec![(0usize, 0usize); k];
    for (row, l) in rows.iter().zip(labels) {
        if let Some(l) = l {
            let c = model.component(row);
            if l.is_negative() {
                votes[c].0 += 1;
            } else {
                votes[c].1 += 1;
            }
        }
    }
    let loudest = (0..k)
        .max_by(|&a, &b| model.means[a][loudness].total_cmp(&model.means[b][loudness]).then(b.cmp(&a)))
        .expect("components");
    (0..k)
        .map(|c| match votes[c] {
            (n, p) if n > p => Polarity::Negative,
            (n, p) if p > n => Polarity::Nonnegative,
            _ if c == loudest => Polarity::Negative,
            _ => Polarity::Nonnegative,
        })
        .collect()
}
