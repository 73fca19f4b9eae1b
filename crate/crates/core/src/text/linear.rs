//! Class-weighted logistic regression on binary n-gram features.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};
use crate::label::Polarity;
use crate::numeric::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearTextConfig {
    pub ngram_orders: Vec<usize>,
    pub min_df: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    /// `(negative, nonnegative)`; inverse class frequency when absent.
    pub class_weights: Option<(f64, f64)>,
}

impl Default for LinearTextConfig {
    fn default() -> Self {
        LinearTextConfig {
            ngram_orders: vec![1, 2],
            min_df: 2,
            l2: 1e-3,
            max_epochs: 500,
            grad_tol: 1e-4,
            class_weights: None,
        }
    }
}

impl LinearTextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(Error::invalid("n-gram orders must be positive"));
        }
        if !(self.l2 >= 0.0) || !(self.grad_tol > 0.0) || self.max_epochs == 0 {
            return Err(Error::invalid("l2 >= 0, grad_tol > 0 and max_epochs > 0 required"));
        }
        if let Some((a, b)) = self.class_weights {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::invalid("class weights must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTextModel {
    pub ngram_orders: Vec<usize>,
    /// Index order; position is the feature index.
    pub vocabulary: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// `(negative, nonnegative)`.
    pub class_weights: (f64, f64),
    pub loss_history: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

fn ngrams(text: &str, orders: &[usize]) -> BTreeSet<String> {
    let tokens = tokenize(text);
    let mut out = BTreeSet::new();
    for &n in orders {
        for w in tokens.windows(n) {
            out.insert(w.join(" "));
        }
    }
    out
}

/// The training objective: mean class-weighted logistic loss plus
/// `l2 / 2 * |w|^2`. Parameters are the weights followed by the bias.
#[derive(Debug, Clone)]
pub struct WeightedLogistic {
    pub docs: Vec<Vec<usize>>,
    /// +1 for negative, -1 for nonnegative.
    pub targets: Vec<f64>,
    pub sample_weights: Vec<f64>,
    pub dim: usize,
    pub l2: f64,
}

impl WeightedLogistic {
    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        theta[self.dim] + self.docs[i].iter().map(|&j| theta[j]).sum::<f64>()
    }

    fn total_weight(&self) -> f64 {
        self.sample_weights.iter().sum()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let w = self.total_weight();
        let data: f64 = (0..self.docs.len())
            .map(|i| self.sample_weights[i] * softplus(-self.targets[i] * self.margin(theta, i)))
            .sum();
        let reg: f64 = theta[..self.dim].iter().map(|v| v * v).sum();
        data / w + 0.5 * self.l2 * reg
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let w = self.total_weight();
        let mut g = vec![0.0; self.dim + 1];
        for i in 0..self.docs.len() {
            let y = self.targets[i];
            let coef = -self.sample_weights[i] * y * sigmoid(-y * self.margin(theta, i)) / w;
            for &j in &self.docs[i] {
                g[j] += coef;
            }
            g[self.dim] += coef;
        }
        for j in 0..self.dim {
            g[j] += self.l2 * theta[j];
        }
        g
    }
}

/// Gradient descent with Armijo backtracking. Returns the parameters and
/// the objective value after every epoch, starting with the initial one.
fn minimize(obj: &WeightedLogistic, max_epochs: usize, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let mut theta = vec![0.0; obj.dim + 1];
    let mut f = obj.value(&theta);
    let mut history = vec![f];
    let mut step = 1.0;
    for _ in 0..max_epochs {
        let g = obj.gradient(&theta);
        let gn2: f64 = g.iter().map(|x| x * x).sum();
        if gn2.sqrt() < tol {
            break;
        }
        step *= 2.0;
        let (next, f_next) = loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t - step * d).collect();
            let fc = obj.value(&cand);
            if fc <= f - 0.5 * step * gn2 {
                break (cand, fc);
            }
            step *= 0.5;
            if step < 1e-20 {
                break (theta.clone(), f);
            }
        };
        theta = next;
        f = f_next;
        history.push(f);
    }
    (theta, history)
}

/// Trains on `(text, label)` pairs.
pub fn train_linear(docs: &[(&str, Polarity)], config: &LinearTextConfig) -> Result<LinearTextModel> {
    config.validate()?;
    let n_neg = docs.iter().filter(|(_, p)| p.is_negative()).count();
    let n_non = docs.len() - n_neg;
    if n_neg < 2 || n_non < 2 {
        return Err(Error::Training(format!(
            "need at least 2 examples per class, got {n_neg} negative and {n_non} nonnegative"
        )));
    }
    let grams: Vec<BTreeSet<String>> = docs.iter().map(|(t, _)| ngrams(t, &config.ngram_orders)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for g in &grams {
        for s in g {
            *df.entry(s.as_str()).or_default() += 1;
        }
    }
    let vocabulary: Vec<String> = df
        .into_iter()
        .filter(|&(_, c)| c >= config.min_df)
        .map(|(s, _)| s.to_string())
        .collect();
    let index: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let n = docs.len() as f64;
    let class_weights = config
        .class_weights
        .unwrap_or((n / (2.0 * n_neg as f64), n / (2.0 * n_non as f64)));
    let obj = WeightedLogistic {
        docs: grams
            .iter()
            .map(|g| g.iter().filter_map(|s| index.get(s).copied()).collect())
            .collect(),
        targets: docs.iter().map(|(_, p)| if p.is_negative() { 1.0 } else { -1.0 }).collect(),
        sample_weights: docs
            .iter()
            .map(|(_, p)| if p.is_negative() { class_weights.0 } else { class_weights.1 })
            .collect(),
        dim: vocabulary.len(),
        l2: config.l2,
    };
    let (theta, loss_history) = minimize(&obj, config.max_epochs, config.grad_tol);
    log::debug!(
        "linear text model: {} features, {} epochs, loss {:.6}",
        vocabulary.len(),
        loss_history.len() - 1,
        loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(LinearTextModel {
        ngram_orders: config.ngram_orders.clone(),
        weights: theta[..vocabulary.len()].to_vec(),
        bias: theta[vocabulary.len()],
        vocabulary,
        class_weights,
        loss_history,
        index,
    })
}

impl LinearTextModel {
    /// Rebuilds the lookup table after deserialization and checks shapes.
    pub fn finish_load(mut self) -> Result<Self> {
        if self.weights.len() != self.vocabulary.len() {
            return Err(Error::invalid("weight vector length differs from vocabulary size"));
        }
        if !(self.class_weights.0 > 0.0 && self.class_weights.1 > 0.0) {
            return Err(Error::invalid("class weights must be positive"));
        }
        self.index = self.vocabulary.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(self)
    }

    pub fn decision(&self, text: &str) -> f64 {
        self.bias
            + ngrams(text, &self.ngram_orders)
                .iter()
                .filter_map(|g| self.index.get(g))
                .map(|&j| self.weights[j])
                .sum::<f64>()
    }
}

/// Label and probability of the negative class, clamped into (0, 1).
pub fn predict_linear(model: &LinearTextModel, text: &str) -> (Polarity, f64) {
    let z = model.decision(text);
    let p = sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let label = if z > 0.0 { Polarity::Negative } else { Polarity::Nonnegative };
    (label, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn separable() -> Vec<(&'static str, Polarity)> {
        let mut v = Vec::new();
        for t in ["bad awful", "awful bad service", "bad bad", "awful day", "so bad", "bad awful call", "awful", "really bad awful", "bad one", "awful awful"] {
            v.push((t, Polarity::Negative));
        }
        for t in ["great thanks", "thanks great help", "great great", "thanks a lot", "great", "thanks", "great day thanks", "very great", "thanks thanks", "great service thanks"] {
            v.push((t, Polarity::Nonnegative));
        }
        v
    }

    #[test]
    fn separable_training_accuracy() {
        let docs = separable();
        let m = train_linear(&docs, &LinearTextConfig::default()).unwrap();
        for (t, y) in &docs {
            assert_eq!(predict_linear(&m, t).0, *y, "{t}");
        }
    }

    #[test]
    fn loss_is_nonincreasing() {
        let m = train_linear(&separable(), &LinearTextConfig::default()).unwrap();
        assert!(m.loss_history.len() > 1);
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn doubling_class_weights_keeps_decisions() {
        let docs = separable();
        let mut cfg = LinearTextConfig {
            class_weights: Some((1.5, 0.75)),
            ..Default::default()
        };
        let a = train_linear(&docs, &cfg).unwrap();
        cfg.class_weights = Some((3.0, 1.5));
        let b = train_linear(&docs, &cfg).unwrap();
        for probe in ["bad", "great", "bad great", "awful thanks thanks", "unknown words", "bad bad great"] {
            assert_eq!(predict_linear(&a, probe).0, predict_linear(&b, probe).0, "{probe}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let docs = separable();
        let cfg = LinearTextConfig::default();
        let m = train_linear(&docs, &cfg).unwrap();
        let obj = WeightedLogistic {
            docs: docs
                .iter()
                .map(|(t, _)| ngrams(t, &cfg.ngram_orders).iter().filter_map(|g| m.index.get(g).copied()).collect())
                .collect(),
            targets: docs.iter().map(|(_, p)| if p.is_negative() { 1.0 } else { -1.0 }).collect(),
            sample_weights: vec![1.0; docs.len()],
            dim: m.vocabulary.len(),
            l2: 0.1,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..=obj.dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g = obj.gradient(&theta);
        let h = 1e-6;
        for _ in 0..5 {
            let j = rng.random_range(0..=obj.dim);
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
            let rel = (fd - g[j]).abs() / g[j].abs().max(1e-8);
            assert!(rel < 1e-5, "coord {j}: fd {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn oov_falls_back_to_bias() {
        let m = train_linear(&separable(), &LinearTextConfig::default()).unwrap();
        let (label, p) = predict_linear(&m, "zzz qqq");
        assert_eq!(m.decision("zzz qqq"), m.bias);
        assert_eq!(label.is_negative(), m.bias > 0.0);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn single_class_fails() {
        let docs = vec![("bad", Polarity::Negative), ("awful", Polarity::Negative), ("worse", Polarity::Negative)];
        assert!(matches!(train_linear(&docs, &LinearTextConfig::default()), Err(Error::Training(_))));
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let docs = separable();
        let m = train_linear(&docs, &LinearTextConfig::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: LinearTextModel = serde_json::from_str::<LinearTextModel>(&json).unwrap().finish_load().unwrap();
        for (t, _) in &docs {
            assert_eq!(predict_linear(&m, t).1.to_bits(), predict_linear(&back, t).1.to_bits());
        }
    }

    #[test]
    fn deterministic() {
        let docs = separable();
        let a = train_linear(&docs, &LinearTextConfig::default()).unwrap();
        let b = train_linear(&docs, &LinearTextConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
