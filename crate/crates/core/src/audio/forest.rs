//! Random forest of Gini trees.
//!
//! Bootstrap multiplicities are Poisson(1) draws keyed by (seed, tree, row
//! key), and per-node feature sampling is keyed by (seed, tree, node), so a
//! fitted forest depends on the training rows as a set, not on their order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::Result;
use crate::label::Polarity;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features examined per split; `ceil(sqrt(d))` when absent.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf { negative: f64, nonnegative: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
}

/// Gini impurity of weighted class counts.
pub fn gini(negative: f64, nonnegative: f64) -> f64 {
    let n = negative + nonnegative;
    if n <= 0.0 {
        return 0.0;
    }
    let p = negative / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    neg: &'a [bool],
    weight: &'a [f64],
    max_features: usize,
    max_depth: Option<usize>,
    seed: u64,
    tree: u64,
    nodes: Vec<Node>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(a, b), &i| {
            if self.neg[i] {
                (a + self.weight[i], b)
            } else {
                (a, b + self.weight[i])
            }
        })
    }

    /// Lowest weighted child impurity over thresholds on `feature`, or
    /// `None` when the feature is constant on `idx`.
    fn best_on(&self, idx: &[usize], feature: usize, total: (f64, f64)) -> Option<(f64, f64)> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
        let first = self.x[order[0]][feature];
        if self.x[*order.last().expect("non-empty")][feature] == first {
            return None;
        }
        let n = total.0 + total.1;
        let mut left = (0.0, 0.0);
        let mut best: Option<(f64, f64)> = None;
        for w in order.windows(2) {
            let i = w[0];
            if self.neg[i] {
                left.0 += self.weight[i];
            } else {
                left.1 += self.weight[i];
            }
            let (a, b) = (self.x[i][feature], self.x[w[1]][feature]);
            if a == b {
                continue;
            }
            let right = (total.0 - left.0, total.1 - left.1);
            let nl = left.0 + left.1;
            let imp = (nl * gini(left.0, left.1) + (n - nl) * gini(right.0, right.1)) / n;
            if best.is_none_or(|(bi, _)| imp < bi) {
                best = Some((imp, a + (b - a) / 2.0));
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let (negative, nonnegative) = self.counts(&idx);
        self.nodes.push(Node::Leaf { negative, nonnegative });
        if negative == 0.0 || nonnegative == 0.0 || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let d = self.x[idx[0]].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut seed::rng(&[self.seed, self.tree, id as u64, 1]));
        let mut best: Option<BestSplit> = None;
        let mut examined = 0;
        for &f in &features {
            if examined == self.max_features {
                break;
            }
            let Some((impurity, threshold)) = self.best_on(&idx, f, (negative, nonnegative)) else {
                continue;
            };
            examined += 1;
            if best.as_ref().is_none_or(|b| impurity < b.impurity || (impurity == b.impurity && f < b.feature)) {
                best = Some(BestSplit { impurity, feature: f, threshold });
            }
        }
        let Some(best) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

/// `keys` are stable per-row identifiers used for bootstrap draws.
pub fn train_forest(x: &[Vec<f64>], y: &[Polarity], keys: &[u64], config: &ForestConfig) -> Result<ForestModel> {
    check_training(x, y)?;
    assert_eq!(keys.len(), x.len(), "one key per row");
    let d = x[0].len();
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let neg: Vec<bool> = y.iter().map(|p| p.is_negative()).collect();
    let poisson = Poisson::new(1.0).expect("valid rate");
    let trees = (0..config.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let weight: Vec<f64> = keys
                .iter()
                .map(|&k| {
                    if config.bootstrap {
                        poisson.sample(&mut seed::rng(&[config.seed, t, k, 0]))
                    } else {
                        1.0
                    }
                })
                .collect();
            let mut idx: Vec<usize> = (0..x.len()).filter(|&i| weight[i] > 0.0).collect();
            if idx.is_empty() {
                // Vanishingly rare; fall back to one draw keyed like the rest.
                let mut r = seed::rng(&[config.seed, t, 2]);
                idx.push(r.random_range(0..x.len()));
            }
            let mut b = Builder {
                x,
                neg: &neg,
                weight: &weight,
                max_features,
                max_depth: config.max_depth,
                seed: config.seed,
                tree: t,
                nodes: Vec::new(),
            };
            b.build(idx, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        config: ForestConfig {
            max_features: Some(max_features),
            ..*config
        },
    })
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> (f64, f64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { negative, nonnegative } => return (negative, nonnegative),
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Polarity {
        let (a, b) = self.leaf(row);
        if a > b {
            Polarity::Negative
        } else {
            Polarity::Nonnegative
        }
    }
}

impl ForestModel {
    /// Majority of tree votes and the fraction voting negative.
    pub fn predict(&self, row: &[f64]) -> (Polarity, f64) {
        let neg = self.trees.iter().filter(|t| t.predict(row).is_negative()).count();
        let label = if 2 * neg > self.trees.len() { Polarity::Negative } else { Polarity::Nonnegative };
        (label, neg as f64 / self.trees.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const N: Polarity = Polarity::Negative;
    const P: Polarity = Polarity::Nonnegative;

    fn two_clusters(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Polarity>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let neg = i % 2 == 0;
            let c = if neg { 2.0 } else { -2.0 };
            x.push((0..6).map(|_| c + rng.random::<f64>() - 0.5).collect());
            y.push(if neg { N } else { P });
        }
        (x, y)
    }

    #[test]
    fn gini_formula() {
        assert_eq!(gini(5.0, 0.0), 0.0);
        assert_eq!(gini(3.0, 3.0), 0.5);
    }

    #[test]
    fn stump_recovers_threshold() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0, 6.0, 7.0].iter().map(|&v| vec![v]).collect();
        let y = vec![P, P, P, P, N, N];
        let cfg = ForestConfig { n_trees: 1, max_depth: Some(1), bootstrap: false, ..Default::default() };
        let f = train_forest(&x, &y, &[0, 1, 2, 3, 4, 5], &cfg).unwrap();
        match f.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 5.0)),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = two_clusters(80, 1);
        let keys: Vec<u64> = (0..80).collect();
        let f = train_forest(&x, &y, &keys, &ForestConfig { n_trees: 25, ..Default::default() }).unwrap();
        for (r, l) in x.iter().zip(&y) {
            assert_eq!(f.predict(r).0, *l);
        }
    }

    #[test]
    fn leaves_hold_samples() {
        let (x, y) = two_clusters(60, 2);
        let keys: Vec<u64> = (0..60).map(|i| i * 7919).collect();
        let f = train_forest(&x, &y, &keys, &ForestConfig { n_trees: 10, ..Default::default() }).unwrap();
        for t in &f.trees {
            for n in &t.nodes {
                if let Node::Leaf { negative, nonnegative } = n {
                    assert!(negative + nonnegative >= 1.0);
                }
            }
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let (mut x, mut y) = two_clusters(60, 3);
        for (i, r) in x.iter_mut().enumerate() {
            if i % 5 == 0 {
                r[0] = -r[0];
            }
        }
        y[1] = N;
        let mut keys: Vec<u64> = (0..60).map(|i| seed::mix(i, 11)).collect();
        let cfg = ForestConfig { n_trees: 15, ..Default::default() };
        let a = train_forest(&x, &y, &keys, &cfg).unwrap();
        x.reverse();
        y.reverse();
        keys.reverse();
        let b = train_forest(&x, &y, &keys, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
