use serde::{Deserialize, Serialize};

use super::check_training;
use crate::error::{Error, Result};
use crate::label::Polarity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Polarity>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn fit(rows: Vec<Vec<f64>>, labels: Vec<Polarity>, k: usize) -> Result<KnnModel> {
        check_training(&rows, &labels)?;
        if k == 0 || k.is_multiple_of(2) || k > rows.len() {
            return Err(Error::invalid(format!(
                "k must be odd and at most the training size {}, got {k}",
                rows.len()
            )));
        }
        Ok(KnnModel { k, rows, labels })
    }

    /// Indices of the `k` nearest rows, nearest first; equal distances go to
    /// the lower index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.rows.iter().map(|r| sq_dist(r, query)).zip(0..).collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by);
            d.truncate(self.k);
        }
        d.sort_by(by);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label and fraction of negative neighbors.
    pub fn predict(&self, query: &[f64]) -> (Polarity, f64) {
        let nn = self.neighbors(query);
        let neg = nn.iter().filter(|&&i| self.labels[i].is_negative()).count();
        let label = if 2 * neg > nn.len() { Polarity::Negative } else { Polarity::Nonnegative };
        (label, neg as f64 / nn.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const N: Polarity = Polarity::Negative;
    const P: Polarity = Polarity::Nonnegative;

    #[test]
    fn identity_with_k1() {
        let m = KnnModel::fit(vec![vec![0.0], vec![1.0], vec![5.0]], vec![N, P, N], 1).unwrap();
        assert_eq!(m.predict(&[1.0]).0, P);
        assert_eq!(m.predict(&[5.0]).0, N);
    }

    #[test]
    fn majority_of_three() {
        let m = KnnModel::fit(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![10.0], vec![11.0]],
            vec![N, N, P, P, P],
            3,
        )
        .unwrap();
        assert_eq!(m.predict(&[0.05]), (N, 2.0 / 3.0));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let m = KnnModel::fit(vec![vec![1.0], vec![-1.0], vec![1.0], vec![3.0]], vec![N, P, P, N], 1).unwrap();
        assert_eq!(m.neighbors(&[0.0]), vec![0]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<Polarity> = (0..200).map(|i| if i % 3 == 0 { N } else { P }).collect();
        let m = KnnModel::fit(rows.clone(), labels.clone(), 3).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let mut all: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (sq_dist(r, &q), i)).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected: Vec<usize> = all[..3].iter().map(|p| p.1).collect();
            assert_eq!(m.neighbors(&q), expected);
        }
    }

    #[test]
    fn k_validation() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(KnnModel::fit(rows.clone(), vec![N, P], 2).is_err());
        assert!(KnnModel::fit(rows, vec![N, P], 3).is_err());
    }
}
