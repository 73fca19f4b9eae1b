use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero columns are stored as 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        if rows.len() < 2 {
            return Err(Error::Training("standardizer needs at least 2 rows".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_and_constant() {
        let rows = vec![vec![2.0, 7.0], vec![4.0, 7.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.apply(&rows), vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(s.std[1], 1.0);
    }

    #[test]
    fn training_means_vanish() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 0.37).sin() * 100.0, i as f64, 1e6 + (i % 7) as f64])
            .collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z = s.apply(&rows);
        for j in 0..3 {
            let m: f64 = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            assert!(m.abs() < 1e-10, "{j}: {m}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Standardizer::fit(&[vec![1.0]]).is_err());
        assert!(Standardizer::fit(&[vec![1.0], vec![f64::NAN]]).is_err());
    }
}
