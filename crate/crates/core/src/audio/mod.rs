//! Audio committee: elastic-net logistic regression, k-nearest neighbors,
//! a random forest and an unsupervised Gaussian mixture, all on
//! standardized feature vectors.

pub mod elastic_net;
pub mod forest;
pub mod gmm;
pub mod knn;
pub mod standardize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::elastic_net::{train_elastic_net, ElasticNetConfig, ElasticNetModel, ElasticNetObjective};
pub use self::forest::{gini, train_forest, ForestConfig, ForestModel};
pub use self::gmm::{fit_gmm, GmmConfig, GmmModel};
pub use self::knn::KnnModel;
pub use self::standardize::Standardizer;

use crate::error::{Error, Result};
use crate::label::{Polarity, Vote};
use crate::seed;

pub const ELASTIC_NET: &str = "elastic_net";
pub const KNN: &str = "knn";
pub const RANDOM_FOREST: &str = "random_forest";
pub const GMM: &str = "gmm";

/// Shape and class checks shared by the supervised members. Returns the
/// negative and nonnegative counts.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[Polarity]) -> Result<(usize, usize)> {
    if x.len() != y.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    let Some(d) = x.first().map(Vec::len) else {
        return Err(Error::Training("no training rows".into()));
    };
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("rows must share a nonzero width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    let neg = y.iter().filter(|p| p.is_negative()).count();
    if neg == 0 || neg == y.len() {
        return Err(Error::Training("both classes must be present".into()));
    }
    Ok((neg, y.len() - neg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioCommitteeConfig {
    pub elastic_net: ElasticNetConfig,
    pub knn_k: usize,
    pub forest: ForestConfig,
    pub gmm: GmmConfig,
}

impl Default for AudioCommitteeConfig {
    fn default() -> Self {
        AudioCommitteeConfig {
            elastic_net: ElasticNetConfig::default(),
            knn_k: 3,
            forest: ForestConfig::default(),
            gmm: GmmConfig::default(),
        }
    }
}

/// The fitted committee. Raw feature rows go in; standardization is internal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioCommittee {
    pub standardizer: Standardizer,
    pub elastic_net: ElasticNetModel,
    pub knn: KnnModel,
    pub forest: ForestModel,
    pub gmm: GmmModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberPrediction {
    pub label: Polarity,
    /// Negative-class probability or vote share.
    pub score: f64,
}

impl AudioCommittee {
    pub const KIND: &'static str = "audio_committee";

    /// Trains on `labeled` rows; the mixture also sees `unlabeled` rows.
    /// Rows are keyed by utterance id and sorted by key first, so input
    /// order never matters.
    pub fn train(
        labeled: &[(String, Vec<f64>, Polarity)],
        unlabeled: &[(String, Vec<f64>)],
        config: &AudioCommitteeConfig,
    ) -> Result<AudioCommittee> {
        let mut lab: Vec<&(String, Vec<f64>, Polarity)> = labeled.iter().collect();
        lab.sort_by(|a, b| a.0.cmp(&b.0));
        let x: Vec<Vec<f64>> = lab.iter().map(|r| r.1.clone()).collect();
        let y: Vec<Polarity> = lab.iter().map(|r| r.2).collect();
        check_training(&x, &y)?;
        let standardizer = Standardizer::fit(&x)?;
        let z = standardizer.apply(&x);
        let keys: Vec<u64> = lab.iter().map(|r| seed::key_of(&r.0)).collect();

        let elastic_net = train_elastic_net(&z, &y, &config.elastic_net)?;
        let knn = KnnModel::fit(z.clone(), y.clone(), config.knn_k)?;
        let forest = train_forest(&z, &y, &keys, &config.forest)?;

        let mut all: Vec<(&str, Vec<f64>, Option<Polarity>)> = lab
            .iter()
            .zip(z)
            .map(|(r, zr)| (r.0.as_str(), zr, Some(r.2)))
            .chain(unlabeled.iter().map(|(id, row)| (id.as_str(), standardizer.apply_row(row), None)))
            .collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        let rows: Vec<Vec<f64>> = all.iter().map(|r| r.1.clone()).collect();
        let gmm_keys: Vec<u64> = all.iter().map(|r| seed::key_of(r.0)).collect();
        let gmm_labels: Vec<Option<Polarity>> = all.iter().map(|r| r.2).collect();
        let gmm = fit_gmm(&rows, &gmm_keys, &gmm_labels, &config.gmm)?;

        Ok(AudioCommittee {
            standardizer,
            elastic_net,
            knn,
            forest,
            gmm,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Result<BTreeMap<String, MemberPrediction>> {
        if row.len() != self.standardizer.dim() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.standardizer.dim(),
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        let z = self.standardizer.apply_row(row);
        let mut out = BTreeMap::new();
        for (name, (label, score)) in [
            (ELASTIC_NET, self.elastic_net.predict(&z)),
            (KNN, self.knn.predict(&z)),
            (RANDOM_FOREST, self.forest.predict(&z)),
            (GMM, self.gmm.predict(&z)),
        ] {
            out.insert(name.to_string(), MemberPrediction { label, score });
        }
        Ok(out)
    }

    pub fn votes(&self, row: &[f64]) -> Result<BTreeMap<String, Vote>> {
        Ok(self
            .predict(row)?
            .into_iter()
            .map(|(k, p)| (k, Vote::from(p.label)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_file::{load_model, save_model};
    use rand::{Rng, SeedableRng};

    fn data(n: usize, seed: u64) -> Vec<(String, Vec<f64>, Polarity)> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let neg = i % 3 == 0;
                let c = if neg { 1.5 } else { 0.0 };
                let row: Vec<f64> = (0..8).map(|j| c * (j % 2) as f64 + rng.random::<f64>() * 10.0f64.powi(j % 3)).collect();
                (format!("u{i:04}"), row, if neg { Polarity::Negative } else { Polarity::Nonnegative })
            })
            .collect()
    }

    fn small_config() -> AudioCommitteeConfig {
        AudioCommitteeConfig {
            forest: ForestConfig { n_trees: 20, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut d = data(90, 1);
        let unl: Vec<(String, Vec<f64>)> = data(30, 2).into_iter().map(|(id, r, _)| (format!("x{id}"), r)).collect();
        let a = AudioCommittee::train(&d, &unl, &small_config()).unwrap();
        d.reverse();
        d.swap(3, 40);
        let mut unl2 = unl.clone();
        unl2.reverse();
        let b = AudioCommittee::train(&d, &unl2, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let d = data(60, 3);
        let m = AudioCommittee::train(&d, &[], &small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audio.json");
        save_model(&path, AudioCommittee::KIND, &m).unwrap();
        let back: AudioCommittee = load_model(&path, AudioCommittee::KIND).unwrap();
        assert_eq!(m, back);
        for (_, row, _) in data(40, 4) {
            let (p, q) = (m.predict(&row).unwrap(), back.predict(&row).unwrap());
            for (k, v) in &p {
                assert_eq!(v.score.to_bits(), q[k].score.to_bits());
                assert_eq!(v.label, q[k].label);
            }
        }
        assert!(load_model::<AudioCommittee>(&path, "other").is_err());
    }

    #[test]
    fn predict_checks_width() {
        let m = AudioCommittee::train(&data(30, 5), &[], &small_config()).unwrap();
        assert!(m.predict(&[1.0]).is_err());
        assert_eq!(m.votes(&data(1, 6)[0].1).unwrap().len(), 4);
    }
}
