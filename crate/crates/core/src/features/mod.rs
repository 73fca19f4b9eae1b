//! Frame-level acoustic features, their nine-statistic aggregation, the
//! 39-column utterance vector, and MFCCs.

pub mod aggregate;
pub mod frame;
pub mod mfcc;
pub mod spectral;
pub mod speaking_rate;
pub mod vector;

pub use self::aggregate::{aggregate9, quantile_sorted, AggStats9};
pub use self::frame::{frame_signal, hann};
pub use self::mfcc::{mfcc, MfccConfig, MfccMatrix};
pub use self::spectral::{estimate_pitch, frame_features, FrameAnalyzer, FrameFeatures, PitchConfig};
pub use self::speaking_rate::{speaking_rate, SpeakingRateFeatures};
pub use self::vector::{
    featurize_utterance, read_feature_table, utterance_features, write_feature_table,
    FeatureConfig, FeatureTable, FeatureVector39, COLUMNS, N_FEATURES,
};
