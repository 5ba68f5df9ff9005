//! Differentiable ranking objectives for learning year-aware embeddings.
//!
//! The library trains encoders so that cosine similarity between item
//! embeddings reflects the gap between their year labels, by descending
//! smooth (sigmoid-relaxed) versions of the AP and nDCG ranking metrics.
//! Around that core it provides the exact metrics those losses approximate,
//! graded relevance functions over year gaps, k-NN and approximate-NN year
//! prediction over a labeled support set, synthetic datasets, and
//! experiment-level analyses.
//!
//! Modules:
//!
//! - [`ranking`]: cosine similarity, the hard ranking function, and the
//!   sigmoid indicator it is relaxed with.
//! - [`metrics`]: exact AP/mAP, DCG/nDCG, MAE.
//! - [`relevance`]: year-gap relevance functions.
//! - [`loss`]: smooth-AP and smooth-nDCG batch losses with analytical
//!   gradients.
//! - [`train`]: encoders (free table / affine), optimizers, training loop.
//! - [`knn`]: exact k-NN year prediction over a support set.
//! - [`ann`]: random-projection-forest approximate search with exact
//!   rescoring.
//! - [`data`]: synthetic dataset generation, feature files, splits.
//! - [`analysis`]: bin-similarity matrices, retrieval evaluation, random
//!   baselines.

pub mod analysis;
pub mod ann;
pub mod data;
pub mod error;
pub mod knn;
pub mod loss;
pub mod metrics;
pub mod ranking;
pub mod relevance;
pub mod train;

pub use analysis::{
    bin_similarity, gap_similarity_spearman, random_baseline_metrics, retrieval_metrics,
    spearman, BinSimilarityMatrix,
};
pub use ann::{build_ann, AnnConfig, AnnIndex};
pub use data::{
    generate, load_features, load_features_csv, save_features, save_features_csv, split,
    LabeledItem, SyntheticSpec, YearSpan,
};
pub use error::{RankError, Result};
pub use knn::{
    curve_to_csv, knn_predict, mae_vs_k_curve, rank_support, weighted_knn_predict, Neighbor,
    Prediction, SupportItem, SupportSet, SupportSource,
};
pub use loss::{
    batch_loss, batch_similarities, exact_batch_ndcg, smooth_ap_batch, smooth_ap_from_scores,
    smooth_ndcg_batch, smooth_ndcg_from_scores, BatchLossResult, LossConfig, Objective,
};
pub use metrics::{
    average_precision, dcg, ideal_dcg, mean_absolute_error, mean_average_precision, ndcg,
    MetricReport, RankedList,
};
pub use ranking::{
    cosine_similarity, hard_rank, smooth_indicator, smooth_indicator_derivative, smooth_rank,
    SimilarityRow, Temperature, Vector,
};
pub use relevance::{RelevanceKind, RelevanceSpec};
pub use train::{
    train, Encoder, OptimizerConfig, TrainConfig, TrainLog, TrainRecord,
};
