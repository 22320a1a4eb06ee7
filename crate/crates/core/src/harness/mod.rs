//! Metrics, repeated cross-validation, the architecture/pooling ablation
//! grid and attention/embedding export.

mod ablation;
mod cv;
mod export;
mod gradsuite;
mod metrics;

pub use ablation::{ablation_grid, architectures, run_ablation, write_ablation_csv, AblationRow};
pub use cv::{fit_model, mean_std, run_cv, score_bags, BagScore, CvOptions, CvReport, DatasetInfo, FoldResult, Summary};
pub use export::{
    export_attention, export_embeddings, write_attention_csv, write_embeddings_csv, AttentionRow, EmbeddingRow,
};
pub use gradsuite::{
    gradient_suite, layer_cases, model_cases, primitive_cases, GradCase, LAYER_TOLERANCE, SMOOTH_TOLERANCE,
};
pub use metrics::{accuracy, roc_auc, write_roc_csv, Roc, RocPoint};
