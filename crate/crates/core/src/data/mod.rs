//! Datasets of bags: loaders, standardization, fold splitting, the synthetic
//! generator and the slide patch sampler.

mod bag;
mod bag_csv;
mod dataset;
mod folds;
mod kmeans;
mod musk;
mod patches;
mod ppm;
mod synth;

pub use bag::Bag;
pub use bag_csv::{load_bag_csv, read_bag_csv, save_bag_csv, write_bag_csv};
pub use dataset::{standardize, Dataset, Standardization, STD_FLOOR};
pub use folds::{stratified_group_kfold, Fold};
pub use kmeans::{kmeans, KMeans};
pub use musk::{load_musk1, parse_musk};
pub use patches::{
    is_background, per_cluster_quota, sample_patches, write_selection_csv, PatchConfig, PatchPick,
    PatchSelection, SelectionSidecar, DESCRIPTOR_GRID, KMEANS_ITERATIONS,
};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use synth::{synth_mil_dataset, SynthConfig};
