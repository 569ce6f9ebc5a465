//! Spatial and frequency artifact classifiers and their training loops.

mod config;
mod cv;
mod model;
mod split;
mod train;

pub use config::*;
pub use cv::{cross_validate, cross_validate_with, group_folds, CvResult};
pub use model::{argmax, build_frequency_model, build_spatial_model, preprocess, Inputs, Model};
pub use split::split_by_group;
pub use train::{
    accuracy, domain_accuracy, evaluate, train, train_dann, train_supervised, EpochRecord, LabeledSet, Monitor,
    TrainHistory,
};
