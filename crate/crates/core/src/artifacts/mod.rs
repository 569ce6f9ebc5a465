//! Synthetic artifact generation by k-space manipulation.

mod corrupt;
mod dataset;
mod params;

pub use corrupt::{
    apply_lowpass, cardiac_rows, conjugate_closure, corrupt_aliasing, corrupt_cardiac, corrupt_gibbs, corrupt_respiratory,
    donor_frame, replace_kspace_rows, respiratory_translation, CineSequence,
};
pub use dataset::{
    apply_severity, build_dataset, class_balance, sample_severity, DatasetConfig, LabeledSample,
    SeverityRanges, SourceRef,
};
pub use params::{
    AliasingParams, ArtifactClass, ArtifactParams, Axis, CardiacParams, GibbsParams, RespiratoryParams,
    SeverityRecord, NUM_CLASSES,
};
