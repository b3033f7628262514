//! Scrambled Sobol angle sampling, angle densities, and dataset materialisation.

mod dataset;
mod pdf;
mod sobol;

pub use dataset::{
    build_dataset, dataset_record, plan_dataset, DatasetSpec, Manifest, ManifestRecord, Split,
    MANIFEST_FORMAT_VERSION,
};
pub use pdf::{AnglePdfVariant, AngleSampler, VariantName};
pub use sobol::{square_box_deviation, SobolStream, MAX_INDEX};
