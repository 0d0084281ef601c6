//! Deterministic synthetic data: tool and part clouds, spectra, experiment sets.

pub mod dataset;
pub mod experiments;
pub mod shapes;
pub mod spectra;
pub mod tools;

pub use dataset::{
    benchmark_actions, case_seed, generate_dataset, list_manifests, load_material_table,
    load_training_spectra, write_experiment_set, DatasetError, DatasetSpec, DatasetSummary,
};
pub use experiments::{
    build_experiment_set, build_experiment_set_with, set_name, ExperimentContext, ExperimentSet,
};
pub use shapes::{sample_composite, Placed, Primitive};
pub use spectra::{
    dataset_object_id, default_class_models, gen_spectral_dataset, nearest_mean, SpectralClassModel,
    OBJECTS_PER_CLASS, SAMPLES_PER_OBJECT,
};
pub use tools::{
    gen_part_cloud, gen_tool_cloud, magnet_sites, PartKind, PartSpec, ToolDims, ToolPrototypeSpec,
    DEFAULT_PART_POINTS, DEFAULT_TOOL_POINTS, TONGS_WIDTH,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unknown part kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Mixes a base seed with a tag and an index into an independent seed.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
