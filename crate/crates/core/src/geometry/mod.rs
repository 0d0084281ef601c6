//! Point clouds, the ESF shape descriptor, and PCA alignment of tool parts.

mod align;
mod cloud;
mod esf;
mod intersect;

pub use align::{
    merge_clouds, pca_align, split_reference, AlignedAssembly, AlignedPart, PartRole, PcaFrame,
    RigidTransform,
};
pub use cloud::{concat_clouds, Point, PointCloud, MIN_DESCRIPTOR_POINTS};
pub use esf::{
    compute_esf, normalize_unit, EsfDescriptor, EsfHistogram, DEFAULT_ESF_SAMPLES, ESF_BINS,
    ESF_GRID, ESF_HISTOGRAMS, ESF_LEN, MIN_ESF_SAMPLES,
};
pub use intersect::{closest_pair, compute_intersections, CLOSEST_PAIR_LIMIT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite coordinate at point {index}")]
    NonFiniteInput { index: usize },
    #[error("ESF sample count {0} is below the minimum of 1000")]
    InvalidSampleCount(usize),
    #[error("descriptor must have 640 values, got {0}")]
    DescriptorLength(usize),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("no parts to align")]
    NoParts,
    #[error("{parts} parts but {roles} roles")]
    RoleMismatch { parts: usize, roles: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
