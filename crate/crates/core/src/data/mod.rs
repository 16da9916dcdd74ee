//! Datasets: the labeled carrier type, binary benchmark parsers, coarse
//! groupings, subsampling and the synthetic concentric-circles generator.

mod cifar;
mod dataset;
mod grouping;
mod idx;
mod sources;
mod subsample;
mod synth;

pub use cifar::{parse_cifar10, write_cifar10, CIFAR10_RECORD_LEN};
pub use dataset::{DatasetBundle, LabeledDataset, RawDataset};
pub use grouping::{apply_grouping, GroupingSpec};
pub use idx::{parse_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use sources::{Cifar10Source, IdxSource, RealSource, SourceRegistry, SplitKind};
pub use subsample::{subsample, subsample_indices};
pub use synth::{generate_circles, redundancy_of, CircleSpec};

/// Maps a pixel byte to `[0, 1]`.
#[inline]
pub fn normalize_byte(b: u8) -> f64 {
    f64::from(b) / 255.0
}

pub fn normalize(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().copied().map(normalize_byte).collect()
}
