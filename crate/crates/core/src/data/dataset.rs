use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{one_hot, Hierarchy};
use crate::matrix::Matrix;

/// Labeled feature vectors with a two-level label hierarchy.
///
/// Fine labels are stored as class indices; [`LabeledDataset::one_hot`]
/// gives the equivalent one-hot matrix. Datasets built from image files have
/// every feature in `[0, 1]`; synthetic datasets carry raw coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct LabeledDataset {
    name: String,
    features: Matrix,
    fine_labels: Vec<usize>,
    hierarchy: Hierarchy,
    fine_names: Vec<String>,
    circle_index: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    name: String,
    fine_names: Vec<String>,
    hierarchy: Hierarchy,
    features: Matrix,
    fine_labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    circle_index: Option<Vec<usize>>,
}

impl TryFrom<DatasetRepr> for LabeledDataset {
    type Error = Error;
    fn try_from(r: DatasetRepr) -> Result<Self> {
        let ds = LabeledDataset::new(r.name, r.features, r.fine_labels, r.hierarchy, r.fine_names)?;
        match r.circle_index {
            Some(c) => ds.with_circles(c),
            None => Ok(ds),
        }
    }
}

impl From<LabeledDataset> for DatasetRepr {
    fn from(d: LabeledDataset) -> Self {
        DatasetRepr {
            name: d.name,
            fine_names: d.fine_names,
            hierarchy: d.hierarchy,
            features: d.features,
            fine_labels: d.fine_labels,
            circle_index: d.circle_index,
        }
    }
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        fine_labels: Vec<usize>,
        hierarchy: Hierarchy,
        fine_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::domain(format!(
                "dataset must have at least one sample and one feature (got {}x{})",
                features.rows(),
                features.cols()
            )));
        }
        if fine_labels.len() != features.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} samples",
                fine_labels.len(),
                features.rows()
            )));
        }
        let k = hierarchy.k();
        if let Some(&bad) = fine_labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!(
                "fine label {bad} out of range for K = {k}"
            )));
        }
        if fine_names.len() != k {
            return Err(Error::shape(format!(
                "{} class names for K = {k}",
                fine_names.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::domain("features must be finite"));
        }
        Ok(LabeledDataset {
            name: name.into(),
            features,
            fine_labels,
            hierarchy,
            fine_names,
            circle_index: None,
        })
    }

    /// Attaches the per-sample circle index of a synthetic circles dataset.
    pub fn with_circles(mut self, circle_index: Vec<usize>) -> Result<Self> {
        if circle_index.len() != self.len() {
            return Err(Error::shape(
                "circle metadata length differs from sample count",
            ));
        }
        self.circle_index = Some(circle_index);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn k(&self) -> usize {
        self.hierarchy.k()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn fine_labels(&self) -> &[usize] {
        &self.fine_labels
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn fine_names(&self) -> &[String] {
        &self.fine_names
    }

    pub fn circle_index(&self) -> Option<&[usize]> {
        self.circle_index.as_deref()
    }

    pub fn one_hot(&self) -> Matrix {
        one_hot(&self.fine_labels, self.k())
    }

    pub fn coarse_labels(&self) -> Vec<u8> {
        self.fine_labels
            .iter()
            .map(|&c| self.hierarchy.coarse_label(c))
            .collect()
    }

    /// Samples per fine class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for &c in &self.fine_labels {
            counts[c] += 1;
        }
        counts
    }

    /// Sub-dataset made of the given sample indices, in order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            fine_labels: indices.iter().map(|&i| self.fine_labels[i]).collect(),
            hierarchy: self.hierarchy.clone(),
            fine_names: self.fine_names.clone(),
            circle_index: self
                .circle_index
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }
}

/// Pixel bytes and class ids as read from a benchmark file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub name: String,
    /// Shape of one image (e.g. `[28, 28]` or `[3, 32, 32]`).
    pub image_shape: Vec<usize>,
    /// `len × dim` bytes, row-major.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub class_names: Vec<String>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let d = self.dim();
        &self.pixels[i * d..(i + 1) * d]
    }
}

/// On-disk document holding a training pool and an optional test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub format: String,
    pub version: u32,
    /// Echo of whatever produced the data (generator spec, grouping, ...).
    pub source: serde_json::Value,
    pub train: LabeledDataset,
    #[serde(default)]
    pub test: Option<LabeledDataset>,
}

impl DatasetBundle {
    pub const FORMAT: &'static str = "granlab-dataset";

    pub fn new(
        source: serde_json::Value,
        train: LabeledDataset,
        test: Option<LabeledDataset>,
    ) -> Self {
        DatasetBundle {
            format: Self::FORMAT.into(),
            version: 1,
            source,
            train,
            test,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: DatasetBundle = crate::io::read_json(path)?;
        if b.format != Self::FORMAT {
            return Err(Error::config(format!(
                "{} is not a dataset document (format '{}')",
                path.display(),
                b.format
            )));
        }
        Ok(b)
    }
}
