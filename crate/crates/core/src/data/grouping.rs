use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_byte, LabeledDataset, RawDataset};
use crate::error::{Error, Result};
use crate::losses::Hierarchy;
use crate::matrix::Matrix;

/// Which native classes of a benchmark form the two coarse classes.
///
/// Classes named in neither list are dropped. Fine labels are re-indexed in
/// `fine_class_names` order, which defaults to `c0_names` then `c1_names`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingSpec {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fine_class_names: Vec<String>,
    pub c0_names: Vec<String>,
    pub c1_names: Vec<String>,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const PRESETS: &[(&str, &str, &[&str], &[&str])] = &[
    (
        "mnist_0to3_vs_4to8",
        "mnist",
        &["0", "1", "2", "3"],
        &["4", "5", "6", "7", "8"],
    ),
    (
        "mnist_even_vs_odd",
        "mnist",
        &["0", "2", "4", "6"],
        &["1", "3", "5", "7"],
    ),
    (
        "fmnist_default",
        "fmnist",
        &["t-shirt/top", "sandal", "dress", "ankle boot"],
        &["pullover", "sneaker", "shirt", "bag"],
    ),
    (
        "kmnist_default",
        "kmnist",
        &["o", "ki", "su", "tsu"],
        &["na", "ha", "ma", "ya"],
    ),
    (
        "cifar_vehicles_vs_animals",
        "cifar10",
        &["airplane", "automobile", "ship", "truck"],
        &["dog", "deer", "bird", "cat"],
    ),
    (
        "cifar_high_redundancy",
        "cifar10",
        &["automobile", "truck"],
        &["cat", "dog"],
    ),
    (
        "cifar_medium_redundancy",
        "cifar10",
        &["cat", "deer"],
        &["dog", "horse"],
    ),
    (
        "cifar_low_redundancy",
        "cifar10",
        &["cat", "truck"],
        &["dog", "automobile"],
    ),
];

impl GroupingSpec {
    pub fn new(dataset: &str, c0: &[&str], c1: &[&str]) -> Self {
        GroupingSpec {
            dataset: dataset.into(),
            fine_class_names: Vec::new(),
            c0_names: names(c0),
            c1_names: names(c1),
        }
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|p| p.0)
    }

    pub fn preset(name: &str) -> Option<GroupingSpec> {
        PRESETS
            .iter()
            .find(|p| p.0 == name)
            .map(|&(_, ds, c0, c1)| GroupingSpec::new(ds, c0, c1))
    }

    /// A preset name, or else a path to a JSON grouping document.
    pub fn resolve(arg: &str) -> Result<GroupingSpec> {
        if let Some(p) = Self::preset(arg) {
            return Ok(p);
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(Error::config(format!(
                "'{arg}' is neither a grouping preset ({}) nor an existing file",
                Self::preset_names().collect::<Vec<_>>().join(", ")
            )));
        }
        crate::io::read_json(path).map_err(|e| Error::config(e.to_string()))
    }

    /// Fine class names in label order.
    pub fn ordered_names(&self) -> Vec<String> {
        if self.fine_class_names.is_empty() {
            self.c0_names
                .iter()
                .chain(&self.c1_names)
                .cloned()
                .collect()
        } else {
            self.fine_class_names.clone()
        }
    }
}

fn lookup(raw: &RawDataset, name: &str) -> Result<u8> {
    raw.class_names
        .iter()
        .position(|c| c.eq_ignore_ascii_case(name))
        .map(|i| i as u8)
        .ok_or_else(|| {
            Error::config(format!(
                "unknown class '{name}' for {}; valid names: {}",
                raw.name,
                raw.class_names.join(", ")
            ))
        })
}

/// Keeps the samples of the named classes and builds the hierarchy.
pub fn apply_grouping(raw: &RawDataset, spec: &GroupingSpec) -> Result<LabeledDataset> {
    if !spec.dataset.is_empty() && !raw.name.is_empty() && spec.dataset != raw.name {
        return Err(Error::config(format!(
            "grouping is for '{}' but the data is '{}'",
            spec.dataset, raw.name
        )));
    }
    if spec.c0_names.is_empty() || spec.c1_names.is_empty() {
        return Err(Error::config(
            "each coarse class needs at least one fine class",
        ));
    }
    let order = spec.ordered_names();
    let mut native = Vec::with_capacity(order.len());
    for name in &order {
        let id = lookup(raw, name)?;
        if native.contains(&id) {
            return Err(Error::config(format!("class '{name}' listed twice")));
        }
        native.push(id);
    }
    let position = |name: &String| -> Result<usize> {
        let id = lookup(raw, name)?;
        native.iter().position(|&n| n == id).ok_or_else(|| {
            Error::config(format!("class '{name}' is missing from fine_class_names"))
        })
    };
    let c0 = spec
        .c0_names
        .iter()
        .map(position)
        .collect::<Result<Vec<_>>>()?;
    let c1 = spec
        .c1_names
        .iter()
        .map(position)
        .collect::<Result<Vec<_>>>()?;
    let hierarchy = Hierarchy::new(order.len(), c0, c1)?;

    // native class id -> new fine index
    let mut remap = [None; 256];
    for (fine, &id) in native.iter().enumerate() {
        remap[id as usize] = Some(fine);
    }
    let d = raw.dim();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..raw.len() {
        if let Some(fine) = remap[raw.labels[i] as usize] {
            feats.extend(raw.image(i).iter().copied().map(normalize_byte));
            labels.push(fine);
        }
    }
    if labels.is_empty() {
        return Err(Error::domain("grouping selects no samples"));
    }
    let fine_names = native
        .iter()
        .map(|&id| raw.class_names[id as usize].clone())
        .collect();
    LabeledDataset::new(
        raw.name.clone(),
        Matrix::from_vec(labels.len(), d, feats)?,
        labels,
        hierarchy,
        fine_names,
    )
}
