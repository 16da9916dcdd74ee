use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::cifar::CIFAR10_CLASSES;
use super::{parse_cifar10, parse_idx, RawDataset};
use crate::error::{Error, Result};
use crate::io::read_bytes;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Test,
}

/// A benchmark that can be read from a local data directory.
pub trait RealSource: Send + Sync {
    fn name(&self) -> &str;

    /// Native class names indexed by label byte.
    fn class_names(&self) -> Vec<String>;

    /// Loads one official split from `<data_dir>/<name>/`.
    fn load(&self, data_dir: &Path, split: SplitKind) -> Result<RawDataset>;
}

/// Finds `<dir>/<stem>` or `<dir>/<stem>.gz`.
fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::io(
        plain,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "dataset file not found (also tried .gz)",
        ),
    ))
}

/// The 28×28 greyscale benchmarks distributed as IDX file pairs.
pub struct IdxSource {
    name: &'static str,
    classes: &'static [&'static str],
}

impl IdxSource {
    pub const MNIST: IdxSource = IdxSource {
        name: "mnist",
        classes: &["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"],
    };
    pub const KMNIST: IdxSource = IdxSource {
        name: "kmnist",
        classes: &["o", "ki", "su", "tsu", "na", "ha", "ma", "ya", "re", "wo"],
    };
    pub const FMNIST: IdxSource = IdxSource {
        name: "fmnist",
        classes: &[
            "t-shirt/top",
            "trouser",
            "pullover",
            "dress",
            "coat",
            "sandal",
            "shirt",
            "sneaker",
            "bag",
            "ankle boot",
        ],
    };
}

impl RealSource for IdxSource {
    fn name(&self) -> &str {
        self.name
    }

    fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|s| s.to_string()).collect()
    }

    fn load(&self, data_dir: &Path, split: SplitKind) -> Result<RawDataset> {
        let dir = data_dir.join(self.name);
        let prefix = match split {
            SplitKind::Train => "train",
            SplitKind::Test => "t10k",
        };
        let img_path = locate(&dir, &format!("{prefix}-images-idx3-ubyte"))?;
        let lab_path = locate(&dir, &format!("{prefix}-labels-idx1-ubyte"))?;
        let mut raw = parse_idx(&read_bytes(&img_path)?, &read_bytes(&lab_path)?)
            .map_err(|e| e.with_context(format!("reading {}", img_path.display())))?;
        raw.name = self.name.to_string();
        raw.class_names = self.class_names();
        Ok(raw)
    }
}

/// CIFAR-10 binary version: five training batches and one test batch.
pub struct Cifar10Source;

impl RealSource for Cifar10Source {
    fn name(&self) -> &str {
        "cifar10"
    }

    fn class_names(&self) -> Vec<String> {
        CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect()
    }

    fn load(&self, data_dir: &Path, split: SplitKind) -> Result<RawDataset> {
        let base = data_dir.join("cifar10");
        let nested = base.join("cifar-10-batches-bin");
        let dir = if nested.is_dir() { nested } else { base };
        let stems: Vec<String> = match split {
            SplitKind::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
            SplitKind::Test => vec!["test_batch.bin".into()],
        };
        let blobs = stems
            .iter()
            .map(|s| locate(&dir, s).and_then(|p| read_bytes(&p)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[u8]> = blobs.iter().map(Vec::as_slice).collect();
        parse_cifar10(&refs).map_err(|e| e.with_context(format!("reading {}", dir.display())))
    }
}

/// Benchmarks registered by name.
#[derive(Clone)]
pub struct SourceRegistry {
    sources: BTreeMap<String, Arc<dyn RealSource>>,
}

impl SourceRegistry {
    pub fn empty() -> Self {
        SourceRegistry {
            sources: BTreeMap::new(),
        }
    }

    /// `mnist`, `kmnist`, `fmnist` and `cifar10`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(IdxSource::MNIST));
        r.register(Arc::new(IdxSource::KMNIST));
        r.register(Arc::new(IdxSource::FMNIST));
        r.register(Arc::new(Cifar10Source));
        r
    }

    pub fn register(&mut self, source: Arc<dyn RealSource>) {
        self.sources.insert(source.name().to_string(), source);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RealSource>> {
        self.sources.get(name).cloned().ok_or_else(|| {
            Error::config(format!(
                "unknown dataset '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }
}

impl Default for SourceRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
