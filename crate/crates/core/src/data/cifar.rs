//! CIFAR-10 binary batches: fixed-size records of one label byte followed
//! by 3072 pixel bytes (1024 red, 1024 green, 1024 blue, row-major).

use super::RawDataset;
use crate::error::{Error, Result};

pub const CIFAR10_RECORD_LEN: usize = 1 + 3 * 32 * 32;

pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

/// Concatenates any number of batch files into one raw dataset.
pub fn parse_cifar10(batches: &[&[u8]]) -> Result<RawDataset> {
    if batches.is_empty() {
        return Err(Error::parse(0, "no CIFAR-10 batches given"));
    }
    let total: usize = batches.iter().map(|b| b.len()).sum();
    let n = total / CIFAR10_RECORD_LEN;
    let mut pixels = Vec::with_capacity(n * (CIFAR10_RECORD_LEN - 1));
    let mut labels = Vec::with_capacity(n);
    for (b, bytes) in batches.iter().enumerate() {
        if bytes.is_empty() {
            return Err(Error::parse(0, format!("CIFAR-10 batch {b} is empty")));
        }
        if bytes.len() % CIFAR10_RECORD_LEN != 0 {
            let whole = bytes.len() / CIFAR10_RECORD_LEN * CIFAR10_RECORD_LEN;
            return Err(Error::parse(
                whole as u64,
                format!(
                    "CIFAR-10 batch {b} is {} bytes, not a multiple of {CIFAR10_RECORD_LEN}",
                    bytes.len()
                ),
            ));
        }
        for (r, rec) in bytes.chunks_exact(CIFAR10_RECORD_LEN).enumerate() {
            if rec[0] > 9 {
                return Err(Error::parse(
                    (r * CIFAR10_RECORD_LEN) as u64,
                    format!("label {} outside 0..=9 in batch {b}", rec[0]),
                ));
            }
            labels.push(rec[0]);
            pixels.extend_from_slice(&rec[1..]);
        }
    }
    Ok(RawDataset {
        name: "cifar10".into(),
        image_shape: vec![3, 32, 32],
        pixels,
        labels,
        class_names: CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Serializes a dataset as one CIFAR-10 batch.
pub fn write_cifar10(raw: &RawDataset) -> Result<Vec<u8>> {
    if raw.dim() != CIFAR10_RECORD_LEN - 1 {
        return Err(Error::shape(format!(
            "CIFAR-10 records hold 3072 pixels, dataset has {}",
            raw.dim()
        )));
    }
    let mut out = Vec::with_capacity(raw.len() * CIFAR10_RECORD_LEN);
    for i in 0..raw.len() {
        out.push(raw.labels[i]);
        out.extend_from_slice(raw.image(i));
    }
    Ok(out)
}
