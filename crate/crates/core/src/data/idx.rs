//! IDX container format: a big-endian magic word whose low byte is the
//! number of dimensions, one big-endian `u32` per dimension, then raw
//! unsigned bytes.

use super::RawDataset;
use crate::error::{Error, Result};

/// Unsigned bytes, three dimensions (count, rows, cols).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Unsigned bytes, one dimension (count).
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.bytes.len() as u64,
                format!(
                    "{} file truncated: needed {n} bytes at offset {}, found {}",
                    self.what,
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::parse(
                self.pos as u64,
                format!(
                    "{} file has {} unexpected trailing bytes",
                    self.what,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        Ok(())
    }
}

/// Parses an IDX image file and its matching label file.
///
/// The returned dataset has placeholder class names `"0"`..`"9"`; callers
/// that know the benchmark replace them.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<RawDataset> {
    let mut img = Cursor {
        bytes: images,
        pos: 0,
        what: "image",
    };
    let magic = img.u32()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(
            0,
            format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = img.u32()? as usize;
    let rows = img.u32()? as usize;
    let cols = img.u32()? as usize;
    let pixels = img
        .take(
            count
                .checked_mul(rows * cols)
                .ok_or_else(|| Error::parse(4, "image dimensions overflow"))?,
        )?
        .to_vec();
    img.finish()?;

    let mut lab = Cursor {
        bytes: labels,
        pos: 0,
        what: "label",
    };
    let magic = lab.u32()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(
            0,
            format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n_labels = lab.u32()? as usize;
    if n_labels != count {
        return Err(Error::parse(
            4,
            format!("label file holds {n_labels} labels but image file holds {count} images"),
        ));
    }
    let label_bytes = lab.take(n_labels)?.to_vec();
    lab.finish()?;
    if let Some(i) = label_bytes.iter().position(|&l| l > 9) {
        return Err(Error::parse(
            8 + i as u64,
            format!("label {} outside 0..=9", label_bytes[i]),
        ));
    }

    Ok(RawDataset {
        name: String::new(),
        image_shape: vec![rows, cols],
        pixels,
        labels: label_bytes,
        class_names: (0..10).map(|i| i.to_string()).collect(),
    })
}

/// Serializes a two-dimensional-image dataset back to `(images, labels)`
/// IDX byte streams.
pub fn write_idx(raw: &RawDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let [rows, cols] = raw.image_shape[..] else {
        return Err(Error::shape(format!(
            "IDX images need a 2-d shape, got {:?}",
            raw.image_shape
        )));
    };
    let n = raw.len() as u32;
    let mut images = Vec::with_capacity(16 + raw.pixels.len());
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [n, rows as u32, cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend_from_slice(&raw.pixels);

    let mut labels = Vec::with_capacity(8 + raw.labels.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend_from_slice(&raw.labels);
    Ok((images, labels))
}
