//! IDX (MNIST-style) image and label files. All header integers are
//! big-endian `u32`; payloads are unsigned bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, field: &'static str, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            field,
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| {
            self.err(
                field,
                self.pos,
                format!("need 4 bytes, file has {}", self.bytes.len()),
            )
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
    }

    fn payload(&mut self, field: &'static str, len: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(self.err(
                field,
                self.pos,
                format!("truncated payload: expected {len} bytes, found {available}"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn expect_magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32("magic")?;
        if magic != expected {
            return Err(self.err(
                "magic",
                0,
                format!("expected {expected:#010x}, found {magic:#010x}"),
            ));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Decoded image file: `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    r.expect_magic(IMAGES_MAGIC)?;
    let count = r.u32("item_count")? as usize;
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let pixels = r.payload("pixels", count * rows * cols)?.to_vec();
    Ok((count, rows, cols, pixels))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    r.expect_magic(LABELS_MAGIC)?;
    let count = r.u32("item_count")? as usize;
    Ok(r.payload("labels", count)?.to_vec())
}

/// Load an image/label file pair. Pixels are scaled by 1/255; the class
/// count is the largest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (count, rows, cols, pixels) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if labels.len() != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            field: "item_count",
            offset: 4,
            message: format!(
                "{} labels but {} images in {}",
                labels.len(),
                count,
                images_path.display()
            ),
        });
    }
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(features, rows * cols, labels, num_classes)
}

/// Write a dataset as an IDX pair with images shaped `rows x cols`. Features
/// are quantized to `round(255 v)`.
pub fn write_idx(
    ds: &Dataset,
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if rows * cols != ds.input_dim() {
        return Err(Error::Dimension {
            context: "IDX image shape",
            expected: ds.input_dim(),
            actual: rows * cols,
        });
    }
    if ds.num_classes() > 256 {
        return Err(Error::config(
            "num_classes",
            "IDX labels are single bytes; at most 256 classes",
        ));
    }
    let to_u32 = |v: usize, key: &str| {
        u32::try_from(v).map_err(|_| Error::config(key, "does not fit in a u32 header field"))
    };

    let mut images = Vec::with_capacity(16 + ds.features().len());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&to_u32(ds.len(), "item_count")?.to_be_bytes());
    images.extend_from_slice(&to_u32(rows, "rows")?.to_be_bytes());
    images.extend_from_slice(&to_u32(cols, "cols")?.to_be_bytes());
    images.extend(
        ds.features()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );

    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&to_u32(ds.len(), "item_count")?.to_be_bytes());
    labels.extend(ds.labels().iter().map(|&y| y as u8));

    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}
