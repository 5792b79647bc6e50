//! IDX image/label loading and writing.
//!
//! Big-endian magics: `0x00000803` for image files (count x height x width
//! of unsigned bytes) and `0x00000801` for label files. Paths ending in
//! `.gz` are transparently gunzipped on read and gzipped on write.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use nn_core::Matrix;

use crate::{io_err, DataError, Dataset};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn open_reader(path: &Path) -> Result<Box<dyn Read>, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let buffered = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(buffered)))
    } else {
        Ok(Box::new(buffered))
    }
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>, DataError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let buffered = BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(buffered, flate2::Compression::default())))
    } else {
        Ok(Box::new(buffered))
    }
}

fn read_u32_be(reader: &mut dyn Read, path: &Path) -> Result<u32, DataError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
    Ok(u32::from_be_bytes(buf))
}

fn read_images(path: &Path) -> Result<(Vec<u8>, usize, usize), DataError> {
    let mut reader = open_reader(path)?;
    let magic = read_u32_be(reader.as_mut(), path)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::IdxMagic {
            path: path.display().to_string(),
            expected: IMAGE_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(reader.as_mut(), path)? as usize;
    let height = read_u32_be(reader.as_mut(), path)? as usize;
    let width = read_u32_be(reader.as_mut(), path)? as usize;
    let mut pixels = vec![0u8; count * height * width];
    reader.read_exact(&mut pixels).map_err(|e| io_err(path, e))?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| io_err(path, e))? != 0 {
        return Err(DataError::Format {
            path: path.display().to_string(),
            detail: "trailing bytes after image data".into(),
        });
    }
    Ok((pixels, count, height * width))
}

fn read_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut reader = open_reader(path)?;
    let magic = read_u32_be(reader.as_mut(), path)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::IdxMagic {
            path: path.display().to_string(),
            expected: LABEL_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(reader.as_mut(), path)? as usize;
    let mut labels = vec![0u8; count];
    reader.read_exact(&mut labels).map_err(|e| io_err(path, e))?;
    Ok(labels)
}

/// Loads an IDX image/label pair as a dataset with no split assignments.
///
/// Pixels are scaled to `[0, 1]` by dividing by 255. The class count is the
/// highest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let (pixels, count, row_width) = read_images(images_path)?;
    let labels_raw = read_labels(labels_path)?;
    if labels_raw.len() != count {
        return Err(DataError::Format {
            path: labels_path.display().to_string(),
            detail: format!("{} labels for {} images", labels_raw.len(), count),
        });
    }
    if count == 0 {
        return Err(DataError::EmptyDataset);
    }
    let data: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let features = Matrix::from_vec(count, row_width, data)?;
    let labels: Vec<usize> = labels_raw.iter().map(|&l| l as usize).collect();
    let class_count = labels.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(features, labels, class_count)
}

/// Writes raw image bytes (`count * height * width` of them) as an IDX file.
pub fn write_idx_images(
    path: &Path,
    pixels: &[u8],
    count: usize,
    height: usize,
    width: usize,
) -> Result<(), DataError> {
    if pixels.len() != count * height * width {
        return Err(DataError::InvalidParameter(format!(
            "{} pixels do not fill {count} images of {height}x{width}",
            pixels.len()
        )));
    }
    let mut writer = open_writer(path)?;
    let mut fallible = || -> std::io::Result<()> {
        writer.write_all(&IMAGE_MAGIC.to_be_bytes())?;
        writer.write_all(&(count as u32).to_be_bytes())?;
        writer.write_all(&(height as u32).to_be_bytes())?;
        writer.write_all(&(width as u32).to_be_bytes())?;
        writer.write_all(pixels)?;
        writer.flush()
    };
    fallible().map_err(|e| io_err(path, e))
}

/// Writes labels as an IDX file.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), DataError> {
    let mut writer = open_writer(path)?;
    let mut fallible = || -> std::io::Result<()> {
        writer.write_all(&LABEL_MAGIC.to_be_bytes())?;
        writer.write_all(&(labels.len() as u32).to_be_bytes())?;
        writer.write_all(labels)?;
        writer.flush()
    };
    fallible().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &Path, gz: bool) -> (std::path::PathBuf, std::path::PathBuf) {
        let suffix = if gz { ".gz" } else { "" };
        let images = dir.join(format!("images-idx3-ubyte{suffix}"));
        let labels = dir.join(format!("labels-idx1-ubyte{suffix}"));
        // Two 2x2 images: [0, 51, 102, 153] and [204, 255, 0, 255].
        write_idx_images(&images, &[0, 51, 102, 153, 204, 255, 0, 255], 2, 2, 2).unwrap();
        write_idx_labels(&labels, &[1, 0]).unwrap();
        (images, labels)
    }

    #[test]
    fn round_trips_a_synthetic_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = write_pair(dir.path(), false);
        let ds = load_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.features.cols(), 4);
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.class_count, 2);
        assert!((ds.features.get(0, 1) - 51.0 / 255.0).abs() < 1e-15);
        assert_eq!(ds.features.get(1, 1), 1.0);
        assert_eq!(ds.features.get(1, 2), 0.0);
    }

    #[test]
    fn gzip_round_trip_matches_plain() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = write_pair(dir.path(), false);
        let (images_gz, labels_gz) = write_pair(dir.path(), true);
        let plain = load_idx(&images, &labels).unwrap();
        let zipped = load_idx(&images_gz, &labels_gz).unwrap();
        assert_eq!(plain.features.data(), zipped.features.data());
        assert_eq!(plain.labels, zipped.labels);
        assert_eq!(plain.checksum(), zipped.checksum());
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = write_pair(dir.path(), false);
        // Image file offered where labels belong and vice versa.
        assert!(matches!(
            load_idx(&labels, &images),
            Err(DataError::IdxMagic { .. })
        ));
    }

    #[test]
    fn rejects_truncated_images() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = write_pair(dir.path(), false);
        let bytes = std::fs::read(&images).unwrap();
        let truncated = dir.path().join("trunc-idx3-ubyte");
        std::fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_idx(&truncated, &labels), Err(DataError::Io { .. })));
    }

    #[test]
    fn rejects_label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (images, _) = write_pair(dir.path(), false);
        let labels = dir.path().join("short-idx1-ubyte");
        write_idx_labels(&labels, &[1]).unwrap();
        assert!(matches!(load_idx(&images, &labels), Err(DataError::Format { .. })));
    }
}
