//! Reader for the big-endian IDX format used by MNIST and Fashion-MNIST.

use std::path::Path;

use super::{Dataset, Modality};
use crate::error::{IdxError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw decoded image file.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: (at + 4) as u64,
            actual: bytes.len() as u64,
        })
}

fn check_len(declared: u64, actual: usize) -> Result<(), IdxError> {
    let actual = actual as u64;
    if actual < declared {
        Err(IdxError::Truncated {
            needed: declared,
            actual,
        })
    } else if actual > declared {
        Err(IdxError::LengthMismatch { declared, actual })
    } else {
        Ok(())
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(bytes, 4)?;
    let rows = read_u32(bytes, 8)?;
    let cols = read_u32(bytes, 12)?;
    if rows == 0 || cols == 0 {
        return Err(IdxError::EmptyDimensions { rows, cols });
    }
    let declared = 16 + count as u64 * rows as u64 * cols as u64;
    check_len(declared, bytes.len())?;
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::WrongMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(bytes, 4)?;
    check_len(8 + count as u64, bytes.len())?;
    Ok(bytes[8..].to_vec())
}

/// Loads an image/label IDX pair, scaling pixels by 1/255.
///
/// Label names default to the decimal label ids; use
/// [`Dataset::with_label_names`] to attach real names.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        }
        .into());
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let names = (0..n_classes).map(|i| i.to_string()).collect();
    let samples = images.pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Dataset::new(
        samples,
        images.rows * images.cols,
        labels.into_iter().map(usize::from).collect(),
        names,
        Modality::Image {
            height: images.rows,
            width: images.cols,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn image_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        b.extend_from_slice(&count.to_be_bytes());
        b.extend_from_slice(&rows.to_be_bytes());
        b.extend_from_slice(&cols.to_be_bytes());
        b.extend_from_slice(pixels);
        b
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn hand_built_pair_round_trips_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        std::fs::write(&img, image_file(2, 2, 2, &[0, 255, 51, 102, 255, 0, 0, 255])).unwrap();
        std::fs::write(&lab, label_file(&[1, 0])).unwrap();
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.input_dim(), 4);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.sample(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.sample(1), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.modality(), &Modality::Image { height: 2, width: 2 });
    }

    #[test]
    fn labels_with_image_magic_are_rejected() {
        let mut bytes = label_file(&[0, 1]);
        bytes[3] = 0x03;
        assert_eq!(
            parse_idx_labels(&bytes).unwrap_err(),
            IdxError::WrongMagic {
                expected: LABELS_MAGIC,
                found: IMAGES_MAGIC
            }
        );
    }

    #[test]
    fn truncation_and_trailing_bytes_are_distinct_errors() {
        let good = image_file(1, 2, 2, &[1, 2, 3, 4]);
        assert!(matches!(
            parse_idx_images(&good[..18]),
            Err(IdxError::Truncated { needed: 20, actual: 18 })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(parse_idx_images(&long), Err(IdxError::LengthMismatch { .. })));
        assert!(matches!(parse_idx_images(&good[..10]), Err(IdxError::Truncated { .. })));
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        std::fs::write(&img, image_file(1, 1, 1, &[7])).unwrap();
        std::fs::write(&lab, label_file(&[0, 0])).unwrap();
        let err = load_idx(&img, &lab).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Idx(IdxError::CountMismatch { images: 1, labels: 2 })
        ));
    }

    #[test]
    fn every_single_byte_header_corruption_is_a_typed_error() {
        use rand::{Rng, SeedableRng};
        let pixels: Vec<u8> = (0..3 * 4 * 5).map(|i| i as u8).collect();
        let good = image_file(3, 4, 5, &pixels);
        assert!(parse_idx_images(&good).is_ok());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut bad = good.clone();
            let pos = rng.random_range(0..16);
            let old = bad[pos];
            let mut new = rng.random::<u8>();
            while new == old {
                new = rng.random::<u8>();
            }
            bad[pos] = new;
            assert!(parse_idx_images(&bad).is_err(), "byte {pos}: {old} -> {new} accepted");
        }
    }
}
