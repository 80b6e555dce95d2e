//! MNIST ingestion: IDX parsing, pixel normalization and class-balanced
//! subset sampling.
//!
//! Pixels are scaled by 1/255 into `[0, 1]` so that background is exactly 0.
//! All sampling goes through a caller-supplied RNG; with [`ChaCha8Rng`] the
//! drawn indices are identical across platforms.
//!
//! [`ChaCha8Rng`]: rand_chacha::ChaCha8Rng

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::seq::SliceRandom;
use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
pub const NUM_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    Magic { found: u32, expected: u32 },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("unsupported image dimensions {rows}x{cols}, expected 28x28")]
    Dimension { rows: usize, cols: usize },
    #[error("label byte {value} at position {index} is not a digit class")]
    Label { index: usize, value: u8 },
    #[error("class {class} has {available} eligible samples, {requested} requested")]
    Capacity {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    Mismatch { images: usize, labels: usize },
}

/// A single normalized 28×28 image, row-major.
pub type Image = [f64; PIXELS];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageSet {
    images: Vec<Image>,
}

impl ImageSet {
    pub fn new(images: Vec<Image>) -> Self {
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, index: usize) -> &Image {
        &self.images[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Image> {
        self.images.iter()
    }

    /// Encode back into IDX bytes. Pixels are rounded to the nearest byte.
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * PIXELS);
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&(SIDE as u32).to_be_bytes());
        out.extend_from_slice(&(SIDE as u32).to_be_bytes());
        for img in &self.images {
            out.extend(img.iter().map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<u8>,
}

impl LabelSet {
    /// Fails if any label is outside `0..=9`.
    pub fn new(labels: Vec<u8>) -> Result<Self, DataError> {
        if let Some((index, &value)) = labels
            .iter()
            .enumerate()
            .find(|&(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(DataError::Label { index, value });
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: usize) -> usize {
        self.labels[index] as usize
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// Positions into an image/label pair, balanced across the ten classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubsetIndices {
    pub indices: Vec<usize>,
    pub per_class: usize,
}

impl SubsetIndices {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_disjoint(&self, other: &SubsetIndices) -> bool {
        let set: HashSet<usize> = self.indices.iter().copied().collect();
        other.indices.iter().all(|i| !set.contains(i))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Length {
            expected: offset + 4,
            found: bytes.len(),
        })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::Magic {
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(DataError::Dimension { rows, cols });
    }
    let payload = &bytes[16..];
    let expected = count * PIXELS;
    if payload.len() < expected {
        return Err(DataError::Length {
            expected: 16 + expected,
            found: bytes.len(),
        });
    }
    let images = payload[..expected]
        .chunks_exact(PIXELS)
        .map(|chunk| {
            let mut img = [0.0; PIXELS];
            for (dst, &src) in img.iter_mut().zip(chunk) {
                *dst = f64::from(src) / 255.0;
            }
            img
        })
        .collect();
    Ok(ImageSet { images })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::Magic {
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(DataError::Length {
            expected: 8 + count,
            found: bytes.len(),
        });
    }
    LabelSet::new(payload[..count].to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<ImageSet, DataError> {
    parse_idx_images(&read_file(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<LabelSet, DataError> {
    parse_idx_labels(&read_file(path.as_ref())?)
}

pub fn write_idx(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Paired images and labels.
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub images: ImageSet,
    pub labels: LabelSet,
}

impl Split {
    pub fn new(images: ImageSet, labels: LabelSet) -> Result<Self, DataError> {
        if images.len() != labels.len() {
            return Err(DataError::Mismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn load(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::new(load_idx_images(images)?, load_idx_labels(labels)?)
    }
}

/// The official training and test splits.
#[derive(Debug, Clone, Default)]
pub struct Mnist {
    pub train: Split,
    pub test: Split,
}

impl Mnist {
    /// Loads the four uncompressed IDX files from `dir` using their official names.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let dir = dir.as_ref();
        Ok(Self {
            train: Split::load(dir.join(TRAIN_IMAGES), dir.join(TRAIN_LABELS))?,
            test: Split::load(dir.join(TEST_IMAGES), dir.join(TEST_LABELS))?,
        })
    }
}

/// Draws `per_class` indices from each class uniformly without replacement.
pub fn sample_balanced<R: Rng + ?Sized>(
    labels: &LabelSet,
    per_class: usize,
    rng: &mut R,
) -> Result<SubsetIndices, DataError> {
    disjoint_sample(labels, per_class, &SubsetIndices::default(), rng)
}

/// Like [`sample_balanced`], restricted to indices not in `exclude`.
///
/// Classes are drawn in order 0..9 with a partial Fisher-Yates shuffle over
/// each class's eligible pool (file order). The result is sorted ascending.
pub fn disjoint_sample<R: Rng + ?Sized>(
    labels: &LabelSet,
    per_class: usize,
    exclude: &SubsetIndices,
    rng: &mut R,
) -> Result<SubsetIndices, DataError> {
    let excluded: HashSet<usize> = exclude.indices.iter().copied().collect();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        if !excluded.contains(&i) {
            pools[l as usize].push(i);
        }
    }
    if let Some((class, pool)) = pools.iter().enumerate().find(|(_, p)| p.len() < per_class) {
        return Err(DataError::Capacity {
            class,
            available: pool.len(),
            requested: per_class,
        });
    }
    let mut indices = Vec::with_capacity(per_class * NUM_CLASSES);
    for pool in &mut pools {
        let (chosen, _) = pool.partial_shuffle(rng, per_class);
        indices.extend_from_slice(chosen);
    }
    indices.sort_unstable();
    Ok(SubsetIndices { indices, per_class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    fn toy_labels(per_class: usize) -> LabelSet {
        LabelSet::new((0..per_class * 10).map(|i| (i % 10) as u8).collect()).unwrap()
    }

    #[test]
    fn empty_image_file() {
        let set = parse_idx_images(&header(IMAGE_MAGIC, &[0, 28, 28])).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn wrong_image_magic() {
        let err = parse_idx_images(&header(LABEL_MAGIC, &[0, 28, 28])).unwrap_err();
        assert!(matches!(err, DataError::Magic { .. }));
    }

    #[test]
    fn wrong_dimensions() {
        let err = parse_idx_images(&header(IMAGE_MAGIC, &[0, 32, 28])).unwrap_err();
        assert!(matches!(err, DataError::Dimension { rows: 32, cols: 28 }));
    }

    #[test]
    fn truncated_images() {
        let mut bytes = header(IMAGE_MAGIC, &[2, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, PIXELS + 10));
        assert!(matches!(
            parse_idx_images(&bytes).unwrap_err(),
            DataError::Length { .. }
        ));
        assert!(matches!(
            parse_idx_images(&[0, 0, 8]).unwrap_err(),
            DataError::Length { .. }
        ));
    }

    #[test]
    fn pixels_scaled() {
        let mut bytes = header(IMAGE_MAGIC, &[1, 28, 28]);
        bytes.extend((0..PIXELS).map(|i| if i == 3 { 255 } else { 51 }));
        let set = parse_idx_images(&bytes).unwrap();
        assert_eq!(set.get(0)[3], 1.0);
        assert_eq!(set.get(0)[0], 0.2);
    }

    #[test]
    fn singleton_label() {
        let mut bytes = header(LABEL_MAGIC, &[1]);
        bytes.push(7);
        assert_eq!(parse_idx_labels(&bytes).unwrap().as_slice(), &[7]);
    }

    #[test]
    fn out_of_range_label() {
        let mut bytes = header(LABEL_MAGIC, &[1]);
        bytes.push(12);
        assert!(matches!(
            parse_idx_labels(&bytes).unwrap_err(),
            DataError::Label { index: 0, value: 12 }
        ));
    }

    #[test]
    fn truncated_labels() {
        let mut bytes = header(LABEL_MAGIC, &[3]);
        bytes.push(1);
        assert!(matches!(
            parse_idx_labels(&bytes).unwrap_err(),
            DataError::Length { .. }
        ));
    }

    #[test]
    fn zero_per_class_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_balanced(&toy_labels(5), 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn underpopulated_class() {
        let mut labels: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
        labels.retain(|&l| l != 4);
        labels.push(4);
        let labels = LabelSet::new(labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = sample_balanced(&labels, 2, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::Capacity { class: 4, available: 1, .. }));
    }

    #[test]
    fn exclusion_of_a_whole_class() {
        let labels = toy_labels(5);
        let exclude = SubsetIndices {
            indices: (0..labels.len()).filter(|&i| labels.get(i) == 3).collect(),
            per_class: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let err = disjoint_sample(&labels, 1, &exclude, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::Capacity { class: 3, available: 0, .. }));
    }

    #[test]
    fn disjoint_with_empty_exclude_matches_balanced() {
        let labels = toy_labels(20);
        let a = sample_balanced(&labels, 1, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = disjoint_sample(
            &labels,
            1,
            &SubsetIndices::default(),
            &mut ChaCha8Rng::seed_from_u64(77),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disjoint_respects_exclusion() {
        let labels = toy_labels(40);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let first = sample_balanced(&labels, 10, &mut rng).unwrap();
        let second = disjoint_sample(&labels, 30, &first, &mut rng).unwrap();
        assert_eq!(second.len(), 300);
        assert!(first.is_disjoint(&second));
    }
}
