//! Dataset loading and the distorted-dataset store.
//!
//! Reads the two classic image-classification formats byte-exactly — the
//! big-endian IDX format (MNIST) and the 3073-byte-record CIFAR-10 binary
//! format — and persists distorted copies with a flat-text manifest carrying
//! the distortion parameters, seed, and CRC-32 payload checksums.
//!
//! Pixels stay `u8` end to end; conversion to real values is the trainer's
//! job. Images are stored channel-planar: pixel `(c, y, x)` lives at
//! `c·H·W + y·W + x`, matching the CIFAR-10 binary layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::distortion::DistortionSpec;
use crate::error::{DatasetError, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 3073;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// An in-memory labeled image dataset with uniform geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub num_classes: usize,
    /// `len() × height·width·channels` bytes, channel-planar per image.
    images: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        height: usize,
        width: usize,
        channels: usize,
        num_classes: usize,
        images: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<LabeledDataset> {
        let image_len = height * width * channels;
        if image_len == 0 || !images.len().is_multiple_of(image_len) {
            return Err(DatasetError::RaggedFile {
                path: PathBuf::from("<memory>"),
                len: images.len(),
                record: image_len,
            }
            .into());
        }
        let count = images.len() / image_len;
        if count != labels.len() {
            return Err(DatasetError::CountMismatch {
                images: count,
                labels: labels.len(),
            }
            .into());
        }
        for (index, &label) in labels.iter().enumerate() {
            if label as usize >= num_classes {
                return Err(DatasetError::BadLabel {
                    label,
                    num_classes,
                    index,
                }
                .into());
            }
        }
        Ok(LabeledDataset {
            name: name.into(),
            height,
            width,
            channels,
            num_classes,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Bytes per image: `height · width · channels`.
    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.image_len();
        &self.images[i * len..(i + 1) * len]
    }

    pub fn image_mut(&mut self, i: usize) -> &mut [u8] {
        let len = self.image_len();
        &mut self.images[i * len..(i + 1) * len]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image_bytes(&self) -> &[u8] {
        &self.images
    }

    /// New dataset holding the given rows (indices may repeat or reorder).
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let len = self.image_len();
        let mut images = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            name: self.name.clone(),
            height: self.height,
            width: self.width,
            channels: self.channels,
            num_classes: self.num_classes,
            images,
            labels,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path, what: &'static str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            what,
            need: end,
            have: bytes.len(),
        }
        .into());
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse one IDX image file (magic 0x00000803) into raw rasters.
fn parse_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, path, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        }
        .into());
    }
    let count = be_u32(&bytes, 4, path, "image count")? as usize;
    let height = be_u32(&bytes, 8, path, "height")? as usize;
    let width = be_u32(&bytes, 12, path, "width")? as usize;
    let need = 16 + count * height * width;
    if bytes.len() < need {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            what: "pixel data",
            need,
            have: bytes.len(),
        }
        .into());
    }
    Ok((count, height, width, bytes[16..need].to_vec()))
}

/// Parse one IDX label file (magic 0x00000801).
fn parse_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, path, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        }
        .into());
    }
    let count = be_u32(&bytes, 4, path, "label count")? as usize;
    let need = 8 + count;
    if bytes.len() < need {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            what: "label data",
            need,
            have: bytes.len(),
        }
        .into());
    }
    Ok(bytes[8..need].to_vec())
}

/// Load an MNIST split from a directory holding the four canonical IDX files
/// (`train-images-idx3-ubyte`, `train-labels-idx1-ubyte`, `t10k-...`).
pub fn load_mnist(dir: &Path, split: Split) -> Result<LabeledDataset> {
    let (images_name, labels_name) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    let (count, height, width, images) = parse_idx_images(&dir.join(images_name))?;
    let labels = parse_idx_labels(&dir.join(labels_name))?;
    if count != labels.len() {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: labels.len(),
        }
        .into());
    }
    LabeledDataset::new(
        format!("mnist-{}", split.as_str()),
        height,
        width,
        1,
        10,
        images,
        labels,
    )
}

/// Load a CIFAR-10 split from a directory holding the canonical binary
/// batches (`data_batch_1.bin` … `data_batch_5.bin`, `test_batch.bin`).
pub fn load_cifar10(dir: &Path, split: Split) -> Result<LabeledDataset> {
    let files: Vec<PathBuf> = match split {
        Split::Train => (1..=5)
            .map(|i| dir.join(format!("data_batch_{i}.bin")))
            .collect(),
        Split::Test => vec![dir.join("test_batch.bin")],
    };
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in &files {
        let bytes = read_file(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(DatasetError::RaggedFile {
                path: path.clone(),
                len: bytes.len(),
                record: CIFAR_RECORD,
            }
            .into());
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(record[0]);
            images.extend_from_slice(&record[1..]);
        }
    }
    LabeledDataset::new(
        format!("cifar10-{}", split.as_str()),
        32,
        32,
        3,
        10,
        images,
        labels,
    )
}

/// Flat UTF-8 `key = value` manifest, written with sorted keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest(pub BTreeMap<String, String>);

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            DatasetError::BadManifest {
                path: path.to_path_buf(),
                detail: format!("missing key {key:?}"),
            }
            .into()
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Manifest> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DatasetError::BadManifest {
                    path: path.to_path_buf(),
                    detail: format!("line {}: expected `key = value`, got {line:?}", lineno + 1),
                })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Manifest(map))
    }
}

/// Write a distorted dataset to `dir` as `images.bin` + `labels.bin` +
/// `manifest.txt`. The manifest records geometry, the distortion spec, the
/// master seed, and CRC-32 checksums of both payloads.
pub fn save_distorted(
    dir: &Path,
    dataset: &LabeledDataset,
    spec: &DistortionSpec,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("images.bin"), &dataset.images)?;
    fs::write(dir.join("labels.bin"), &dataset.labels)?;

    let mut m = Manifest::default();
    m.set("format", "distlab-distorted-v1");
    m.set("name", &dataset.name);
    m.set("height", dataset.height);
    m.set("width", dataset.width);
    m.set("channels", dataset.channels);
    m.set("num_classes", dataset.num_classes);
    m.set("count", dataset.len());
    m.set("seed", seed);
    m.set(
        "images_crc32",
        format!("{:08x}", crc32fast::hash(&dataset.images)),
    );
    m.set(
        "labels_crc32",
        format!("{:08x}", crc32fast::hash(&dataset.labels)),
    );
    spec.write_manifest(&mut m);
    fs::write(dir.join("manifest.txt"), m.to_text())?;
    Ok(())
}

/// Load a distorted dataset written by [`save_distorted`], verifying payload
/// checksums and counts against the manifest.
pub fn load_distorted(dir: &Path) -> Result<(LabeledDataset, DistortionSpec, u64)> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|source| DatasetError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    let m = Manifest::parse(&text, &manifest_path)?;

    let format = m.require("format", &manifest_path)?;
    if format != "distlab-distorted-v1" {
        return Err(DatasetError::BadManifest {
            path: manifest_path.clone(),
            detail: format!("unsupported format {format:?}"),
        }
        .into());
    }

    let get_usize = |key: &str| -> Result<usize> {
        let raw = m.require(key, &manifest_path)?;
        raw.parse().map_err(|_| {
            DatasetError::BadManifest {
                path: manifest_path.clone(),
                detail: format!("key {key:?}: expected integer, got {raw:?}"),
            }
            .into()
        })
    };
    let height = get_usize("height")?;
    let width = get_usize("width")?;
    let channels = get_usize("channels")?;
    let num_classes = get_usize("num_classes")?;
    let count = get_usize("count")?;
    let seed: u64 =
        m.require("seed", &manifest_path)?
            .parse()
            .map_err(|_| DatasetError::BadManifest {
                path: manifest_path.clone(),
                detail: "key \"seed\": expected integer".into(),
            })?;

    let images_path = dir.join("images.bin");
    let images = read_file(&images_path)?;
    let labels_path = dir.join("labels.bin");
    let labels = read_file(&labels_path)?;

    for (what, path, payload, key) in [
        ("images", &images_path, &images, "images_crc32"),
        ("labels", &labels_path, &labels, "labels_crc32"),
    ] {
        let expected = u32::from_str_radix(m.require(key, &manifest_path)?, 16).map_err(|_| {
            DatasetError::BadManifest {
                path: manifest_path.clone(),
                detail: format!("key {key:?}: expected hex checksum"),
            }
        })?;
        let found = crc32fast::hash(payload);
        if expected != found {
            return Err(DatasetError::ChecksumMismatch {
                path: path.clone(),
                what,
                expected,
                found,
            }
            .into());
        }
    }

    if labels.len() != count || images.len() != count * height * width * channels {
        return Err(DatasetError::BadManifest {
            path: manifest_path.clone(),
            detail: format!(
                "manifest count {count} does not match payloads ({} image bytes, {} labels)",
                images.len(),
                labels.len()
            ),
        }
        .into());
    }

    let name = m.require("name", &manifest_path)?.to_string();
    let spec = DistortionSpec::read_manifest(&m, &manifest_path)?;
    let ds = LabeledDataset::new(name, height, width, channels, num_classes, images, labels)?;
    Ok((ds, spec, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Build a tiny valid IDX pair in a tempdir.
    fn write_idx(dir: &Path) {
        // Two 2x2 images with pixels 0..8, labels 1 and 3.
        let mut images = Vec::new();
        images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&[0, 1, 2, 3, 4, 5, 6, 7]);
        fs::write(dir.join("train-images-idx3-ubyte"), &images).unwrap();

        let mut labels = Vec::new();
        labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend_from_slice(&2u32.to_be_bytes());
        labels.extend_from_slice(&[1, 3]);
        fs::write(dir.join("train-labels-idx1-ubyte"), &labels).unwrap();
    }

    #[test]
    fn idx_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path());
        let ds = load_mnist(dir.path(), Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!((ds.height, ds.width, ds.channels), (2, 2, 1));
        assert_eq!(ds.image(0), &[0, 1, 2, 3]);
        assert_eq!(ds.image(1), &[4, 5, 6, 7]);
        assert_eq!(ds.labels(), &[1, 3]);
    }

    #[test]
    fn idx_bad_magic_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path());
        let path = dir.path().join("train-images-idx3-ubyte");
        let mut bytes = fs::read(&path).unwrap();
        bytes[3] = 0x42;
        fs::write(&path, bytes).unwrap();
        let err = load_mnist(dir.path(), Split::Train).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn idx_every_truncation_errors_never_panics() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path());
        let path = dir.path().join("train-images-idx3-ubyte");
        let full = fs::read(&path).unwrap();
        for cut in 0..full.len() {
            fs::write(&path, &full[..cut]).unwrap();
            assert!(
                load_mnist(dir.path(), Split::Train).is_err(),
                "prefix of {cut} bytes must be rejected"
            );
        }
    }

    #[test]
    fn cifar_records_parse_channel_planar() {
        let dir = tempfile::tempdir().unwrap();
        // One record: label 7, R plane all 1, G plane all 2, B plane all 3.
        let mut record = vec![7u8];
        record.extend(std::iter::repeat_n(1, 1024));
        record.extend(std::iter::repeat_n(2, 1024));
        record.extend(std::iter::repeat_n(3, 1024));
        fs::write(dir.path().join("test_batch.bin"), &record).unwrap();
        let ds = load_cifar10(dir.path(), Split::Test).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label(0), 7);
        let img = ds.image(0);
        assert_eq!(img[0], 1); // R plane first
        assert_eq!(img[1024], 2);
        assert_eq!(img[2048], 3);
    }

    #[test]
    fn cifar_ragged_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("test_batch.bin"),
            vec![0u8; CIFAR_RECORD + 1],
        )
        .unwrap();
        assert!(load_cifar10(dir.path(), Split::Test).is_err());
    }

    #[test]
    fn cifar_bad_label_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut record = vec![10u8]; // labels are 0..=9
        record.extend(std::iter::repeat_n(0, 3072));
        fs::write(dir.path().join("test_batch.bin"), &record).unwrap();
        assert!(load_cifar10(dir.path(), Split::Test).is_err());
    }

    #[test]
    fn subset_copies_rows() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path());
        let ds = load_mnist(dir.path(), Split::Train).unwrap();
        let sub = ds.subset(&[1]);
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.image(0), &[4, 5, 6, 7]);
        assert_eq!(sub.label(0), 3);
    }

    #[test]
    fn manifest_text_roundtrip() {
        let mut m = Manifest::default();
        m.set("b", 2);
        m.set("a", "hello");
        let text = m.to_text();
        assert_eq!(text, "a = hello\nb = 2\n");
        let parsed = Manifest::parse(&text, Path::new("x")).unwrap();
        assert_eq!(parsed, m);
    }
}
