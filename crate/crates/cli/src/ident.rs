//! Canonical identities: domain-separated seed derivation for experiment
//! cells, content digests for datasets, and protocol id strings. Every
//! random stream in a run hangs off the master seed through these, so a
//! results row is reproducible from the logged seed and plan alone.

use sha2::{Digest, Sha256};

use distlab_core::dataset::LabeledDataset;
use distlab_core::trainer::{FreezeDepth, TrainConfig};

/// Derive a sub-seed for a named role. The parts join into a canonical
/// string (`distlab-seed-v1|<master>|p1|p2|…`) that is hashed with SHA-256;
/// the first 8 bytes (little-endian) become the seed. Domain separation
/// keeps these streams disjoint from the per-image `derive_seed` chain.
pub fn seed_for(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"distlab-seed-v1|");
    hasher.update(master.to_string().as_bytes());
    for p in parts {
        hasher.update(b"|");
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Content digest of a dataset: geometry, class count, and CRC-32s of the
/// raw image and label bytes, hashed to a short hex id.
pub fn dataset_digest(ds: &LabeledDataset) -> String {
    let images_crc = crc32(ds.image_bytes());
    let labels_crc = crc32(ds.labels());
    let identity = format!(
        "distlab-dataset-v1|{}|{}x{}x{}|{}|{:08x}|{:08x}",
        ds.len(),
        ds.height,
        ds.width,
        ds.channels,
        ds.num_classes,
        images_crc,
        labels_crc
    );
    short_hex(identity.as_bytes())
}

/// Canonical string for a training protocol: every hyperparameter that
/// shapes the trajectory, excluding the seed (logged separately).
pub fn protocol_id(cfg: &TrainConfig) -> String {
    let bands: Vec<String> = cfg
        .schedule
        .iter()
        .map(|b| format!("{}-{}@{}", b.from_epoch, b.to_epoch, b.lr))
        .collect();
    let freeze = match cfg.freeze {
        FreezeDepth::All => "all".to_string(),
        FreezeDepth::FirstN(n) => format!("first-{n}"),
    };
    format!(
        "epochs={};bands={};batch={};momentum={};decay={};freeze={}",
        cfg.epochs,
        bands.join(","),
        cfg.batch_size,
        cfg.momentum,
        cfg.weight_decay,
        freeze
    )
}

/// First 16 hex characters of SHA-256 — the checkpoint/baseline cache key
/// size used throughout.
pub fn short_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn crc32(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(bytes);
    h.finalize()
}
