//! Clean-baseline artifacts: a trained checkpoint plus a manifest binding
//! it to the exact architecture, protocol, dataset contents, and seed that
//! produced it. Consumers recompute the binding key before trusting the
//! checkpoint, so a stale or foreign baseline can never be reused silently.

use std::path::{Path, PathBuf};

use distlab_core::checkpoint::{load_checkpoint_into, save_checkpoint};
use distlab_core::dataset::{LabeledDataset, Manifest};
use distlab_core::diagnostics::sample_indices;
use distlab_core::models::{build_model, ModelGraph};
use distlab_core::trainer::{Preprocess, RunMetrics, TrainConfig};

use crate::error::{CliError, Result};
use crate::ident::{dataset_digest, protocol_id, seed_for, short_hex};

pub const CHECKPOINT_FILE: &str = "checkpoint.dbck";
pub const MANIFEST_FILE: &str = "baseline.txt";
pub const METRICS_FILE: &str = "metrics.csv";

/// Everything `baseline.txt` records about a trained clean model.
#[derive(Debug, Clone)]
pub struct BaselineInfo {
    pub arch: String,
    pub dataset: String,
    /// `standard` or `reduced` — which protocol family trained it and must
    /// be used alongside it.
    pub protocol_family: String,
    /// Canonical id of the exact training config.
    pub protocol: String,
    pub seed: u64,
    /// 0 means the full training split.
    pub train_subset: usize,
    pub test_error: f64,
    pub epochs: usize,
    /// Binding key over (arch, protocol, dataset digests, seed, subset).
    pub key: String,
}

impl BaselineInfo {
    pub fn compute_key(
        arch: &str,
        protocol: &str,
        train_digest: &str,
        test_digest: &str,
        seed: u64,
        train_subset: usize,
    ) -> String {
        short_hex(
            format!(
                "distlab-baseline-v1|{arch}|{protocol}|{train_digest}|{test_digest}|{seed}|{train_subset}"
            )
            .as_bytes(),
        )
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::default();
        m.set("format", "distlab-baseline-v1");
        m.set("arch", &self.arch);
        m.set("dataset", &self.dataset);
        m.set("protocol_family", &self.protocol_family);
        m.set("protocol", &self.protocol);
        m.set("seed", self.seed);
        m.set("train_subset", self.train_subset);
        m.set("test_error", format!("{:.6}", self.test_error));
        m.set("epochs", self.epochs);
        m.set("key", &self.key);
        m
    }

    pub fn from_manifest(m: &Manifest, path: &Path) -> Result<BaselineInfo> {
        let req = |k: &str| -> Result<String> { Ok(m.require(k, path)?.to_string()) };
        let format = req("format")?;
        if format != "distlab-baseline-v1" {
            return Err(CliError::data(format!(
                "{}: unknown baseline format {format:?}",
                path.display()
            )));
        }
        let parse_u64 = |k: &str| -> Result<u64> {
            req(k)?.parse().map_err(|_| {
                CliError::data(format!("{}: field {k} is not an integer", path.display()))
            })
        };
        let parse_f64 = |k: &str| -> Result<f64> {
            req(k)?.parse().map_err(|_| {
                CliError::data(format!("{}: field {k} is not a number", path.display()))
            })
        };
        Ok(BaselineInfo {
            arch: req("arch")?,
            dataset: req("dataset")?,
            protocol_family: req("protocol_family")?,
            protocol: req("protocol")?,
            seed: parse_u64("seed")?,
            train_subset: parse_u64("train_subset")? as usize,
            test_error: parse_f64("test_error")?,
            epochs: parse_u64("epochs")? as usize,
            key: req("key")?,
        })
    }
}

/// A baseline directory loaded back from disk, with the weights restored
/// into a freshly built model.
pub struct LoadedBaseline {
    pub info: BaselineInfo,
    pub model: ModelGraph,
    pub dir: PathBuf,
}

/// The training subset a baseline (and everything comparing against it)
/// uses: a seeded sample of the full training split, or all of it.
pub fn baseline_subset_indices(train_len: usize, subset: usize, seed: u64) -> Vec<usize> {
    if subset == 0 {
        (0..train_len).collect()
    } else {
        sample_indices(train_len, subset, seed_for(seed, &["baseline-subset"]))
    }
}

/// Write the three baseline artifacts.
pub fn save_baseline(
    dir: &Path,
    info: &BaselineInfo,
    model: &ModelGraph,
    metrics: &RunMetrics,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &model.slots)?;
    std::fs::write(dir.join(MANIFEST_FILE), info.to_manifest().to_text())?;
    std::fs::write(dir.join(METRICS_FILE), metrics.to_csv())?;
    Ok(())
}

/// Load a baseline directory and verify its binding key against the data
/// the caller is about to use it with.
pub fn load_baseline(
    dir: &Path,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<LoadedBaseline> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    if !manifest_path.is_file() || !checkpoint_path.is_file() {
        return Err(CliError::missing_baseline(format!(
            "no baseline at {} (expected {MANIFEST_FILE} and {CHECKPOINT_FILE}); \
             run `distlab baseline --dataset <name> --data-dir <dir> --out {}` first",
            dir.display(),
            dir.display()
        )));
    }
    let text = std::fs::read_to_string(&manifest_path)?;
    let info =
        BaselineInfo::from_manifest(&Manifest::parse(&text, &manifest_path)?, &manifest_path)?;

    let expected = BaselineInfo::compute_key(
        &info.arch,
        &info.protocol,
        &dataset_digest(train),
        &dataset_digest(test),
        info.seed,
        info.train_subset,
    );
    if expected != info.key {
        return Err(CliError::baseline_mismatch(format!(
            "baseline at {} was trained against different data or settings \
             (stored key {}, recomputed {expected}); re-run `distlab baseline`",
            dir.display(),
            info.key
        )));
    }

    let mut model = build_model(&info.arch, 0).map_err(CliError::from)?;
    load_checkpoint_into(&checkpoint_path, &mut model.slots)?;
    Ok(LoadedBaseline {
        info,
        model,
        dir: dir.to_path_buf(),
    })
}

/// Rebuild the preprocessing (train-mean image) the baseline trained with.
pub fn baseline_preprocess(
    info: &BaselineInfo,
    train: &LabeledDataset,
) -> Result<(Preprocess, LabeledDataset)> {
    let indices = baseline_subset_indices(train.len(), info.train_subset, info.seed);
    let subset = train.subset(&indices);
    let pre = Preprocess::fit(&subset)?;
    Ok((pre, subset))
}

/// Canonical ids used when creating a baseline.
#[allow(clippy::too_many_arguments)]
pub fn make_info(
    arch: &str,
    dataset: &str,
    protocol_family: &str,
    cfg: &TrainConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
    train_subset: usize,
    test_error: f64,
) -> BaselineInfo {
    let protocol = protocol_id(cfg);
    let key = BaselineInfo::compute_key(
        arch,
        &protocol,
        &dataset_digest(train),
        &dataset_digest(test),
        seed,
        train_subset,
    );
    BaselineInfo {
        arch: arch.to_string(),
        dataset: dataset.to_string(),
        protocol_family: protocol_family.to_string(),
        protocol,
        seed,
        train_subset,
        test_error,
        epochs: cfg.epochs,
        key,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use distlab_core::trainer::mnist_retrain;

    fn toy_dataset(seed: u8) -> LabeledDataset {
        let images: Vec<u8> = (0..2 * 4)
            .map(|i| (i as u8).wrapping_mul(7).wrapping_add(seed))
            .collect();
        LabeledDataset::new("toy", 2, 2, 1, 2, images, vec![0, 1]).unwrap()
    }

    #[test]
    fn manifest_roundtrip_preserves_every_field() {
        let train = toy_dataset(1);
        let test = toy_dataset(2);
        let cfg = mnist_retrain(5);
        let info = make_info(
            "lenet5", "mnist", "standard", &cfg, &train, &test, 5, 100, 0.0123,
        );
        let m = info.to_manifest();
        let back = BaselineInfo::from_manifest(&m, Path::new("x")).unwrap();
        assert_eq!(back.arch, info.arch);
        assert_eq!(back.protocol, info.protocol);
        assert_eq!(back.seed, info.seed);
        assert_eq!(back.train_subset, info.train_subset);
        assert_eq!(back.test_error, 0.0123);
        assert_eq!(back.epochs, 20);
        assert_eq!(back.key, info.key);
    }

    #[test]
    fn key_tracks_data_and_settings() {
        let train = toy_dataset(1);
        let test = toy_dataset(2);
        let k = |tr: &LabeledDataset, te: &LabeledDataset, seed, subset| {
            BaselineInfo::compute_key(
                "lenet5",
                "proto",
                &dataset_digest(tr),
                &dataset_digest(te),
                seed,
                subset,
            )
        };
        let base = k(&train, &test, 5, 0);
        assert_eq!(base, k(&train, &test, 5, 0));
        assert_ne!(base, k(&test, &train, 5, 0), "swapped data must change key");
        assert_ne!(base, k(&train, &test, 6, 0), "seed must change key");
        assert_ne!(base, k(&train, &test, 5, 1), "subset must change key");
    }

    #[test]
    fn subset_indices_cover_or_sample() {
        let all = baseline_subset_indices(10, 0, 1);
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let some = baseline_subset_indices(10, 4, 1);
        assert_eq!(some.len(), 4);
        assert_eq!(some, baseline_subset_indices(10, 4, 1));
        assert_ne!(some, baseline_subset_indices(10, 4, 2));
    }
}
