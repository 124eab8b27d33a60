//! Experiment plan files: a flat UTF-8 `key = value` config describing a
//! grid of (distortion, level, regime) cells over one dataset, expanded in
//! a fixed order so results files are stable across runs.

use std::path::{Path, PathBuf};

use distlab_core::dataset::Manifest;
use distlab_core::distortion::{DistortionSpec, LevelSampling};

use crate::error::{CliError, Result};

/// Names of the four distortion families a plan can sweep.
pub const DISTORTIONS: [&str; 4] = ["motion", "defocus", "gaussian", "combined"];

/// How a cell's model is obtained relative to the clean baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Clean-trained baseline evaluated directly on distorted inputs.
    NoTrain,
    /// Resume from the baseline, training only the first N parameterized
    /// layers on distorted data.
    FirstN(usize),
    /// Fresh initialization, full training on distorted data.
    Retrain,
}

impl Regime {
    pub fn as_string(self) -> String {
        match self {
            Regime::NoTrain => "no-train".to_string(),
            Regime::FirstN(n) => format!("first-{n}"),
            Regime::Retrain => "retrain".to_string(),
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "no-train" => Some(Regime::NoTrain),
            "retrain" => Some(Regime::Retrain),
            _ => {
                let n: usize = s.strip_prefix("first-")?.parse().ok()?;
                Some(Regime::FirstN(n))
            }
        }
    }
}

/// Map a dataset name to the architecture trained on it.
pub fn arch_for_dataset(dataset: &str) -> Result<&'static str> {
    match dataset {
        "mnist" => Ok("lenet5"),
        "cifar10" => Ok("cifar10-quick"),
        other => Err(CliError::config(format!(
            "unknown dataset {other:?} (expected mnist or cifar10)"
        ))),
    }
}

/// Number of parameterized layers for an architecture (the P in first-P).
pub fn param_layers_for_arch(arch: &str) -> usize {
    match arch {
        "lenet5" => 4,
        "cifar10-quick" => 5,
        other => unreachable!("arch_for_dataset never yields {other:?}"),
    }
}

/// Turn a distortion family name and integer level into a concrete spec.
/// Combined applies all three stages at the same level.
pub fn spec_for(distortion: &str, level: u8, sampling: LevelSampling) -> Result<DistortionSpec> {
    let l = level as f64;
    let mut spec = DistortionSpec::none();
    spec.level_sampling = sampling;
    match distortion {
        "motion" => spec.motion_level = l,
        "defocus" => spec.defocus_radius = l,
        "gaussian" => spec.gaussian_sigma = l,
        "combined" => {
            spec.motion_level = l;
            spec.defocus_radius = l;
            spec.gaussian_sigma = l;
        }
        other => {
            return Err(CliError::config(format!(
                "unknown distortion {other:?} (expected one of {})",
                DISTORTIONS.join(", ")
            )))
        }
    }
    Ok(spec)
}

/// One expanded grid cell, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub distortion: String,
    pub level: u8,
    pub regime: Regime,
}

/// A parsed, validated experiment plan.
#[derive(Debug, Clone)]
pub struct Plan {
    pub dataset: String,
    pub data_dir: PathBuf,
    pub baseline: PathBuf,
    pub out_dir: PathBuf,
    pub distortions: Vec<String>,
    pub levels: Vec<u8>,
    pub regimes: Vec<Regime>,
    pub seed: u64,
    /// 0 = evaluate on the full test split.
    pub test_cap: usize,
    /// How train-set distortion levels are drawn (test sets are always fixed).
    pub sampling: LevelSampling,
    /// `standard` or `reduced` training schedules.
    pub protocol: String,
}

impl Plan {
    pub fn parse_file(path: &Path) -> Result<Plan> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read plan {}: {e}", path.display())))?;
        Plan::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Plan> {
        let m = Manifest::parse(text, path)?;
        let ctx = |msg: String| CliError::config(format!("{}: {msg}", path.display()));

        let known = [
            "dataset",
            "data_dir",
            "baseline",
            "out_dir",
            "distortions",
            "levels",
            "regimes",
            "seed",
            "test_cap",
            "sampling",
            "protocol",
        ];
        for key in m.0.keys() {
            if !known.contains(&key.as_str()) {
                return Err(ctx(format!("unknown key {key:?}")));
            }
        }

        let require =
            |k: &str| -> Result<&str> { m.get(k).ok_or_else(|| ctx(format!("missing key {k:?}"))) };

        let dataset = require("dataset")?.to_string();
        let arch = arch_for_dataset(&dataset).map_err(|e| ctx(e.message))?;
        let p = param_layers_for_arch(arch);

        let distortions: Vec<String> = split_list(require("distortions")?);
        if distortions.is_empty() {
            return Err(ctx("distortions list is empty".into()));
        }
        for d in &distortions {
            if !DISTORTIONS.contains(&d.as_str()) {
                return Err(ctx(format!(
                    "unknown distortion {d:?} (expected one of {})",
                    DISTORTIONS.join(", ")
                )));
            }
        }

        let levels: Vec<u8> = split_list(require("levels")?)
            .iter()
            .map(|s| {
                let n: i64 = s
                    .parse()
                    .map_err(|_| ctx(format!("level {s:?} is not an integer")))?;
                if !(0..=4).contains(&n) {
                    return Err(ctx(format!("level {n} outside 0..=4")));
                }
                Ok(n as u8)
            })
            .collect::<Result<_>>()?;
        if levels.is_empty() {
            return Err(ctx("levels list is empty".into()));
        }

        let regimes: Vec<Regime> = split_list(require("regimes")?)
            .iter()
            .map(|s| {
                let r = Regime::parse(s).ok_or_else(|| ctx(format!("unknown regime {s:?}")))?;
                if let Regime::FirstN(n) = r {
                    if n == 0 || n > p {
                        return Err(ctx(format!(
                            "regime first-{n} out of range: {arch} has {p} parameterized layers"
                        )));
                    }
                }
                Ok(r)
            })
            .collect::<Result<_>>()?;
        if regimes.is_empty() {
            return Err(ctx("regimes list is empty".into()));
        }

        let seed: u64 = require("seed")?
            .parse()
            .map_err(|_| ctx("seed is not an unsigned integer".into()))?;

        let test_cap: usize = match m.get("test_cap") {
            None => 0,
            Some(s) => s
                .parse()
                .map_err(|_| ctx("test_cap is not an unsigned integer".into()))?,
        };

        let sampling = match m.get("sampling") {
            None => LevelSampling::Fixed,
            Some(s) => {
                parse_sampling(s).ok_or_else(|| ctx(format!("unknown sampling mode {s:?}")))?
            }
        };

        let protocol = m.get("protocol").unwrap_or("standard").to_string();
        match protocol.as_str() {
            "standard" => {}
            "reduced" => {
                if dataset != "cifar10" {
                    return Err(ctx("protocol reduced is only defined for cifar10".into()));
                }
            }
            other => return Err(ctx(format!("unknown protocol {other:?}"))),
        }

        Ok(Plan {
            dataset,
            data_dir: PathBuf::from(require("data_dir")?),
            baseline: PathBuf::from(require("baseline")?),
            out_dir: PathBuf::from(require("out_dir")?),
            distortions,
            levels,
            regimes,
            seed,
            test_cap,
            sampling,
            protocol,
        })
    }

    /// Expand the grid in emission order: distortion (outer), level, regime.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out =
            Vec::with_capacity(self.distortions.len() * self.levels.len() * self.regimes.len());
        for d in &self.distortions {
            for &level in &self.levels {
                for &regime in &self.regimes {
                    out.push(Cell {
                        distortion: d.clone(),
                        level,
                        regime,
                    });
                }
            }
        }
        out
    }
}

/// Accept canonical sampling names plus the short CLI aliases.
pub fn parse_sampling(s: &str) -> Option<LevelSampling> {
    match s {
        "grid" => Some(LevelSampling::UniformInteger),
        "uniform" => Some(LevelSampling::UniformContinuous),
        other => LevelSampling::parse(other),
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}
