//! The four subcommands as plain functions over clap-derived argument
//! structs, so integration tests can drive them in-process as well as
//! through the binary.
//!
//! Every random stream hangs off one master `--seed` through role-scoped
//! [`seed_for`] derivations. Distortion seeds are keyed by (split,
//! distortion, level) but not regime, so every regime in a cell group sees
//! the same distorted data; training seeds include the regime.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use distlab_core::dataset::{load_cifar10, load_mnist, save_distorted, LabeledDataset, Split};
use distlab_core::diagnostics::{mean_feature_map_variance, sample_indices, DiagnosticReport};
use distlab_core::distortion::{distort_dataset, DistortionSpec, LevelSampling};
use distlab_core::models::{build_model, ModelGraph};
use distlab_core::trainer::{
    cifar_finetune, cifar_finetune_reduced, cifar_retrain, cifar_retrain_reduced, evaluate,
    mnist_finetune, mnist_retrain, train, Preprocess, TrainConfig,
};

use crate::baseline::{
    baseline_preprocess, baseline_subset_indices, load_baseline, make_info, save_baseline,
    LoadedBaseline,
};
use crate::error::{CliError, Result};
use crate::ident::seed_for;
use crate::plan::{arch_for_dataset, parse_sampling, spec_for, Plan, Regime};

/// Evaluation batch size used everywhere (matches the training protocols).
const BATCH: usize = 100;

pub const RESULTS_HEADER: &str =
    "dataset,distortion,level,regime,error_rate,seed,epochs,wall_clock";

/// Load one split of a named dataset.
pub fn load_split(dataset: &str, data_dir: &Path, split: Split) -> Result<LabeledDataset> {
    arch_for_dataset(dataset)?;
    let ds = match dataset {
        "mnist" => load_mnist(data_dir, split)?,
        _ => load_cifar10(data_dir, split)?,
    };
    Ok(ds)
}

/// The retraining protocol for a dataset/protocol family (also the clean
/// baseline's training config).
fn retrain_config(dataset: &str, protocol: &str, seed: u64) -> TrainConfig {
    match (dataset, protocol) {
        ("mnist", _) => mnist_retrain(seed),
        (_, "reduced") => cifar_retrain_reduced(seed),
        _ => cifar_retrain(seed),
    }
}

/// The fine-tuning protocol for a dataset/protocol family.
fn finetune_config(dataset: &str, protocol: &str, n: usize, seed: u64) -> TrainConfig {
    match (dataset, protocol) {
        ("mnist", _) => mnist_finetune(n, seed),
        (_, "reduced") => cifar_finetune_reduced(n, seed),
        _ => cifar_finetune(n, seed),
    }
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Dataset name: mnist or cifar10.
    #[arg(long)]
    pub dataset: String,
    /// Directory holding the raw dataset files.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output directory for checkpoint, manifest, and metrics.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; all baseline randomness derives from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Train on a seeded subset of this many images (0 = full split).
    #[arg(long, default_value_t = 0)]
    pub train_subset: usize,
    /// Training schedule family: standard or reduced (cifar10 only).
    #[arg(long, default_value = "standard")]
    pub protocol: String,
}

/// Train the clean model and write the baseline artifacts.
pub fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let arch = arch_for_dataset(&args.dataset)?;
    validate_protocol(&args.dataset, &args.protocol)?;
    let train_ds = load_split(&args.dataset, &args.data_dir, Split::Train)?;
    let test_ds = load_split(&args.dataset, &args.data_dir, Split::Test)?;
    if args.train_subset > train_ds.len() {
        return Err(CliError::config(format!(
            "train_subset {} exceeds the training split ({} images)",
            args.train_subset,
            train_ds.len()
        )));
    }

    let indices = baseline_subset_indices(train_ds.len(), args.train_subset, args.seed);
    let subset = train_ds.subset(&indices);
    let pre = Preprocess::fit(&subset)?;

    let mut cfg = retrain_config(&args.dataset, &args.protocol, 0);
    cfg.seed = seed_for(args.seed, &["baseline-shuffle"]);
    let mut model = build_model(arch, seed_for(args.seed, &["baseline-init"]))?;

    println!(
        "training clean {arch} on {} images ({} epochs)...",
        subset.len(),
        cfg.epochs
    );
    let metrics = train(&mut model, &subset, &test_ds, &pre, &cfg)?;

    let info = make_info(
        arch,
        &args.dataset,
        &args.protocol,
        &cfg,
        &train_ds,
        &test_ds,
        args.seed,
        args.train_subset,
        metrics.final_test_error(),
    );
    save_baseline(&args.out, &info, &model, &metrics)?;
    println!(
        "baseline {arch} on {}: test error {:.4} -> {}",
        args.dataset,
        info.test_error,
        args.out.display()
    );
    Ok(())
}

fn validate_protocol(dataset: &str, protocol: &str) -> Result<()> {
    match protocol {
        "standard" => Ok(()),
        "reduced" if dataset == "cifar10" => Ok(()),
        "reduced" => Err(CliError::config(
            "protocol reduced is only defined for cifar10",
        )),
        other => Err(CliError::config(format!("unknown protocol {other:?}"))),
    }
}

// ---------------------------------------------------------------------------
// distort
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DistortArgs {
    /// Dataset name: mnist or cifar10.
    #[arg(long)]
    pub dataset: String,
    /// Directory holding the raw dataset files.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output directory; each split goes to <out>/<split>/.
    #[arg(long)]
    pub out: PathBuf,
    /// Which splits to distort: both, train, or test.
    #[arg(long, default_value = "both")]
    pub split: String,
    /// Motion-blur level (walk length scale), 0..=4.
    #[arg(long, default_value_t = 0.0)]
    pub motion: f64,
    /// Defocus-blur disc radius level, 0..=4.
    #[arg(long, default_value_t = 0.0)]
    pub defocus: f64,
    /// Gaussian noise sigma in the 0-255 domain, 0..=4.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Level sampling: fixed, uniform-integer (alias grid), or
    /// uniform-continuous (alias uniform).
    #[arg(long, default_value = "fixed")]
    pub sampling: String,
    /// Master seed; per-split streams derive from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// The distortion spec an invocation describes.
pub fn distort_spec(args: &DistortArgs) -> Result<DistortionSpec> {
    for (name, v) in [
        ("motion", args.motion),
        ("defocus", args.defocus),
        ("sigma", args.sigma),
    ] {
        if !v.is_finite() || !(0.0..=4.0).contains(&v) {
            return Err(CliError::config(format!("{name} level {v} outside [0, 4]")));
        }
    }
    let level_sampling = parse_sampling(&args.sampling)
        .ok_or_else(|| CliError::config(format!("unknown sampling mode {:?}", args.sampling)))?;
    Ok(DistortionSpec {
        motion_level: args.motion,
        defocus_radius: args.defocus,
        gaussian_sigma: args.sigma,
        level_sampling,
    })
}

/// Master seed for one split's distortion stream.
pub fn split_seed(master: u64, split: Split) -> u64 {
    seed_for(master, &["split", split.as_str()])
}

/// Distort the selected splits and write them (with manifests) under `out`.
pub fn cmd_distort(args: &DistortArgs) -> Result<()> {
    let spec = distort_spec(args)?;
    let splits: &[Split] = match args.split.as_str() {
        "both" => &[Split::Train, Split::Test],
        "train" => &[Split::Train],
        "test" => &[Split::Test],
        other => {
            return Err(CliError::config(format!(
                "unknown split {other:?} (expected both, train, or test)"
            )))
        }
    };
    for &split in splits {
        let ds = load_split(&args.dataset, &args.data_dir, split)?;
        let master = split_seed(args.seed, split);
        let distorted = distort_dataset(&ds, &spec, master);
        let dir = args.out.join(split.as_str());
        save_distorted(&dir, &distorted, &spec, master)?;
        println!(
            "distorted {} {} images ({}) -> {}",
            distorted.len(),
            split.as_str(),
            spec.tag(),
            dir.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Plan file (flat `key = value` text).
    #[arg(long)]
    pub plan: PathBuf,
}

/// Everything a run shares across cells.
struct RunContext {
    plan: Plan,
    baseline: LoadedBaseline,
    /// Clean training subset (the images the baseline trained on).
    clean_train: LabeledDataset,
    /// Baseline's preprocessing (clean-train mean).
    pre_clean: Preprocess,
    /// Evaluation test set (full split, or the seeded test_cap subset).
    test: LabeledDataset,
}

fn open_run_context(plan: Plan) -> Result<RunContext> {
    let train_full = load_split(&plan.dataset, &plan.data_dir, Split::Train)?;
    let test_full = load_split(&plan.dataset, &plan.data_dir, Split::Test)?;
    let baseline = load_baseline(&plan.baseline, &train_full, &test_full)?;
    if baseline.info.dataset != plan.dataset {
        return Err(CliError::baseline_mismatch(format!(
            "baseline at {} was trained on {}, plan wants {}",
            plan.baseline.display(),
            baseline.info.dataset,
            plan.dataset
        )));
    }
    if baseline.info.protocol_family != plan.protocol {
        return Err(CliError::baseline_mismatch(format!(
            "baseline at {} used the {} protocol, plan wants {}; \
             re-run `distlab baseline --protocol {}`",
            plan.baseline.display(),
            baseline.info.protocol_family,
            plan.protocol,
            plan.protocol
        )));
    }
    let (pre_clean, clean_train) = baseline_preprocess(&baseline.info, &train_full)?;
    let test = if plan.test_cap > 0 && plan.test_cap < test_full.len() {
        let idx = sample_indices(
            test_full.len(),
            plan.test_cap,
            seed_for(plan.seed, &["test-subset"]),
        );
        test_full.subset(&idx)
    } else {
        test_full
    };
    Ok(RunContext {
        plan,
        baseline,
        clean_train,
        pre_clean,
        test,
    })
}

/// Distort the evaluation test set for one (distortion, level). Test sets
/// always use fixed levels; the stream is keyed by split, distortion, and
/// level but not regime, so all regimes see identical test data.
fn distorted_test(ctx: &RunContext, distortion: &str, level: u8) -> Result<LabeledDataset> {
    let spec = spec_for(distortion, level, LevelSampling::Fixed)?;
    let master = seed_for(
        ctx.plan.seed,
        &["distort", "test", distortion, &level.to_string()],
    );
    Ok(distort_dataset(&ctx.test, &spec, master))
}

/// Distort the clean training subset for one (distortion, level), using the
/// plan's sampling mode.
fn distorted_train(ctx: &RunContext, distortion: &str, level: u8) -> Result<LabeledDataset> {
    let spec = spec_for(distortion, level, ctx.plan.sampling)?;
    let master = seed_for(
        ctx.plan.seed,
        &["distort", "train", distortion, &level.to_string()],
    );
    Ok(distort_dataset(&ctx.clean_train, &spec, master))
}

/// Obtain the model for one trained cell: fine-tune from the baseline or
/// retrain from a fresh seeded init, on the distorted training subset.
/// Returns the model, its preprocessing, and the epoch count.
fn trained_cell_model(
    ctx: &RunContext,
    distortion: &str,
    level: u8,
    regime: Regime,
    test: &LabeledDataset,
) -> Result<(ModelGraph, Preprocess, usize)> {
    let level_s = level.to_string();
    let regime_s = regime.as_string();
    let train_ds = distorted_train(ctx, distortion, level)?;
    let pre = Preprocess::fit(&train_ds)?;
    let shuffle = seed_for(ctx.plan.seed, &["shuffle", distortion, &level_s, &regime_s]);
    let (mut model, cfg) = match regime {
        Regime::NoTrain => {
            return Err(CliError::internal("trained_cell_model called for no-train"))
        }
        Regime::FirstN(n) => (
            ctx.baseline.model.clone(),
            finetune_config(&ctx.plan.dataset, &ctx.plan.protocol, n, shuffle),
        ),
        Regime::Retrain => {
            let init = seed_for(ctx.plan.seed, &["init", distortion, &level_s, &regime_s]);
            (
                build_model(&ctx.baseline.info.arch, init)?,
                retrain_config(&ctx.plan.dataset, &ctx.plan.protocol, shuffle),
            )
        }
    };
    let epochs = cfg.epochs;
    train(&mut model, &train_ds, test, &pre, &cfg)?;
    Ok((model, pre, epochs))
}

/// Execute a plan and return the results CSV text.
pub fn run_plan(plan: Plan) -> Result<String> {
    let ctx = open_run_context(plan)?;
    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for cell in ctx.plan.cells() {
        let started = Instant::now();
        let test = distorted_test(&ctx, &cell.distortion, cell.level)?;
        let (error_rate, epochs) = match cell.regime {
            Regime::NoTrain => (
                evaluate(&ctx.baseline.model, &test, &ctx.pre_clean, BATCH)?,
                0,
            ),
            regime => {
                let (model, pre, epochs) =
                    trained_cell_model(&ctx, &cell.distortion, cell.level, regime, &test)?;
                (evaluate(&model, &test, &pre, BATCH)?, epochs)
            }
        };
        let wall = started.elapsed().as_secs_f64();
        let regime_s = cell.regime.as_string();
        println!(
            "cell {} level {} {}: error {:.4} ({} epochs, {:.1}s)",
            cell.distortion, cell.level, regime_s, error_rate, epochs, wall
        );
        csv.push_str(&format!(
            "{},{},{},{},{:.6},{},{},{:.3}\n",
            ctx.plan.dataset,
            cell.distortion,
            cell.level,
            regime_s,
            error_rate,
            ctx.plan.seed,
            epochs,
            wall
        ));
    }
    Ok(csv)
}

/// Run a plan file and write `<out_dir>/results.csv`.
pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let plan = Plan::parse_file(&args.plan)?;
    let out_dir = plan.out_dir.clone();
    let cells = plan.cells().len();
    let csv = run_plan(plan)?;
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("results.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {cells} result rows -> {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Dataset name: mnist or cifar10.
    #[arg(long)]
    pub dataset: String,
    /// Directory holding the raw dataset files.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Baseline directory (from `distlab baseline`).
    #[arg(long)]
    pub baseline: PathBuf,
    /// Report file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Distortion family to sweep: motion, defocus, gaussian, or combined.
    #[arg(long)]
    pub distortion: String,
    /// Comma-separated integer levels in 0..=4.
    #[arg(long, default_value = "0,1,2,3,4")]
    pub levels: String,
    /// Conv layer ordinal (1-based); defaults to the last conv layer.
    #[arg(long)]
    pub layer: Option<usize>,
    /// Comma-separated regimes (no-train, first-N, retrain).
    #[arg(long, default_value = "no-train,first-3,retrain")]
    pub regimes: String,
    /// Max images sampled per variance estimate.
    #[arg(long, default_value_t = 1000)]
    pub cap: usize,
    /// Master seed; all diagnose randomness derives from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Training schedule family: standard or reduced (cifar10 only).
    #[arg(long, default_value = "standard")]
    pub protocol: String,
    /// Evaluate test metrics on a seeded subset of this many images
    /// (0 = full split); the diagnostic itself is still capped by --cap.
    #[arg(long, default_value_t = 0)]
    pub test_cap: usize,
}

/// Run the diagnostic sweep and return the report CSV text.
pub fn run_diagnose(args: &DiagnoseArgs) -> Result<String> {
    let arch = arch_for_dataset(&args.dataset)?;
    validate_protocol(&args.dataset, &args.protocol)?;
    let conv_count = match arch {
        "lenet5" => 2,
        _ => 3,
    };
    let layer = args.layer.unwrap_or(conv_count);
    if layer == 0 || layer > conv_count {
        return Err(CliError::config(format!(
            "layer {layer} out of range: {arch} has {conv_count} conv layers"
        )));
    }

    // Reuse the plan grammar for the list flags and the distortion name.
    let plan_text = format!(
        "dataset = {}\ndata_dir = {}\nbaseline = {}\nout_dir = .\n\
         distortions = {}\nlevels = {}\nregimes = {}\nseed = {}\nprotocol = {}\n\
         test_cap = {}\n",
        args.dataset,
        args.data_dir.display(),
        args.baseline.display(),
        args.distortion,
        args.levels,
        args.regimes,
        args.seed,
        args.protocol,
        args.test_cap,
    );
    let plan = Plan::parse(&plan_text, Path::new("<diagnose flags>"))?;
    let ctx = open_run_context(plan)?;
    let sample_seed = seed_for(args.seed, &["diag-sample"]);

    let mut csv = String::from(DiagnosticReport::csv_header());
    csv.push('\n');
    let mut push = |report: DiagnosticReport| {
        println!(
            "diagnose {} level {}: conv{layer} mean variance {:.6}",
            report.regime, report.distortion_level, report.mean_variance
        );
        csv.push_str(&report.csv_row());
        csv.push('\n');
    };

    // Reference row: clean inputs through the clean model.
    push(mean_feature_map_variance(
        &ctx.baseline.model,
        layer,
        &ctx.test,
        &ctx.pre_clean,
        args.cap,
        sample_seed,
        "clean-baseline",
        0.0,
    )?);

    for &regime in &ctx.plan.regimes {
        for &level in &ctx.plan.levels {
            let test = distorted_test(&ctx, &args.distortion, level)?;
            let report = match regime {
                Regime::NoTrain => mean_feature_map_variance(
                    &ctx.baseline.model,
                    layer,
                    &test,
                    &ctx.pre_clean,
                    args.cap,
                    sample_seed,
                    "no-train",
                    level as f64,
                )?,
                _ => {
                    let (model, pre, _) =
                        trained_cell_model(&ctx, &args.distortion, level, regime, &test)?;
                    mean_feature_map_variance(
                        &model,
                        layer,
                        &test,
                        &pre,
                        args.cap,
                        sample_seed,
                        &regime.as_string(),
                        level as f64,
                    )?
                }
            };
            push(report);
        }
    }
    Ok(csv)
}

/// Run the diagnostic sweep and write the report CSV.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let csv = run_diagnose(args)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, &csv)?;
    println!("wrote report -> {}", args.out.display());
    Ok(())
}
