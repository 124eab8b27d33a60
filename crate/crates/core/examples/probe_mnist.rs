//! Dev probe: small-scale LeNet baseline — 10k MNIST subset, 5 epochs,
//! lr 1e-3, batch 100. Prints per-epoch metrics and wall-clock so training
//! dynamics and runtime can be sanity-checked quickly.

use distlab_core::dataset::{load_mnist, Split};
use distlab_core::diagnostics::sample_indices;
use distlab_core::models::build_lenet5;
use distlab_core::rng::derive_seed;
use distlab_core::trainer::{train, FreezeDepth, LrBand, Preprocess, TrainConfig};

fn main() {
    let data_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/mnist".to_string());
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let subset_n: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);

    let started = std::time::Instant::now();
    let train_full = load_mnist(data_dir.as_ref(), Split::Train).expect("load train");
    let test = load_mnist(data_dir.as_ref(), Split::Test).expect("load test");
    println!(
        "loaded {} train / {} test in {:.1?}",
        train_full.len(),
        test.len(),
        started.elapsed()
    );

    let seed = 17u64;
    let subset = train_full.subset(&sample_indices(
        train_full.len(),
        subset_n,
        derive_seed(seed, 0),
    ));
    let pre = Preprocess::fit(&subset).expect("fit mean");

    let mut model = build_lenet5(derive_seed(seed, 1));
    let cfg = TrainConfig {
        epochs,
        schedule: vec![LrBand {
            from_epoch: 1,
            to_epoch: epochs,
            lr: 1e-3,
        }],
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 0.0,
        freeze: FreezeDepth::All,
        seed: derive_seed(seed, 2),
    };
    let metrics = train(&mut model, &subset, &test, &pre, &cfg).expect("train");
    print!("{}", metrics.to_csv());
    println!("final test error: {:.4}", metrics.final_test_error());
    println!("total wall-clock: {:.1?}", started.elapsed());
}
