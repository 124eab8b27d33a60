//! Dev probe: raw throughput of the conv/pool/fc kernels at the exact
//! shapes the two reference nets use, to find the training-time hot spots.

use std::time::Instant;

use distlab_core::layers::{
    conv2d_backward, conv2d_forward, fully_connected_forward, Pool2d, PoolKind,
};
use distlab_core::rng::rng_from_seed;
use distlab_core::Tensor;
use rand::Rng;

fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let len: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn time_case(name: &str, macs: f64, mut f: impl FnMut()) {
    // warm up once, then time enough reps for ~0.5s
    f();
    let t0 = Instant::now();
    let mut reps = 0;
    while t0.elapsed().as_secs_f64() < 0.5 {
        f();
        reps += 1;
    }
    let per = t0.elapsed().as_secs_f64() / reps as f64;
    println!(
        "{name:<32} {:>8.2} ms   {:>6.2} GFLOP/s",
        per * 1e3,
        2.0 * macs / per / 1e9
    );
}

fn main() {
    let mut rng = rng_from_seed(1);
    let n = 100usize;

    // LeNet conv1: 1→20, 5×5, 28→24
    let x1 = rand_tensor(&[n, 1, 28, 28], &mut rng);
    let w1 = rand_tensor(&[20, 1, 5, 5], &mut rng);
    let b1 = rand_tensor(&[20], &mut rng);
    let macs1 = (n * 20 * 24 * 24 * 25) as f64;
    time_case("lenet conv1 fwd", macs1, || {
        conv2d_forward(&x1, &w1, &b1, 1, 0).unwrap();
    });
    let y1 = conv2d_forward(&x1, &w1, &b1, 1, 0).unwrap();
    time_case("lenet conv1 bwd", 2.0 * macs1, || {
        conv2d_backward(&x1, &w1, &y1, 1, 0).unwrap();
    });

    // LeNet conv2: 20→50, 5×5, 12→8
    let x2 = rand_tensor(&[n, 20, 12, 12], &mut rng);
    let w2 = rand_tensor(&[50, 20, 5, 5], &mut rng);
    let b2 = rand_tensor(&[50], &mut rng);
    let macs2 = (n * 50 * 20 * 8 * 8 * 25) as f64;
    time_case("lenet conv2 fwd", macs2, || {
        conv2d_forward(&x2, &w2, &b2, 1, 0).unwrap();
    });
    let y2 = conv2d_forward(&x2, &w2, &b2, 1, 0).unwrap();
    time_case("lenet conv2 bwd", 2.0 * macs2, || {
        conv2d_backward(&x2, &w2, &y2, 1, 0).unwrap();
    });

    // CIFAR conv2: 32→32, 5×5 pad 2, 16×16
    let x3 = rand_tensor(&[n, 32, 16, 16], &mut rng);
    let w3 = rand_tensor(&[32, 32, 5, 5], &mut rng);
    let b3 = rand_tensor(&[32], &mut rng);
    let macs3 = (n * 32 * 32 * 16 * 16 * 25) as f64;
    time_case("cifar conv2 fwd (pad 2)", macs3, || {
        conv2d_forward(&x3, &w3, &b3, 1, 2).unwrap();
    });
    let y3 = conv2d_forward(&x3, &w3, &b3, 1, 2).unwrap();
    time_case("cifar conv2 bwd (pad 2)", 2.0 * macs3, || {
        conv2d_backward(&x3, &w3, &y3, 1, 2).unwrap();
    });

    // CIFAR conv3: 32→64, 5×5 pad 2, 8×8
    let x4 = rand_tensor(&[n, 32, 8, 8], &mut rng);
    let w4 = rand_tensor(&[64, 32, 5, 5], &mut rng);
    let b4 = rand_tensor(&[64], &mut rng);
    let macs4 = (n * 64 * 32 * 8 * 8 * 25) as f64;
    time_case("cifar conv3 fwd (pad 2)", macs4, || {
        conv2d_forward(&x4, &w4, &b4, 1, 2).unwrap();
    });
    let y4 = conv2d_forward(&x4, &w4, &b4, 1, 2).unwrap();
    time_case("cifar conv3 bwd (pad 2)", 2.0 * macs4, || {
        conv2d_backward(&x4, &w4, &y4, 1, 2).unwrap();
    });

    // LeNet fc1: 800→500
    let xf = rand_tensor(&[n, 800], &mut rng);
    let wf = rand_tensor(&[500, 800], &mut rng);
    let bf = rand_tensor(&[500], &mut rng);
    let macsf = (n * 500 * 800) as f64;
    time_case("lenet fc1 fwd", macsf, || {
        fully_connected_forward(&xf, &wf, &bf).unwrap();
    });

    // pools at LeNet shapes
    let xp = rand_tensor(&[n, 20, 24, 24], &mut rng);
    let pool = Pool2d {
        kind: PoolKind::Max,
        window: 2,
        stride: 2,
        pad: 0,
    };
    time_case("lenet pool1 fwd", (n * 20 * 12 * 12 * 4) as f64, || {
        distlab_core::layers::pool2d_forward(&xp, pool).unwrap();
    });
}
