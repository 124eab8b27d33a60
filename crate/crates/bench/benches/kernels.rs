//! Criterion benchmarks for the numerical kernels that dominate experiment
//! wall-clock: GEMM, convolution, pooling, dense layers, distortion
//! synthesis, and the Sobel diagnostic.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distlab_core::diagnostics::sobel_gradient_magnitude;
use distlab_core::distortion::{
    apply_kernel, distort_image, gen_defocus_kernel, gen_motion_kernel, DistortionSpec,
    LevelSampling,
};
use distlab_core::layers::matmul::{gemm_nn, gemm_nt, gemm_tn};
use distlab_core::layers::{
    conv2d_backward, conv2d_forward, fully_connected_backward, fully_connected_forward,
    pool2d_forward, Pool2d, PoolKind,
};
use distlab_core::Tensor;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}

fn bench_gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm");
    // LeNet conv2-as-GEMM shape: 50 filters x 500-dim patches x 64 positions.
    let (m, k, n) = (50, 500, 64);
    let mut r = rng(1);
    let a: Vec<f64> = (0..m * k).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..k * n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let flops = (2 * m * k * n) as u64;
    group.throughput(Throughput::Elements(flops));
    group.bench_function("nn_50x500x64", |bch| {
        let mut out = vec![0.0; m * n];
        bch.iter(|| {
            out.fill(0.0);
            gemm_nn(&a, &b, &mut out, m, k, n);
        })
    });
    let bt: Vec<f64> = (0..n * k).map(|_| r.gen_range(-1.0..1.0)).collect();
    group.bench_function("nt_50x500x64", |bch| {
        let mut out = vec![0.0; m * n];
        bch.iter(|| {
            out.fill(0.0);
            gemm_nt(&a, &bt, &mut out, m, k, n);
        })
    });
    let at: Vec<f64> = (0..k * m).map(|_| r.gen_range(-1.0..1.0)).collect();
    group.bench_function("tn_50x500x64", |bch| {
        let mut out = vec![0.0; m * n];
        bch.iter(|| {
            out.fill(0.0);
            gemm_tn(&at, &b, &mut out, k, m, n);
        })
    });
    group.finish();
}

fn bench_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    group.sample_size(20);
    let mut r = rng(2);
    // (name, input NCHW, filters, stride, pad) for the two heaviest layers.
    let cases = [
        ("lenet_conv2_b100", [100, 20, 12, 12], [50, 20, 5, 5], 1, 0),
        ("cifar_conv3_b100", [100, 32, 8, 8], [64, 32, 5, 5], 1, 2),
    ];
    for (name, ishape, wshape, stride, pad) in cases {
        let input = random_tensor(&ishape, &mut r);
        let weights = random_tensor(&wshape, &mut r);
        let bias = random_tensor(&wshape[..1], &mut r);
        let out = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", name), &(), |bch, ()| {
            bch.iter(|| conv2d_forward(&input, &weights, &bias, stride, pad).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("backward", name), &(), |bch, ()| {
            bch.iter(|| conv2d_backward(&input, &weights, &out, stride, pad).unwrap())
        });
    }
    group.finish();
}

fn bench_pool_and_dense(c: &mut Criterion) {
    let mut r = rng(3);
    let input = random_tensor(&[100, 20, 24, 24], &mut r);
    let cfg = Pool2d {
        kind: PoolKind::Max,
        window: 2,
        stride: 2,
        pad: 0,
    };
    c.bench_function("max_pool2d_b100_20x24x24", |bch| {
        bch.iter(|| pool2d_forward(&input, cfg).unwrap())
    });

    let x = random_tensor(&[100, 800], &mut r);
    let w = random_tensor(&[500, 800], &mut r);
    let bias = random_tensor(&[500], &mut r);
    let g = random_tensor(&[100, 500], &mut r);
    c.bench_function("fc_forward_b100_800to500", |bch| {
        bch.iter(|| fully_connected_forward(&x, &w, &bias).unwrap())
    });
    c.bench_function("fc_backward_b100_800to500", |bch| {
        bch.iter(|| fully_connected_backward(&x, &w, &g).unwrap())
    });
}

fn bench_distortion(c: &mut Criterion) {
    let mut group = c.benchmark_group("distortion");
    let mut r = rng(4);
    group.bench_function("gen_motion_kernel_l4", |bch| {
        bch.iter(|| gen_motion_kernel(4.0, &mut r))
    });
    group.bench_function("gen_defocus_kernel_r4", |bch| {
        bch.iter(|| gen_defocus_kernel(4.0))
    });

    let image: Vec<u8> = (0..28 * 28).map(|_| r.gen()).collect();
    let kernel = gen_defocus_kernel(4.0);
    group.bench_function("apply_kernel_28x28_r4", |bch| {
        bch.iter(|| apply_kernel(&image, 28, 28, 1, &kernel))
    });

    let spec = DistortionSpec {
        motion_level: 4.0,
        defocus_radius: 4.0,
        gaussian_sigma: 4.0,
        level_sampling: LevelSampling::Fixed,
    };
    let cifar: Vec<u8> = (0..32 * 32 * 3).map(|_| r.gen()).collect();
    group.bench_function("distort_image_cifar_combined_l4", |bch| {
        bch.iter(|| {
            let mut img = cifar.clone();
            distort_image(&mut img, 32, 32, 3, &spec, &mut r);
            img
        })
    });
    group.finish();
}

fn bench_diagnostics(c: &mut Criterion) {
    let mut r = rng(5);
    let fm = random_tensor(&[8, 8], &mut r);
    c.bench_function("sobel_gradient_magnitude_8x8", |bch| {
        bch.iter(|| sobel_gradient_magnitude(&fm).unwrap())
    });
}

criterion_group!(
    benches,
    bench_gemm,
    bench_conv,
    bench_pool_and_dense,
    bench_distortion,
    bench_diagnostics
);
criterion_main!(benches);
