//! Feature-map gradient statistics: Sobel gradient magnitude of conv
//! feature maps and the mean-variance summary used to compare training
//! regimes on distorted data.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::ModelGraph;
use crate::rng::rng_from_seed;
use crate::tensor::Tensor;
use crate::trainer::Preprocess;

use rand::seq::SliceRandom;

/// ¼-scaled horizontal Sobel stencil.
const SOBEL_X: [[f64; 3]; 3] = [[0.25, 0.0, -0.25], [0.50, 0.0, -0.50], [0.25, 0.0, -0.25]];
/// ¼-scaled vertical Sobel stencil.
const SOBEL_Y: [[f64; 3]; 3] = [[0.25, 0.50, 0.25], [0.0, 0.0, 0.0], [-0.25, -0.50, -0.25]];

/// Images sampled per diagnostic report unless the caller overrides it.
pub const DEFAULT_SAMPLE_CAP: usize = 1000;

/// Gradient magnitude `g(m,n) = sqrt((fm⊗s_x)² + (fm⊗s_y)²)` over the valid
/// interior of a 2-D map: `[H, W] → [H−2, W−2]`.
pub fn sobel_gradient_magnitude(fm: &Tensor) -> Result<Tensor> {
    let s = fm.shape();
    if s.len() != 2 {
        return Err(Error::shape(
            "sobel",
            format!("expected a 2-D feature map, got {s:?}"),
        ));
    }
    let (h, w) = (s[0], s[1]);
    if h < 3 || w < 3 {
        return Err(Error::invalid(
            "sobel",
            format!("map {h}x{w} is smaller than the 3x3 stencil"),
        ));
    }
    let g = gradient_magnitude_raw(fm.data(), h, w);
    Tensor::from_vec(&[h - 2, w - 2], g)
}

/// Interior gradient magnitudes of a row-major `h×w` slice, flattened
/// row-major over the `(h−2)×(w−2)` interior.
fn gradient_magnitude_raw(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((h - 2) * (w - 2));
    for y in 0..h - 2 {
        for x in 0..w - 2 {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for ky in 0..3 {
                let row = &data[(y + ky) * w + x..(y + ky) * w + x + 3];
                for kx in 0..3 {
                    gx += SOBEL_X[ky][kx] * row[kx];
                    gy += SOBEL_Y[ky][kx] * row[kx];
                }
            }
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Population variance (no Bessel correction), two-pass for stability.
fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `v_fm`: population variance of the gradient magnitude over the map's
/// interior locations. Errors when the interior has fewer than 2 locations
/// (a 3×3 map leaves a single pixel — no spread to measure).
pub fn feature_map_variance(fm: &Tensor) -> Result<f64> {
    let s = fm.shape();
    if s.len() != 2 {
        return Err(Error::shape(
            "feature map variance",
            format!("expected a 2-D feature map, got {s:?}"),
        ));
    }
    let (h, w) = (s[0], s[1]);
    if h < 3 || w < 3 {
        return Err(Error::invalid(
            "feature map variance",
            format!("map {h}x{w} is smaller than the 3x3 stencil"),
        ));
    }
    if (h - 2) * (w - 2) < 2 {
        return Err(Error::invalid(
            "feature map variance",
            format!(
                "map {h}x{w} leaves a degenerate {}x{} interior",
                h - 2,
                w - 2
            ),
        ));
    }
    Ok(population_variance(&gradient_magnitude_raw(
        fm.data(),
        h,
        w,
    )))
}

/// Mean gradient-magnitude variance for one conv layer under one
/// input condition.
#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    /// Regime label: `no-train`, `first-N`, `retrain`, or `clean-baseline`.
    pub regime: String,
    /// Conv layer id, e.g. `conv3`.
    pub layer: String,
    pub distortion_level: f64,
    /// Mean `v_fm` per output channel, averaged over the sampled images.
    pub per_channel: Vec<f64>,
    /// Arithmetic mean of `per_channel`.
    pub mean_variance: f64,
    pub n_images: usize,
    pub n_channels: usize,
}

impl DiagnosticReport {
    pub fn csv_header() -> &'static str {
        "regime,layer,distortion_level,mean_variance,n_images,n_channels"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.regime,
            self.layer,
            self.distortion_level,
            self.mean_variance,
            self.n_images,
            self.n_channels
        )
    }
}

/// Deterministic evaluation sample: all indices when `cap >= len`, else a
/// seeded `cap`-subset in ascending order.
pub fn sample_indices(len: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..len).collect();
    if cap < len {
        indices.shuffle(&mut rng_from_seed(seed));
        indices.truncate(cap);
        indices.sort_unstable();
    }
    indices
}

/// Run the model over (up to `sample_cap`) dataset images and average
/// `v_fm` of the `conv_ordinal`-th convolution output per channel, then
/// over channels.
#[allow(clippy::too_many_arguments)]
pub fn mean_feature_map_variance(
    model: &ModelGraph,
    conv_ordinal: usize,
    ds: &LabeledDataset,
    pre: &Preprocess,
    sample_cap: usize,
    seed: u64,
    regime: &str,
    distortion_level: f64,
) -> Result<DiagnosticReport> {
    if ds.is_empty() {
        return Err(Error::invalid("diagnostics", "empty dataset"));
    }
    if sample_cap == 0 {
        return Err(Error::invalid("diagnostics", "sample cap must be >= 1"));
    }
    let indices = sample_indices(ds.len(), sample_cap, seed);
    let mut per_channel: Vec<f64> = Vec::new();
    for chunk in indices.chunks(100) {
        let x = pre.batch(ds, chunk)?;
        let fm = model.conv_output(&x, conv_ordinal)?;
        let s = fm.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if h < 3 || w < 3 || (h - 2) * (w - 2) < 2 {
            return Err(Error::invalid(
                "diagnostics",
                format!("conv output {h}x{w} leaves a degenerate interior"),
            ));
        }
        if per_channel.is_empty() {
            per_channel = vec![0.0; c];
        }
        let plane = h * w;
        for i in 0..n {
            for (ch, acc) in per_channel.iter_mut().enumerate() {
                let start = (i * c + ch) * plane;
                let g = gradient_magnitude_raw(&fm.data()[start..start + plane], h, w);
                *acc += population_variance(&g);
            }
        }
    }
    let n_images = indices.len();
    for v in &mut per_channel {
        *v /= n_images as f64;
    }
    let n_channels = per_channel.len();
    let mean_variance = per_channel.iter().sum::<f64>() / n_channels as f64;
    Ok(DiagnosticReport {
        regime: regime.to_string(),
        layer: format!("conv{conv_ordinal}"),
        distortion_level,
        per_channel,
        mean_variance,
        n_images,
        n_channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::conv2d_forward;
    use crate::models::LayerDef;
    use crate::optim::ParamSlot;
    use rand::Rng;

    fn step_map(h: usize, w: usize, high: f64) -> Tensor {
        // left half 0, right half `high`, split down the middle
        let data: Vec<f64> = (0..h * w)
            .map(|i| if i % w < w / 2 { 0.0 } else { high })
            .collect();
        Tensor::from_vec(&[h, w], data).unwrap()
    }

    #[test]
    fn constant_map_has_zero_gradient_and_variance() {
        let fm = Tensor::from_vec(&[5, 6], vec![3.25; 30]).unwrap();
        let g = sobel_gradient_magnitude(&fm).unwrap();
        assert_eq!(g.shape(), &[3, 4]);
        assert!(g.data().iter().all(|&v| v == 0.0));
        assert_eq!(feature_map_variance(&fm).unwrap(), 0.0);
    }

    #[test]
    fn vertical_step_edge_gives_unit_band() {
        // 6 columns: 0 0 0 | 1 1 1 — the two interior columns whose stencil
        // straddles the edge read 1, the rest 0
        let fm = step_map(5, 6, 1.0);
        let g = sobel_gradient_magnitude(&fm).unwrap();
        assert_eq!(g.shape(), &[3, 4]);
        for row in 0..3 {
            let r = &g.data()[row * 4..(row + 1) * 4];
            assert_eq!(r[0], 0.0);
            assert!((r[1] - 1.0).abs() < 1e-15, "left band col: {}", r[1]);
            assert!((r[2] - 1.0).abs() < 1e-15, "right band col: {}", r[2]);
            assert_eq!(r[3], 0.0);
        }
    }

    #[test]
    fn random_map_matches_direct_loop_oracle() {
        let mut rng = rng_from_seed(42);
        let data: Vec<f64> = (0..36).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fm = Tensor::from_vec(&[6, 6], data.clone()).unwrap();
        let g = sobel_gradient_magnitude(&fm).unwrap();
        // independent nested-loop evaluation of the two stencils
        let sx = [[0.25, 0.0, -0.25], [0.5, 0.0, -0.5], [0.25, 0.0, -0.25]];
        let sy = [[0.25, 0.5, 0.25], [0.0, 0.0, 0.0], [-0.25, -0.5, -0.25]];
        for y in 0..4 {
            for x in 0..4 {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let v = data[(y + ky) * 6 + (x + kx)];
                        gx += sx[ky][kx] * v;
                        gy += sy[ky][kx] * v;
                    }
                }
                let want = f64::hypot(gx, gy);
                let got = g.get(&[y, x]);
                assert!((want - got).abs() < 1e-12, "({y},{x}): {want} vs {got}");
            }
        }
    }

    #[test]
    fn small_maps_are_rejected() {
        let tiny = Tensor::zeros(&[2, 5]);
        assert!(sobel_gradient_magnitude(&tiny).is_err());
        // 3×3 leaves a single interior pixel: gradient fine, variance degenerate
        let three = Tensor::zeros(&[3, 3]);
        assert!(sobel_gradient_magnitude(&three).is_ok());
        assert!(feature_map_variance(&three).is_err());
    }

    #[test]
    fn gradient_ignores_constant_offset() {
        let mut rng = rng_from_seed(7);
        let data: Vec<f64> = (0..48).map(|_| rng.gen_range(0.0..5.0)).collect();
        let a = Tensor::from_vec(&[6, 8], data.clone()).unwrap();
        let b = Tensor::from_vec(&[6, 8], data.iter().map(|v| v + 11.5).collect()).unwrap();
        let ga = sobel_gradient_magnitude(&a).unwrap();
        let gb = sobel_gradient_magnitude(&b).unwrap();
        for (x, y) in ga.data().iter().zip(gb.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_scales_quadratically() {
        let mut rng = rng_from_seed(9);
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fm = Tensor::from_vec(&[8, 8], data.clone()).unwrap();
        let scaled = Tensor::from_vec(&[8, 8], data.iter().map(|v| v * -3.0).collect()).unwrap();
        let v = feature_map_variance(&fm).unwrap();
        let vs = feature_map_variance(&scaled).unwrap();
        assert!(
            (vs - 9.0 * v).abs() < 1e-9 * vs.abs().max(1.0),
            "{vs} vs 9·{v}"
        );
    }

    #[test]
    fn prescribed_channel_variances_average_as_expected() {
        // step of height α on a 6×6 map: interior is 4 columns, the 2 band
        // columns read α, the rest 0 → population variance α²/4
        let maps = [
            Tensor::from_vec(&[6, 6], vec![1.0; 36]).unwrap(), // v = 0
            step_map(6, 6, 8.0f64.sqrt()),                     // v = 2
            step_map(6, 6, 4.0),                               // v = 4
        ];
        let vs: Vec<f64> = maps
            .iter()
            .map(|m| feature_map_variance(m).unwrap())
            .collect();
        assert!((vs[0] - 0.0).abs() < 1e-12);
        assert!((vs[1] - 2.0).abs() < 1e-12, "{}", vs[1]);
        assert!((vs[2] - 4.0).abs() < 1e-12, "{}", vs[2]);
        let mean = vs.iter().sum::<f64>() / 3.0;
        assert!((mean - 2.0).abs() < 1e-12);
    }

    /// 1×1 identity conv: conv_output(x, 1) == x, so the report's per-channel
    /// variances are exactly the hand-computable input-map variances.
    fn identity_conv_model(channels: usize, hw: usize) -> ModelGraph {
        let mut w = Tensor::zeros(&[channels, channels, 1, 1]);
        for c in 0..channels {
            w.set(&[c, c, 0, 0], 1.0);
        }
        ModelGraph {
            name: "identity".to_string(),
            input_shape: [channels, hw, hw],
            layers: vec![LayerDef::Conv { stride: 1, pad: 0 }],
            slots: vec![ParamSlot::new("conv1", w, Tensor::zeros(&[channels]))],
        }
    }

    #[test]
    fn report_averages_channels_then_images() {
        // two 6×6 channels per image: a step of height 4 (v = 4) and a
        // constant (v = 0); dataset bytes with identity preprocessing
        let img: Vec<u8> = {
            let mut v = Vec::new();
            for i in 0..36 {
                v.push(if i % 6 < 3 { 0u8 } else { 4u8 });
            }
            v.extend(std::iter::repeat_n(7u8, 36));
            v
        };
        let ds = LabeledDataset::new("toy", 6, 6, 2, 2, [img.clone(), img].concat(), vec![0, 1])
            .unwrap();
        let model = identity_conv_model(2, 6);
        let pre = Preprocess::identity(72);
        let report =
            mean_feature_map_variance(&model, 1, &ds, &pre, 10, 1, "no-train", 3.0).unwrap();
        assert_eq!(report.n_images, 2);
        assert_eq!(report.n_channels, 2);
        assert!((report.per_channel[0] - 4.0).abs() < 1e-12);
        assert!((report.per_channel[1] - 0.0).abs() < 1e-12);
        assert!((report.mean_variance - 2.0).abs() < 1e-12);
        // invariant: mean equals the arithmetic mean of the channel list
        let arith = report.per_channel.iter().sum::<f64>() / report.per_channel.len() as f64;
        assert!((report.mean_variance - arith).abs() < 1e-12);
        assert_eq!(report.layer, "conv1");
        assert_eq!(
            report.csv_row(),
            format!("no-train,conv1,3,{},2,2", report.mean_variance)
        );
    }

    #[test]
    fn report_mean_is_permutation_invariant_over_images() {
        let mut rng = rng_from_seed(33);
        let images: Vec<Vec<u8>> = (0..6)
            .map(|_| (0..36).map(|_| rng.gen_range(0u8..=255)).collect())
            .collect();
        let labels = vec![0u8; 6];
        let fwd = LabeledDataset::new("a", 6, 6, 1, 2, images.concat(), labels.clone()).unwrap();
        let rev: Vec<u8> = images.iter().rev().cloned().collect::<Vec<_>>().concat();
        let bwd = LabeledDataset::new("b", 6, 6, 1, 2, rev, labels).unwrap();
        let model = identity_conv_model(1, 6);
        let pre = Preprocess::identity(36);
        let a = mean_feature_map_variance(&model, 1, &fwd, &pre, 100, 5, "r", 0.0).unwrap();
        let b = mean_feature_map_variance(&model, 1, &bwd, &pre, 100, 5, "r", 0.0).unwrap();
        assert!((a.mean_variance - b.mean_variance).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded_and_capped() {
        let a = sample_indices(100, 10, 4);
        let b = sample_indices(100, 10, 4);
        let c = sample_indices(100, 10, 5);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]), "ascending unique: {a:?}");
        assert!(a.iter().all(|&i| i < 100));
        assert_ne!(
            a, c,
            "different seed should usually pick a different subset"
        );
        assert_eq!(sample_indices(5, 10, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn identity_conv_really_is_identity() {
        // guard for the test helper itself
        let model = identity_conv_model(2, 6);
        let mut rng = rng_from_seed(2);
        let data: Vec<f64> = (0..72).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor::from_vec(&[1, 2, 6, 6], data.clone()).unwrap();
        let y = conv2d_forward(&x, &model.slots[0].weights, &model.slots[0].bias, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }
}
