//! Distortion synthesis: motion-blur, defocus-blur, and additive Gaussian
//! noise, composed in that order, plus per-image seeded application over
//! whole datasets.
//!
//! All three distortions share one scalar "level" axis:
//!
//! * motion — the level is the length `L` of a random walk; the kernel is the
//!   walk's visit-count histogram, normalized to sum 1;
//! * defocus — the level is the radius of an anti-aliased disc;
//! * gaussian — the level is the noise standard deviation in 8-bit pixel
//!   units.
//!
//! Level 0 is the identity for each stage. Kernels are applied by
//! correlation with anchor alignment and replicate-border padding; results
//! round half-up and clamp to `[0, 255]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{LabeledDataset, Manifest};
use crate::error::{DatasetError, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Dense 2-D blur kernel with an anchor cell that aligns over the output
/// pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub height: usize,
    pub width: usize,
    /// `(row, col)` of the cell that sits on the output pixel.
    pub anchor: (usize, usize),
    /// Row-major, `height × width`, non-negative, sums to 1.
    pub data: Vec<f64>,
}

impl Kernel {
    /// The 1×1 identity kernel.
    pub fn identity() -> Kernel {
        Kernel {
            height: 1,
            width: 1,
            anchor: (0, 0),
            data: vec![1.0],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Step order for the motion walk: the 8-neighborhood in row-major order,
/// skipping the center. Pinned — changing it changes every seeded kernel.
const WALK_DIRS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Build a motion kernel from an explicit step list (each entry indexes
/// [`WALK_DIRS`]). The walk starts at the origin; every visited cell —
/// including revisits and the starting cell — contributes one count, and the
/// histogram is cropped to its bounding box and normalized by the total
/// visit count `steps.len() + 1`. The anchor is the origin's position inside
/// the crop.
pub fn motion_kernel_from_steps(steps: &[u8]) -> Kernel {
    let l = steps.len() as i64;
    if l == 0 {
        return Kernel::identity();
    }
    let side = (2 * l + 1) as usize;
    let mut counts = vec![0u64; side * side];
    let at = |y: i64, x: i64| ((y + l) as usize) * side + (x + l) as usize;

    let (mut y, mut x) = (0i64, 0i64);
    counts[at(y, x)] += 1;
    for &s in steps {
        let (dy, dx) = WALK_DIRS[s as usize];
        y += dy;
        x += dx;
        counts[at(y, x)] += 1;
    }

    let (mut y0, mut y1, mut x0, mut x1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for yy in -l..=l {
        for xx in -l..=l {
            if counts[at(yy, xx)] > 0 {
                y0 = y0.min(yy);
                y1 = y1.max(yy);
                x0 = x0.min(xx);
                x1 = x1.max(xx);
            }
        }
    }

    let height = (y1 - y0 + 1) as usize;
    let width = (x1 - x0 + 1) as usize;
    let total = (steps.len() + 1) as f64;
    let mut data = Vec::with_capacity(height * width);
    for yy in y0..=y1 {
        for xx in x0..=x1 {
            data.push(counts[at(yy, xx)] as f64 / total);
        }
    }
    Kernel {
        height,
        width,
        anchor: ((-y0) as usize, (-x0) as usize),
        data,
    }
}

/// Motion-blur kernel for a given level: a seeded random walk of
/// `round(level)` steps over the 8-neighborhood. Level 0 (or anything that
/// rounds to 0) is the identity.
pub fn gen_motion_kernel(level: f64, rng: &mut impl Rng) -> Kernel {
    assert!(
        level >= 0.0 && level.is_finite(),
        "motion level must be >= 0"
    );
    let steps = level.round() as usize;
    let dirs: Vec<u8> = (0..steps).map(|_| rng.gen_range(0..8u8)).collect();
    motion_kernel_from_steps(&dirs)
}

/// Sub-pixel sample grid per cell for the defocus disc.
const DISC_SUBSAMPLES: usize = 16;

/// Defocus-blur kernel: an anti-aliased disc of the given radius on a
/// `2·ceil(r)+1` square, each cell's weight proportional to the fraction of
/// a 16×16 sub-grid falling inside the disc, normalized to sum 1. Radius 0
/// is the identity.
pub fn gen_defocus_kernel(radius: f64) -> Kernel {
    assert!(
        radius >= 0.0 && radius.is_finite(),
        "defocus radius must be >= 0"
    );
    if radius == 0.0 {
        return Kernel::identity();
    }
    let c = radius.ceil() as usize;
    let side = 2 * c + 1;
    let r2 = radius * radius;
    let mut counts = vec![0u64; side * side];
    let mut total = 0u64;
    for y in 0..side {
        for x in 0..side {
            let mut inside = 0u64;
            for sy in 0..DISC_SUBSAMPLES {
                for sx in 0..DISC_SUBSAMPLES {
                    let py = y as f64 - c as f64 - 0.5 + (sy as f64 + 0.5) / DISC_SUBSAMPLES as f64;
                    let px = x as f64 - c as f64 - 0.5 + (sx as f64 + 0.5) / DISC_SUBSAMPLES as f64;
                    if py * py + px * px <= r2 {
                        inside += 1;
                    }
                }
            }
            counts[y * side + x] = inside;
            total += inside;
        }
    }
    let data = counts.iter().map(|&n| n as f64 / total as f64).collect();
    Kernel {
        height: side,
        width: side,
        anchor: (c, c),
        data,
    }
}

/// Round half-up and clamp to the u8 range.
#[inline]
fn round_clamp_u8(v: f64) -> u8 {
    let r = (v + 0.5).floor();
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Correlate each channel plane with the kernel, anchor-aligned, replicating
/// the border outside the image. Output pixels round half-up and clamp.
pub fn apply_kernel(
    src: &[u8],
    height: usize,
    width: usize,
    channels: usize,
    kernel: &Kernel,
) -> Vec<u8> {
    assert_eq!(src.len(), height * width * channels);
    assert!(kernel.anchor.0 < kernel.height && kernel.anchor.1 < kernel.width);
    let (ay, ax) = (kernel.anchor.0 as i64, kernel.anchor.1 as i64);
    let mut out = vec![0u8; src.len()];
    for ch in 0..channels {
        let plane = &src[ch * height * width..(ch + 1) * height * width];
        let out_plane = &mut out[ch * height * width..(ch + 1) * height * width];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for ky in 0..kernel.height {
                    let iy = (y as i64 + ky as i64 - ay).clamp(0, height as i64 - 1) as usize;
                    for kx in 0..kernel.width {
                        let ix = (x as i64 + kx as i64 - ax).clamp(0, width as i64 - 1) as usize;
                        acc += kernel.get(ky, kx) * plane[iy * width + ix] as f64;
                    }
                }
                out_plane[y * width + x] = round_clamp_u8(acc);
            }
        }
    }
    out
}

/// Add zero-mean Gaussian noise with standard deviation `sigma` (8-bit pixel
/// units) to every byte, rounding half-up and clamping. `sigma <= 0` leaves
/// the data untouched and consumes no randomness.
pub fn add_gaussian_noise(data: &mut [u8], sigma: f64, rng: &mut impl Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for b in data.iter_mut() {
        *b = round_clamp_u8(*b as f64 + normal.sample(rng));
    }
}

/// How per-image levels are drawn from the spec's level values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSampling {
    /// Use the levels exactly as given, for every image.
    Fixed,
    /// Per image, draw each level uniformly from `{0, 1, …, floor(level)}`.
    UniformInteger,
    /// Per image, draw each level uniformly from `[0, level]`.
    UniformContinuous,
}

impl LevelSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelSampling::Fixed => "fixed",
            LevelSampling::UniformInteger => "uniform-integer",
            LevelSampling::UniformContinuous => "uniform-continuous",
        }
    }

    pub fn parse(s: &str) -> Option<LevelSampling> {
        match s {
            "fixed" => Some(LevelSampling::Fixed),
            "uniform-integer" => Some(LevelSampling::UniformInteger),
            "uniform-continuous" => Some(LevelSampling::UniformContinuous),
            _ => None,
        }
    }
}

/// A full distortion setting: level (or maximum level, when sampling) for
/// each stage, plus the sampling mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSpec {
    pub motion_level: f64,
    pub defocus_radius: f64,
    pub gaussian_sigma: f64,
    pub level_sampling: LevelSampling,
}

/// Concrete per-image levels after sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedLevels {
    pub motion: f64,
    pub defocus: f64,
    pub sigma: f64,
}

impl DistortionSpec {
    /// The do-nothing spec: all levels zero, fixed sampling.
    pub fn none() -> DistortionSpec {
        DistortionSpec {
            motion_level: 0.0,
            defocus_radius: 0.0,
            gaussian_sigma: 0.0,
            level_sampling: LevelSampling::Fixed,
        }
    }

    /// Draw this image's levels. Draw order is pinned: motion, then defocus,
    /// then gaussian. Components whose level is 0 draw nothing.
    pub fn resolve(&self, rng: &mut impl Rng) -> ResolvedLevels {
        let draw = |v: f64, rng: &mut dyn rand::RngCore| -> f64 {
            match self.level_sampling {
                LevelSampling::Fixed => v,
                LevelSampling::UniformInteger => {
                    let hi = v.floor() as u64;
                    if hi == 0 {
                        0.0
                    } else {
                        rng.gen_range(0..=hi) as f64
                    }
                }
                LevelSampling::UniformContinuous => {
                    if v <= 0.0 {
                        0.0
                    } else {
                        rng.gen_range(0.0..=v)
                    }
                }
            }
        };
        ResolvedLevels {
            motion: draw(self.motion_level, rng),
            defocus: draw(self.defocus_radius, rng),
            sigma: draw(self.gaussian_sigma, rng),
        }
    }

    /// Short human-readable tag, e.g. `m3-d0-g0-fixed`.
    pub fn tag(&self) -> String {
        format!(
            "m{}-d{}-g{}-{}",
            self.motion_level,
            self.defocus_radius,
            self.gaussian_sigma,
            self.level_sampling.as_str()
        )
    }

    pub fn write_manifest(&self, m: &mut Manifest) {
        m.set("motion_level", self.motion_level);
        m.set("defocus_radius", self.defocus_radius);
        m.set("gaussian_sigma", self.gaussian_sigma);
        m.set("level_sampling", self.level_sampling.as_str());
    }

    pub fn read_manifest(m: &Manifest, path: &std::path::Path) -> Result<DistortionSpec> {
        let f = |key: &str| -> Result<f64> {
            let raw = m.require(key, path)?;
            raw.parse().map_err(|_| {
                DatasetError::BadManifest {
                    path: path.to_path_buf(),
                    detail: format!("key {key:?}: expected number, got {raw:?}"),
                }
                .into()
            })
        };
        let sampling_raw = m.require("level_sampling", path)?;
        let level_sampling =
            LevelSampling::parse(sampling_raw).ok_or_else(|| DatasetError::BadManifest {
                path: path.to_path_buf(),
                detail: format!("unknown level_sampling {sampling_raw:?}"),
            })?;
        Ok(DistortionSpec {
            motion_level: f("motion_level")?,
            defocus_radius: f("defocus_radius")?,
            gaussian_sigma: f("gaussian_sigma")?,
            level_sampling,
        })
    }
}

/// Distort one image in place: motion blur, then defocus blur, then noise,
/// drawing levels and walk steps from `rng`.
pub fn distort_image(
    image: &mut [u8],
    height: usize,
    width: usize,
    channels: usize,
    spec: &DistortionSpec,
    rng: &mut impl Rng,
) {
    let levels = spec.resolve(rng);
    if levels.motion.round() >= 1.0 {
        let kernel = gen_motion_kernel(levels.motion, rng);
        let blurred = apply_kernel(image, height, width, channels, &kernel);
        image.copy_from_slice(&blurred);
    }
    if levels.defocus > 0.0 {
        let kernel = gen_defocus_kernel(levels.defocus);
        let blurred = apply_kernel(image, height, width, channels, &kernel);
        image.copy_from_slice(&blurred);
    }
    if levels.sigma > 0.0 {
        add_gaussian_noise(image, levels.sigma, rng);
    }
}

/// Distort every image of a dataset. Image `i` uses an RNG seeded by
/// `derive_seed(master_seed, i)`, so its result depends only on the master
/// seed, its row index, and its own bytes — never on processing order.
pub fn distort_dataset(
    dataset: &LabeledDataset,
    spec: &DistortionSpec,
    master_seed: u64,
) -> LabeledDataset {
    let mut out = dataset.clone();
    out.name = format!("{}+{}", dataset.name, spec.tag());
    let (h, w, c) = (out.height, out.width, out.channels);
    for i in 0..out.len() {
        let mut rng = rng_from_seed(derive_seed(master_seed, i as u64));
        distort_image(out.image_mut(i), h, w, c, spec, &mut rng);
    }
    out
}
