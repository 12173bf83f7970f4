//! On-the-fly augmentation: flips, right-angle rotations, and multiplicative
//! brightness. Geometric transforms hit image and mask identically;
//! brightness touches the image only.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub enabled: bool,
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    /// Rotation angles drawn uniformly; subset of {0, 90, 180, 270} degrees.
    pub rotation_set: Vec<u16>,
    /// Multiplicative brightness range [lo, hi] applied to the image.
    pub brightness_range: [f64; 2],
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            rotation_set: vec![0, 90, 180, 270],
            brightness_range: [0.8, 1.2],
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        for p in [self.hflip_prob, self.vflip_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("flip probability {p} not in [0, 1]")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for &r in &self.rotation_set {
            if !matches!(r, 0 | 90 | 180 | 270) {
                return Err(Error::Config(format!(
                    "rotation {r} not in {{0, 90, 180, 270}}"
                )));
            }
            if !seen.insert(r) {
                return Err(Error::Config(format!("duplicate rotation {r}")));
            }
        }
        let [lo, hi] = self.brightness_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!(
                "brightness range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

fn flip_h(t: &Tensor) -> Tensor {
    let [c, h, w] = t.dims3().expect("rank-3 sample tensor");
    let src = t.data();
    let mut out = vec![0.0f32; src.len()];
    for ci in 0..c {
        for r in 0..h {
            let base = ci * h * w + r * w;
            for col in 0..w {
                out[base + col] = src[base + (w - 1 - col)];
            }
        }
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

fn flip_v(t: &Tensor) -> Tensor {
    let [c, h, w] = t.dims3().expect("rank-3 sample tensor");
    let src = t.data();
    let mut out = vec![0.0f32; src.len()];
    for ci in 0..c {
        for r in 0..h {
            let dst = ci * h * w + r * w;
            let s = ci * h * w + (h - 1 - r) * w;
            out[dst..dst + w].copy_from_slice(&src[s..s + w]);
        }
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

/// Clockwise rotation by `angle` degrees; 90/270 require square inputs so
/// shapes never change.
fn rotate(t: &Tensor, angle: u16) -> Result<Tensor> {
    let [c, h, w] = t.dims3()?;
    if angle == 0 {
        return Ok(t.clone());
    }
    if (angle == 90 || angle == 270) && h != w {
        return Err(Error::InvalidArgument(format!(
            "right-angle rotation needs square images, got {h}x{w}"
        )));
    }
    let src = t.data();
    let mut out = vec![0.0f32; src.len()];
    for ci in 0..c {
        let base = ci * h * w;
        for r in 0..h {
            for col in 0..w {
                let (sr, sc) = match angle {
                    // out[r][c] = in[h-1-c][r] rotates clockwise
                    90 => (h - 1 - col, r),
                    180 => (h - 1 - r, w - 1 - col),
                    270 => (col, w - 1 - r),
                    _ => unreachable!("validated angle"),
                };
                out[base + r * w + col] = src[base + sr * w + sc];
            }
        }
    }
    Tensor::from_vec(t.shape(), out)
}

/// Applies one random draw of the configured transforms. Draw order is
/// fixed: hflip, vflip, rotation, brightness. A disabled config returns the
/// sample unchanged without consuming draws.
pub fn augment(sample: &Sample, rng: &mut Rng, cfg: &AugmentationConfig) -> Result<Sample> {
    if !cfg.enabled {
        return Ok(sample.clone());
    }
    let mut image = sample.image.clone();
    let mut mask = sample.mask.clone();
    if rng.chance(cfg.hflip_prob) {
        image = flip_h(&image);
        mask = flip_h(&mask);
    }
    if rng.chance(cfg.vflip_prob) {
        image = flip_v(&image);
        mask = flip_v(&mask);
    }
    if !cfg.rotation_set.is_empty() {
        let angle = cfg.rotation_set[rng.below(cfg.rotation_set.len())];
        image = rotate(&image, angle)?;
        mask = rotate(&mask, angle)?;
    }
    let [lo, hi] = cfg.brightness_range;
    let factor = rng.uniform(lo, hi) as f32;
    image = image.map(|v| (v * factor).clamp(0.0, 1.0));
    Ok(Sample {
        id: sample.id.clone(),
        image,
        mask,
    })
}
