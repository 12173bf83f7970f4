//! Deterministic synthetic dataset: bright anti-aliased ellipses ("polyps")
//! over a smooth noisy background. The mask is the exact union of ellipse
//! interiors tested at pixel centers, so it can be verified against an
//! independent point-in-ellipse oracle.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Provenance, Sample};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub size: usize,
    /// Inclusive range for the number of ellipses per image.
    pub blob_count: [usize; 2],
    /// Semi-axis range as a fraction of the image size.
    pub radius_frac: [f64; 2],
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 10,
            size: 64,
            blob_count: [1, 3],
            radius_frac: [0.05, 0.25],
            noise_amplitude: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("synth count must be >= 1".into()));
        }
        if self.size < 8 || self.size % 8 != 0 {
            return Err(Error::Config(format!(
                "synth size must be a positive multiple of 8, got {}",
                self.size
            )));
        }
        let [blo, bhi] = self.blob_count;
        if blo == 0 || blo > bhi {
            return Err(Error::Config("blob count range must satisfy 1 <= lo <= hi".into()));
        }
        let [rlo, rhi] = self.radius_frac;
        if !(rlo > 0.0 && rlo <= rhi && rhi < 0.5) {
            return Err(Error::Config(
                "radius fractions must satisfy 0 < lo <= hi < 0.5".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_amplitude) {
            return Err(Error::Config("noise amplitude must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Axis-aligned ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    /// Interior test: ((x-cx)/rx)^2 + ((y-cy)/ry)^2 <= 1.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Geometry of one synthetic sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ellipses: Vec<Ellipse>,
}

struct Appearance {
    /// Per-ellipse RGB base intensity.
    colors: Vec<[f64; 3]>,
    /// Per-ellipse radial darkening factor.
    falloff: Vec<f64>,
    /// Per-channel background gray level.
    background: [f64; 3],
}

fn per_sample_rng(cfg: &SynthConfig, index: usize) -> Rng {
    Rng::with_stream(cfg.seed, stream::SYNTH_SAMPLE_BASE + index as u64)
}

fn sample_scene_with_rng(cfg: &SynthConfig, rng: &mut Rng) -> (Scene, Appearance) {
    let s = cfg.size as f64;
    let [blo, bhi] = cfg.blob_count;
    let k = blo + rng.below(bhi - blo + 1);
    let mut ellipses = Vec::with_capacity(k);
    let mut colors = Vec::with_capacity(k);
    let mut falloff = Vec::with_capacity(k);
    for _ in 0..k {
        let rx = rng.uniform(cfg.radius_frac[0], cfg.radius_frac[1]) * s;
        let ry = rng.uniform(cfg.radius_frac[0], cfg.radius_frac[1]) * s;
        let cx = rng.uniform(0.15, 0.85) * s;
        let cy = rng.uniform(0.15, 0.85) * s;
        ellipses.push(Ellipse { cx, cy, rx, ry });
        colors.push([
            rng.uniform(0.55, 0.95),
            rng.uniform(0.55, 0.95),
            rng.uniform(0.55, 0.95),
        ]);
        falloff.push(rng.uniform(0.0, 0.3));
    }
    // Keep total ellipse area under 0.45 * size^2 so the mask never exceeds
    // half the image, then floor the semi-axes at one pixel so every ellipse
    // covers at least its own center pixel.
    let total_area: f64 = ellipses
        .iter()
        .map(|e| std::f64::consts::PI * e.rx * e.ry)
        .sum();
    let cap = 0.45 * s * s;
    if total_area > cap {
        let shrink = (cap / total_area).sqrt();
        for e in &mut ellipses {
            e.rx *= shrink;
            e.ry *= shrink;
        }
    }
    for e in &mut ellipses {
        e.rx = e.rx.max(1.0);
        e.ry = e.ry.max(1.0);
    }
    let background = [
        rng.uniform(0.2, 0.4),
        rng.uniform(0.2, 0.4),
        rng.uniform(0.2, 0.4),
    ];
    (Scene { ellipses }, Appearance {
        colors,
        falloff,
        background,
    })
}

/// Geometry of sample `index` under the given config. Rendering draws its
/// appearance from the same per-sample stream, so a dataset's mask can be
/// re-derived from this scene alone.
pub fn sample_scene(cfg: &SynthConfig, index: usize) -> Scene {
    sample_scene_with_rng(cfg, &mut per_sample_rng(cfg, index)).0
}

/// Smooth background: a coarse noise grid bilinearly stretched to full size,
/// scaled by the configured amplitude around the per-channel gray level.
fn render_background(
    size: usize,
    app: &Appearance,
    amplitude: f64,
    rng: &mut Rng,
) -> Result<Tensor> {
    let grid = size / 8 + 1;
    let coarse: Tensor = rng.normal_tensor(&[3, grid, grid], 0.0, 1.0)?;
    let noise = crate::data::resize_bilinear(&coarse, size, size)?;
    let plane = size * size;
    let mut data = vec![0.0f32; 3 * plane];
    for c in 0..3 {
        let base = app.background[c] as f32;
        let amp = (amplitude * 0.5) as f32;
        for k in 0..plane {
            data[c * plane + k] = base + noise.data()[c * plane + k] * amp;
        }
    }
    Tensor::from_vec(&[3, size, size], data)
}

fn render_sample(cfg: &SynthConfig, index: usize) -> Result<Sample> {
    let mut rng = per_sample_rng(cfg, index);
    let (scene, app) = sample_scene_with_rng(cfg, &mut rng);
    let size = cfg.size;
    let plane = size * size;

    let mut image = render_background(size, &app, cfg.noise_amplitude, &mut rng)?;

    for (ei, e) in scene.ellipses.iter().enumerate() {
        let color = app.colors[ei];
        let dark = app.falloff[ei];
        let x_lo = ((e.cx - e.rx - 1.0).floor().max(0.0)) as usize;
        let x_hi = ((e.cx + e.rx + 1.0).ceil().min(size as f64)) as usize;
        let y_lo = ((e.cy - e.ry - 1.0).floor().max(0.0)) as usize;
        let y_hi = ((e.cy + e.ry + 1.0).ceil().min(size as f64)) as usize;
        for py in y_lo..y_hi {
            for px in x_lo..x_hi {
                // 4x4 subsample coverage for soft edges
                let mut hits = 0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        let fx = px as f64 + (sx as f64 + 0.5) / 4.0;
                        let fy = py as f64 + (sy as f64 + 0.5) / 4.0;
                        if e.contains(fx, fy) {
                            hits += 1;
                        }
                    }
                }
                if hits == 0 {
                    continue;
                }
                let cov = hits as f64 / 16.0;
                let cxp = px as f64 + 0.5;
                let cyp = py as f64 + 0.5;
                let dx = (cxp - e.cx) / e.rx;
                let dy = (cyp - e.cy) / e.ry;
                let d2 = (dx * dx + dy * dy).min(1.0);
                for c in 0..3 {
                    let tint = (color[c] * (1.0 - dark * d2)) as f32;
                    let idx = c * plane + py * size + px;
                    let old = image.data()[idx];
                    image.data_mut()[idx] = old * (1.0 - cov as f32) + tint * cov as f32;
                }
            }
        }
    }
    for v in image.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    // mask: exact union of ellipse interiors tested at pixel centers
    let mut mask = Tensor::zeros(&[1, size, size])?;
    for py in 0..size {
        for px in 0..size {
            let inside = scene
                .ellipses
                .iter()
                .any(|e| e.contains(px as f64 + 0.5, py as f64 + 0.5));
            if inside {
                mask.data_mut()[py * size + px] = 1.0;
            }
        }
    }

    Ok(Sample {
        id: format!("synth_{index:04}"),
        image,
        mask,
    })
}

/// Generates `cfg.count` samples, fully determined by `cfg.seed`. Each sample
/// draws from its own stream, so changing the count leaves earlier samples
/// untouched.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let samples = (0..cfg.count)
        .map(|i| render_sample(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        provenance: Provenance::Synthetic,
        size: cfg.size,
    })
}
