//! Image-level resizing: bilinear for images, nearest-neighbor for masks.

use crate::error::Result;
use crate::ops::axis_taps;
use crate::tensor::Tensor;

/// Bilinear resample of a CHW tensor to `oh x ow` using half-pixel centers
/// with edge clamping.
pub fn resize_bilinear(t: &Tensor, oh: usize, ow: usize) -> Result<Tensor> {
    let [c, h, w] = t.dims3()?;
    if (h, w) == (oh, ow) {
        return Ok(t.clone());
    }
    let rows = axis_taps(h, oh);
    let cols = axis_taps(w, ow);
    let mut out = Tensor::zeros(&[c, oh, ow])?;
    let src = t.data();
    let dst = out.data_mut();
    for ci in 0..c {
        let in_base = ci * h * w;
        let out_base = ci * oh * ow;
        for (oi, rt) in rows.iter().enumerate() {
            let ti = rt.frac as f32;
            let r_lo = in_base + rt.lo * w;
            let r_hi = in_base + rt.hi * w;
            for (oj, ct) in cols.iter().enumerate() {
                let tj = ct.frac as f32;
                let top = (1.0 - tj) * src[r_lo + ct.lo] + tj * src[r_lo + ct.hi];
                let bot = (1.0 - tj) * src[r_hi + ct.lo] + tj * src[r_hi + ct.hi];
                dst[out_base + oi * ow + oj] = (1.0 - ti) * top + ti * bot;
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbor resample of a CHW tensor; keeps binary masks binary.
pub fn resize_nearest(t: &Tensor, oh: usize, ow: usize) -> Result<Tensor> {
    let [c, h, w] = t.dims3()?;
    if (h, w) == (oh, ow) {
        return Ok(t.clone());
    }
    let pick = |out_len: usize, in_len: usize| -> Vec<usize> {
        let ratio = in_len as f64 / out_len as f64;
        (0..out_len)
            .map(|d| (((d as f64 + 0.5) * ratio).floor() as usize).min(in_len - 1))
            .collect()
    };
    let rows = pick(oh, h);
    let cols = pick(ow, w);
    let mut out = Tensor::zeros(&[c, oh, ow])?;
    let src = t.data();
    let dst = out.data_mut();
    for ci in 0..c {
        let in_base = ci * h * w;
        let out_base = ci * oh * ow;
        for (oi, &si) in rows.iter().enumerate() {
            for (oj, &sj) in cols.iter().enumerate() {
                dst[out_base + oi * ow + oj] = src[in_base + si * w + sj];
            }
        }
    }
    Ok(out)
}
