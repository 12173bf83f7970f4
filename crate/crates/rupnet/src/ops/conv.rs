//! 2-D convolution, stride 1, kernels 1x1 (pad 0) and 3x3 (pad 1), so the
//! spatial size is always preserved.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// Below this element count the plane loop runs serially; rayon dispatch
/// costs more than the work itself on gradient-check-sized tensors.
const PAR_THRESHOLD: usize = 1 << 14;

fn run_planes<E: Send>(
    data: &mut [E],
    plane: usize,
    f: impl Fn(usize, &mut [E]) + Sync + Send,
) {
    if data.len() < PAR_THRESHOLD {
        for (idx, chunk) in data.chunks_mut(plane).enumerate() {
            f(idx, chunk);
        }
    } else {
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(idx, chunk)| f(idx, chunk));
    }
}

fn check_conv_args<E: Scalar>(
    x: &TensorBase<E>,
    w: &TensorBase<E>,
    b: Option<&TensorBase<E>>,
    pad: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let [n, cin, h, width] = x.dims4()?;
    let [cout, wcin, k, k2] = w.dims4()?;
    if k != k2 || !(k == 1 || k == 3) {
        return Err(Error::InvalidArgument(format!(
            "conv2d supports square 1x1 or 3x3 kernels, got {}x{}",
            k, k2
        )));
    }
    if pad != (k - 1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "conv2d requires pad {} for kernel {k}, got {pad}",
            (k - 1) / 2
        )));
    }
    if wcin != cin {
        return Err(Error::ShapeMismatch(format!(
            "conv2d: input has {cin} channels but weights expect {wcin}"
        )));
    }
    if let Some(bias) = b {
        if bias.shape() != [cout] {
            return Err(Error::ShapeMismatch(format!(
                "conv2d: bias shape {:?}, expected [{cout}]",
                bias.shape()
            )));
        }
    }
    Ok((n, cin, cout, h, width, k))
}

/// y[n,co,i,j] = b[co] + sum over ci,u,v of x[n,ci,i+u-pad,j+v-pad] * w[co,ci,u,v],
/// zero outside bounds. Output spatial size equals input spatial size.
pub fn conv2d<E: Scalar>(
    x: &TensorBase<E>,
    w: &TensorBase<E>,
    b: Option<&TensorBase<E>>,
    pad: usize,
) -> Result<TensorBase<E>> {
    let (n, cin, cout, h, width, k) = check_conv_args(x, w, b, pad)?;
    let plane = h * width;
    let xd = x.data();
    let wd = w.data();
    let mut y = TensorBase::zeros(&[n, cout, h, width])?;
    let pad = pad as isize;

    run_planes(y.data_mut(), plane, |idx, yplane| {
        let ni = idx / cout;
        let co = idx % cout;
        if let Some(bias) = b {
            let bv = bias.data()[co];
            for v in yplane.iter_mut() {
                *v = bv;
            }
        }
        for ci in 0..cin {
            let xplane = &xd[(ni * cin + ci) * plane..(ni * cin + ci + 1) * plane];
            let wbase = (co * cin + ci) * k * k;
            for u in 0..k {
                let du = u as isize - pad;
                let i_lo = (-du).max(0) as usize;
                let i_hi = ((h as isize - du).min(h as isize)) as usize;
                for v in 0..k {
                    let wv = wd[wbase + u * k + v];
                    if wv == E::zero() {
                        continue;
                    }
                    let dv = v as isize - pad;
                    let j_lo = (-dv).max(0) as usize;
                    let j_hi = ((width as isize - dv).min(width as isize)) as usize;
                    if j_lo >= j_hi {
                        continue;
                    }
                    for i in i_lo..i_hi {
                        let src_row = ((i as isize + du) as usize) * width;
                        let src_lo = (j_lo as isize + dv) as usize;
                        let dst = &mut yplane[i * width + j_lo..i * width + j_hi];
                        let src = &xplane[src_row + src_lo..src_row + src_lo + (j_hi - j_lo)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * *s;
                        }
                    }
                }
            }
        }
    });
    Ok(y)
}

/// Gradients of `conv2d`: returns (dx, dw, db). `db` is present iff
/// `has_bias`; it is the sum of the upstream over batch and space per output
/// channel.
pub fn conv2d_backward<E: Scalar>(
    x: &TensorBase<E>,
    w: &TensorBase<E>,
    pad: usize,
    has_bias: bool,
    upstream: &TensorBase<E>,
) -> Result<(TensorBase<E>, TensorBase<E>, Option<TensorBase<E>>)> {
    let (n, cin, cout, h, width, k) = check_conv_args(x, w, None, pad)?;
    if upstream.shape() != [n, cout, h, width] {
        return Err(Error::ShapeMismatch(format!(
            "conv2d backward: upstream {:?}, expected {:?}",
            upstream.shape(),
            [n, cout, h, width]
        )));
    }
    let plane = h * width;
    let xd = x.data();
    let wd = w.data();
    let ud = upstream.data();
    let pad = pad as isize;

    // dx[n,ci,a,b] = sum over co,u,v of upstream[n,co,a-u+pad,b-v+pad] * w[co,ci,u,v]
    let mut dx = TensorBase::zeros(x.shape())?;
    run_planes(dx.data_mut(), plane, |idx, dxplane| {
        let ni = idx / cin;
        let ci = idx % cin;
        for co in 0..cout {
            let uplane = &ud[(ni * cout + co) * plane..(ni * cout + co + 1) * plane];
            let wbase = (co * cin + ci) * k * k;
            for u in 0..k {
                let du = u as isize - pad;
                // target row a = r + du for upstream row r
                let a_lo = du.max(0) as usize;
                let a_hi = ((h as isize + du).min(h as isize)) as usize;
                for v in 0..k {
                    let wv = wd[wbase + u * k + v];
                    if wv == E::zero() {
                        continue;
                    }
                    let dv = v as isize - pad;
                    let b_lo = dv.max(0) as usize;
                    let b_hi = ((width as isize + dv).min(width as isize)) as usize;
                    if b_lo >= b_hi {
                        continue;
                    }
                    for a in a_lo..a_hi {
                        let src_row = ((a as isize - du) as usize) * width;
                        let src_lo = (b_lo as isize - dv) as usize;
                        let dst = &mut dxplane[a * width + b_lo..a * width + b_hi];
                        let src = &uplane[src_row + src_lo..src_row + src_lo + (b_hi - b_lo)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * *s;
                        }
                    }
                }
            }
        }
    });

    // dw[co,ci,u,v] = sum over n,i,j of upstream[n,co,i,j] * x[n,ci,i+u-pad,j+v-pad]
    let mut dw = TensorBase::zeros(w.shape())?;
    let wplane = cin * k * k;
    run_planes(dw.data_mut(), wplane, |co, dwchunk| {
        for ci in 0..cin {
            for u in 0..k {
                let du = u as isize - pad;
                let i_lo = (-du).max(0) as usize;
                let i_hi = ((h as isize - du).min(h as isize)) as usize;
                for v in 0..k {
                    let dv = v as isize - pad;
                    let j_lo = (-dv).max(0) as usize;
                    let j_hi = ((width as isize - dv).min(width as isize)) as usize;
                    if j_lo >= j_hi {
                        continue;
                    }
                    let mut acc = E::zero();
                    for ni in 0..n {
                        let uplane = &ud[(ni * cout + co) * plane..(ni * cout + co + 1) * plane];
                        let xplane = &xd[(ni * cin + ci) * plane..(ni * cin + ci + 1) * plane];
                        for i in i_lo..i_hi {
                            let src_row = ((i as isize + du) as usize) * width;
                            let src_lo = (j_lo as isize + dv) as usize;
                            let up = &uplane[i * width + j_lo..i * width + j_hi];
                            let xs = &xplane[src_row + src_lo..src_row + src_lo + (j_hi - j_lo)];
                            for (uv, xv) in up.iter().zip(xs) {
                                acc += *uv * *xv;
                            }
                        }
                    }
                    dwchunk[ci * k * k + u * k + v] = acc;
                }
            }
        }
    });

    let db = if has_bias {
        let mut db = TensorBase::zeros(&[cout])?;
        for co in 0..cout {
            let mut acc = E::zero();
            for ni in 0..n {
                let uplane = &ud[(ni * cout + co) * plane..(ni * cout + co + 1) * plane];
                for v in uplane {
                    acc += *v;
                }
            }
            db.data_mut()[co] = acc;
        }
        Some(db)
    } else {
        None
    };

    Ok((dx, dw, db))
}
