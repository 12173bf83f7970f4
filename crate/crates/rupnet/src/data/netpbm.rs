//! Binary netpbm (P5 grayscale / P6 RGB, maxval 255) decoding and encoding.
//!
//! Header: ASCII magic, whitespace-separated width, height, maxval, one
//! whitespace byte, then raw row-major payload (RGB interleaved for P6).
//! `#` comments inside the header are skipped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Decode {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of header"))?;
        self.pos += 1;
        Ok(b)
    }

    fn skip_header_padding(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(self.err("unexpected end of header")),
            }
        }
    }

    fn ascii_uint(&mut self) -> Result<u32> {
        self.skip_header_padding()?;
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(self.err("header number out of range"));
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected ASCII integer in header"));
        }
        Ok(value as u32)
    }
}

/// Decoded image: channel count, height, width, raw interleaved bytes.
pub struct RawImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub bytes: Vec<u8>,
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<RawImage> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        path,
    };
    let m0 = cur.take()?;
    let m1 = cur.take()?;
    let channels = match (m0, m1) {
        (b'P', b'5') => 1,
        (b'P', b'6') => 3,
        _ => {
            cur.pos = 0;
            return Err(cur.err(format!(
                "bad magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(&bytes[..bytes.len().min(2)])
            )));
        }
    };
    let width = cur.ascii_uint()? as usize;
    let height = cur.ascii_uint()? as usize;
    let maxval = cur.ascii_uint()?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval != 255 {
        return Err(cur.err(format!("maxval must be 255, got {maxval}")));
    }
    let sep = cur.take()?;
    if !sep.is_ascii_whitespace() {
        cur.pos -= 1;
        return Err(cur.err("expected single whitespace byte after maxval"));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        cur.pos = bytes.len();
        return Err(cur.err(format!(
            "payload truncated: need {expected} bytes, have {}",
            payload.len()
        )));
    }
    Ok(RawImage {
        channels,
        height,
        width,
        bytes: payload[..expected].to_vec(),
    })
}

/// Reads a netpbm file into a CHW tensor with values byte/255 in [0, 1].
/// P6 gives 3 channels, P5 gives 1.
pub fn read_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = decode(path, &bytes)?;
    let plane = raw.height * raw.width;
    let mut data = vec![0.0f32; raw.channels * plane];
    for (i, &b) in raw.bytes.iter().enumerate() {
        let c = i % raw.channels;
        let pixel = i / raw.channels;
        data[c * plane + pixel] = f32::from(b) / 255.0;
    }
    Tensor::from_vec(&[raw.channels, raw.height, raw.width], data)
}

/// Writes a CHW tensor with values in [0, 1] as P5 (1 channel) or P6
/// (3 channels). Bytes are round(v * 255); the read/write round trip is
/// exact after that quantization.
pub fn write_image(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [c, h, w] = t.dims3()?;
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => {
            return Err(Error::InvalidArgument(format!(
                "write_image supports 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut out = Vec::with_capacity(32 + c * h * w);
    out.extend_from_slice(format!("{magic}\n{w} {h}\n255\n").as_bytes());
    let plane = h * w;
    let data = t.data();
    for pixel in 0..plane {
        for ci in 0..c {
            let v = data[ci * plane + pixel].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("rupnet-netpbm-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn p6_two_pixels() {
        // (255,0,0), (0,0,255) -> planes R [1,0], G [0,0], B [0,1]
        let path = tmp("two.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        std::fs::write(&path, bytes).unwrap();
        let t = read_image(&path).unwrap();
        assert_eq!(t.shape(), &[3, 1, 2]);
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn p5_zero_bytes() {
        let path = tmp("zero.pgm");
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 6]);
        std::fs::write(&path, bytes).unwrap();
        let t = read_image(&path).unwrap();
        assert_eq!(t.shape(), &[1, 2, 3]);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_payload_is_decode_error() {
        let path = tmp("trunc.pgm");
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        std::fs::write(&path, bytes).unwrap();
        match read_image(&path) {
            Err(Error::Decode { offset, reason, .. }) => {
                assert!(offset > 0);
                assert!(reason.contains("truncated"), "{reason}");
            }
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_maxval_rejected() {
        let path = tmp("max.pgm");
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_image(&path), Err(Error::Decode { .. })));
    }

    #[test]
    fn comments_in_header_skipped() {
        let path = tmp("comment.pgm");
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        std::fs::write(&path, bytes).unwrap();
        let t = read_image(&path).unwrap();
        assert_eq!(t.shape(), &[1, 1, 2]);
    }

    #[test]
    fn mask_bytes_scale_to_full_range() {
        let path = tmp("mask.pgm");
        let t = Tensor::from_vec(&[1, 2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        write_image(&t, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let payload = &bytes[bytes.len() - 4..];
        assert_eq!(payload, &[0, 255, 255, 0]);
    }

    #[test]
    fn two_channel_tensor_rejected() {
        let t = Tensor::zeros(&[2, 2, 2]).unwrap();
        assert!(matches!(
            write_image(&t, tmp("bad.pgm")),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn quantized_roundtrip_exact() {
        let path = tmp("rt.ppm");
        // values already on the 1/255 grid survive exactly
        let vals: Vec<f32> = (0..12).map(|i| (i * 20) as f32 / 255.0).collect();
        let t = Tensor::from_vec(&[3, 2, 2], vals).unwrap();
        write_image(&t, &path).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back, t);
    }
}
