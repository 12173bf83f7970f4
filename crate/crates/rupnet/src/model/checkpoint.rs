//! Checkpoint persistence.
//!
//! Binary layout, all little-endian: magic `RUPN`, u32 version (1), u32
//! config-JSON length, config JSON bytes, u32 tensor count, then per tensor
//! { u16 name length, UTF-8 name, u8 rank, rank x u32 dims, product x f32
//! data }. Tensors appear in parameter-store order; batch-norm running
//! statistics are included and carry a `running_` name suffix. The inline
//! config makes checkpoints self-describing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{build_network, Network, NetworkConfig};
use crate::rng::Rng;
use crate::tensor::{Scalar, TensorBase};

const MAGIC: &[u8; 4] = b"RUPN";
const VERSION: u32 = 1;

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptCheckpoint {
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.corrupt("unexpected end of file"))
            }
            Err(e) => Err(self.corrupt(e.to_string())),
        }
    }

    fn read_u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }
}

/// Serializes parameters, BN running statistics, and the config. Values are
/// stored as f32 regardless of the working precision.
pub fn save_checkpoint<E: Scalar>(net: &Network<E>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };

    write(&mut w, MAGIC)?;
    write(&mut w, &VERSION.to_le_bytes())?;
    let config_json = serde_json::to_vec(net.config())
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    write(&mut w, &(config_json.len() as u32).to_le_bytes())?;
    write(&mut w, &config_json)?;
    write(&mut w, &(net.store().len() as u32).to_le_bytes())?;
    for entry in net.store().entries() {
        let name = entry.name.as_bytes();
        write(&mut w, &(name.len() as u16).to_le_bytes())?;
        write(&mut w, name)?;
        let shape = entry.value.shape();
        write(&mut w, &[shape.len() as u8])?;
        for &d in shape {
            write(&mut w, &(d as u32).to_le_bytes())?;
        }
        for &v in entry.value.data() {
            write(&mut w, &v.to_f32().to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint, validating magic, version, and the full name/shape
/// table against the topology rebuilt from the inline config. Errors carry
/// the byte offset where the problem was detected.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = CountingReader::new(BufReader::new(file));

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CorruptCheckpoint {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version = r.read_u32()?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported version {version}, expected {VERSION}")));
    }
    let config_len = r.read_u32()? as usize;
    let mut config_bytes = vec![0u8; config_len];
    r.read_exact(&mut config_bytes)?;
    let config: NetworkConfig = serde_json::from_slice(&config_bytes)
        .map_err(|e| r.corrupt(format!("bad config JSON: {e}")))?;
    config
        .validate()
        .map_err(|e| r.corrupt(format!("invalid config: {e}")))?;

    // Rebuild the topology from the config; every stored tensor must match
    // the expected name and shape in order.
    let mut net = build_network::<f32>(&config, &mut Rng::new(0))?;
    let count = r.read_u32()? as usize;
    if count != net.store().len() {
        return Err(r.corrupt(format!(
            "tensor count {count} does not match topology ({})",
            net.store().len()
        )));
    }
    for idx in 0..count {
        let name_len = r.read_u16()? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| r.corrupt("tensor name is not valid UTF-8"))?;
        let expected = &net.store().entry(idx).name;
        if &name != expected {
            return Err(r.corrupt(format!(
                "tensor {idx} is `{name}`, expected `{expected}`"
            )));
        }
        let rank = r.read_u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.read_u32()? as usize);
        }
        if shape != net.store().entry(idx).value.shape() {
            return Err(r.corrupt(format!(
                "tensor `{name}` has shape {shape:?}, expected {:?}",
                net.store().entry(idx).value.shape()
            )));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 4];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            let v = f32::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(r.corrupt(format!("non-finite value in tensor `{name}`")));
            }
            data.push(v);
        }
        let tensor = TensorBase::from_vec(&shape, data)?;
        net.store_mut().set_value(idx, tensor)?;
    }
    // Anything after the declared tensors is corruption, not padding.
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra).map_err(|e| r.corrupt(e.to_string()))? != 0 {
        return Err(r.corrupt("trailing bytes after final tensor"));
    }
    Ok(net)
}
