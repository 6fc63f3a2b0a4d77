//! Binary checkpoint layout, all integers `u64` little-endian:
//!
//! ```text
//! "PRADCKPT"
//! c_r c_z c_v c_s N_P N seed d_scale(f64 bits) disable_prototypes disable_fusion
//! tensor_count
//! per tensor: ndim, dims…, then numel little-endian f64 values
//! ```

use std::fs;
use std::path::Path;

use super::{ModelParams, NetConfig};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PRADCKPT";

pub fn write_checkpoint(params: &ModelParams) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(128 + params.num_parameters() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let header = [
        c.c_r as u64,
        c.c_z as u64,
        c.c_v as u64,
        c.c_s as u64,
        c.prototypes as u64,
        c.degree as u64,
        c.seed,
        c.d_scale.to_bits(),
        c.disable_prototypes as u64,
        c.disable_fusion as u64,
        params.tensors().len() as u64,
    ];
    for v in header {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, what: &str) -> std::result::Result<usize, String> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|v| *v <= 1 << 32)
            .ok_or_else(|| format!("{what} = {v} is out of range"))
    }

    fn flag(&mut self, what: &str) -> std::result::Result<bool, String> {
        match self.u64()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(format!("{what} flag must be 0 or 1, got {v}")),
        }
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> std::result::Result<ModelParams, String> {
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let mut r = Reader { bytes, pos: 8 };
    let config = NetConfig {
        c_r: r.usize("c_r")?,
        c_z: r.usize("c_z")?,
        c_v: r.usize("c_v")?,
        c_s: r.usize("c_s")?,
        prototypes: r.usize("N_P")?,
        degree: r.usize("degree")?,
        seed: r.u64()?,
        d_scale: f64::from_bits(r.u64()?),
        disable_prototypes: r.flag("disable_prototypes")?,
        disable_fusion: r.flag("disable_fusion")?,
    };
    let count = r.usize("tensor count")?;
    let mut tensors = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let ndim = r.usize("ndim")?;
        if ndim == 0 || ndim > 4 {
            return Err(format!("tensor {i}: {ndim} dimensions"));
        }
        let shape = (0..ndim).map(|_| r.usize("dim")).collect::<std::result::Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.take(numel.checked_mul(8).ok_or("tensor too large")?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor::new(shape, data).map_err(|e| e.to_string())?);
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    ModelParams::from_parts(config, tensors).map_err(|e| e.to_string())
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes).map_err(|r| Error::format(path, r))
}
