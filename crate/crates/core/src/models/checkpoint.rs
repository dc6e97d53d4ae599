//! Binary checkpoint format.
//!
//! ```text
//! magic      5 bytes   "ENGAE"
//! version    u32
//! arch       u8        1=tcn_ae 2=lstm_ae 3=ff_ae 4=tcn_bc 5=lstm_bc 6=ff_bc
//! n, t, levels, hidden, kernel    u64 each
//! dropout    f64
//! pool, bottleneck                u64 each
//! upsample   u8        0=nearest 1=linear
//! per_frame  u8
//! count      u32       number of parameter arrays
//! per array: rows u64, cols u64, rows·cols f64 values (row-major)
//! ```
//!
//! All integers and floats are little-endian. Arrays follow the model's
//! declared layer order.

use super::config::{Arch, ModelConfig};
use super::network::Model;
use crate::error::{Error, Result};
use crate::seqnn::{Mode, UpsampleMode};

pub const MAGIC: &[u8; 5] = b"ENGAE";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model) -> Vec<u8> {
    let c = model.config();
    let mut out = Vec::with_capacity(64 + model.num_weights() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(c.arch.code());
    for v in [c.n, c.t, c.levels, c.hidden, c.kernel] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&c.dropout.to_le_bytes());
    for v in [c.pool, c.bottleneck] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(match c.upsample {
        UpsampleMode::Nearest => 0,
        UpsampleMode::Linear => 1,
    });
    out.push(u8::from(c.per_frame));
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        let (r, k) = p.value.dim();
        out.extend_from_slice(&(r as u64).to_le_bytes());
        out.extend_from_slice(&(k as u64).to_le_bytes());
        for v in p.value.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "checkpoint truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?)
            .map_err(|_| Error::Format(format!("{what} does not fit in memory")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Rebuilds a model from [`save_checkpoint`] output. The model comes back in
/// eval mode.
pub fn load_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(5, "magic")? != MAGIC {
        return Err(Error::Format("not a checkpoint: bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let code = r.u8("arch")?;
    let arch = Arch::from_code(code)
        .ok_or_else(|| Error::Format(format!("unknown architecture code {code}")))?;
    let n = r.usize("n")?;
    let t = r.usize("t")?;
    let levels = r.usize("levels")?;
    let hidden = r.usize("hidden")?;
    let kernel = r.usize("kernel")?;
    let dropout = r.f64("dropout")?;
    let pool = r.usize("pool")?;
    let bottleneck = r.usize("bottleneck")?;
    let upsample = match r.u8("upsample")? {
        0 => UpsampleMode::Nearest,
        1 => UpsampleMode::Linear,
        other => return Err(Error::Format(format!("unknown upsample mode {other}"))),
    };
    let per_frame = match r.u8("per_frame")? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("bad per_frame flag {other}"))),
    };
    let config = ModelConfig {
        arch,
        n,
        t,
        levels,
        hidden,
        kernel,
        dropout,
        pool,
        bottleneck,
        upsample,
        per_frame,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut model = Model::build(config, 0)?;
    let count = r.u32("parameter count")? as usize;
    let expected = model.params().len();
    if count != expected {
        return Err(Error::Format(format!(
            "checkpoint has {count} parameter arrays, architecture needs {expected}"
        )));
    }
    for (i, p) in model.params_mut().into_iter().enumerate() {
        let rows = r.usize("rows")?;
        let cols = r.usize("cols")?;
        if (rows, cols) != p.value.dim() {
            return Err(Error::Format(format!(
                "parameter {i} ({}) has shape {rows}x{cols}, expected {:?}",
                p.name,
                p.value.dim()
            )));
        }
        for v in p.value.iter_mut() {
            *v = r.f64("parameter data")?;
        }
        p.zero_grad();
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    model.set_mode(Mode::Eval);
    Ok(model)
}
