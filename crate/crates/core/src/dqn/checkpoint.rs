//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "KGRLQNET"
//! format         u32      CHECKPOINT_FORMAT
//! state layout   u32      STATE_LAYOUT_VERSION
//! variant        u32      Variant::tag
//! layer count+1  u32      n
//! dims           n × u32  e.g. 31, 10, 5, 3
//! parameters     f64 ...  per layer: weights row-major, then biases
//! ```

use std::fs;
use std::path::Path;

use crate::env::Variant;
use crate::error::{Error, Result};
use crate::state::STATE_LAYOUT_VERSION;

use super::network::QNetwork;

pub const MAGIC: &[u8; 8] = b"KGRLQNET";
pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: Variant,
    pub network: QNetwork,
}

pub fn encode(net: &QNetwork, variant: Variant) -> Vec<u8> {
    let dims = net.dims();
    let mut out = Vec::with_capacity(8 + 16 + 4 * dims.len() + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    for v in [
        CHECKPOINT_FORMAT,
        STATE_LAYOUT_VERSION,
        variant.tag(),
        dims.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in net.parameters() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.bytes.len() < n {
            return Err("file is truncated".into());
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { bytes };
    if r.take(8)? != MAGIC {
        return Err("not a Q-network checkpoint".into());
    }
    let format = r.u32()?;
    if format != CHECKPOINT_FORMAT {
        return Err(format!("unsupported checkpoint format {format}"));
    }
    let layout = r.u32()?;
    if layout != STATE_LAYOUT_VERSION {
        return Err(format!(
            "state layout version {layout} does not match this build ({STATE_LAYOUT_VERSION})"
        ));
    }
    let tag = r.u32()?;
    let variant = Variant::from_tag(tag).ok_or_else(|| format!("unknown variant tag {tag}"))?;
    let n = r.u32()? as usize;
    if n > 64 {
        return Err(format!("implausible layer count {n}"));
    }
    let dims = (0..n)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let expected = QNetwork::standard_dims(variant.space().len());
    if dims != expected {
        return Err(format!(
            "layer dimensions {dims:?} do not match {variant} ({expected:?})"
        ));
    }
    let mut network = QNetwork::zeros(&dims).map_err(|e| e.to_string())?;
    let params = (0..network.param_count())
        .map(|_| r.f64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if !r.bytes.is_empty() {
        return Err(format!("{} trailing bytes", r.bytes.len()));
    }
    network.set_parameters(&params).map_err(|e| e.to_string())?;
    Ok(Checkpoint { variant, network })
}

pub fn save_checkpoint(net: &QNetwork, variant: Variant, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode(net, variant))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

/// Loads a checkpoint and checks it was trained for `variant`.
pub fn load_for_variant(path: &Path, variant: Variant) -> Result<QNetwork> {
    let ck = load_checkpoint(path)?;
    if ck.variant != variant {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            message: format!("trained for {}, not {variant}", ck.variant),
        });
    }
    Ok(ck.network)
}
