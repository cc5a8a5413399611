//! Flat binary weight container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GSIT1"                      magic
//! u8                           model kind (0 gsit, 1 mult, 2 naive)
//! u32 × 8                      t_t, t_v, t_a, d, p, heads, out_dim, structure
//! u32                          array count
//! per array:
//!   u16 + bytes                name (UTF-8)
//!   u32, u32                   rows, cols
//!   f64 × rows·cols            row-major data
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use gsit_core::attn::EncoderWeights;
use gsit_core::models::{GsiTWeights, ModelConfig, MulTWeights, NaiveWeights, ParamSet};
use gsit_core::{SegmentLayout, StructureName, Tensor2};

use crate::config::ModelKind;
use crate::train::Weights;
use crate::{LabError, Result};

pub const MAGIC: &[u8; 5] = b"GSIT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: Weights,
}

/// Named arrays in declaration order: each encoder's `wq, wk, wv, w1, w2`
/// as `<encoder>.<array>`, then `f`.
pub fn named_arrays(weights: &Weights) -> Vec<(String, &Tensor2)> {
    let mut out = Vec::new();
    for (name, enc) in weights.encoders() {
        for (array, t) in enc.arrays() {
            out.push((format!("{name}.{array}"), t));
        }
    }
    out.push(("f".to_string(), weights.head().as_ref()));
    out
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Checkpoint(msg.into())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| bad(format!("{what} = {v} does not fit in u32")))
}

impl Checkpoint {
    pub fn new(config: ModelConfig, weights: Weights) -> Self {
        Self { config, weights }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.weights.kind().code());
        let [t, v, a] = c.layout.lengths();
        for (value, what) in [
            (t, "t_t"),
            (v, "t_v"),
            (a, "t_a"),
            (c.d, "d"),
            (c.p, "p"),
            (c.heads, "heads"),
            (c.out_dim, "out_dim"),
        ] {
            out.extend_from_slice(&to_u32(value, what)?.to_le_bytes());
        }
        out.extend_from_slice(&c.structure.code().to_le_bytes());
        let arrays = named_arrays(&self.weights);
        out.extend_from_slice(&to_u32(arrays.len(), "array count")?.to_le_bytes());
        for (name, t) in arrays {
            let len = u16::try_from(name.len()).map_err(|_| bad("array name too long"))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&to_u32(t.rows(), "rows")?.to_le_bytes());
            out.extend_from_slice(&to_u32(t.cols(), "cols")?.to_le_bytes());
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let bytes = self.to_bytes()?;
        w.write_all(&bytes).map_err(|e| LabError::io("<checkpoint>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| LabError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| LabError::io("<checkpoint>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(5)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let kind = ModelKind::from_code(cur.u8()?).ok_or_else(|| bad("unknown model kind"))?;
        let mut ints = [0usize; 7];
        for slot in &mut ints {
            *slot = cur.u32()? as usize;
        }
        let structure = StructureName::from_code(cur.u32()?).ok_or_else(|| bad("unknown structure code"))?;
        let [t, v, a, d, p, heads, out_dim] = ints;
        let config = ModelConfig::new(SegmentLayout::new(t, v, a)?, d, p, heads)?
            .with_out_dim(out_dim)
            .with_structure(structure);
        config.validate()?;

        let count = cur.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = cur.u16()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| bad("array name is not UTF-8"))?
                .to_string();
            let rows = cur.u32()? as usize;
            let cols = cur.u32()? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| bad("array too large"))?;
            let raw = cur.take(n.checked_mul(8).ok_or_else(|| bad("array too large"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push((name, Tensor2::new(rows, cols, data)?));
        }
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let weights = assemble(kind, &config, arrays)?;
        Ok(Self { config, weights })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Rebuilds weights from arrays, checking names against a freshly shaped model.
fn assemble(kind: ModelKind, cfg: &ModelConfig, arrays: Vec<(String, Tensor2)>) -> Result<Weights> {
    let template = Weights::init(kind, cfg, 0, 1.0)?;
    let expected: Vec<String> = named_arrays(&template).into_iter().map(|(n, _)| n).collect();
    let got: Vec<&str> = arrays.iter().map(|(n, _)| n.as_str()).collect();
    if got != expected {
        return Err(bad(format!(
            "array names do not match a {kind} model: expected {expected:?}, got {got:?}"
        )));
    }
    let mut it = arrays.into_iter().map(|(_, t)| t);
    let mut encoder = |heads: usize| -> Result<EncoderWeights> {
        let mut next = || it.next().expect("count checked");
        Ok(EncoderWeights::new(next(), next(), next(), next(), next(), heads)?)
    };
    let h = cfg.heads;
    let weights = match kind {
        ModelKind::Gsit => {
            let (fw, bw, intra) = (encoder(h)?, encoder(h)?, encoder(h)?);
            let f = it.next().expect("count checked");
            Weights::Gsit(GsiTWeights::new(fw, bw, intra, f)?)
        }
        ModelKind::Mult => {
            let mut cross = Vec::with_capacity(6);
            for _ in 0..6 {
                cross.push(Arc::new(encoder(h)?));
            }
            let mut intra = Vec::with_capacity(3);
            for _ in 0..3 {
                intra.push(Arc::new(encoder(h)?));
            }
            let f = it.next().expect("count checked");
            Weights::Mult(MulTWeights::new(
                cross.try_into().expect("six"),
                intra.try_into().expect("three"),
                Arc::new(f),
            )?)
        }
        ModelKind::Naive => {
            let enc = encoder(h)?;
            let f = it.next().expect("count checked");
            Weights::Naive(NaiveWeights::new(enc, f)?)
        }
    };
    Ok(weights)
}
