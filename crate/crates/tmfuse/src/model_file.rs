//! `TMMD1` model files: the 5 bytes `TMMD1`, a little-endian `u32` byte
//! length and that many bytes of config text, a `u64` parameter count, then
//! every parameter as a little-endian `f64` in stage order.

use std::path::Path;

use tmfuse_core::{build_model, ModelGraph};

use crate::config;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"TMMD1";

pub fn encode(model: &ModelGraph) -> Vec<u8> {
    let text = config::to_text(&model.config);
    let params = model.params_flat();
    let mut out = Vec::with_capacity(5 + 4 + text.len() + 8 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelGraph> {
    let bad = |msg: String| Error::format(path, msg);
    let take = |at: usize, n: usize, field: &str| -> Result<&[u8]> {
        bytes
            .get(at..at + n)
            .ok_or_else(|| bad(format!("{field}: file ends at byte {}", bytes.len())))
    };
    if take(0, 5, "magic")? != MAGIC {
        return Err(bad(format!("magic: expected \"TMMD1\", got {:?}", String::from_utf8_lossy(&bytes[..5]))));
    }
    let len = u32::from_le_bytes(take(5, 4, "config length")?.try_into().unwrap()) as usize;
    let text = std::str::from_utf8(take(9, len, "config")?).map_err(|_| bad("config: not UTF-8".into()))?;
    let cfg = config::parse(text, path)?;
    let mut model = build_model(&cfg, 0).map_err(|e| bad(format!("config: {e}")))?;
    let at = 9 + len;
    let count = u64::from_le_bytes(take(at, 8, "parameter count")?.try_into().unwrap()) as usize;
    if count != model.param_len() {
        return Err(bad(format!("parameter count={count}, config needs {}", model.param_len())));
    }
    let payload = &bytes[at + 8..];
    if payload.len() != 8 * count {
        return Err(bad(format!("parameters: expected {} bytes, got {}", 8 * count, payload.len())));
    }
    let params: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(bad(format!("parameter {i} is not finite")));
    }
    model.set_params_flat(&params)?;
    Ok(model)
}

pub fn save(path: impl AsRef<Path>, model: &ModelGraph) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelGraph> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
