//! Plain-text model configs: one `key = value` per line, `#` starts a
//! comment.
//!
//! | key | value | default |
//! |---|---|---|
//! | `name` | text | `model` |
//! | `n` | input channels | required |
//! | `tm_enabled` | `true`/`false` | `true` |
//! | `blocks` | number of blocks | 2 |
//! | `channels`, `kernel`, `dilation` | one value, or a comma list with one entry per block | 64, 3, block index + 1 |
//! | `l`, `overlap`, `q` | comma list, one entry per TM | see below |
//! | `pool_window` | odd integer | 3 |
//! | `embedding_dim` | integer | 256 |
//!
//! Entry `k` of `l`/`overlap`/`q` configures the TM in front of block `k`.
//! Missing entries and `auto` fall back to the defaults: the first TM uses
//! one subset of all `n` channels, later TMs keep the incoming lanes, the
//! overlap is 0 and `q = 2 * l`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use tmfuse_core::model::DEFAULT_EMBEDDING_DIM;
use tmfuse_core::tm::DEFAULT_POOL_WINDOW;
use tmfuse_core::{BlockSpec, ModelConfig, TmSpec};

use crate::error::{Error, Result};

const KEYS: &[&str] = &[
    "name",
    "n",
    "l",
    "overlap",
    "q",
    "pool_window",
    "blocks",
    "channels",
    "kernel",
    "dilation",
    "embedding_dim",
    "tm_enabled",
];

const DEFAULT_BLOCKS: usize = 2;
const DEFAULT_CHANNELS: usize = 64;
const DEFAULT_KERNEL: usize = 3;

struct Entry {
    line: usize,
    value: String,
}

pub fn parse(text: &str, path: &Path) -> Result<ModelConfig> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::format(path, format!("line {}: {msg}", i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(err(format!("unknown key {key:?}")));
        };
        if entries.insert(known, Entry { line: i + 1, value: value.trim().to_string() }).is_some() {
            return Err(err(format!("duplicate key {key:?}")));
        }
    }
    Parser { entries, path }.build()
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

struct Parser<'a> {
    entries: BTreeMap<&'static str, Entry>,
    path: &'a Path,
}

impl Parser<'_> {
    fn err(&self, key: &str, msg: String) -> Error {
        match self.entries.get(key) {
            Some(e) => Error::format(self.path, format!("line {}: {key}: {msg}", e.line)),
            None => Error::format(self.path, format!("{key}: {msg}")),
        }
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("expected {what}, got {:?}", e.value))),
        }
    }

    /// Comma list; `auto` entries become `None`.
    fn list<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Vec<Option<T>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(Vec::new());
        };
        e.value
            .split(',')
            .map(|s| s.trim())
            .map(|s| {
                if s == "auto" {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| self.err(key, format!("expected {what}, got {s:?}")))
                }
            })
            .collect()
    }

    /// One value broadcast to every block, or exactly one per block.
    fn per_block(&self, key: &str, blocks: usize) -> Result<Option<Vec<usize>>> {
        let vals: Vec<Option<usize>> = self.list(key, "a positive integer")?;
        if vals.is_empty() {
            return Ok(None);
        }
        if vals.iter().any(Option::is_none) {
            return Err(self.err(key, "`auto` is not allowed here".into()));
        }
        let vals: Vec<usize> = vals.into_iter().flatten().collect();
        match vals.len() {
            1 => Ok(Some(vec![vals[0]; blocks])),
            n if n == blocks => Ok(Some(vals)),
            n => Err(self.err(key, format!("{n} values for {blocks} blocks"))),
        }
    }

    fn build(self) -> Result<ModelConfig> {
        let n: usize = self
            .scalar("n", "a positive integer")?
            .ok_or_else(|| Error::format(self.path, "missing required key \"n\""))?;
        let blocks: usize = self.scalar("blocks", "a positive integer")?.unwrap_or(DEFAULT_BLOCKS);
        if blocks == 0 {
            return Err(self.err("blocks", "must be at least 1".into()));
        }
        let channels = self.per_block("channels", blocks)?.unwrap_or(vec![DEFAULT_CHANNELS; blocks]);
        let kernels = self.per_block("kernel", blocks)?.unwrap_or(vec![DEFAULT_KERNEL; blocks]);
        let dilations = self.per_block("dilation", blocks)?.unwrap_or_else(|| (1..=blocks).collect());

        let ls: Vec<Option<usize>> = self.list("l", "a positive integer or auto")?;
        let overlaps: Vec<Option<f64>> = self.list("overlap", "a fraction or auto")?;
        let qs: Vec<Option<usize>> = self.list("q", "a positive integer or auto")?;
        for (key, len) in [("l", ls.len()), ("overlap", overlaps.len()), ("q", qs.len())] {
            if len > blocks {
                return Err(self.err(key, format!("{len} entries for {blocks} TMs")));
            }
        }
        let tms = (0..blocks)
            .map(|b| TmSpec {
                subset_dim: ls.get(b).copied().flatten(),
                overlap: overlaps.get(b).copied().flatten().unwrap_or(0.0),
                q: qs.get(b).copied().flatten(),
            })
            .collect();

        let tm_enabled = match self.entries.get("tm_enabled").map(|e| e.value.as_str()) {
            None | Some("true") | Some("1") | Some("yes") => true,
            Some("false") | Some("0") | Some("no") => false,
            Some(v) => return Err(self.err("tm_enabled", format!("expected true or false, got {v:?}"))),
        };
        Ok(ModelConfig {
            name: self.entries.get("name").map(|e| e.value.clone()).unwrap_or_else(|| "model".into()),
            input_dim: n,
            tm_enabled,
            tms: if tm_enabled { tms } else { Vec::new() },
            blocks: (0..blocks)
                .map(|b| BlockSpec { channels: channels[b], kernel: kernels[b], dilation: dilations[b] })
                .collect(),
            embedding_dim: self.scalar("embedding_dim", "a positive integer")?.unwrap_or(DEFAULT_EMBEDDING_DIM),
            pool_window: self.scalar("pool_window", "an odd integer")?.unwrap_or(DEFAULT_POOL_WINDOW),
        })
    }
}

/// Writes every key explicitly; `parse(to_text(c)) == c`.
pub fn to_text(c: &ModelConfig) -> String {
    let join = |v: Vec<String>| v.join(", ");
    let mut s = String::new();
    writeln!(s, "name = {}", c.name).unwrap();
    writeln!(s, "n = {}", c.input_dim).unwrap();
    writeln!(s, "tm_enabled = {}", c.tm_enabled).unwrap();
    writeln!(s, "blocks = {}", c.blocks.len()).unwrap();
    writeln!(s, "channels = {}", join(c.blocks.iter().map(|b| b.channels.to_string()).collect())).unwrap();
    writeln!(s, "kernel = {}", join(c.blocks.iter().map(|b| b.kernel.to_string()).collect())).unwrap();
    writeln!(s, "dilation = {}", join(c.blocks.iter().map(|b| b.dilation.to_string()).collect())).unwrap();
    if c.tm_enabled {
        let opt = |v: Option<usize>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        writeln!(s, "l = {}", join(c.tms.iter().map(|t| opt(t.subset_dim)).collect())).unwrap();
        // `{:?}` keeps every bit of the fraction
        writeln!(s, "overlap = {}", join(c.tms.iter().map(|t| format!("{:?}", t.overlap)).collect())).unwrap();
        writeln!(s, "q = {}", join(c.tms.iter().map(|t| opt(t.q)).collect())).unwrap();
    }
    writeln!(s, "pool_window = {}", c.pool_window).unwrap();
    writeln!(s, "embedding_dim = {}", c.embedding_dim).unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<ModelConfig> {
        parse(text, Path::new("t.cfg"))
    }

    #[test]
    fn defaults_and_lists() {
        let c = p("n = 80\nl = 20 # first TM\nchannels = 32\n").unwrap();
        assert_eq!(c, ModelConfig { name: "model".into(), ..ModelConfig::with_tm(80, 20, 0.0, 32, 2) });
        let c = p("n = 80\ntm_enabled = false\nblocks = 3\nchannels = 8, 16, 8\n").unwrap();
        assert_eq!(c.blocks.iter().map(|b| b.channels).collect::<Vec<_>>(), vec![8, 16, 8]);
        assert!(c.tms.is_empty());
        let c = p("n = 16\nl = 4, auto\noverlap = 0.5\nq = auto, 6").unwrap();
        assert_eq!(c.tms[0], TmSpec { subset_dim: Some(4), overlap: 0.5, q: None });
        assert_eq!(c.tms[1], TmSpec { subset_dim: None, overlap: 0.0, q: Some(6) });
    }

    #[test]
    fn round_trip() {
        let mut c = ModelConfig::with_tm(80, 20, 0.25, 16, 3);
        c.tms[2].q = Some(7);
        c.tms[1].overlap = 0.1;
        assert_eq!(p(&to_text(&c)).unwrap(), c);
        let b = ModelConfig::baseline(40, 12, 1);
        assert_eq!(p(&to_text(&b)).unwrap(), b);
    }

    #[test]
    fn errors_name_the_line() {
        let e = p("n = 80\nfoo = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("foo"), "{e}");
        let e = p("n = eighty\n").unwrap_err().to_string();
        assert!(e.contains("line 1: n:"), "{e}");
        assert!(p("l = 20\n").unwrap_err().to_string().contains("\"n\""));
        assert!(p("n = 8\nchannels = 1, 2, 3\n").is_err());
        assert!(p("n = 8\nn = 9\n").is_err());
        assert!(p("n = 8\ngarbage\n").is_err());
    }
}
