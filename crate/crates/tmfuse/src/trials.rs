//! Trial lists: one trial per line, `label<TAB>enroll<TAB>test` or
//! `label<TAB>score`. Labels are `target`/`nontarget` or `1`/`0`. Blank
//! lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use tmfuse_core::eval::TrialSet;

use crate::error::{Error, Result};
use crate::numfmt::g6;

#[derive(Debug, Clone, PartialEq)]
pub struct PairTrial {
    pub target: bool,
    pub enroll: String,
    pub test: String,
}

pub fn parse_label(s: &str) -> Option<bool> {
    match s {
        "target" | "1" => Some(true),
        "nontarget" | "0" => Some(false),
        _ => None,
    }
}

pub fn label(target: bool) -> &'static str {
    if target {
        "target"
    } else {
        "nontarget"
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty lines split on tabs, with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').collect()))
}

fn label_at(path: &Path, line: usize, s: &str) -> Result<bool> {
    parse_label(s).ok_or_else(|| Error::format(path, format!("line {line}: label {s:?} is not target/nontarget/1/0")))
}

pub fn parse_scored(text: &str, path: &Path) -> Result<TrialSet> {
    let mut set = TrialSet::new();
    for (line, f) in records(text) {
        let [l, s] = f[..] else {
            return Err(Error::format(path, format!("line {line}: expected label<TAB>score, got {} fields", f.len())));
        };
        let target = label_at(path, line, l)?;
        let score: f64 = s
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::format(path, format!("line {line}: score {s:?} is not a finite number")))?;
        set.push(score, target);
    }
    Ok(set)
}

pub fn parse_pairs(text: &str, path: &Path) -> Result<Vec<PairTrial>> {
    records(text)
        .map(|(line, f)| {
            let [l, e, t] = f[..] else {
                return Err(Error::format(
                    path,
                    format!("line {line}: expected label<TAB>enroll<TAB>test, got {} fields", f.len()),
                ));
            };
            Ok(PairTrial { target: label_at(path, line, l)?, enroll: e.to_string(), test: t.to_string() })
        })
        .collect()
}

pub fn load_scored(path: impl AsRef<Path>) -> Result<TrialSet> {
    let path = path.as_ref();
    parse_scored(&read(path)?, path)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PairTrial>> {
    let path = path.as_ref();
    parse_pairs(&read(path)?, path)
}

pub fn format_scored(trials: &TrialSet) -> String {
    let mut s = String::new();
    for t in &trials.trials {
        writeln!(s, "{}\t{}", label(t.target), g6(t.score)).unwrap();
    }
    s
}
