//! Plain-text explicit-state export.
//!
//! States file (`.sta`), one state per line after an optional confidence
//! header:
//!
//! ```text
//! # confidence 0.99
//! 0 region:0
//! 1 region:1
//! 2 goal
//! 3 unsafe
//! 4 out
//! ```
//!
//! Transitions file (`.tra`), one line per `(state, action, successor)`:
//!
//! ```text
//! 0 1 2 [0.25,0.5]
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! `f64`, so export followed by import is lossless.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{IntervalMDP, ModelError, StateKind, Transition};
use crate::interval::ProbabilityInterval;
use crate::partition::RegionId;

#[derive(Debug, Error)]
pub enum ExplicitError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{file} line {line}: {message}")]
    Malformed {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("{file} line {line}: {source}")]
    Model {
        file: &'static str,
        line: usize,
        source: ModelError,
    },
}

fn label(kind: StateKind) -> String {
    match kind {
        StateKind::Region(r) => format!("region:{}", r.0),
        StateKind::Goal => "goal".into(),
        StateKind::Unsafe => "unsafe".into(),
        StateKind::Out => "out".into(),
    }
}

pub fn export_explicit<S: Write, T: Write>(
    imdp: &IntervalMDP,
    states: &mut S,
    transitions: &mut T,
) -> io::Result<()> {
    writeln!(states, "# confidence {}", imdp.confidence())?;
    for (i, &k) in imdp.kinds().iter().enumerate() {
        writeln!(states, "{i} {}", label(k))?;
    }
    for s in 0..imdp.num_states() {
        for c in imdp.choices(s) {
            for t in imdp.distribution(c.distribution) {
                writeln!(
                    transitions,
                    "{s} {} {} [{},{}]",
                    c.action,
                    t.successor,
                    t.interval.low(),
                    t.interval.high()
                )?;
            }
        }
    }
    Ok(())
}

/// Writes `<dir>/<stem>.sta` and `<dir>/<stem>.tra`.
pub fn write_explicit_files(imdp: &IntervalMDP, dir: &Path, stem: &str) -> io::Result<(PathBuf, PathBuf)> {
    let sta = dir.join(format!("{stem}.sta"));
    let tra = dir.join(format!("{stem}.tra"));
    let mut s = BufWriter::new(File::create(&sta)?);
    let mut t = BufWriter::new(File::create(&tra)?);
    export_explicit(imdp, &mut s, &mut t)?;
    s.flush()?;
    t.flush()?;
    Ok((sta, tra))
}

/// Reads a model written by [`export_explicit`]. Identical distributions of
/// the same action are shared again.
pub fn import_explicit<S: BufRead, T: BufRead>(states: S, transitions: T) -> Result<IntervalMDP, ExplicitError> {
    const STA: &str = "states";
    const TRA: &str = "transitions";
    let bad = |file, line, message: String| ExplicitError::Malformed {
        file,
        line,
        message,
    };

    let mut confidence = 0.0;
    let mut kinds = Vec::new();
    for (i, line) in states.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("confidence") {
                let v = it.next().ok_or_else(|| bad(STA, no, "missing confidence value".into()))?;
                confidence = v
                    .parse()
                    .map_err(|_| bad(STA, no, format!("invalid confidence `{v}`")))?;
            }
            continue;
        }
        let mut it = text.split(' ');
        let (Some(idx), Some(lbl), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(STA, no, format!("expected `<index> <label>`, got `{text}`")));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| bad(STA, no, format!("invalid state index `{idx}`")))?;
        if idx != kinds.len() {
            return Err(bad(STA, no, format!("expected state {}, got {idx}", kinds.len())));
        }
        let kind = match lbl {
            "goal" => StateKind::Goal,
            "unsafe" => StateKind::Unsafe,
            "out" => StateKind::Out,
            other => {
                let id = other
                    .strip_prefix("region:")
                    .and_then(|r| r.parse().ok())
                    .ok_or_else(|| bad(STA, no, format!("unknown label `{other}`")))?;
                StateKind::Region(RegionId(id))
            }
        };
        kinds.push(kind);
    }
    let mut imdp = IntervalMDP::new(kinds, confidence).map_err(|source| ExplicitError::Model {
        file: STA,
        line: 1,
        source,
    })?;

    // (state, action) -> (first line, transitions)
    let mut groups: BTreeMap<(usize, usize), (usize, Vec<Transition>)> = BTreeMap::new();
    for (i, line) in transitions.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(' ').collect();
        if fields.len() != 4 {
            return Err(bad(
                TRA,
                no,
                format!("expected `<state> <action> <successor> [low,high]`, got `{text}`"),
            ));
        }
        let int = |s: &str, what: &str| -> Result<usize, ExplicitError> {
            s.parse().map_err(|_| bad(TRA, no, format!("invalid {what} `{s}`")))
        };
        let state = int(fields[0], "state")?;
        let action = int(fields[1], "action")?;
        let successor = int(fields[2], "successor")?;
        let interval = parse_interval(fields[3]).map_err(|m| bad(TRA, no, m))?;
        groups
            .entry((state, action))
            .or_insert_with(|| (no, Vec::new()))
            .1
            .push(Transition {
                successor,
                interval,
            });
    }

    let mut shared: HashMap<usize, Vec<usize>> = HashMap::new();
    for ((state, action), (line, mut dist)) in groups {
        let model_err = |source| ExplicitError::Model {
            file: TRA,
            line,
            source,
        };
        dist.sort_by_key(|t| t.successor);
        let known = shared.entry(action).or_default();
        let existing = known
            .iter()
            .copied()
            .find(|&d| imdp.distribution(d) == dist.as_slice());
        let d = match existing {
            Some(d) => d,
            None => {
                let d = imdp.add_distribution(dist).map_err(model_err)?;
                known.push(d);
                d
            }
        };
        imdp.enable(state, action, d).map_err(model_err)?;
    }
    Ok(imdp)
}

/// Reads `<dir>/<stem>.sta` and `<dir>/<stem>.tra`.
pub fn read_explicit_files(dir: &Path, stem: &str) -> Result<IntervalMDP, ExplicitError> {
    let s = BufReader::new(File::open(dir.join(format!("{stem}.sta")))?);
    let t = BufReader::new(File::open(dir.join(format!("{stem}.tra")))?);
    import_explicit(s, t)
}

fn parse_interval(s: &str) -> Result<ProbabilityInterval, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("interval `{s}` must look like [low,high]"))?;
    let (l, h) = inner
        .split_once(',')
        .ok_or_else(|| format!("interval `{s}` must look like [low,high]"))?;
    let low: f64 = l.parse().map_err(|_| format!("invalid lower bound `{l}`"))?;
    let high: f64 = h.parse().map_err(|_| format!("invalid upper bound `{h}`"))?;
    ProbabilityInterval::new(low, high).map_err(|e| e.to_string())
}
