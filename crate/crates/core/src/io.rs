//! File formats: grid curves as `t,value` CSV, trial sets as JSON lines or
//! whitespace-separated plain text.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every sample bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fn::{node, GridFunction};
use crate::point_process::{EventSequence, TrialSet};

pub fn write_grid_csv(path: &Path, f: &GridFunction) -> Result<()> {
    write_curves_csv(path, &["value"], &[f])
}

/// Several curves on the same grid: columns `t,<name>...`.
pub fn write_curves_csv(path: &Path, names: &[&str], curves: &[&GridFunction]) -> Result<()> {
    assert_eq!(names.len(), curves.len());
    let n = curves.iter().map(|c| c.grid_size()).max().unwrap_or(2);
    let resampled: Vec<GridFunction> = curves.iter().map(|c| c.resample(n)).collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for k in 0..n {
        let mut row = vec![node(k, n).to_string()];
        row.extend(resampled.iter().map(|c| c.values()[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data {
            path: path.into(),
            msg: format!("{other:?}"),
        },
    }
}

/// Reads a `t,value` CSV written on a uniform grid over `[0, 1]`.
pub fn read_grid_csv(path: &Path) -> Result<GridFunction> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() < 2 {
            return Err(parse_err(path, line, "expected two columns t,value"));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, line, &format!("{s:?}: {e}")))
        };
        ts.push(parse(&rec[0])?);
        vs.push(parse(&rec[1])?);
    }
    let n = ts.len();
    if n < 2 {
        return Err(Error::Data {
            path: path.into(),
            msg: format!("need at least 2 grid rows, found {n}"),
        });
    }
    for (k, &t) in ts.iter().enumerate() {
        if (t - node(k, n)).abs() > 1e-9 {
            return Err(parse_err(
                path,
                k + 2,
                &format!("t = {t} is not the uniform grid node {}", node(k, n)),
            ));
        }
    }
    GridFunction::new(vs).map_err(|e| Error::Data {
        path: path.into(),
        msg: e.to_string(),
    })
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialRecord {
    trial_id: String,
    #[serde(default)]
    label: Option<String>,
    events: Vec<f64>,
}

/// A trial as read from disk, before events are checked against `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    pub id: String,
    pub label: Option<String>,
    pub events: Vec<f64>,
}

/// Parses either format. JSON lines are detected by a first non-blank line
/// starting with `{`. In plain text every line is one trial (blank lines are
/// empty trials) and an optional first token ending in `:` is the label.
pub fn read_raw_trials(path: &Path) -> Result<Vec<RawTrial>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let jsonl = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with('{'));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if jsonl {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrialRecord = serde_json::from_str(line)
                .map_err(|e| parse_err(path, line_no, &e.to_string()))?;
            out.push(RawTrial {
                id: rec.trial_id,
                label: rec.label,
                events: rec.events,
            });
        } else {
            let mut tokens = line.split_whitespace().peekable();
            let label = match tokens.peek() {
                Some(tok) if tok.ends_with(':') => {
                    let l = tok.trim_end_matches(':').to_string();
                    tokens.next();
                    Some(l)
                }
                _ => None,
            };
            let events = tokens
                .map(|tok| {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(path, line_no, &format!("bad event time {tok:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            out.push(RawTrial {
                id: out.len().to_string(),
                label,
                events,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Data {
            path: path.into(),
            msg: "no trials found".into(),
        });
    }
    Ok(out)
}

/// Builds a [`TrialSet`]; labels are kept only when every trial has one.
pub fn trials_from_raw(path: &Path, raw: Vec<RawTrial>) -> Result<TrialSet> {
    let labeled = raw.iter().filter(|r| r.label.is_some()).count();
    if labeled != 0 && labeled != raw.len() {
        return Err(Error::Data {
            path: path.into(),
            msg: format!("{labeled} of {} trials carry a label; need all or none", raw.len()),
        });
    }
    let mut ids = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    let mut trials = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let seq = EventSequence::new(r.events).map_err(|e| Error::Data {
            path: path.into(),
            msg: format!("trial {i}: {e}"),
        })?;
        trials.push(seq);
        ids.push(r.id);
        labels.extend(r.label);
    }
    let mut ts = if labeled == 0 {
        TrialSet::new(trials)
    } else {
        TrialSet::with_labels(trials, labels)?
    };
    ts.ids = ids;
    Ok(ts)
}

pub fn read_trials(path: &Path) -> Result<TrialSet> {
    let raw = read_raw_trials(path)?;
    trials_from_raw(path, raw)
}

pub fn write_trials_jsonl(path: &Path, ts: &TrialSet) -> Result<()> {
    let mut buf = Vec::new();
    for (i, trial) in ts.trials.iter().enumerate() {
        let rec = TrialRecord {
            trial_id: ts.ids[i].clone(),
            label: ts.labels.as_ref().map(|l| l[i].clone()),
            events: trial.events().to_vec(),
        };
        serde_json::to_writer(&mut buf, &rec)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Plain-text form: one line per trial, `label:` prefix when labels exist.
pub fn write_trials_text(path: &Path, ts: &TrialSet) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for (i, trial) in ts.trials.iter().enumerate() {
        let mut tokens: Vec<String> = Vec::with_capacity(trial.count() + 1);
        if let Some(labels) = &ts.labels {
            tokens.push(format!("{}:", labels[i]));
        }
        tokens.extend(trial.events().iter().map(f64::to_string));
        writeln!(f, "{}", tokens.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
