use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::types::{AlphaWeights, Context, LoggedDataset, LoggedRecord, RewardVector, SlateAction};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    slate_size: usize,
    n_actions: usize,
    dim: usize,
    alpha: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    context: Vec<f64>,
    slate: Vec<usize>,
    rewards: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    propensities: Option<Vec<f64>>,
}

/// Writes `data` as JSON lines: a header with `slate_size`, `n_actions`,
/// `dim` and `alpha`, then one record per line. Floats are written in the
/// shortest form that parses back to the same value.
pub fn write_dataset<W: Write>(data: &LoggedDataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let header = Header {
        slate_size: data.slate_size(),
        n_actions: data.n_actions(),
        dim: data.dim(),
        alpha: data.alpha().values().to_vec(),
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for r in data.records() {
        let line = RecordLine {
            context: r.context.values().to_vec(),
            slate: r.slate.items().to_vec(),
            rewards: r.rewards.values().to_vec(),
            propensities: r.propensities.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(data: &LoggedDataset, path: &Path) -> Result<()> {
    write_dataset(data, File::create(path)?)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads the format of [`write_dataset`]. Blank lines are skipped; a missing,
/// null or empty `propensities` field loads as no propensities.
pub fn read_dataset<R: BufRead>(input: R) -> Result<LoggedDataset> {
    let mut header: Option<Header> = None;
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(h) = &header else {
            let h: Header = serde_json::from_str(&line)
                .map_err(|e| parse_error(line_no, format!("bad header: {e}")))?;
            if h.alpha.len() != h.slate_size {
                return Err(parse_error(
                    line_no,
                    format!("header has {} slot weights for slate size {}", h.alpha.len(), h.slate_size),
                ));
            }
            header = Some(h);
            continue;
        };
        let r: RecordLine =
            serde_json::from_str(&line).map_err(|e| parse_error(line_no, e.to_string()))?;
        let expect = |what: &str, found: usize, expected: usize| {
            if found == expected {
                Ok(())
            } else {
                Err(parse_error(
                    line_no,
                    format!("{what} has length {found}, header says {expected}"),
                ))
            }
        };
        expect("context", r.context.len(), h.dim)?;
        expect("slate", r.slate.len(), h.slate_size)?;
        expect("rewards", r.rewards.len(), h.slate_size)?;
        let propensities = match r.propensities {
            Some(p) if !p.is_empty() => {
                expect("propensities", p.len(), h.slate_size)?;
                Some(p)
            }
            _ => None,
        };
        let record = (|| {
            LoggedRecord::new(
                Context::new(r.context)?,
                SlateAction::new(r.slate, h.n_actions)?,
                RewardVector::new(r.rewards)?,
                propensities,
            )
        })()
        .map_err(|e| parse_error(line_no, e.to_string()))?;
        records.push(record);
    }
    let h = header.ok_or_else(|| parse_error(1, "missing header line"))?;
    let alpha = AlphaWeights::new(h.alpha).map_err(|e| parse_error(1, e.to_string()))?;
    LoggedDataset::new(records, h.slate_size, h.n_actions, alpha)
}

pub fn load_dataset(path: &Path) -> Result<LoggedDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    Policy::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_policy(policy: &Policy, path: &Path) -> Result<()> {
    let mut text = policy.to_json();
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes serializable rows as CSV with a header and LF line endings.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    write_csv(rows, File::create(path)?)
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
