use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::experiment::ResultRow;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

/// A column rows can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    N,
    #[serde(rename = "L")]
    SlateSize,
    RewardStructure,
    Interaction,
    Lambda,
}

impl GroupKey {
    pub fn column(self) -> &'static str {
        match self {
            GroupKey::N => "n",
            GroupKey::SlateSize => "L",
            GroupKey::RewardStructure => "reward_structure",
            GroupKey::Interaction => "interaction",
            GroupKey::Lambda => "lambda",
        }
    }

    fn value(self, row: &ResultRow) -> KeyValue {
        match self {
            GroupKey::N => KeyValue::Int(row.n as u64),
            GroupKey::SlateSize => KeyValue::Int(row.slate_size as u64),
            GroupKey::RewardStructure => KeyValue::Text(row.reward_structure.as_str().into()),
            GroupKey::Interaction => KeyValue::Text(row.interaction.as_str().into()),
            GroupKey::Lambda => KeyValue::Real(row.lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KeyValue {
    Int(u64),
    Real(f64),
    Text(String),
}

impl KeyValue {
    fn to_json(&self) -> Value {
        match self {
            KeyValue::Int(v) => json!(v),
            KeyValue::Real(v) => json!(v),
            KeyValue::Text(v) => json!(v),
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Int(v) => write!(f, "{v}"),
            KeyValue::Real(v) => write!(f, "{v}"),
            KeyValue::Text(v) => f.write_str(v),
        }
    }
}

impl Eq for KeyValue {}

impl PartialOrd for KeyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Int(a), KeyValue::Int(b)) => a.cmp(b),
            (KeyValue::Real(a), KeyValue::Real(b)) => a.total_cmp(b),
            (KeyValue::Text(a), KeyValue::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl KeyValue {
    fn rank(&self) -> u8 {
        match self {
            KeyValue::Int(_) => 0,
            KeyValue::Real(_) => 1,
            KeyValue::Text(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub group: Vec<(GroupKey, KeyValue)>,
    pub estimator: String,
    pub mse: f64,
    /// `MSE / MSE(Cascade-DR)` in the same group.
    pub relative_mse: Option<f64>,
    pub count: usize,
}

/// Mean squared error per group and estimator, ordered by group values and
/// then by first appearance of the estimator.
///
/// With `relative`, every group must contain Cascade-DR rows.
pub fn aggregate_mse(rows: &[ResultRow], keys: &[GroupKey], relative: bool) -> Result<Vec<MseRow>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut estimators: Vec<&str> = Vec::new();
    let mut sums: BTreeMap<Vec<KeyValue>, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for row in rows {
        let e = match estimators.iter().position(|&e| e == row.estimator) {
            Some(i) => i,
            None => {
                estimators.push(&row.estimator);
                estimators.len() - 1
            }
        };
        let group = keys.iter().map(|k| k.value(row)).collect();
        let slot = sums.entry(group).or_default().entry(e).or_insert((0.0, 0));
        slot.0 += row.squared_error;
        slot.1 += 1;
    }
    let reference = EstimatorKind::CascadeDr.name();
    let mut out = Vec::new();
    for (group, per_estimator) in sums {
        let mse_of = |e: usize| per_estimator.get(&e).map(|&(s, c)| s / c as f64);
        let base = estimators
            .iter()
            .position(|&e| e == reference)
            .and_then(mse_of);
        if relative && base.is_none() {
            let described: Vec<String> = keys
                .iter()
                .zip(&group)
                .map(|(k, v)| format!("{}={}", k.column(), v.to_json()))
                .collect();
            return Err(Error::InvalidConfig(format!(
                "group [{}] has no {reference} rows for relative MSE",
                described.join(", ")
            )));
        }
        for (&e, &(sum, count)) in &per_estimator {
            let mse = sum / count as f64;
            let relative_mse = match base {
                Some(_) if relative && estimators[e] == reference => Some(1.0),
                Some(b) if relative && b > 0.0 => Some(mse / b),
                _ => None,
            };
            out.push(MseRow {
                group: keys.iter().copied().zip(group.iter().cloned()).collect(),
                estimator: estimators[e].to_owned(),
                mse,
                relative_mse,
                count,
            });
        }
    }
    Ok(out)
}

/// The structured summary read by the plotting scripts.
pub fn summary_json(table: &[MseRow], keys: &[GroupKey]) -> Value {
    let rows: Vec<Value> = table
        .iter()
        .map(|r| {
            let mut m = Map::new();
            for (k, v) in &r.group {
                m.insert(k.column().into(), v.to_json());
            }
            m.insert("estimator".into(), json!(r.estimator));
            m.insert("mse".into(), json!(r.mse));
            m.insert("relative_mse".into(), json!(r.relative_mse));
            m.insert("count".into(), json!(r.count));
            Value::Object(m)
        })
        .collect();
    json!({
        "group_by": keys.iter().map(|k| k.column()).collect::<Vec<_>>(),
        "rows": rows,
    })
}

pub fn write_summary(path: &Path, table: &[MseRow], keys: &[GroupKey]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&summary_json(table, keys))
        .expect("summary values are finite or null");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
