use std::fs;

use serde_json::Value;

use super::report::Num;
use super::stages::{load_dataset, prompts, require_pair_verdicts};
use super::{PipelineConfig, PipelineError, Stage};
use crate::jury::{acceptance_rate, AcceptanceRate, ItemKind, Verdict};
use crate::types::{Condition, Method};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    /// Acceptance figures compared.
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes every acceptance figure in `report.json` straight from the
/// verdict cache and lists any that differ.
pub fn verify_report(config: &PipelineConfig) -> Result<VerifyOutcome, PipelineError> {
    let stage = Stage::Report;
    let path = config.output("report.json");
    let text = fs::read_to_string(&path).map_err(|_| PipelineError::Missing {
        stage,
        needs: Stage::Report,
        what: path.display().to_string(),
    })?;
    let report: Value =
        serde_json::from_str(&text).map_err(|e| PipelineError::stage(stage)(&e))?;
    let ds = load_dataset(config, stage)?;
    let prompts = prompts(config)?;
    let verdicts = require_pair_verdicts(config, &ds, &prompts, stage)?.unwrap_or_default();
    let mut out = VerifyOutcome {
        checked: 0,
        mismatches: Vec::new(),
    };
    let rows = report.get("acceptance").and_then(Value::as_array);
    for row in rows.into_iter().flatten() {
        let label = row.to_string();
        let method = row["method"].as_str().and_then(|m| m.parse::<Method>().ok());
        let scope = row["scope"].as_str();
        let (Some(method), Some(scope)) = (method, scope) else {
            out.mismatches.push(format!("unreadable acceptance row {label}"));
            continue;
        };
        let condition = match scope {
            "overall" => None,
            c => match c.parse::<Condition>() {
                Ok(c) => Some(c),
                Err(_) => {
                    out.mismatches.push(format!("unknown scope in {label}"));
                    continue;
                }
            },
        };
        let filter = |v: &Verdict| {
            v.kind == ItemKind::Pair
                && v.method == Some(method)
                && condition.is_none_or(|c| v.condition == c)
        };
        compare(&mut out, &format!("{method}/{scope}"), row, acceptance_rate(&verdicts, filter).ok());
    }
    let judges = report.get("judges").and_then(Value::as_array);
    for row in judges.into_iter().flatten() {
        let Some(judge) = row["judge_id"].as_str() else {
            out.mismatches.push(format!("unreadable judge row {row}"));
            continue;
        };
        let recomputed = acceptance_rate(&verdicts, |v| v.judge_id == judge).ok();
        compare(&mut out, &format!("judge {judge}"), &row["augmented"], recomputed);
    }
    Ok(out)
}

fn compare(out: &mut VerifyOutcome, label: &str, row: &Value, recomputed: Option<AcceptanceRate>) {
    out.checked += 1;
    let Some(r) = recomputed else {
        out.mismatches.push(format!("{label}: no cached verdicts"));
        return;
    };
    let count = |k: &str| row[k].as_u64().map(|n| n as usize);
    let expected = (Some(r.accepted), Some(r.evaluated), Some(r.dropped));
    let found = (count("accepted"), count("evaluated"), count("dropped"));
    // the report prints 3 decimals; compare at that precision
    let rate = Num::rate(r.rate).to_string();
    let printed = row["rate"].as_f64().map(|x| Num::rate(x).to_string());
    if found != expected || printed.as_deref() != Some(rate.as_str()) {
        out.mismatches.push(format!(
            "{label}: report has {}/{} (rate {}), cache gives {}/{} (rate {rate})",
            found.0.map_or("?".into(), |n| n.to_string()),
            found.1.map_or("?".into(), |n| n.to_string()),
            printed.unwrap_or_else(|| "?".into()),
            r.accepted,
            r.evaluated,
        ));
    }
}
