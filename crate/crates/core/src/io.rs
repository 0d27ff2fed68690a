//! Flat-file formats: trial-log CSV, summary and diagnostics CSVs and the
//! calibration JSON record.

use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{Arm, StepRecord};
use crate::error::{Error, Result};
use crate::inference::CriticalValues;
use crate::metrics::AssignmentHistogram;
use crate::sweep::CellSummary;

pub const TRIAL_LOG_HEADER: [&str; 5] = ["sim_id", "t", "arm", "reward", "pi1"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "policy",
    "p1",
    "p2",
    "n",
    "n_sims",
    "test",
    "params",
    "reject_rate",
    "se",
    "undefined_count",
];
pub const DIAGNOSTICS_HEADER: [&str; 11] = [
    "policy",
    "p1",
    "p2",
    "method",
    "arm",
    "mean_estimate",
    "bias",
    "se_estimate",
    "mean_wald",
    "median_wald",
    "se_wald",
];
pub const ASSIGNMENT_HEADER: [&str; 7] = ["policy", "p1", "p2", "n", "n_sims", "bin", "proportion"];
pub const REWARD_HEADER: [&str; 7] = ["policy", "p1", "p2", "n", "n_sims", "mean_reward", "se"];

/// Fixed-point decimal with 17 significant digits, enough to round-trip any f64.
pub fn format_probability(p: f64) -> String {
    if p == 0.0 {
        return "0.0".to_string();
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(1) as usize;
    format!("{p:.decimals$}")
}

/// A trial log CSV: one row per step, `sim_id` separating trials.
pub fn write_trial_logs<W: Write>(writer: W, logs: &[(usize, &[StepRecord])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRIAL_LOG_HEADER)?;
    for (sim_id, steps) in logs {
        for s in steps.iter() {
            w.write_record([
                sim_id.to_string(),
                s.t.to_string(),
                s.arm.label().to_string(),
                s.reward.to_string(),
                format_probability(s.pi1),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a trial log CSV into `(sim_id, steps)` groups, in file order.
/// Rows of one simulation must be contiguous with `t` counting up from 1.
pub fn read_trial_logs<R: Read>(reader: R) -> Result<Vec<(usize, Vec<StepRecord>)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(TRIAL_LOG_HEADER) {
        return Err(Error::Parse {
            row: 1,
            column: "header".into(),
            message: format!(
                "expected `{}`, found `{}`",
                TRIAL_LOG_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut logs: Vec<(usize, Vec<StepRecord>)> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Parse {
                row,
                column: TRIAL_LOG_HEADER[col].into(),
                message: "missing value".into(),
            })
        };
        let bad = |col: usize, message: String| Error::Parse {
            row,
            column: TRIAL_LOG_HEADER[col].into(),
            message,
        };
        let sim_id: usize = field(0)?.parse().map_err(|_| {
            bad(
                0,
                format!("`{}` is not a non-negative integer", field(0).unwrap_or("")),
            )
        })?;
        let t: usize = field(1)?
            .parse()
            .map_err(|_| bad(1, "not a positive integer".into()))?;
        let arm = field(2)?
            .parse::<u8>()
            .ok()
            .and_then(Arm::from_label)
            .ok_or_else(|| bad(2, format!("`{}` is not 1 or 2", field(2).unwrap_or(""))))?;
        let reward: u8 = match field(3)? {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(3, format!("`{other}` is not 0 or 1"))),
        };
        let pi1: f64 = field(4)?
            .parse()
            .map_err(|_| bad(4, "not a number".into()))?;
        if !(0.0..=1.0).contains(&pi1) {
            return Err(bad(4, format!("{pi1} is not a probability")));
        }
        if logs.last().map(|(id, _)| *id) != Some(sim_id) {
            if logs.iter().any(|(id, _)| *id == sim_id) {
                return Err(bad(
                    0,
                    format!("rows of sim_id {sim_id} are not contiguous"),
                ));
            }
            logs.push((sim_id, Vec::new()));
        }
        let steps = &mut logs.last_mut().expect("just pushed").1;
        if t != steps.len() + 1 {
            return Err(bad(
                1,
                format!("expected t = {}, found {t}", steps.len() + 1),
            ));
        }
        steps.push(StepRecord {
            t,
            arm,
            reward,
            pi1,
        });
    }
    Ok(logs)
}

pub fn write_calibration(path: &Path, calibration: &CriticalValues) -> Result<()> {
    let mut text = serde_json::to_string_pretty(calibration)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<CriticalValues> {
    let calibration: CriticalValues = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if calibration.lower.partial_cmp(&calibration.upper) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Config(format!(
            "calibration bounds [{}, {}] are not increasing",
            calibration.lower, calibration.upper
        )));
    }
    Ok(calibration)
}

pub fn write_summary_csv<W: Write>(writer: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for cell in cells {
        for t in &cell.tests {
            w.write_record([
                cell.policy.to_string(),
                cell.env.p1.to_string(),
                cell.env.p2.to_string(),
                cell.env.horizon.to_string(),
                cell.n_sims.to_string(),
                t.test.clone(),
                t.params.clone(),
                t.summary.rate.to_string(),
                t.summary.se.to_string(),
                t.summary.undefined_count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(writer: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DIAGNOSTICS_HEADER)?;
    for cell in cells {
        for d in &cell.diagnostics {
            for (i, arm) in d.arms.iter().enumerate() {
                w.write_record([
                    cell.policy.to_string(),
                    cell.env.p1.to_string(),
                    cell.env.p2.to_string(),
                    d.method.label().to_string(),
                    (i + 1).to_string(),
                    arm.mean_estimate.to_string(),
                    arm.bias.to_string(),
                    arm.se_estimate.to_string(),
                    d.mean_wald.to_string(),
                    d.median_wald.to_string(),
                    d.se_wald.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_assignment_csv<W: Write>(writer: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ASSIGNMENT_HEADER)?;
    for cell in cells {
        for (i, p) in cell.histogram.proportions.iter().enumerate() {
            w.write_record([
                cell.policy.to_string(),
                cell.env.p1.to_string(),
                cell.env.p2.to_string(),
                cell.env.horizon.to_string(),
                cell.n_sims.to_string(),
                AssignmentHistogram::bin_label(i),
                p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_reward_csv<W: Write>(writer: W, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REWARD_HEADER)?;
    for cell in cells {
        w.write_record([
            cell.policy.to_string(),
            cell.env.p1.to_string(),
            cell.env.p2.to_string(),
            cell.env.horizon.to_string(),
            cell.n_sims.to_string(),
            cell.mean_reward.mean.to_string(),
            cell.mean_reward.se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const REWARD_FILE: &str = "reward.csv";
pub const CELLS_FILE: &str = "cells.json";

pub fn write_run_outputs(dir: &Path, cells: &[CellSummary]) -> Result<()> {
    let create = |name: &str| std::fs::File::create(dir.join(name));
    write_summary_csv(create(SUMMARY_FILE)?, cells)?;
    write_diagnostics_csv(create(DIAGNOSTICS_FILE)?, cells)?;
    write_assignment_csv(create(ASSIGNMENT_FILE)?, cells)?;
    write_reward_csv(create(REWARD_FILE)?, cells)?;
    let mut json = serde_json::to_string_pretty(cells)?;
    json.push('\n');
    std::fs::write(dir.join(CELLS_FILE), json)?;
    Ok(())
}

/// Reads back any of the run CSVs as header plus rows of strings.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| Ok(rec?.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}
