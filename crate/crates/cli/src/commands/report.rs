//! `report`: plain-text summary of a run directory.

use std::fmt::Write as _;
use std::path::Path;

use fractoseg_core::metrics::EvalReport;
use fractoseg_core::train::EpochLog;

use super::evaluate::REPORT_JSON;
use super::train::LOG_FILE;
use crate::error::{CliError, Result};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Renders the training log and evaluation report found in `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let mut out = String::new();
    let log_path = dir.join(LOG_FILE);
    let eval_path = dir.join(REPORT_JSON);
    if !log_path.exists() && !eval_path.exists() {
        return Err(CliError::Input(format!(
            "{} holds neither {LOG_FILE} nor {REPORT_JSON}",
            dir.display()
        )));
    }
    if log_path.exists() {
        let text = std::fs::read_to_string(&log_path).map_err(CliError::io(&log_path))?;
        let _ = writeln!(
            out,
            "{:>5} {:>10} {:>10} {:>10} {:>10}",
            "epoch", "loss", "accuracy", "val loss", "val acc"
        );
        let mut best: Option<EpochLog> = None;
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let log: EpochLog = serde_json::from_str(line)
                .map_err(|e| CliError::data(&log_path, format!("line {}: {e}", n + 1)))?;
            let _ = writeln!(
                out,
                "{:>5} {:>10.4} {:>10.4} {:>10} {:>10}",
                log.epoch,
                log.train_loss,
                log.train_accuracy,
                opt(log.val_loss),
                opt(log.val_accuracy)
            );
            if log.val_loss.is_some() && best.as_ref().is_none_or(|b| log.val_loss < b.val_loss) {
                best = Some(log);
            }
        }
        if let Some(b) = best {
            let _ = writeln!(
                out,
                "best validation loss {} at epoch {}",
                opt(b.val_loss),
                b.epoch
            );
        }
    }
    if eval_path.exists() {
        let text = std::fs::read_to_string(&eval_path).map_err(CliError::io(&eval_path))?;
        let r: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::data(&eval_path, format!("invalid report: {e}")))?;
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "{r}");
    }
    Ok(out)
}
