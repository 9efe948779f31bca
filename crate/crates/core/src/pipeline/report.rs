//! Consolidated summary of a finished workdir.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{load_ablation, load_evaluation, load_transfer, read_manifest, read_text};
use super::Stage;
use crate::error::{Error, Result};
use crate::eval::{format_reports, AblationTable, MethodReport, TransferReport};
use crate::util::format_sig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    /// Canonical config the run used.
    pub config: String,
    pub evaluation: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferReport>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        Ok(body)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config hash: {}\n", self.config_hash);
        out.push_str("== Pre@k% by topic ==\n");
        out.push_str(&format_reports(&self.evaluation));
        if let Some(a) = &self.ablation {
            let _ = writeln!(out, "\n== Feature-group ablation, IIRL Pre@{}% ==", format_sig(a.k, 6));
            out.push_str(&format_ablation(a));
        }
        if let Some(t) = &self.transfer {
            let _ = writeln!(out, "\n== Transfer from topic {} ==", t.r_hat);
            out.push_str(&format_transfer(t));
        }
        out.push_str("\n== Config ==\n");
        out.push_str(&self.config);
        out
    }
}

fn format_ablation(table: &AblationTable) -> String {
    let mut out = format!("{:<12}", "setting");
    for r in &table.topics {
        let _ = write!(out, " {:>8}", format!("topic {r}"));
    }
    out.push_str("  average\n");
    for row in &table.rows {
        let _ = write!(out, "{:<12}", row.setting);
        for p in &row.per_topic {
            let _ = write!(out, " {:>8.4}", p);
        }
        let _ = writeln!(out, " {:>8.4}", row.average);
    }
    out
}

/// Own-model and transferred-model Pre@k% side by side.
pub(super) fn format_transfer(report: &TransferReport) -> String {
    let mut out = format!("{:<8}", "topic");
    for k in &report.ks {
        let k = format_sig(*k, 6);
        let _ = write!(out, " {:>14} {:>14}", format!("own@{k}%"), format!("transfer@{k}%"));
    }
    out.push('\n');
    for row in &report.rows {
        let _ = write!(out, "{:<8}", row.topic);
        for (o, t) in row.own.iter().zip(&row.transfer) {
            let _ = write!(out, " {:>14.4} {:>14.4}", o, t);
        }
        out.push('\n');
    }
    out
}

/// Collect evaluation, ablation and transfer results of `workdir` into
/// `reports/summary.{txt,json}`.
pub fn report(workdir: impl AsRef<Path>) -> Result<Summary> {
    let workdir = workdir.as_ref();
    if read_manifest(workdir)?.is_empty() {
        return Err(Error::Workdir(format!(
            "{}: empty workdir, no completed stages",
            workdir.display()
        )));
    }
    let eval_path = workdir.join("reports/evaluation.json");
    if !eval_path.exists() {
        return Err(Error::MissingArtifact {
            stage: Stage::Evaluate.name(),
            path: eval_path,
        });
    }
    let (config_hash, evaluation) = load_evaluation(workdir)?;
    let config = read_text(&workdir.join("config.toml"))?
        .lines()
        .filter(|l| !l.starts_with("# config_hash"))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        });
    let summary = Summary {
        config_hash,
        config,
        evaluation,
        ablation: load_ablation(workdir)?,
        transfer: load_transfer(workdir)?,
    };
    let dir = workdir.join("reports");
    let txt = dir.join("summary.txt");
    fs::write(&txt, summary.to_text()).map_err(|e| Error::io(&txt, e))?;
    let json = dir.join("summary.json");
    fs::write(&json, summary.to_json()?).map_err(|e| Error::io(&json, e))?;
    Ok(summary)
}
