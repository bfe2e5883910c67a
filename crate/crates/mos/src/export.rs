//! Unblinding and aggregation of the score log. Runs offline only.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use pcle_core::provenance::write_csv_with_header;
use serde::{Deserialize, Serialize};

use crate::bundle::Key;
use crate::store::replay;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRow {
    pub method: String,
    pub question: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterDiagnostic {
    pub rater_id: String,
    /// Latest records, one per scored candidate.
    pub records: usize,
    /// Log lines including replaced ones.
    pub submissions: usize,
    pub cases_complete: usize,
    pub cases_partial: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MosExport {
    pub rows: Vec<MosRow>,
    pub raters: Vec<RaterDiagnostic>,
}

/// Latest record per (rater, case, alias), mapped through the key and
/// reduced per (method, question). Methods without scores still get rows
/// with count 0.
pub fn export_mos(log: &Path, key: &Key) -> Result<MosExport> {
    let (all, latest) = replay(log)?;
    let mut scores: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for m in &key.methods {
        for q in 0..3 {
            scores.entry((m.clone(), q)).or_default();
        }
    }
    let mut per_case: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for ((rater, case, alias), rec) in &latest {
        let entry = key
            .aliases
            .get(alias)
            .ok_or_else(|| Error::NotFound(format!("alias `{alias}` (rater `{rater}`, case `{case}`) is not in the key")))?;
        let s = &rec.submission;
        for (q, v) in [s.q1, s.q2, s.q3].into_iter().enumerate() {
            scores.entry((entry.method.clone(), q)).or_default().push(v as f64);
        }
        per_case.entry((rater.clone(), case.clone())).or_default().insert(alias.clone());
    }

    let rows = scores
        .into_iter()
        .map(|((method, q), v)| {
            let n = v.len();
            let (mean, std) = if n == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let m = v.iter().sum::<f64>() / n as f64;
                (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt())
            };
            MosRow { method, question: format!("Q{}", q + 1), mean, std, count: n }
        })
        .collect();

    let mut raters: BTreeMap<String, RaterDiagnostic> = BTreeMap::new();
    let diag = |r: &str| RaterDiagnostic { rater_id: r.to_string(), records: 0, submissions: 0, cases_complete: 0, cases_partial: 0 };
    for rec in &all {
        let r = &rec.submission.rater_id;
        raters.entry(r.clone()).or_insert_with(|| diag(r)).submissions += 1;
    }
    for ((rater, _), aliases) in &per_case {
        let d = raters.entry(rater.clone()).or_insert_with(|| diag(rater));
        d.records += aliases.len();
        if aliases.len() == crate::CANDIDATES_PER_CASE {
            d.cases_complete += 1;
        } else {
            d.cases_partial += 1;
        }
    }
    Ok(MosExport { rows, raters: raters.into_values().collect() })
}

impl MosExport {
    /// Writes `mos.csv` (one row per method and question) and `raters.csv`.
    pub fn write(&self, dir: &Path, header: &serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
        write_csv_with_header(&dir.join("mos.csv"), header, &["method", "question", "mean", "std", "count"], &self.rows)?;
        write_csv_with_header(
            &dir.join("raters.csv"),
            header,
            &["rater_id", "records", "submissions", "cases_complete", "cases_partial"],
            &self.raters,
        )?;
        Ok(())
    }

    pub fn get(&self, method: &str, question: &str) -> Option<&MosRow> {
        self.rows.iter().find(|r| r.method == method && r.question == question)
    }
}
