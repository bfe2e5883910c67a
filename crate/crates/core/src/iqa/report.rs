use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gcf::{gcf, GcfParams};
use super::score::{tot_cs, CompositeInput};
use super::ssim::{ssim, SsimParams};
use super::stats::{paired_t_test, MeanStd};
use crate::imagecore::Image;
use crate::provenance::write_csv_with_header;
use crate::{Error, Result};

/// Label of the raw low-resolution input, always evaluated as a method.
pub const LR_METHOD: &str = "LR";

/// Images keyed by image id.
pub type ImageSet = BTreeMap<String, Image>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub ssim: SsimParams,
    pub gcf: GcfParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub image_id: String,
    pub method: String,
    pub ssim_vs_hr: f64,
    pub gcf: f64,
    pub gcf_lr: f64,
    pub gcf_hr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub ssim_vs_hr: MeanStd,
    pub dgcf_vs_hr: MeanStd,
    pub dgcf_vs_lr: MeanStd,
    pub tot_cs: f64,
    /// Paired t-test of per-image SSIM against the LR baseline; `None` for
    /// the baseline itself or with fewer than two images.
    pub ssim_p_vs_lr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub params: EvalParams,
    pub rows: Vec<ImageRow>,
    pub methods: Vec<MethodScores>,
}

fn check_ids(name: &str, set: &ImageSet, reference: &BTreeSet<&String>, problems: &mut Vec<String>) {
    let ids: BTreeSet<&String> = set.keys().collect();
    let missing: Vec<&str> = reference.difference(&ids).map(|s| s.as_str()).collect();
    let extra: Vec<&str> = ids.difference(reference).map(|s| s.as_str()).collect();
    if !missing.is_empty() {
        problems.push(format!("{name} is missing ids [{}]", missing.join(", ")));
    }
    if !extra.is_empty() {
        problems.push(format!("{name} has ids not in HR [{}]", extra.join(", ")));
    }
}

/// Scores every method (plus the LR input as baseline) against the HR set.
pub fn evaluate(methods: &BTreeMap<String, ImageSet>, lr: &ImageSet, hr: &ImageSet, params: &EvalParams) -> Result<MetricsReport> {
    params.ssim.validate()?;
    params.gcf.validate()?;
    if hr.is_empty() {
        return Err(Error::Empty("no HR images to evaluate against".into()));
    }
    if methods.contains_key(LR_METHOD) {
        return Err(Error::InvalidParameter(format!("method label `{LR_METHOD}` is reserved for the input baseline")));
    }
    let reference: BTreeSet<&String> = hr.keys().collect();
    let mut problems = Vec::new();
    check_ids("LR", lr, &reference, &mut problems);
    for (name, set) in methods {
        check_ids(&format!("method `{name}`"), set, &reference, &mut problems);
    }
    if !problems.is_empty() {
        return Err(Error::IdMismatch(problems.join("; ")));
    }

    let labels: Vec<&str> = std::iter::once(LR_METHOD).chain(methods.keys().map(String::as_str)).collect();
    let ids: Vec<&String> = hr.keys().collect();
    let per_id: Vec<Result<Vec<ImageRow>>> = ids
        .par_iter()
        .map(|&id| {
            let (h, l) = (&hr[id], &lr[id]);
            let gcf_hr = gcf(h, &params.gcf)?;
            let gcf_lr = gcf(l, &params.gcf)?;
            labels
                .iter()
                .map(|&m| {
                    let sr = if m == LR_METHOD { l } else { &methods[m][id] };
                    let g = if m == LR_METHOD { gcf_lr } else { gcf(sr, &params.gcf)? };
                    Ok(ImageRow {
                        image_id: id.clone(),
                        method: m.to_string(),
                        ssim_vs_hr: ssim(sr, h, &params.ssim)?,
                        gcf: g,
                        gcf_lr,
                        gcf_hr,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(ids.len() * labels.len());
    for r in per_id {
        rows.extend(r?);
    }
    let methods = aggregate(&rows)?;
    Ok(MetricsReport { params: params.clone(), rows, methods })
}

/// Method aggregates from per-image rows. Methods appear in first-seen row
/// order; the LR baseline must be present.
pub fn aggregate(rows: &[ImageRow]) -> Result<Vec<MethodScores>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_method: BTreeMap<&str, Vec<&ImageRow>> = BTreeMap::new();
    for r in rows {
        by_method
            .entry(r.method.as_str())
            .or_insert_with(|| {
                order.push(r.method.as_str());
                Vec::new()
            })
            .push(r);
    }
    let baseline = by_method
        .get(LR_METHOD)
        .ok_or_else(|| Error::InvalidParameter("rows lack the LR baseline".into()))?;
    let base_ssim: BTreeMap<&str, f64> = baseline.iter().map(|r| (r.image_id.as_str(), r.ssim_vs_hr)).collect();

    let mut scores = Vec::new();
    for m in &order {
        let rs = &by_method[m];
        let ssim: Vec<f64> = rs.iter().map(|r| r.ssim_vs_hr).collect();
        let dh: Vec<f64> = rs.iter().map(|r| r.gcf - r.gcf_hr).collect();
        let dl: Vec<f64> = rs.iter().map(|r| r.gcf - r.gcf_lr).collect();
        let ssim_p_vs_lr = if *m == LR_METHOD || rs.len() < 2 {
            None
        } else {
            let base: Vec<f64> = rs
                .iter()
                .map(|r| {
                    base_ssim
                        .get(r.image_id.as_str())
                        .copied()
                        .ok_or_else(|| Error::IdMismatch(format!("LR row missing for image `{}`", r.image_id)))
                })
                .collect::<Result<_>>()?;
            Some(paired_t_test(&ssim, &base)?.p_value)
        };
        scores.push(MethodScores {
            method: m.to_string(),
            ssim_vs_hr: MeanStd::of(&ssim)?,
            dgcf_vs_hr: MeanStd::of(&dh)?,
            dgcf_vs_lr: MeanStd::of(&dl)?,
            tot_cs: 0.0,
            ssim_p_vs_lr,
        });
    }
    let inputs: Vec<CompositeInput> = scores
        .iter()
        .map(|s| CompositeInput { method: s.method.clone(), ssim_vs_hr: s.ssim_vs_hr.mean, dgcf_vs_lr: s.dgcf_vs_lr.mean })
        .collect();
    if inputs.len() >= 2 {
        for (s, t) in scores.iter_mut().zip(tot_cs(&inputs)?) {
            s.tot_cs = t;
        }
    } else {
        // A lone method has no spread on either factor.
        scores[0].tot_cs = 0.5;
    }
    Ok(scores)
}

#[derive(Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub ssim_vs_hr_mean: f64,
    pub ssim_vs_hr_std: f64,
    pub dgcf_vs_hr_mean: f64,
    pub dgcf_vs_hr_std: f64,
    pub dgcf_vs_lr_mean: f64,
    pub dgcf_vs_lr_std: f64,
    pub tot_cs: f64,
    pub ssim_p_vs_lr: Option<f64>,
}

pub const IMAGE_COLUMNS: [&str; 6] = ["image_id", "method", "ssim_vs_hr", "gcf", "gcf_lr", "gcf_hr"];

impl MetricsReport {
    fn header(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "tot_cs_normalization": "min-max across the methods of this report, LR baseline included",
            "std": "population",
        })
    }

    /// Writes `images.csv`, `aggregate.csv` and the score-by-method
    /// `table.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
        let header = self.header();
        write_csv_with_header(&dir.join("images.csv"), &header, &IMAGE_COLUMNS, &self.rows)?;
        let agg: Vec<AggregateRow> = self
            .methods
            .iter()
            .map(|m| AggregateRow {
                method: m.method.clone(),
                ssim_vs_hr_mean: m.ssim_vs_hr.mean,
                ssim_vs_hr_std: m.ssim_vs_hr.std,
                dgcf_vs_hr_mean: m.dgcf_vs_hr.mean,
                dgcf_vs_hr_std: m.dgcf_vs_hr.std,
                dgcf_vs_lr_mean: m.dgcf_vs_lr.mean,
                dgcf_vs_lr_std: m.dgcf_vs_lr.std,
                tot_cs: m.tot_cs,
                ssim_p_vs_lr: m.ssim_p_vs_lr,
            })
            .collect();
        write_csv_with_header(&dir.join("aggregate.csv"), &header, &[], &agg)?;

        // One row per score, one column per method.
        let mut table = String::from("score");
        for m in &self.methods {
            table.push(',');
            table.push_str(&m.method);
        }
        table.push('\n');
        let lines: [(&str, Box<dyn Fn(&MethodScores) -> String>); 4] = [
            ("SSIM with HR", Box::new(|m| m.ssim_vs_hr.to_string())),
            ("dGCF with HR", Box::new(|m| m.dgcf_vs_hr.to_string())),
            ("dGCF with LR", Box::new(|m| m.dgcf_vs_lr.to_string())),
            ("Tot_cs", Box::new(|m| format!("{:.2}", m.tot_cs))),
        ];
        for (name, cell) in lines {
            table.push_str(name);
            for m in &self.methods {
                table.push(',');
                table.push_str(&cell(m));
            }
            table.push('\n');
        }
        let p = dir.join("table.csv");
        std::fs::write(&p, table).map_err(|source| Error::Write { path: p, source })
    }
}
