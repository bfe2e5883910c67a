//! `run.json` provenance records and replay.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pcle_core::provenance::hash_file;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::commands;

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: Option<u64>,
    pub threads: usize,
    /// Absolute input file path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

fn abs(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(&*p).with_context(|| format!("cannot resolve {}", p.display()))?;
    Ok(())
}

/// Makes the directory in each NAME=DIR argument absolute.
fn abs_methods(v: &mut [String]) -> Result<()> {
    for m in v {
        if let Some((name, dir)) = m.split_once('=') {
            let mut p = PathBuf::from(dir);
            abs(&mut p)?;
            *m = format!("{name}={}", p.display());
        }
    }
    Ok(())
}

impl Command {
    fn absolutize(&mut self) -> Result<()> {
        match self {
            Command::Simulate(a) => {
                abs(&mut a.hr)?;
                abs(&mut a.out)?;
                if let Some(l) = &mut a.layout.layout {
                    abs(l)?;
                }
            }
            Command::Mosaic(a) => {
                abs(&mut a.input)?;
                abs(&mut a.out)?;
            }
            Command::Evaluate(a) => {
                abs(&mut a.hr)?;
                abs(&mut a.lr)?;
                abs(&mut a.out)?;
                abs_methods(&mut a.methods)?;
            }
            Command::Baseline { which: BaselineCommand::Wiener(a) } => {
                abs(&mut a.input)?;
                abs(&mut a.out)?;
            }
            Command::Baseline { which: BaselineCommand::Sharpen(a) } => {
                abs(&mut a.input)?;
                abs(&mut a.out)?;
            }
            Command::Dataset { which: DatasetCommand::Split(a) } => {
                abs(&mut a.records)?;
                abs(&mut a.out)?;
            }
            Command::Dataset { which: DatasetCommand::Pairs(a) } => {
                abs(&mut a.records)?;
                abs(&mut a.split)?;
                abs(&mut a.hr_root)?;
                abs(&mut a.out)?;
                if let Some(l) = &mut a.lr_root {
                    abs(l)?;
                }
                if let Some(l) = &mut a.layout.layout {
                    abs(l)?;
                }
            }
            Command::Survey { which: SurveyCommand::Prep(a) } => {
                abs(&mut a.input)?;
                abs(&mut a.hr)?;
                abs(&mut a.out)?;
                abs_methods(&mut a.methods)?;
            }
            Command::Survey { which: SurveyCommand::Export(a) } => {
                abs(&mut a.log)?;
                abs(&mut a.key)?;
                abs(&mut a.out)?;
            }
            Command::Serve(_) | Command::Replay(_) => {}
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let methods = |v: &[String]| v.iter().filter_map(|m| m.split_once('=').map(|(_, d)| PathBuf::from(d))).collect::<Vec<_>>();
        match self {
            Command::Simulate(a) => [Some(a.hr.clone()), a.layout.layout.clone()].into_iter().flatten().collect(),
            Command::Mosaic(a) => vec![a.input.clone()],
            Command::Evaluate(a) => [vec![a.hr.clone(), a.lr.clone()], methods(&a.methods)].concat(),
            Command::Baseline { which: BaselineCommand::Wiener(a) } => vec![a.input.clone()],
            Command::Baseline { which: BaselineCommand::Sharpen(a) } => vec![a.input.clone()],
            Command::Dataset { which: DatasetCommand::Split(a) } => vec![a.records.clone()],
            Command::Dataset { which: DatasetCommand::Pairs(a) } => [Some(a.records.clone()), Some(a.split.clone()), Some(a.hr_root.clone()), a.lr_root.clone(), a.layout.layout.clone()]
                .into_iter()
                .flatten()
                .collect(),
            Command::Survey { which: SurveyCommand::Prep(a) } => [vec![a.input.clone(), a.hr.clone()], methods(&a.methods)].concat(),
            Command::Survey { which: SurveyCommand::Export(a) } => vec![a.log.clone(), a.key.clone()],
            Command::Serve(_) | Command::Replay(_) => vec![],
        }
    }

    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        Some(match self {
            Command::Simulate(a) => &mut a.out,
            Command::Mosaic(a) => &mut a.out,
            Command::Evaluate(a) => &mut a.out,
            Command::Baseline { which: BaselineCommand::Wiener(a) } => &mut a.out,
            Command::Baseline { which: BaselineCommand::Sharpen(a) } => &mut a.out,
            Command::Dataset { which: DatasetCommand::Split(a) } => &mut a.out,
            Command::Dataset { which: DatasetCommand::Pairs(a) } => &mut a.out,
            Command::Survey { which: SurveyCommand::Prep(a) } => &mut a.out,
            Command::Survey { which: SurveyCommand::Export(a) } => &mut a.out,
            Command::Serve(_) | Command::Replay(_) => return None,
        })
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Dataset { which: DatasetCommand::Split(a) } => Some(a.seed),
            Command::Dataset { which: DatasetCommand::Pairs(a) } => Some(a.seed),
            Command::Survey { which: SurveyCommand::Prep(a) } => Some(a.seed),
            _ => None,
        }
    }

    fn dispatch(&self) -> Result<Vec<PathBuf>> {
        match self {
            Command::Simulate(a) => commands::simulate(a),
            Command::Mosaic(a) => commands::mosaic(a),
            Command::Evaluate(a) => commands::evaluate_cmd(a),
            Command::Baseline { which: BaselineCommand::Wiener(a) } => commands::wiener(a),
            Command::Baseline { which: BaselineCommand::Sharpen(a) } => commands::sharpen(a),
            Command::Dataset { which: DatasetCommand::Split(a) } => commands::split(a),
            Command::Dataset { which: DatasetCommand::Pairs(a) } => commands::pairs(a),
            Command::Survey { which: SurveyCommand::Prep(a) } => commands::survey_prep(a),
            Command::Survey { which: SurveyCommand::Export(a) } => commands::survey_export(a),
            Command::Serve(_) | Command::Replay(_) => unreachable!("not a recorded run"),
        }
    }
}

fn hash_inputs(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        if !p.exists() {
            bail!("input {} does not exist", p.display());
        }
        for e in walkdir::WalkDir::new(p).sort_by_file_name() {
            let e = e.with_context(|| format!("cannot walk {}", p.display()))?;
            if e.file_type().is_file() {
                out.insert(e.path().display().to_string(), hash_file(e.path())?);
            }
        }
    }
    Ok(out)
}

/// Runs a recorded command and writes `run.json` next to its outputs.
pub fn execute(mut command: Command, threads: usize) -> Result<RunRecord> {
    command.absolutize()?;
    let inputs = hash_inputs(&command.inputs())?;
    let written = command.dispatch()?;
    let out_dir = command.out_mut().expect("recorded commands have an output directory").clone();
    let mut outputs = BTreeMap::new();
    for p in written {
        let rel = p.strip_prefix(&out_dir).unwrap_or(&p).display().to_string();
        outputs.insert(rel, hash_file(&p)?);
    }
    let rec = RunRecord {
        tool: "pcle".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: command.seed(),
        command,
        threads,
        inputs,
        outputs,
    };
    let path = out_dir.join(RUN_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&rec)? + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(rec)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a run record", path.display()))
}

pub struct ReplayOutcome {
    pub record: RunRecord,
    /// Outputs whose hash differs, or that appear on only one side.
    pub mismatched: Vec<String>,
}

/// Re-executes a recorded run. Inputs must still hash as recorded.
pub fn replay(args: &ReplayArgs, threads: usize) -> Result<ReplayOutcome> {
    let old = read_record(&args.run_json)?;
    let now = hash_inputs(&old.command.inputs())?;
    let changed: Vec<&String> = old.inputs.iter().filter(|(p, h)| now.get(*p) != Some(*h)).map(|(p, _)| p).collect();
    if !changed.is_empty() || now.len() != old.inputs.len() {
        let extra: Vec<&String> = now.keys().filter(|p| !old.inputs.contains_key(*p)).collect();
        bail!(
            "inputs differ from the recorded run; changed or missing: {changed:?}; new: {extra:?}"
        );
    }
    let mut command = old.command.clone();
    if let (Some(o), Some(slot)) = (&args.out, command.out_mut()) {
        *slot = o.clone();
    }
    let record = execute(command, threads)?;
    let keys: std::collections::BTreeSet<&String> = old.outputs.keys().chain(record.outputs.keys()).collect();
    let mismatched = keys.into_iter().filter(|k| old.outputs.get(*k) != record.outputs.get(*k)).cloned().collect();
    Ok(ReplayOutcome { record, mismatched })
}
