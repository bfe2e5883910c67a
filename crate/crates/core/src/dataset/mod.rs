//! Experiment corpora: sequence records, stratified sequence-level splits
//! and paired LR/HR manifests.

mod pairs;

pub use pairs::{build_pairs, LrSource, Origin, PairHeader, PairManifest, PairRow, PAIR_COLUMNS};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::provenance::{derive_seed, read_csv_with_header, write_csv_with_header};
use crate::{Error, Result};

/// Minimum sequences per tissue label for a split.
pub const MIN_PER_LABEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence_id: String,
    pub tissue_label: String,
    pub probe_id: String,
    /// Frame directory, relative to the HR root.
    pub frame_dir: PathBuf,
}

/// Reads `sequence_id,tissue_label,probe_id,frame_dir`. With a vocabulary,
/// labels outside it are rejected.
pub fn load_records(path: &Path, vocabulary: Option<&[&str]>) -> Result<Vec<SequenceRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Read { path: path.to_path_buf(), source },
        other => Error::Format { path: path.to_path_buf(), reason: format!("{other:?}") },
    })?;
    let records = rdr.deserialize().collect::<std::result::Result<Vec<SequenceRecord>, _>>()?;
    validate_records(&records, vocabulary)?;
    Ok(records)
}

pub fn validate_records(records: &[SequenceRecord], vocabulary: Option<&[&str]>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in records {
        if r.sequence_id.is_empty() || r.tissue_label.is_empty() {
            return Err(Error::InvalidParameter("record with empty sequence_id or tissue_label".into()));
        }
        if !seen.insert(r.sequence_id.as_str()) {
            return Err(Error::InvalidParameter(format!("sequence `{}` listed twice", r.sequence_id)));
        }
        if let Some(v) = vocabulary {
            if !v.contains(&r.tissue_label.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "sequence `{}` has label `{}` outside [{}]",
                    r.sequence_id,
                    r.tissue_label,
                    v.join(", ")
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions(pub [f64; 3]);

impl Default for Fractions {
    fn default() -> Self {
        Fractions([0.70, 0.15, 0.15])
    }
}

impl Fractions {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidParameter(format!("fractions {:?} must each lie in [0, 1]", self.0)));
        }
        let s: f64 = self.0.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("fractions {:?} sum to {s}, not 1", self.0)));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items; equal remainders go to
    /// the earlier split.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let quotas = self.0.map(|f| f * n as f64);
        let mut sizes = quotas.map(|q| q.floor() as usize);
        let mut left = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[k] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub sequence_id: String,
    pub tissue_label: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub fractions: Fractions,
    pub seed: u64,
    /// Ordered by label, then split, then shuffled position.
    pub rows: Vec<SplitRow>,
}

/// Per tissue label: sort ids, shuffle with a label-derived stream, cut by
/// largest-remainder sizes.
pub fn stratified_split(records: &[SequenceRecord], fractions: Fractions, seed: u64) -> Result<SplitManifest> {
    fractions.validate()?;
    validate_records(records, None)?;
    let mut by_label: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_label.entry(r.tissue_label.as_str()).or_default().push(r.sequence_id.as_str());
    }
    let mut rows = Vec::with_capacity(records.len());
    for (label, mut ids) in by_label {
        if ids.len() < MIN_PER_LABEL {
            return Err(Error::InvalidParameter(format!(
                "label `{label}` has {} sequences; a split needs at least {MIN_PER_LABEL}",
                ids.len()
            )));
        }
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label));
        ids.shuffle(&mut rng);
        let sizes = fractions.apportion(ids.len());
        let mut it = ids.into_iter();
        for (split, n) in Split::ALL.into_iter().zip(sizes) {
            for id in it.by_ref().take(n) {
                rows.push(SplitRow { sequence_id: id.to_string(), tissue_label: label.to_string(), split });
            }
        }
    }
    Ok(SplitManifest { fractions, seed, rows })
}

#[derive(Serialize, Deserialize)]
struct SplitHeader {
    seed: u64,
    fractions: Fractions,
}

impl SplitManifest {
    pub fn get(&self, sequence_id: &str) -> Option<Split> {
        self.rows.iter().find(|r| r.sequence_id == sequence_id).map(|r| r.split)
    }

    /// Sequence counts per (label, split).
    pub fn counts(&self) -> BTreeMap<(String, Split), usize> {
        let mut c = BTreeMap::new();
        for r in &self.rows {
            *c.entry((r.tissue_label.clone(), r.split)).or_insert(0) += 1;
        }
        c
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_value(SplitHeader { seed: self.seed, fractions: self.fractions })?;
        write_csv_with_header(path, &header, &["sequence_id", "tissue_label", "split"], &self.rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, rows) = read_csv_with_header::<SplitRow>(path)?;
        let h: SplitHeader = serde_json::from_value(header)?;
        Ok(Self { fractions: h.fractions, seed: h.seed, rows })
    }
}
