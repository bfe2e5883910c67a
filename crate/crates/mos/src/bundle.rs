//! Survey bundles. The public part (`bundle.json` plus `img/`) is all the
//! service ever reads; the key mapping aliases back to methods is written
//! to a separate file and only used on export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use pcle_core::provenance::derive_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, CANDIDATES_PER_CASE, QUESTIONS, SCALE};

pub const BUNDLE_FILE: &str = "bundle.json";

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

pub const INSTRUCTIONS: &str = "You will see a series of cases. Each case shows the input frame and a \
reference reconstruction, followed by four enhanced versions labelled A to D in random order. \
For every enhanced version, answer the three questions on a scale from 1 (strongly disagree) to \
5 (strongly agree). Judge each version on its own; there are no right answers.";

#[derive(Debug, Clone)]
pub struct SurveyInputs {
    pub input_dir: PathBuf,
    pub hr_dir: PathBuf,
    /// Method label and directory, one per candidate.
    pub methods: Vec<(String, PathBuf)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurveyOptions {
    pub n_cases: usize,
    pub seed: u64,
    /// Registered raters; empty accepts any self-chosen rater id.
    #[serde(default)]
    pub raters: Vec<String>,
    /// Give each registered rater their own random subset of this many
    /// cases instead of the shared set.
    #[serde(default)]
    pub cases_per_rater: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub input: String,
    pub hr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleCase {
    pub case_id: String,
    /// Candidate aliases in the case's base order.
    pub candidates: Vec<String>,
    pub references: References,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub shuffle_seed: u64,
    pub instructions: String,
    pub questions: Vec<String>,
    pub scale: Vec<String>,
    #[serde(default)]
    pub raters: Vec<String>,
    /// Per-rater case lists; absent means every rater sees every case.
    #[serde(default)]
    pub assignments: BTreeMap<String, Vec<String>>,
    pub cases: Vec<BundleCase>,
    /// Opaque image id to file path relative to the bundle directory.
    pub images: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub method: String,
    pub image_id: String,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub seed: u64,
    pub methods: Vec<String>,
    /// Candidate alias to method.
    pub aliases: BTreeMap<String, KeyEntry>,
    /// Reference image id to role (`input` or `hr`).
    pub references: BTreeMap<String, KeyEntry>,
    /// Case id to source image id.
    pub cases: BTreeMap<String, String>,
}

impl Key {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
    }
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(BUNDLE_FILE);
        let text = fs::read_to_string(&path).map_err(|source| Error::Read { path: path.clone(), source })?;
        let b: Bundle = serde_json::from_str(&text).map_err(|e| Error::Format { path: path.clone(), reason: e.to_string() })?;
        b.validate().map_err(|e| Error::Format { path, reason: e.to_string() })?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.cases {
            if c.candidates.len() != CANDIDATES_PER_CASE {
                return Err(Error::Invalid(format!("case `{}` has {} candidates", c.case_id, c.candidates.len())));
            }
            if !seen.insert(c.case_id.as_str()) {
                return Err(Error::Invalid(format!("case `{}` appears twice", c.case_id)));
            }
            for id in c.candidates.iter().chain([&c.references.input, &c.references.hr]) {
                if !self.images.contains_key(id) {
                    return Err(Error::Invalid(format!("case `{}` refers to unknown image `{id}`", c.case_id)));
                }
            }
        }
        for (rater, cases) in &self.assignments {
            if let Some(c) = cases.iter().find(|c| !seen.contains(c.as_str())) {
                return Err(Error::Invalid(format!("rater `{rater}` is assigned unknown case `{c}`")));
            }
        }
        Ok(())
    }

    pub fn case(&self, case_id: &str) -> Option<&BundleCase> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    pub fn knows_rater(&self, rater: &str) -> bool {
        !rater.is_empty() && (self.raters.is_empty() || self.raters.iter().any(|r| r == rater))
    }

    /// Case ids a rater works through, in order.
    pub fn cases_for(&self, rater: &str) -> Vec<&BundleCase> {
        match self.assignments.get(rater) {
            Some(ids) => ids.iter().filter_map(|id| self.case(id)).collect(),
            None => self.cases.iter().collect(),
        }
    }

    /// Candidate aliases of `case` in the order shown to `rater`. Depends on
    /// nothing but the bundle seed and the two ids, so reloads never reshuffle.
    pub fn presentation(&self, rater: &str, case: &BundleCase) -> Vec<String> {
        let mut order = case.candidates.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.shuffle_seed, &format!("{rater}\u{0}{}", case.case_id)));
        order.shuffle(&mut rng);
        order
    }
}

fn list_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|source| Error::Read { path: dir.to_path_buf(), source })?;
    let mut out = BTreeMap::new();
    for e in rd {
        let p = e.map_err(|source| Error::Read { path: dir.to_path_buf(), source })?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if let Some(prev) = out.insert(stem.clone(), p.clone()) {
            return Err(Error::Invalid(format!("image id `{stem}` appears twice: {} and {}", prev.display(), p.display())));
        }
    }
    Ok(out)
}

fn token(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let t = format!("{:012x}", rng.random::<u64>() >> 16);
        if used.insert(t.clone()) {
            return t;
        }
    }
}

/// Picks `n_cases` ids present in every directory, copies each file
/// byte-for-byte under an opaque name into `public_dir`, and writes the
/// unblinding key to `key_path`. `key_path` must lie outside `public_dir`.
pub fn prepare_survey(inputs: &SurveyInputs, opts: &SurveyOptions, public_dir: &Path, key_path: &Path) -> Result<(Bundle, Key)> {
    if inputs.methods.len() != CANDIDATES_PER_CASE {
        return Err(Error::Invalid(format!(
            "a survey case shows exactly {CANDIDATES_PER_CASE} candidates; got {} method directories",
            inputs.methods.len()
        )));
    }
    let labels: BTreeSet<&str> = inputs.methods.iter().map(|(m, _)| m.as_str()).collect();
    if labels.len() != inputs.methods.len() || labels.iter().any(|m| m.is_empty()) {
        return Err(Error::Invalid("method labels must be non-empty and distinct".into()));
    }
    if let (Ok(k), Ok(p)) = (key_path.parent().map(fs::canonicalize).unwrap_or(Ok(PathBuf::new())), fs::canonicalize(public_dir)) {
        if k.starts_with(&p) {
            return Err(Error::Invalid(format!("key file {} must not be inside the public bundle", key_path.display())));
        }
    }

    let input = list_images(&inputs.input_dir)?;
    let hr = list_images(&inputs.hr_dir)?;
    let methods: Vec<(String, BTreeMap<String, PathBuf>)> =
        inputs.methods.iter().map(|(m, d)| Ok((m.clone(), list_images(d)?))).collect::<Result<_>>()?;
    let aligned: Vec<&String> = input
        .keys()
        .filter(|id| hr.contains_key(*id) && methods.iter().all(|(_, set)| set.contains_key(*id)))
        .collect();
    if aligned.len() < opts.n_cases {
        return Err(Error::Invalid(format!(
            "{} cases requested but only {} image ids are present in the input, HR and all method directories",
            opts.n_cases,
            aligned.len()
        )));
    }
    if let Some(k) = opts.cases_per_rater {
        if k > opts.n_cases || opts.raters.is_empty() {
            return Err(Error::Invalid(format!("cases_per_rater {k} needs registered raters and at most n_cases ({})", opts.n_cases)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picked: Vec<&String> = aligned.clone();
    picked.shuffle(&mut rng);
    picked.truncate(opts.n_cases);

    let img_dir = public_dir.join("img");
    fs::create_dir_all(&img_dir).map_err(|source| Error::Write { path: img_dir.clone(), source })?;
    let mut used = BTreeSet::new();
    let mut images = BTreeMap::new();
    let mut copy = |src: &Path, rng: &mut ChaCha8Rng| -> Result<String> {
        let t = token(rng, &mut used);
        let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("png").to_ascii_lowercase();
        let rel = format!("img/{t}.{ext}");
        let dst = public_dir.join(&rel);
        fs::copy(src, &dst).map_err(|source| Error::Write { path: dst, source })?;
        images.insert(t.clone(), rel);
        Ok(t)
    };

    let mut cases = Vec::new();
    let mut key = Key {
        seed: opts.seed,
        methods: inputs.methods.iter().map(|(m, _)| m.clone()).collect(),
        aliases: BTreeMap::new(),
        references: BTreeMap::new(),
        cases: BTreeMap::new(),
    };
    let width = opts.n_cases.max(1).to_string().len().max(3);
    for (k, id) in picked.iter().enumerate() {
        let case_id = format!("case-{:0width$}", k + 1);
        let mut order: Vec<usize> = (0..CANDIDATES_PER_CASE).collect();
        order.shuffle(&mut rng);
        let mut candidates = Vec::new();
        for m in order {
            let (label, set) = &methods[m];
            let src = &set[*id];
            let alias = copy(src, &mut rng)?;
            key.aliases.insert(alias.clone(), KeyEntry { method: label.clone(), image_id: id.to_string(), source: src.clone() });
            candidates.push(alias);
        }
        let inp = copy(&input[*id], &mut rng)?;
        key.references.insert(inp.clone(), KeyEntry { method: "input".into(), image_id: id.to_string(), source: input[*id].clone() });
        let h = copy(&hr[*id], &mut rng)?;
        key.references.insert(h.clone(), KeyEntry { method: "hr".into(), image_id: id.to_string(), source: hr[*id].clone() });
        key.cases.insert(case_id.clone(), id.to_string());
        cases.push(BundleCase { case_id, candidates, references: References { input: inp, hr: h } });
    }

    let mut assignments = BTreeMap::new();
    if let Some(k) = opts.cases_per_rater {
        for r in &opts.raters {
            let mut rr = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &format!("assign/{r}")));
            let mut ids: Vec<String> = cases.iter().map(|c| c.case_id.clone()).collect();
            ids.shuffle(&mut rr);
            ids.truncate(k);
            ids.sort();
            assignments.insert(r.clone(), ids);
        }
    }

    let bundle = Bundle {
        shuffle_seed: rng.random(),
        instructions: INSTRUCTIONS.to_string(),
        questions: QUESTIONS.iter().map(|q| q.to_string()).collect(),
        scale: SCALE.iter().map(|s| s.to_string()).collect(),
        raters: opts.raters.clone(),
        assignments,
        cases,
        images,
    };
    write_json(&public_dir.join(BUNDLE_FILE), &bundle)?;
    if let Some(parent) = key_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Write { path: parent.to_path_buf(), source })?;
    }
    write_json(key_path, &key)?;
    Ok((bundle, key))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}
