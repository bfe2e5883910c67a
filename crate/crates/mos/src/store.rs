//! Append-only newline-delimited JSON score log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use pcle_core::provenance::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSubmission {
    pub rater_id: String,
    pub case_id: String,
    pub alias: String,
    pub q1: u8,
    pub q2: u8,
    pub q3: u8,
    /// Time spent on the case, if the client reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<u64>,
}

impl ScoreSubmission {
    pub fn check_range(&self) -> Result<()> {
        for (name, q) in [("q1", self.q1), ("q2", self.q2), ("q3", self.q3)] {
            if !(1..=5).contains(&q) {
                return Err(Error::Invalid(format!("{name} = {q}; scores run from 1 to 5")));
            }
        }
        Ok(())
    }

    /// Same token for the same answers, so a repeated click is recognisable.
    pub fn ack(&self) -> String {
        let s = format!("{}\u{0}{}\u{0}{}\u{0}{}{}{}", self.rater_id, self.case_id, self.alias, self.q1, self.q2, self.q3);
        sha256_hex(s.as_bytes())[..16].to_string()
    }

    fn same_answers(&self, other: &ScoreSubmission) -> bool {
        (self.q1, self.q2, self.q3) == (other.q1, other.q2, other.q3)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    #[serde(flatten)]
    pub submission: ScoreSubmission,
    pub timestamp_ms: u128,
    pub ack: String,
}

pub type RecordKey = (String, String, String);

fn key_of(s: &ScoreSubmission) -> RecordKey {
    (s.rater_id.clone(), s.case_id.clone(), s.alias.clone())
}

/// Replays a log, keeping the last record per (rater, case, alias). A
/// truncated final line (crash mid-append) is skipped with a warning; a
/// malformed line elsewhere is an error.
pub fn replay(path: &Path) -> Result<(Vec<ScoreRecord>, BTreeMap<RecordKey, ScoreRecord>)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), BTreeMap::new())),
        Err(source) => return Err(Error::Read { path: path.to_path_buf(), source }),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    let mut all = Vec::new();
    let mut latest = BTreeMap::new();
    let n = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ScoreRecord>(line) {
            Ok(r) => {
                latest.insert(key_of(&r.submission), r.clone());
                all.push(r);
            }
            Err(e) if i + 1 == n => log::warn!("{}: ignoring incomplete last line: {e}", path.display()),
            Err(e) => return Err(Error::Format { path: path.to_path_buf(), reason: format!("line {}: {e}", i + 1) }),
        }
    }
    Ok((all, latest))
}

pub struct ScoreLog {
    path: PathBuf,
    inner: Mutex<Inner>,
}

struct Inner {
    file: File,
    latest: BTreeMap<RecordKey, ScoreRecord>,
}

impl ScoreLog {
    pub fn open(path: &Path) -> Result<Self> {
        let (_, latest) = replay(path)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| Error::Write { path: parent.to_path_buf(), source })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| Error::Write { path: path.to_path_buf(), source })?;
        // Drop a torn last line so the next append starts clean.
        let bytes = std::fs::read(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(|source| Error::Write { path: path.to_path_buf(), source })?;
        }
        Ok(Self { path: path.to_path_buf(), inner: Mutex::new(Inner { file, latest }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and fsyncs unless the latest record for the key already holds
    /// the same answers. Returns the acknowledgement token.
    pub fn submit(&self, s: ScoreSubmission) -> Result<String> {
        let mut inner = self.inner.lock().expect("log lock poisoned");
        let ack = s.ack();
        let key = key_of(&s);
        if inner.latest.get(&key).is_some_and(|r| r.submission.same_answers(&s)) {
            return Ok(ack);
        }
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let rec = ScoreRecord { submission: s, timestamp_ms, ack: ack.clone() };
        let mut line = serde_json::to_string(&rec)?;
        line.push('\n');
        let werr = |source| Error::Write { path: self.path.clone(), source };
        inner.file.write_all(line.as_bytes()).map_err(werr)?;
        inner.file.sync_data().map_err(werr)?;
        inner.latest.insert(key, rec);
        Ok(ack)
    }

    /// Latest (case, alias) pairs scored by `rater`.
    pub fn scored_by(&self, rater: &str) -> Vec<(String, String)> {
        let inner = self.inner.lock().expect("log lock poisoned");
        inner.latest.keys().filter(|(r, _, _)| r == rater).map(|(_, c, a)| (c.clone(), a.clone())).collect()
    }

    pub fn latest(&self, rater: &str, case: &str, alias: &str) -> Option<ScoreRecord> {
        let inner = self.inner.lock().expect("log lock poisoned");
        inner.latest.get(&(rater.to_string(), case.to_string(), alias.to_string())).cloned()
    }
}
