// SPDX-License-Identifier: Apache-2.0
//! Job results on disk: one JSON record per line, plus an index of keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{write_file, PipelineError};
use crate::qsim::JobResult;

pub struct ResultsStore {
    dir: PathBuf,
}

impl ResultsStore {
    pub fn new(dir: &Path) -> Self {
        ResultsStore { dir: dir.to_path_buf() }
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join("records.jsonl")
    }

    pub fn index_path(&self) -> PathBuf {
        self.dir.join("index.json")
    }

    pub fn load(&self) -> Result<BTreeMap<String, JobResult>, PipelineError> {
        let path = self.records_path();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
            Err(e) => return Err(PipelineError::Internal(format!("read {}: {e}", path.display()))),
        };
        let mut out = BTreeMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: JobResult = serde_json::from_str(line)
                .map_err(|e| PipelineError::Internal(format!("{} line {}: {e}", path.display(), i + 1)))?;
            out.insert(r.key.clone(), r);
        }
        Ok(out)
    }

    /// Rewrite the store sorted by key.
    pub fn save(&self, records: &BTreeMap<String, JobResult>) -> Result<(), PipelineError> {
        let mut text = String::new();
        for r in records.values() {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        write_file(&self.records_path(), text)?;
        let keys: Vec<&String> = records.keys().collect();
        write_file(&self.index_path(), super::to_json(&keys))
    }

    /// Store contents with wall times zeroed, for comparing runs.
    pub fn canonical(&self) -> Result<String, PipelineError> {
        let mut recs = self.load()?;
        for r in recs.values_mut() {
            r.wall_time_s = 0.0;
        }
        Ok(recs.values().map(|r| serde_json::to_string(r).expect("record serializes")).collect::<Vec<_>>().join("\n"))
    }
}
