//! Output files and the summary report.
//!
//! Every JSON artifact is an envelope keyed by `(module, check, k)`; CSV
//! traces sit next to it and are listed in `files`. Timings go to
//! `metadata.json`, which the report ignores, so all other bytes are a
//! function of the config alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SUMMARY: &str = "summary.json";
pub const METADATA: &str = "metadata.json";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Artifact {
    pub module: String,
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Companion CSV files.
    #[serde(default)]
    pub files: Vec<String>,
    pub data: Value,
}

impl Artifact {
    pub fn new(module: &str, check: &str, k: Option<u32>, data: Value) -> Self {
        Self {
            module: module.into(),
            check: check.into(),
            k,
            files: Vec::new(),
            data,
        }
    }

    pub fn key(&self) -> String {
        match self.k {
            Some(k) => format!("{}/{}/k={k}", self.module, self.check),
            None => format!("{}/{}", self.module, self.check),
        }
    }

    pub fn file_stem(&self) -> String {
        match self.k {
            Some(k) => format!("{}_{}_k{k}", self.module, self.check),
            None => format!("{}_{}", self.module, self.check),
        }
    }
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outputs {
    pub artifacts: Vec<Artifact>,
    /// `(artifact index, file name, contents)`.
    pub csv: Vec<(usize, String, String)>,
    /// Failed verification checks; nonempty means exit status 2.
    pub failures: Vec<String>,
}

impl Outputs {
    pub fn push(&mut self, a: Artifact) -> usize {
        self.artifacts.push(a);
        self.artifacts.len() - 1
    }

    pub fn attach_csv(&mut self, artifact: usize, name: String, contents: String) {
        self.artifacts[artifact].files.push(name.clone());
        self.csv.push((artifact, name, contents));
    }

    pub fn extend(&mut self, other: Outputs) {
        let base = self.artifacts.len();
        self.artifacts.extend(other.artifacts);
        self.csv.extend(other.csv.into_iter().map(|(i, n, c)| (i + base, n, c)));
        self.failures.extend(other.failures);
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for a in &self.artifacts {
            let name = format!("{}.json", a.file_stem());
            write_file(dir, &name, &to_json(a)?)?;
            written.push(name);
        }
        for (_, name, contents) in &self.csv {
            write_file(dir, name, contents)?;
            written.push(name.clone());
        }
        Ok(written)
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Aggregates the artifacts in `dir` into one document with sorted keys.
/// Missing companion files are reported together.
pub fn report_bundle(dir: &Path) -> Result<Value, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && n != SUMMARY && n != METADATA)
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Io(format!("{}: no artifacts to aggregate", dir.display())));
    }
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for n in &names {
        let path = dir.join(n);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let a: Artifact =
            serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: not an artifact: {e}", path.display())))?;
        for f in &a.files {
            if !dir.join(f).is_file() {
                missing.push(format!("{f} (listed by {n})"));
            }
        }
        out.insert(a.key(), a.data);
    }
    if !missing.is_empty() {
        return Err(CliError::Io(format!("missing artifacts: {}", missing.join(", "))));
    }
    Ok(Value::Object(out.into_iter().collect()))
}
