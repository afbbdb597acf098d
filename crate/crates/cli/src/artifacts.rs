//! File plumbing: atomic writes, hashing, run manifests and loaders for the
//! documents the commands exchange.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use reluwrap_core::train::{group_split, row_split, SplitIndices};
use reluwrap_core::unwrap::RegionSetDocument;
use reluwrap_core::{unwrap, Dataset, Error, NetworkSpec, RegionSet, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// Collects outputs of one command and writes its manifest at the end.
pub struct Run {
    command: &'static str,
    out_dir: PathBuf,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Run {
    pub fn start(command: &'static str, out_dir: &Path, seed: Option<u64>) -> Result<Run> {
        fs::create_dir_all(out_dir)?;
        Ok(Run {
            command,
            out_dir: out_dir.to_path_buf(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Write `name` in the output directory via a temporary file and rename.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_ref())?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, buf)
    }

    pub fn finish(self) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            args: std::env::args().skip(1).collect(),
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            started_at: self.started_at,
            finished_at: now(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.out_dir.join(format!("{}.manifest.json", self.command)), text.as_bytes())
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(file))
}

pub fn load_network(path: &Path) -> Result<NetworkSpec> {
    NetworkSpec::from_json(&read_text(path)?)
}

pub fn load_splits(path: &Path) -> Result<SplitIndices> {
    let splits: SplitIndices = serde_json::from_str(&read_text(path)?)?;
    Ok(splits)
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Split by `group_id` when the dataset has one, otherwise by row.
pub fn split_dataset(data: &Dataset, fractions: &[f64], seed: u64) -> Result<SplitIndices> {
    let fractions: [f64; 3] = fractions
        .try_into()
        .map_err(|_| Error::Input(format!("expected three split fractions, got {}", fractions.len())))?;
    match &data.group_ids {
        Some(ids) => group_split(ids, fractions, seed),
        None => row_split(data.len(), fractions, seed),
    }
}

/// Rows of `data` selected by a split file, checked against its length.
pub fn select_rows(data: &Dataset, splits: &SplitIndices, split: &str) -> Result<Dataset> {
    let rows = splits
        .get(split)
        .ok_or_else(|| Error::Input(format!("unknown split `{split}`")))?;
    if let Some(&bad) = rows.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Input(format!(
            "split `{split}` refers to row {bad} but the data has {} rows",
            data.len()
        )));
    }
    Ok(data.subset(rows))
}

/// The rows a region set was built from: the split it records, or all rows.
pub fn rows_for(doc_split: Option<&str>, data: &Dataset, splits: Option<&Path>) -> Result<Dataset> {
    match (doc_split, splits) {
        (Some(name), Some(path)) => select_rows(data, &load_splits(path)?, name),
        (Some(name), None) => Err(Error::Input(format!(
            "regions were built on the `{name}` split; pass --splits"
        ))),
        (None, _) => Ok(data.clone()),
    }
}

/// Load a region set. Documents written with `--omit-indices` are rebuilt
/// by unwrapping `rows` with `net`, which must match the recorded network
/// and reproduce the recorded patterns.
pub fn load_regions(doc: RegionSetDocument, rows: &Dataset, net: Option<&NetworkSpec>) -> Result<RegionSet> {
    if doc.regions.iter().all(|r| r.sample_indices.is_some()) {
        let set = RegionSet::from_document(doc)?;
        if set.n_samples() != rows.len() {
            return Err(Error::Dimension {
                context: "rows for region set",
                expected: set.n_samples(),
                got: rows.len(),
            });
        }
        return Ok(set);
    }
    let net = net.ok_or_else(|| {
        Error::Input("regions.json has no sample indices; pass --model to rebuild them".into())
    })?;
    if net.fingerprint() != doc.fingerprint {
        return Err(Error::StaleIndex {
            expected: doc.fingerprint,
            found: net.fingerprint(),
        });
    }
    let mut set = unwrap(net, &rows.x)?;
    let same = set.len() == doc.regions.len()
        && set
            .regions()
            .iter()
            .zip(&doc.regions)
            .all(|(a, b)| a.pattern == b.pattern && a.count == b.count);
    if !same {
        return Err(Error::Input("rebuilt regions differ from regions.json; wrong data?".into()));
    }
    if let Some(split) = doc.split {
        set = set.with_split(split);
    }
    Ok(set)
}
