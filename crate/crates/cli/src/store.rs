use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Wrapper written around every JSON artifact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    /// Hash of the stage's configuration sections and upstream stage hashes.
    pub key: String,
    /// Output path relative to the output directory, and its SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn files_under(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let full = root.join(rel);
    if full.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(&full)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            files_under(root, &rel.join(e.file_name()), out)?;
        }
    } else {
        out.push(rel.to_path_buf());
    }
    Ok(())
}

fn rel_key(p: &Path) -> String {
    p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Option<Self>> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("{} is not a manifest", path.display()))?))
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        write_json_atomic(&out.join(MANIFEST), self)
    }

    /// True when the stage ran with this key and its outputs are unchanged on disk.
    pub fn is_fresh(&self, out: &Path, stage: &str, key: &str) -> bool {
        let Some(e) = self.stages.get(stage) else { return false };
        e.key == key
            && !e.outputs.is_empty()
            && e.outputs.iter().all(|(rel, sum)| sha256_file(&out.join(rel)).is_ok_and(|s| &s == sum))
    }
}

/// Runs `produce` against an empty staging directory, then moves every top-level entry it
/// created into `out`. Nothing is moved when `produce` fails.
pub fn stage_outputs<F>(out: &Path, stage: &str, produce: F) -> Result<BTreeMap<String, String>>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let staging = out.join(format!(".staging-{stage}"));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging).with_context(|| format!("cannot create {}", staging.display()))?;
    if let Err(e) = produce(&staging) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    let mut top: Vec<_> = fs::read_dir(&staging)?.collect::<std::io::Result<_>>()?;
    top.sort_by_key(|e| e.file_name());
    if top.is_empty() {
        let _ = fs::remove_dir_all(&staging);
        bail!("stage {stage} produced no output");
    }
    let mut files = Vec::new();
    for e in &top {
        files_under(&staging, Path::new(&e.file_name()), &mut files)?;
    }
    let mut sums = BTreeMap::new();
    for f in &files {
        sums.insert(rel_key(f), sha256_file(&staging.join(f))?);
    }
    for e in top {
        let dest = out.join(e.file_name());
        if dest.is_dir() {
            fs::remove_dir_all(&dest)?;
        }
        fs::rename(e.path(), &dest).with_context(|| format!("cannot move output into {}", dest.display()))?;
    }
    fs::remove_dir_all(&staging)?;
    Ok(sums)
}

/// Temp file next to `path`, then rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    let result = (|| {
        let f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        let mut w = BufWriter::new(f);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = fs::File::open(path).with_context(|| format!("missing input {}; run the stage that produces it first", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("cannot parse {}", path.display()))
}
