//! JSON run manifest written beside every output set.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the manifest's directory.
    pub path: PathBuf,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: Option<ModelConfig>,
    /// Seconds since the Unix epoch.
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub outputs: Vec<OutputEntry>,
    #[serde(default)]
    pub policies: Vec<String>,
    /// Free-form facts about the run (e.g. PSD normalization).
    #[serde(default)]
    pub notes: Vec<String>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    /// Starts the wall clock.
    pub fn start(command: impl Into<String>, config: Option<ModelConfig>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.into(),
            config,
            started_unix: now(),
            wall_seconds: 0.0,
            outputs: Vec::new(),
            policies: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records an existing output file, relative to `base`.
    pub fn add_output(&mut self, base: &Path, file: &Path) -> Result<()> {
        let bytes = fs::metadata(file).map_err(|e| Error::io(file, e))?.len();
        let rel = file.strip_prefix(base).unwrap_or(file).to_path_buf();
        self.outputs.push(OutputEntry { path: rel, bytes });
        Ok(())
    }

    /// Stops the clock and writes pretty JSON to `path`.
    pub fn finish(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.wall_seconds = (now() - self.started_unix).max(0.0);
        self.write(path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::TraceFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Checks that every listed output exists under `base` with its recorded
    /// length.
    pub fn verify(&self, base: &Path) -> Result<()> {
        for o in &self.outputs {
            let p = base.join(&o.path);
            let len = fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
            if len != o.bytes {
                return Err(Error::TraceFormat {
                    path: p,
                    message: format!("manifest records {} bytes, file has {len}", o.bytes),
                });
            }
        }
        Ok(())
    }
}

/// Manifest path for an output: `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunKind;

    #[test]
    fn write_read_verify() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.bin");
        fs::write(&out, [1u8, 2, 3]).unwrap();
        let mut m = RunManifest::start("generate", Some(ModelConfig::defaults(RunKind::Scenario)));
        m.add_output(dir.path(), &out).unwrap();
        m.policies.push("u=frozen".into());
        let mp = manifest_path(&out);
        m.finish(&mp).unwrap();
        let back = RunManifest::read(&mp).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.outputs[0].path, PathBuf::from("a.bin"));
        back.verify(dir.path()).unwrap();

        fs::write(&out, [1u8]).unwrap();
        assert!(back.verify(dir.path()).is_err());
        fs::remove_file(&out).unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn manifest_naming() {
        assert_eq!(
            manifest_path(Path::new("x/t.evcm")),
            PathBuf::from("x/t.evcm.manifest.json")
        );
    }
}
