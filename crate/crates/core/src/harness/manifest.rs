use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessConfig, HarnessError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: &Path) -> Result<DatasetDigest, HarnessError> {
    let mut f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| HarnessError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(DatasetDigest {
        path: path.to_path_buf(),
        sha256,
        bytes,
    })
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// What ran, on what data, with which seeds. Written before the first run
/// and rewritten once at completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: HarnessConfig,
    pub seed: u64,
    pub proposer: String,
    pub evaluator: String,
    pub datasets: Vec<DatasetDigest>,
    pub started_at_unix: f64,
    pub finished_at_unix: Option<f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn begin(
        command: &str,
        config: &HarnessConfig,
        proposer: String,
        evaluator: String,
    ) -> Result<Self, HarnessError> {
        let datasets = config.dataset.iter().map(|p| digest_file(p)).collect::<Result<_, _>>()?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            seed: config.engine.seed,
            proposer,
            evaluator,
            datasets,
            started_at_unix: now_unix(),
            finished_at_unix: None,
            artifacts: Vec::new(),
        })
    }

    pub fn finish(&mut self, artifacts: Vec<PathBuf>) {
        self.artifacts = artifacts;
        self.finished_at_unix = Some(now_unix());
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Schema {
            path: path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })
    }

    /// Recompute every dataset digest and report the ones that changed.
    pub fn stale_datasets(&self) -> Result<Vec<PathBuf>, HarnessError> {
        let mut stale = Vec::new();
        for d in &self.datasets {
            if digest_file(&d.path)?.sha256 != d.sha256 {
                stale.push(d.path.clone());
            }
        }
        Ok(stale)
    }
}
