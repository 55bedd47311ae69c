use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hk_core::certify::Arith;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to the primary output of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub arith: Arith,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    pub outputs: Vec<OutputDigest>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn digests(paths: &[PathBuf]) -> Result<Vec<OutputDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(OutputDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            subcommand: "sample".into(),
            config: BTreeMap::from([("sample.n".to_string(), "10".to_string())]),
            arith: Arith {
                mode: hk_core::ArithMode::Float,
                bits: None,
            },
            version: "0.1.0".into(),
            wall_clock_seconds: 0.5,
            exit_code: 0,
            verdict: None,
            outputs: vec![],
            summary: serde_json::Value::Null,
        };
        let p = RunManifest::path_for(&dir.path().join("mc.csv"));
        assert!(p.ends_with("mc.csv.manifest.json"));
        m.write(&p).unwrap();
        assert_eq!(RunManifest::read(&p).unwrap(), m);
    }
}
