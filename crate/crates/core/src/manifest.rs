//! Run manifests: enough to reproduce a command and check its outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampling::{sha256_hex, HashWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    /// sha256 of every input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_seconds: f64,
    pub peak_memory_bytes: Option<u64>,
    pub messages: Option<u64>,
    pub threads: usize,
    /// Command-specific details (run statistics, model defaults).
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            args,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config_hash: String::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_seconds: 0.0,
            peak_memory_bytes: None,
            messages: None,
            threads: rayon::current_num_threads(),
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> Result<()> {
        self.outputs.insert(role.to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.details.insert(key.to_string(), v);
        }
    }

    /// Stamps wall time and peak memory.
    pub fn finish(&mut self, started: Instant) {
        self.wall_seconds = started.elapsed().as_secs_f64();
        self.peak_memory_bytes = peak_memory_bytes();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut h = HashWriter::new();
    io::copy(&mut File::open(path)?, &mut h)?;
    Ok(h.hex())
}

/// Hash of any serializable configuration, via its JSON form.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    sha256_hex(serde_json::to_string(cfg).unwrap_or_default().as_bytes())
}

/// High-water resident set size from `/proc/self/status`, Linux only.
pub fn peak_memory_bytes() -> Option<u64> {
    let s = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = s.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_track_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let mut m = RunManifest::new("synth", vec![]);
        m.input("log", &p).unwrap();
        m.finish(Instant::now());
        assert_eq!(m.inputs["log"], file_digest(&p).unwrap());
        if cfg!(target_os = "linux") {
            assert!(m.peak_memory_bytes.unwrap() > 0);
        }
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
    }
}
