//! Run manifests: enough to re-run a command and check its outputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    /// Output files, relative to the output directory.
    pub outputs: Vec<FileHash>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<FileHash> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileHash {
        path: path.to_owned(),
        sha256: sha256_hex(&bytes),
    })
}

/// `args` with every `--out` option removed and `--out <out>` appended.
pub fn redirect_out(args: &[String], out: &Path) -> Vec<OsString> {
    let mut kept = Vec::with_capacity(args.len() + 2);
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            kept.push(OsString::from(a));
        }
    }
    kept.push("--out".into());
    kept.push(out.as_os_str().to_owned());
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn out_is_replaced() {
        let args: Vec<String> = ["solve", "--out", "a", "--gamma", "1", "--out=b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let got = redirect_out(&args, Path::new("c"));
        let want: Vec<OsString> = ["solve", "--gamma", "1", "--out", "c"]
            .iter()
            .map(OsString::from)
            .collect();
        assert_eq!(got, want);
    }
}
