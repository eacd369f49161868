//! On-disk formats.
//!
//! Datasets are binary: the 8-byte magic `BNREDATA`, a little-endian `u32`
//! format version, a `u32` header length, a JSON header, then one row of
//! little-endian `f64` per sample (`theta` followed by `x`). Weights are the
//! JSON [`WeightsFile`](crate::diffnet::WeightsFile) document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffnet::ClassifierNet;
use crate::error::{Error, Result};
use crate::simulators::{Benchmark, Dataset, Sample};

pub const DATASET_MAGIC: &[u8; 8] = b"BNREDATA";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    benchmark: Benchmark,
    theta_dim: usize,
    x_dim: usize,
    budget: usize,
    seed: u64,
    failures: u64,
}

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let b = dataset.benchmark;
    let header = DatasetHeader {
        benchmark: b,
        theta_dim: b.theta_dim(),
        x_dim: b.x_dim(),
        budget: dataset.len(),
        seed: dataset.seed,
        failures: dataset.failures,
    };
    let json = serde_json::to_vec(&header)?;
    let row = (b.theta_dim() + b.x_dim()) * 8;
    let mut out = Vec::with_capacity(16 + json.len() + row * dataset.len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &dataset.samples {
        if s.theta.len() != b.theta_dim() || s.x.len() != b.x_dim() {
            return Err(Error::DimensionMismatch { what: "dataset row", expected: b.theta_dim() + b.x_dim(), got: s.theta.len() + s.x.len() });
        }
        for v in s.theta.iter().chain(&s.x) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format(format!("dataset truncated in {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4, what)?.try_into().unwrap()))
}

pub fn decode_dataset(mut bytes: &[u8]) -> Result<Dataset> {
    let magic = take(&mut bytes, 8, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = read_u32(&mut bytes, "version")?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}, expected version {DATASET_VERSION}")));
    }
    let len = read_u32(&mut bytes, "header length")? as usize;
    let header: DatasetHeader = serde_json::from_slice(take(&mut bytes, len, "header")?)
        .map_err(|e| Error::Format(format!("bad dataset header: {e}")))?;
    let b = header.benchmark;
    if header.theta_dim != b.theta_dim() || header.x_dim != b.x_dim() {
        return Err(Error::Format(format!("header dimensions do not match benchmark {b}")));
    }
    let row = header.theta_dim + header.x_dim;
    let expected = header.budget.checked_mul(row * 8).ok_or_else(|| Error::Format("dataset size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("dataset body has {} bytes, header implies {expected}", bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let samples = values
        .chunks_exact(row)
        .map(|r| Sample { theta: r[..header.theta_dim].to_vec(), x: r[header.theta_dim..].to_vec() })
        .collect();
    Ok(Dataset { benchmark: b, seed: header.seed, failures: header.failures, samples })
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    Ok(fs::write(path, encode_dataset(dataset)?)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

pub fn save_weights(path: &Path, net: &ClassifierNet<f64>) -> Result<()> {
    Ok(fs::write(path, net.to_json()?)?)
}

pub fn load_weights(path: &Path) -> Result<ClassifierNet<f64>> {
    ClassifierNet::from_json(&fs::read_to_string(path)?)
}

/// Pretty JSON document.
pub fn write_report<S: Serialize>(path: &Path, report: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulators::generate_dataset;

    #[test]
    fn dataset_round_trip_is_exact_and_stable() {
        for b in [Benchmark::Tractable1d, Benchmark::Mg1] {
            let d = generate_dataset(b, 17, 3).unwrap();
            let bytes = encode_dataset(&d).unwrap();
            let back = decode_dataset(&bytes).unwrap();
            assert_eq!(back, d);
            assert_eq!(encode_dataset(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let d = generate_dataset(Benchmark::Weinberg, 5, 0).unwrap();
        let bytes = encode_dataset(&d).unwrap();
        for cut in [0, 4, 12, 20, bytes.len() - 1] {
            assert!(matches!(decode_dataset(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn version_bump_is_rejected_with_expected_version() {
        let d = generate_dataset(Benchmark::Weinberg, 5, 0).unwrap();
        let mut bytes = encode_dataset(&d).unwrap();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        let msg = decode_dataset(&bytes).unwrap_err().to_string();
        assert!(msg.contains("expected version 1"), "{msg}");
    }

    #[test]
    fn weights_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = crate::simulators::rng::stream_rng(1, 0);
        let net = ClassifierNet::<f64>::init(4, &[5, 3], crate::diffnet::Activation::Tanh, &mut rng);
        let p = dir.path().join("w.json");
        save_weights(&p, &net).unwrap();
        let first = fs::read(&p).unwrap();
        let back = load_weights(&p).unwrap();
        assert_eq!(back, net);
        save_weights(&p, &back).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
        fs::write(&p, &first[..first.len() / 2]).unwrap();
        assert!(load_weights(&p).is_err());
    }
}
