//! Checkpoint directories: a plain-text manifest plus one little-endian
//! `f32` blob.
//!
//! ```text
//! FPMD-CKPT-1
//! blob tensors.bin
//! meta <key> <value>
//! network <name> <n_layers>
//! layer <name> <index> in <n> out <n> activation <tag> weight <offset> bias <offset>
//! ```
//!
//! Offsets are byte offsets into the blob. Weights are stored row-major
//! (`out × in`). Meta values run to the end of the line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use super::{Activation, Layer, Mlp};
use crate::error::{FpmdError, Result};

pub const HEADER: &str = "FPMD-CKPT-1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const BLOB_FILE: &str = "tensors.bin";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    pub networks: Vec<(String, Mlp<f32>)>,
    pub meta: BTreeMap<String, String>,
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, net: Mlp<f32>) {
        self.networks.push((name.into(), net));
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn network(&self, name: &str) -> Option<&Mlp<f32>> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Renders the manifest and the blob without touching the filesystem.
    pub fn encode(&self) -> (String, Vec<u8>) {
        let mut manifest = format!("{HEADER}\nblob {BLOB_FILE}\n");
        let mut blob: Vec<u8> = Vec::new();
        for (k, v) in &self.meta {
            let _ = writeln!(manifest, "meta {k} {v}");
        }
        for (name, net) in &self.networks {
            let _ = writeln!(manifest, "network {name} {}", net.layers().len());
            for (i, layer) in net.layers().iter().enumerate() {
                let w_off = blob.len();
                for x in layer.weight.iter() {
                    blob.extend_from_slice(&x.to_le_bytes());
                }
                let b_off = blob.len();
                for x in layer.bias.iter() {
                    blob.extend_from_slice(&x.to_le_bytes());
                }
                let _ = writeln!(
                    manifest,
                    "layer {name} {i} in {} out {} activation {} weight {w_off} bias {b_off}",
                    layer.in_dim(),
                    layer.out_dim(),
                    layer.activation
                );
            }
        }
        (manifest, blob)
    }

    pub fn decode(manifest: &str, blob: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| FpmdError::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = manifest.lines();
        match lines.next() {
            Some(h) if h.trim() == HEADER => {}
            other => return Err(bad(format!("bad header {other:?}, expected {HEADER}"))),
        }
        let mut archive = TensorArchive::new();
        // (name, expected layer count, layers so far)
        let mut pending: Vec<(String, usize, Vec<Layer<f32>>)> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "blob" => {}
                "meta" => {
                    let rest = line["meta".len()..].trim_start();
                    let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
                    archive.meta.insert(key.to_string(), value.trim().to_string());
                }
                "network" if fields.len() == 3 => {
                    let n: usize = fields[2]
                        .parse()
                        .map_err(|_| bad(format!("line {}: bad layer count", lineno + 2)))?;
                    pending.push((fields[1].to_string(), n, Vec::new()));
                }
                "layer" if fields.len() == 13 => {
                    let num = |i: usize| -> Result<usize> {
                        fields[i].parse().map_err(|_| {
                            bad(format!("line {}: bad number `{}`", lineno + 2, fields[i]))
                        })
                    };
                    let (n_in, n_out, w_off, b_off) = (num(4)?, num(6)?, num(10)?, num(12)?);
                    let activation = Activation::from_tag(fields[8])
                        .ok_or_else(|| bad(format!("unknown activation `{}`", fields[8])))?;
                    let weight = read_f32s(blob, w_off, n_in * n_out)
                        .ok_or_else(|| bad(format!("weight of {} out of blob range", fields[1])))?;
                    let bias = read_f32s(blob, b_off, n_out)
                        .ok_or_else(|| bad(format!("bias of {} out of blob range", fields[1])))?;
                    let entry = pending
                        .iter_mut()
                        .find(|(n, _, _)| n == fields[1])
                        .ok_or_else(|| bad(format!("layer for undeclared network {}", fields[1])))?;
                    entry.2.push(Layer {
                        weight: Array2::from_shape_vec((n_out, n_in), weight)
                            .expect("length checked"),
                        bias: Array1::from_vec(bias),
                        activation,
                    });
                }
                _ => return Err(bad(format!("line {}: unrecognized `{line}`", lineno + 2))),
            }
        }
        for (name, n, layers) in pending {
            if layers.len() != n {
                return Err(bad(format!(
                    "network {name}: declared {n} layers, found {}",
                    layers.len()
                )));
            }
            let net = Mlp::from_layers(layers).map_err(|e| bad(format!("network {name}: {e}")))?;
            archive.networks.push((name, net));
        }
        Ok(archive)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let (manifest, blob) = self.encode();
        fs::write(dir.join(BLOB_FILE), blob)?;
        fs::write(dir.join(MANIFEST_FILE), manifest)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest_path: PathBuf = dir.join(MANIFEST_FILE);
        let manifest = fs::read_to_string(&manifest_path).map_err(|e| FpmdError::Checkpoint {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        let blob = fs::read(dir.join(BLOB_FILE)).map_err(|e| FpmdError::Checkpoint {
            path: dir.join(BLOB_FILE),
            message: e.to_string(),
        })?;
        Self::decode(&manifest, &blob, dir)
    }
}

fn read_f32s(blob: &[u8], offset: usize, count: usize) -> Option<Vec<f32>> {
    let end = offset.checked_add(count.checked_mul(4)?)?;
    let bytes = blob.get(offset..end)?;
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}
