//! File formats: text tensors, JSON decompositions, and ground-truth
//! bundles.
//!
//! Tensors travel as a self-describing text format. The first line is
//! `shape: d1 d2 ... dN`; every following nonempty line holds one entry in
//! linearization order (first index fastest). Values are written with Rust's
//! shortest round-trip float formatting, so write followed by read restores
//! the tensor bit for bit.
//!
//! Decompositions and ground-truth bundles are JSON documents; loading a
//! decomposition re-runs the constructor validation, so hand-edited files
//! with unsorted weights or non-unit columns are rejected.

use crate::bench::ModelKind;
use crate::error::{Error, Result};
use crate::model::CPDecomposition;
use crate::tensor::DenseTensor;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// A generated instance with everything needed to reproduce and diagnose it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub decomposition: CPDecomposition,
    pub model: ModelKind,
    pub sigma: f64,
    /// Spiked-model sample count; 0 for the noisy CP model.
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
    /// Generator identifier; draws are reproducible only under the same one.
    pub rng: String,
}

/// Write a tensor in the text format to any sink.
pub fn write_tensor<W: Write>(sink: &mut W, t: &DenseTensor) -> Result<()> {
    let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    writeln!(sink, "shape: {}", shape.join(" "))?;
    for v in t.data() {
        writeln!(sink, "{v}")?;
    }
    Ok(())
}

/// Read a tensor in the text format from any source.
pub fn read_tensor<R: BufRead>(source: R) -> Result<DenseTensor> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("empty tensor file".into()))?;
    let dims_text = header
        .strip_prefix("shape:")
        .ok_or_else(|| Error::Parse(format!("line 1: expected \"shape: ...\", got {header:?}")))?;
    let shape: Vec<usize> = dims_text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line 1: bad dimension {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Parse(format!(
            "line 1: shape {shape:?} must be nonempty with positive sizes"
        )));
    }
    let expect: usize = shape.iter().product();
    let mut data = Vec::with_capacity(expect);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let v: f64 = text
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value {text:?}", idx + 2)))?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("tensor entry on line {}", idx + 2)));
        }
        if data.len() == expect {
            return Err(Error::Parse(format!(
                "line {}: more than {expect} entries for shape {shape:?}",
                idx + 2
            )));
        }
        data.push(v);
    }
    if data.len() != expect {
        return Err(Error::Parse(format!(
            "expected {expect} entries for shape {shape:?}, found {}",
            data.len()
        )));
    }
    DenseTensor::new(shape, data)
}

pub fn save_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut sink = BufWriter::new(File::create(path)?);
    write_tensor(&mut sink, t)?;
    sink.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<DenseTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

/// Serialize any document as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("json serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn load_decomposition(path: &Path) -> Result<CPDecomposition> {
    load_json(path, "decomposition file")
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    load_json(path, "ground truth file")
}
