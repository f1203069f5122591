//! Shared numeric primitives and the data model for logit-space samples.
//!
//! A sample is a penultimate (pre-softmax) activation vector of length `K`
//! plus a ground-truth tag: one of the `K` domestic classes, foreign
//! (a class never shown in preparation), or fooling (a crafted input).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth of a sample. Domestic classes are indexed `1..=K`;
/// label `0` is reserved for the foreign prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundTruth {
    Domestic(usize),
    Foreign,
    Fooling,
}

impl GroundTruth {
    /// Integer wire encoding: domestic class as `1..=K`, foreign `0`, fooling `-1`.
    pub fn code(&self) -> i64 {
        match self {
            GroundTruth::Domestic(k) => *k as i64,
            GroundTruth::Foreign => 0,
            GroundTruth::Fooling => -1,
        }
    }

    /// Inverse of [`GroundTruth::code`].
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            -1 => Ok(GroundTruth::Fooling),
            0 => Ok(GroundTruth::Foreign),
            k if k > 0 => Ok(GroundTruth::Domestic(k as usize)),
            other => Err(Error::InvalidInput(format!(
                "truth code {other} is not -1, 0 or a positive class index"
            ))),
        }
    }

    pub fn is_domestic(&self) -> bool {
        matches!(self, GroundTruth::Domestic(_))
    }

    pub fn domestic_class(&self) -> Option<usize> {
        match self {
            GroundTruth::Domestic(k) => Some(*k),
            _ => None,
        }
    }
}

/// One sample's penultimate vector plus its ground-truth tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub sample_id: String,
    pub logits: Vec<f64>,
    pub truth: GroundTruth,
}

impl LogitRecord {
    pub fn new(sample_id: impl Into<String>, logits: Vec<f64>, truth: GroundTruth) -> Result<Self> {
        let record = LogitRecord {
            sample_id: sample_id.into(),
            logits,
            truth,
        };
        record.validate()?;
        Ok(record)
    }

    /// Checks the record invariants: non-empty finite logits and, for a
    /// domestic tag, a class index within `1..=K`.
    pub fn validate(&self) -> Result<()> {
        if self.logits.is_empty() {
            return Err(Error::InvalidInput(format!(
                "record {}: empty logit vector",
                self.sample_id
            )));
        }
        if self.logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "record {}: non-finite logit",
                self.sample_id
            )));
        }
        if let GroundTruth::Domestic(k) = self.truth {
            if k == 0 || k > self.logits.len() {
                return Err(Error::InvalidInput(format!(
                    "record {}: domestic class {k} outside 1..={}",
                    self.sample_id,
                    self.logits.len()
                )));
            }
        }
        Ok(())
    }

    /// The domestic class (`1..=K`) the raw logits argmax points at.
    pub fn argmax_class(&self) -> usize {
        argmax(&self.logits) + 1
    }
}

/// A probability vector: entries in `[0, 1]` summing to one within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(
                "probability entry outside [0, 1]".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1 within 1e-9"
            )));
        }
        Ok(ProbVector(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Shift-stable softmax kernel: subtracts the max before exponentiating so
/// crafted high-confidence inputs cannot overflow.
pub(crate) fn softmax_into(activations: &[f64], out: &mut Vec<f64>) {
    let max = activations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(activations.iter().map(|a| (a - max).exp()));
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
}

/// Softmax of an activation vector.
pub fn softmax(activations: &[f64]) -> Result<ProbVector> {
    if activations.is_empty() {
        return Err(Error::InvalidInput("softmax of empty vector".into()));
    }
    if activations.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("softmax of non-finite input".into()));
    }
    let mut out = Vec::with_capacity(activations.len());
    softmax_into(activations, &mut out);
    ProbVector::new(out)
}

/// Descending ranks: `1` for the largest entry, `2` for the next, and so on.
/// Ties are broken toward the lower index.
pub fn rank_descending(values: &[f64]) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("ranking an empty vector".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("ranking a NaN value".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("NaN filtered above")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0usize; values.len()];
    for (rank, idx) in order.into_iter().enumerate() {
        ranks[idx] = rank + 1;
    }
    Ok(ranks)
}

/// Renders a float with 17 significant digits, enough to round-trip any f64.
pub fn format_full(value: f64) -> String {
    format!("{value:.16e}")
}

const LOGIT_ID_COL: &str = "sample_id";
const LOGIT_TRUTH_COL: &str = "truth";

/// Writes records as CSV with header `sample_id,truth,logit_0,...,logit_{K-1}`.
/// Truth encodes domestic classes as `1..=K`, foreign as `0`, fooling as `-1`.
pub fn write_logits_csv<W: Write>(writer: W, records: &[LogitRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to write".into()));
    }
    let k = records[0].logits.len();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![LOGIT_ID_COL.to_string(), LOGIT_TRUTH_COL.to_string()];
    header.extend((0..k).map(|i| format!("logit_{i}")));
    w.write_record(&header)
        .map_err(|e| Error::csv("<writer>", e.to_string()))?;
    for record in records {
        record.validate()?;
        if record.logits.len() != k {
            return Err(Error::InvalidInput(format!(
                "record {}: logit length {} differs from {}",
                record.sample_id,
                record.logits.len(),
                k
            )));
        }
        let mut row = vec![record.sample_id.clone(), record.truth.code().to_string()];
        row.extend(record.logits.iter().map(|v| format_full(*v)));
        w.write_record(&row)
            .map_err(|e| Error::csv("<writer>", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Reads records from the CSV layout produced by [`write_logits_csv`].
pub fn read_logits_csv<R: Read>(reader: R) -> Result<Vec<LogitRecord>> {
    read_logits_csv_named(reader, "<reader>")
}

fn read_logits_csv_named<R: Read>(reader: R, path: &str) -> Result<Vec<LogitRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| Error::csv(path, e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != LOGIT_ID_COL || &headers[1] != LOGIT_TRUTH_COL {
        return Err(Error::csv(
            path,
            format!("expected header starting `{LOGIT_ID_COL},{LOGIT_TRUTH_COL},logit_0`"),
        ));
    }
    let k = headers.len() - 2;
    let mut records = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e.to_string()))?;
        if row.len() != k + 2 {
            return Err(Error::csv(
                path,
                format!("row {}: {} fields, expected {}", line + 2, row.len(), k + 2),
            ));
        }
        let code: i64 = row[1]
            .parse()
            .map_err(|_| Error::csv(path, format!("row {}: bad truth `{}`", line + 2, &row[1])))?;
        let mut logits = Vec::with_capacity(k);
        for field in row.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| {
                Error::csv(path, format!("row {}: bad float `{field}`", line + 2))
            })?;
            logits.push(v);
        }
        let record = LogitRecord::new(row[0].to_string(), logits, GroundTruth::from_code(code)?)?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::csv(path, "no data rows".to_string()));
    }
    Ok(records)
}

/// File variant of [`write_logits_csv`].
pub fn write_logits_file(path: &str, records: &[LogitRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_logits_csv(std::io::BufWriter::new(file), records)
}

/// File variant of [`read_logits_csv`].
pub fn read_logits_file(path: &str) -> Result<Vec<LogitRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_logits_csv_named(std::io::BufReader::new(file), path)
}
