//! File formats: JSON states and reports, CSV sample sets with a JSON sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::Matrix;
use crate::protocol::{Correction, EnsembleOptions, ProtocolConfig, SampleRecord, SampleSet, CHANNELS};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 7] = ["record", "cell", "cell_x", "cell_p", "mode", "quadrature", "value"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Rejects documents that declare a schema version this build does not know.
pub fn check_schema(doc: &Value) -> Result<()> {
    match doc.get("schema_version") {
        None => Ok(()),
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(()),
        Some(v) => Err(Error::Validation(format!(
            "unsupported schema_version {v} (this build reads version {SCHEMA_VERSION})"
        ))),
    }
}

fn number(v: &Value, what: &str) -> Result<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match x {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Parse(format!("{what}: expected a finite number, got {v}"))),
    }
}

fn parse_matrix(v: &Value) -> Result<Matrix<f64>> {
    let rows = v.as_array().ok_or_else(|| Error::Parse("gamma must be an array of rows".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cells = row.as_array().ok_or_else(|| Error::Parse(format!("gamma row {i} is not an array")))?;
        out.push(
            cells
                .iter()
                .enumerate()
                .map(|(j, c)| number(c, &format!("gamma[{i}][{j}]")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if out.is_empty() {
        return Err(Error::Validation("gamma is empty".into()));
    }
    if let Some((i, r)) = out.iter().enumerate().find(|(_, r)| r.len() != out.len()) {
        return Err(Error::Validation(format!(
            "gamma must be square: row {i} has {} entries, expected {}",
            r.len(),
            out.len()
        )));
    }
    Matrix::from_rows(&out)
}

/// Parses `{"gamma": [[..]], "mean": [..]?}`; entries may be numbers or numeric strings.
pub fn parse_state(text: &str) -> Result<GaussianState<f64>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_schema(&doc)?;
    let gamma = parse_matrix(doc.get("gamma").ok_or_else(|| Error::Parse("missing field `gamma`".into()))?)?;
    let mean = match doc.get("mean") {
        None | Some(Value::Null) => vec![0.0; gamma.rows()],
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, v)| number(v, &format!("mean[{i}]")))
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::Parse("mean must be an array".into())),
    };
    GaussianState::new(gamma, mean)
}

pub fn read_state(path: &Path) -> Result<GaussianState<f64>> {
    parse_state(&read_text(path)?)
}

#[derive(Serialize)]
struct StateDoc<'a> {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    n_modes: usize,
    gamma: &'a Matrix<f64>,
    mean: &'a [f64],
}

pub fn state_to_json(state: &GaussianState<f64>, label: Option<&str>) -> Result<String> {
    let doc = StateDoc {
        schema_version: SCHEMA_VERSION,
        label,
        n_modes: state.n_modes(),
        gamma: state.gamma(),
        mean: state.mean(),
    };
    to_json(&doc)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Verdicts requested from `analyze`; absent checks are omitted from the JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalue_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transposed_mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entangled_by_product: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical_min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<bool>,
}

/// Sample-set metadata stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub schema_version: u32,
    pub seed: u64,
    pub config: ProtocolConfig<f64>,
    pub options: EnsembleOptions,
    pub n_records: usize,
    pub channels: Vec<[String; 2]>,
    pub calibration: [[f64; 2]; 6],
    pub correction: Option<Correction<f64>>,
}

impl SampleSidecar {
    pub fn from_set(set: &SampleSet) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: set.seed,
            config: set.config.clone(),
            options: set.options,
            n_records: set.records.len(),
            channels: CHANNELS.iter().map(|c| [c.mode.to_string(), c.quadrature.to_string()]).collect(),
            calibration: set.calibration,
            correction: set.correction,
        }
    }
}

/// `{:.9e}` keeps ten significant digits.
fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

/// Long-format CSV: one row per record and channel.
pub fn write_samples_csv<W: Write>(records: &[SampleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for (i, rec) in records.iter().enumerate() {
        let (hx, hp) = match rec.hidden {
            Some([x, p]) => (sci(x), sci(p)),
            None => (String::new(), String::new()),
        };
        let (id, cell) = (i.to_string(), rec.cell.to_string());
        for (ch, v) in rec.values.iter().enumerate() {
            w.write_record([
                id.as_str(),
                cell.as_str(),
                &hx,
                &hp,
                CHANNELS[ch].mode,
                CHANNELS[ch].quadrature,
                &sci(*v),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}

fn channel_index(mode: &str, quadrature: &str) -> Option<usize> {
    CHANNELS.iter().position(|c| c.mode == mode && c.quadrature == quadrature)
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Parse(format!("csv header: {e}")))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Validation(format!(
            "unexpected CSV header {:?}, expected {}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER.join(",")
        )));
    }
    let mut records: Vec<SampleRecord> = Vec::new();
    let mut filled: Vec<[bool; 6]> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("csv row {}: {e}", line + 2)))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let bad = |what: &str| Error::Parse(format!("csv row {}: bad {what}", line + 2));
        let id: usize = field(0).parse().map_err(|_| bad("record"))?;
        let cell: u32 = field(1).parse().map_err(|_| bad("cell"))?;
        let hidden = match (field(2), field(3)) {
            ("", "") => None,
            (x, p) => Some([x.parse().map_err(|_| bad("cell_x"))?, p.parse().map_err(|_| bad("cell_p"))?]),
        };
        let ch = channel_index(field(4), field(5)).ok_or_else(|| bad("mode/quadrature"))?;
        let value: f64 = field(6).parse().map_err(|_| bad("value"))?;
        if !value.is_finite() {
            return Err(bad("value"));
        }
        if id == records.len() {
            records.push(SampleRecord { cell, hidden, values: [0.0; 6] });
            filled.push([false; 6]);
        } else if id + 1 != records.len() {
            return Err(Error::Validation(format!("csv row {}: records must be contiguous and ordered", line + 2)));
        }
        let rec = records.last_mut().unwrap();
        if rec.cell != cell || rec.hidden != hidden {
            return Err(Error::Validation(format!("csv row {}: record {id} has inconsistent cell data", line + 2)));
        }
        let slot = &mut filled.last_mut().unwrap()[ch];
        if *slot {
            return Err(Error::Validation(format!("csv row {}: duplicate channel for record {id}", line + 2)));
        }
        *slot = true;
        rec.values[ch] = value;
    }
    if records.is_empty() {
        return Err(Error::Validation("sample CSV contains no records".into()));
    }
    if let Some(i) = filled.iter().position(|f| f.iter().any(|&b| !b)) {
        return Err(Error::Validation(format!("record {i} is missing channels")));
    }
    Ok(records)
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_sample_set(set: &SampleSet, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    let file = fs::File::create(csv_path).map_err(|e| io_err(csv_path, e))?;
    write_samples_csv(&set.records, std::io::BufWriter::new(file))?;
    write_text(sidecar_path, &to_json(&SampleSidecar::from_set(set))?)
}

pub fn read_sidecar(path: &Path) -> Result<SampleSidecar> {
    let text = read_text(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    check_schema(&doc)?;
    serde_json::from_value(doc).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_sample_set(csv_path: &Path, sidecar_path: &Path) -> Result<SampleSet> {
    let side = read_sidecar(sidecar_path)?;
    let file = fs::File::open(csv_path).map_err(|e| io_err(csv_path, e))?;
    let records = read_samples_csv(std::io::BufReader::new(file))?;
    if records.len() != side.n_records {
        return Err(Error::Validation(format!(
            "sidecar declares {} records, CSV holds {}",
            side.n_records,
            records.len()
        )));
    }
    Ok(SampleSet {
        seed: side.seed,
        config: side.config,
        options: side.options,
        records,
        calibration: side.calibration,
        correction: side.correction,
    })
}

/// Renders a matrix as `value ± error` rows.
pub fn format_with_errors(value: &Matrix<f64>, error: &Matrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..value.rows() {
        let cells: Vec<String> = (0..value.cols())
            .map(|j| format!("{:>9.4} ± {:<8.2e}", value[(i, j)], error[(i, j)]))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
