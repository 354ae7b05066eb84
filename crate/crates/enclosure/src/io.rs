//! Persistence: flat binary arrays with JSON headers and fixed-format CSV
//! tables. Every file carries the run's config hash and dimension mode.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Grid, Point};
use crate::indicator::IndicatorSample;
use crate::reconstruct::{EnclosureMask, SupportEstimate};
use crate::solver::DtnTrace;

/// Provenance stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub dim_mode: String,
}

impl RunMeta {
    pub fn new(config_hash: impl Into<String>, dim: usize) -> Self {
        RunMeta { config_hash: config_hash.into(), dim_mode: dim_mode(dim).to_string() }
    }

    fn comment(&self) -> String {
        format!("# config_hash={} dim_mode={}\n", self.config_hash, self.dim_mode)
    }

    fn parse_comment(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?;
        let mut hash = None;
        let mut mode = None;
        for part in rest.split_whitespace() {
            if let Some(v) = part.strip_prefix("config_hash=") {
                hash = Some(v.to_string());
            } else if let Some(v) = part.strip_prefix("dim_mode=") {
                mode = Some(v.to_string());
            }
        }
        Some(RunMeta { config_hash: hash?, dim_mode: mode? })
    }
}

/// `analyzed_range` for n ≥ 3; 2D runs are a fast mode outside that range.
pub fn dim_mode(dim: usize) -> &'static str {
    if dim >= 3 {
        "analyzed_range"
    } else {
        "outside_analyzed_range"
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{}: {e}", path.display()))
}

/// Shortest round-trip representation, so rows are byte-stable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Validation(format!("not a number: {s:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub dims: [usize; 3],
    pub origin: Point,
    pub spacing: Point,
    /// "f64" or "u8", little endian.
    pub dtype: String,
    /// 2 for complex (re, im interleaved), 1 otherwise.
    pub components: usize,
    pub name: String,
    #[serde(flatten)]
    pub meta: RunMeta,
}

fn header_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))
}

/// Writes complex samples on a regular lattice to `bin` and a JSON header
/// with the same stem.
pub fn write_complex_array(bin: &Path, header: ArrayHeader, values: &[C64]) -> Result<()> {
    if values.len() != header.dims.iter().product::<usize>() || header.components != 2 {
        return invalid("array length does not match its header");
    }
    let mut bytes = Vec::with_capacity(values.len() * 16);
    for v in values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(bin, bytes).map_err(|e| io_err(bin, e))?;
    write_json(&header_path(bin), &header)
}

pub fn write_complex_field(bin: &Path, grid: &Grid, name: &str, values: &[C64], meta: &RunMeta) -> Result<()> {
    if values.len() != grid.n_nodes() {
        return invalid("field length does not match the grid");
    }
    let header = ArrayHeader {
        dims: grid.counts,
        origin: grid.origin,
        spacing: grid.spacing,
        dtype: "f64".into(),
        components: 2,
        name: name.into(),
        meta: meta.clone(),
    };
    write_complex_array(bin, header, values)
}

pub fn read_complex_field(bin: &Path) -> Result<(ArrayHeader, Vec<C64>)> {
    let text = fs::read_to_string(header_path(bin)).map_err(|e| io_err(bin, e))?;
    let header: ArrayHeader = serde_json::from_str(&text).map_err(|e| io_err(bin, e))?;
    let bytes = fs::read(bin).map_err(|e| io_err(bin, e))?;
    let n: usize = header.dims.iter().product();
    if header.components != 2 || bytes.len() != n * 16 {
        return invalid("field file does not match its header");
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    Ok((header, (0..n).map(|i| C64::new(f(2 * i), f(2 * i + 1))).collect()))
}

pub fn write_mask(bin: &Path, grid: &Grid, mask: &EnclosureMask, meta: &RunMeta) -> Result<()> {
    if mask.values.len() != grid.n_nodes() {
        return invalid("mask length does not match the grid");
    }
    let bytes: Vec<u8> = mask.values.iter().map(|&b| b as u8).collect();
    fs::write(bin, bytes).map_err(|e| io_err(bin, e))?;
    let header = ArrayHeader {
        dims: grid.counts,
        origin: grid.origin,
        spacing: grid.spacing,
        dtype: "u8".into(),
        components: 1,
        name: "enclosure_mask".into(),
        meta: meta.clone(),
    };
    write_json(&header_path(bin), &header)
}

pub fn read_mask(bin: &Path) -> Result<(ArrayHeader, Vec<bool>)> {
    let text = fs::read_to_string(header_path(bin)).map_err(|e| io_err(bin, e))?;
    let header: ArrayHeader = serde_json::from_str(&text).map_err(|e| io_err(bin, e))?;
    let bytes = fs::read(bin).map_err(|e| io_err(bin, e))?;
    if bytes.len() != header.dims.iter().product::<usize>() {
        return invalid("mask file does not match its header");
    }
    Ok((header, bytes.into_iter().map(|b| b != 0).collect()))
}

/// JSON report with the provenance fields merged in at the top level.
pub fn write_report<T: Serialize>(path: &Path, report: &T, meta: &RunMeta) -> Result<()> {
    let mut v = serde_json::to_value(report).map_err(|e| io_err(path, e))?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("config_hash".into(), meta.config_hash.clone().into());
            obj.insert("dim_mode".into(), meta.dim_mode.clone().into());
        }
        None => return invalid("reports must serialize to JSON objects"),
    }
    write_json(path, &v)
}

fn axis_names(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("{prefix}{k}")).collect()
}

pub fn indicator_header(dim: usize) -> Vec<String> {
    let mut h = axis_names("x0_", dim);
    h.extend(axis_names("w_", dim));
    for s in ["h", "t", "re_I", "im_I", "re_I_oracle", "im_I_oracle", "solver_iters", "residual"] {
        h.push(s.into());
    }
    h
}

pub fn indicator_row(s: &IndicatorSample, dim: usize) -> Vec<String> {
    let mut r: Vec<String> = s.x0[..dim].iter().chain(&s.w[..dim]).map(|&v| fmt_f64(v)).collect();
    for v in [s.h, s.t, s.value.re, s.value.im, s.value_volume_oracle.re, s.value_volume_oracle.im] {
        r.push(fmt_f64(v));
    }
    r.push(s.iterations.to_string());
    r.push(fmt_f64(s.residual));
    r
}

fn parse_indicator_row(r: &csv::StringRecord, dim: usize) -> Result<IndicatorSample> {
    if r.len() != 2 * dim + 8 {
        return invalid(format!("indicator row has {} fields, expected {}", r.len(), 2 * dim + 8));
    }
    let f = |k: usize| parse_f64(&r[k]);
    let mut x0 = [0.0; 3];
    let mut w = [0.0; 3];
    for k in 0..dim {
        x0[k] = f(k)?;
        w[k] = f(dim + k)?;
    }
    let o = 2 * dim;
    Ok(IndicatorSample {
        x0,
        w,
        h: f(o)?,
        t: f(o + 1)?,
        value: C64::new(f(o + 2)?, f(o + 3)?),
        value_volume_oracle: C64::new(f(o + 4)?, f(o + 5)?),
        iterations: r[o + 6].trim().parse().map_err(|_| Error::Validation("bad iteration count".into()))?,
        residual: f(o + 7)?,
    })
}

/// CSV writer that emits the provenance comment first.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvSink {
    pub fn create(path: &Path, header: &[String], meta: &RunMeta) -> Result<Self> {
        let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
        file.write_all(meta.comment().as_bytes()).map_err(|e| io_err(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header).map_err(|e| io_err(path, e))?;
        Ok(CsvSink { path: path.to_path_buf(), writer })
    }

    /// Reopens an existing file for appending rows.
    pub fn append(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new().append(true).open(path).map_err(|e| io_err(path, e))?;
        Ok(CsvSink { path: path.to_path_buf(), writer: csv::WriterBuilder::new().has_headers(false).from_writer(file) })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(|e| io_err(&self.path, e))?;
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Provenance, header and raw records of a CSV written by [`CsvSink`].
/// A trailing partial line (interrupted write) is dropped.
pub fn read_csv(path: &Path) -> Result<(RunMeta, Vec<String>, Vec<csv::StringRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let (first, body) = text.split_once('\n').ok_or_else(|| io_err(path, "empty file"))?;
    let meta = RunMeta::parse_comment(first).ok_or_else(|| io_err(path, "missing provenance line"))?;
    let complete = match body.rfind('\n') {
        Some(k) => &body[..=k],
        None => "",
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(complete.as_bytes());
    let header = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| io_err(path, e))?;
    Ok((meta, header, rows))
}

pub fn read_indicator_csv(path: &Path, dim: usize) -> Result<(RunMeta, Vec<IndicatorSample>)> {
    let (meta, header, rows) = read_csv(path)?;
    if header != indicator_header(dim) {
        return invalid(format!("{}: unexpected indicator columns", path.display()));
    }
    let samples = rows.iter().map(|r| parse_indicator_row(r, dim)).collect::<Result<Vec<_>>>()?;
    Ok((meta, samples))
}

pub fn write_indicator_csv(path: &Path, samples: &[IndicatorSample], dim: usize, meta: &RunMeta) -> Result<()> {
    let mut sink = CsvSink::create(path, &indicator_header(dim), meta)?;
    for s in samples {
        sink.row(&indicator_row(s, dim))?;
    }
    Ok(())
}

pub fn write_support_csv(path: &Path, estimates: &[SupportEstimate], dim: usize, meta: &RunMeta) -> Result<()> {
    let mut header = axis_names("x0_", dim);
    header.extend(axis_names("w_", dim));
    for s in ["t", "h_D_hat", "slope", "log_coef", "fit_residual", "n_points", "monotone", "usable", "h_D_true"] {
        header.push(s.into());
    }
    let mut sink = CsvSink::create(path, &header, meta)?;
    for e in estimates {
        let mut r: Vec<String> = e.x0[..dim].iter().chain(&e.w[..dim]).map(|&v| fmt_f64(v)).collect();
        for v in [e.t, e.h_d_hat, e.slope, e.log_coef, e.residual] {
            r.push(fmt_f64(v));
        }
        r.push(e.n_points.to_string());
        r.push(e.monotone.to_string());
        r.push(e.usable.to_string());
        r.push(e.truth.map(fmt_f64).unwrap_or_default());
        sink.row(&r)?;
    }
    Ok(())
}

pub fn write_dtn_csv(path: &Path, grid: &Grid, dtn: &DtnTrace, meta: &RunMeta) -> Result<()> {
    let nb = grid.boundary.len();
    if dtn.du_dnu.len() != nb || dtn.dlap_dnu.len() != nb {
        return invalid("trace is not aligned with the grid boundary");
    }
    let mut header = vec!["node".to_string()];
    header.extend(axis_names("x", grid.dim));
    header.extend(axis_names("nu", grid.dim));
    for s in ["weight", "re_du_dnu", "im_du_dnu", "re_dlap_dnu", "im_dlap_dnu"] {
        header.push(s.into());
    }
    let mut sink = CsvSink::create(path, &header, meta)?;
    for (k, b) in grid.boundary.iter().enumerate() {
        let mut r = vec![b.node.to_string()];
        r.extend(b.position[..grid.dim].iter().chain(&b.normal[..grid.dim]).map(|&v| fmt_f64(v)));
        for v in [b.weight, dtn.du_dnu[k].re, dtn.du_dnu[k].im, dtn.dlap_dnu[k].re, dtn.dlap_dnu[k].im] {
            r.push(fmt_f64(v));
        }
        sink.row(&r)?;
    }
    Ok(())
}
