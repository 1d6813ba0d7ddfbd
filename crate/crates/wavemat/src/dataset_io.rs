//! Dataset CSV files and their `.meta` sidecars.
//!
//! One row per sample:
//!
//! ```text
//! sample_id,label_id,label_name,yaw_deg,distance_m,repetition,power_mode,s000,...,s255
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, lines end in LF.
//! The sidecar `<stem>.meta` holds `seed=<u64>` and one `class.<id>=<name>`
//! line per class.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wavemat_core::config::KvConfig;
use wavemat_core::{CaptureMeta, ClassId, Dataset, LabeledSample, MaterialClass, PowerMode, Waveform, WAVEFORM_LEN};

use crate::{Error, Result};

const META_COLUMNS: [&str; 7] = [
    "sample_id",
    "label_id",
    "label_name",
    "yaw_deg",
    "distance_m",
    "repetition",
    "power_mode",
];

pub fn header() -> Vec<String> {
    META_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..WAVEFORM_LEN).map(|i| format!("s{i:03}")))
        .collect()
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

pub fn format_csv(data: &Dataset) -> String {
    let mut out = header().join(",");
    out.push('\n');
    for (i, s) in data.samples().iter().enumerate() {
        let name = &data.class_table()[s.label.index()].name;
        write!(
            out,
            "{i},{},{name},{},{},{},{}",
            s.label.0,
            s.meta.yaw_deg,
            s.meta.distance_m,
            s.meta.repetition,
            s.meta.power_mode.as_str()
        )
        .unwrap();
        for v in s.waveform.samples() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_meta(data: &Dataset) -> String {
    let mut out = format!("seed={}\n", data.seed());
    for c in data.class_table() {
        writeln!(out, "class.{}={}", c.id.0, c.name).unwrap();
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `path` and its `.meta` sidecar. Class names containing a comma
/// or a line break are rejected.
pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    for c in data.class_table() {
        if c.name.is_empty() || c.name.contains([',', '\n', '\r', '"']) {
            return Err(Error::Usage(format!("class name {:?} cannot be stored in CSV", c.name)));
        }
    }
    write_text(path, &format_csv(data))?;
    write_text(&meta_path(path), &format_meta(data))
}

fn read_meta(path: &Path) -> Result<(u64, Vec<MaterialClass>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = KvConfig::parse(&text).map_err(|e| match e {
        wavemat_core::Error::Config { line, message } => Error::format(path, line, message),
        other => other.into(),
    })?;
    let seed = cfg
        .require("seed")
        .map_err(|_| Error::format(path, 0, "missing or malformed seed"))?;
    let mut classes: Vec<MaterialClass> = Vec::new();
    for (k, v) in cfg.entries() {
        let Some(id) = k.strip_prefix("class.") else {
            continue;
        };
        let id: u16 = id
            .parse()
            .map_err(|_| Error::format(path, 0, format!("bad class key {k:?}")))?;
        classes.push(MaterialClass::new(id, v));
    }
    classes.sort_by_key(|c| c.id);
    Ok((seed, classes))
}

/// Reads a dataset and its sidecar. With `strict`, every yaw must lie on
/// the protocol grid and repetitions in 1..=5. Errors carry the CSV line
/// number (the header is line 1).
pub fn read_dataset(path: &Path, strict: bool) -> Result<Dataset> {
    let (seed, classes) = read_meta(&meta_path(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut records = rdr.records();
    let expected = header();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(expected.iter().map(String::as_str)) => {}
        Some(Ok(_)) | None => return Err(Error::format(path, 1, "header does not match the dataset schema")),
        Some(Err(e)) => return Err(csv_error(path, e)),
    }
    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fail = |m: String| Error::format(path, line, m);
        if rec.len() != expected.len() {
            return Err(fail(format!("expected {} columns, found {}", expected.len(), rec.len())));
        }
        let sample_id: usize = parse(&rec[0], "sample_id").map_err(fail)?;
        if sample_id != samples.len() {
            return Err(fail(format!("sample_id {sample_id} out of sequence")));
        }
        let label = ClassId(parse(&rec[1], "label_id").map_err(fail)?);
        let class = classes
            .get(label.index())
            .ok_or_else(|| fail(format!("label id {} is outside the class table ({} classes)", label.0, classes.len())))?;
        if class.name != rec[2] {
            return Err(fail(format!("label name {:?} does not match class {:?}", &rec[2], class.name)));
        }
        if &rec[6] != PowerMode::Low.as_str() {
            return Err(fail(format!("unsupported power mode {:?}", &rec[6])));
        }
        let meta = CaptureMeta::new(
            parse(&rec[3], "yaw_deg").map_err(fail)?,
            parse(&rec[4], "distance_m").map_err(fail)?,
            parse(&rec[5], "repetition").map_err(fail)?,
        )
        .map_err(|e| fail(e.to_string()))?;
        if strict {
            meta.validate_protocol().map_err(|e| fail(e.to_string()))?;
        }
        let values = rec
            .iter()
            .skip(META_COLUMNS.len())
            .enumerate()
            .map(|(i, f)| parse::<f64>(f, &format!("s{i:03}")))
            .collect::<Result<Vec<f64>, String>>()
            .map_err(fail)?;
        let waveform = Waveform::new(values).map_err(|e| fail(e.to_string()))?;
        samples.push(LabeledSample { waveform, meta, label });
    }
    Dataset::new(samples, classes, seed).map_err(|e| Error::format(path, 0, e.to_string()))
}

fn parse<T: std::str::FromStr>(field: &str, column: &str) -> Result<T, String> {
    field
        .parse()
        .map_err(|_| format!("column {column}: cannot parse {field:?}"))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, line, format!("{other:?}")),
    }
}
