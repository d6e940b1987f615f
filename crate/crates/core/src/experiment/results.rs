use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::readout::BerReport;

/// First line of every results file.
pub const RESULTS_SCHEMA: &str = "#schema=pam4link-results/1";

const FIXED_LEAD: [&str; 2] = ["point", "seed"];
const FIXED_TAIL: [&str; 9] = [
    "mode",
    "mask_seed",
    "log10_ber",
    "bit_errors",
    "bits",
    "selected_taps",
    "mc",
    "runtime_s",
    "error",
];

/// One (sweep point, seed) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub point: usize,
    pub seed: u64,
    /// Swept parameter paths and their values, already formatted.
    pub swept: Vec<(String, String)>,
    pub mode: String,
    pub mask_seed: u64,
    pub ber: Option<BerReport>,
    pub selected_taps: Option<usize>,
    pub mc: Option<f64>,
    pub runtime_s: Option<f64>,
    pub error: Option<String>,
}

/// Nine significant digits.
pub(crate) fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.8e}")
    }
}

pub(crate) fn fmt_value(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(f) => fmt_float(*f),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::String(s) => s.clone(),
        toml::Value::Boolean(b) => b.to_string(),
        other => other.to_string(),
    }
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let opt = |o: Option<String>| o.unwrap_or_default();
        let mut r = vec![self.point.to_string(), self.seed.to_string()];
        r.extend(self.swept.iter().map(|(_, v)| v.clone()));
        r.push(self.mode.clone());
        r.push(self.mask_seed.to_string());
        r.push(opt(self.ber.map(|b| fmt_float(b.log10_ber))));
        r.push(opt(self.ber.map(|b| b.bit_errors.to_string())));
        r.push(opt(self.ber.map(|b| b.bits.to_string())));
        r.push(opt(self.selected_taps.map(|t| t.to_string())));
        r.push(opt(self.mc.map(fmt_float)));
        r.push(opt(self.runtime_s.map(fmt_float)));
        r.push(self.error.clone().unwrap_or_default().replace('\n', " "));
        r
    }
}

/// Serialize rows (already in canonical order) and replace `path`
/// atomically.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let swept: Vec<&str> = rows.first().map_or(Vec::new(), |r| r.swept.iter().map(|(p, _)| p.as_str()).collect());
    let mut header: Vec<&str> = FIXED_LEAD.to_vec();
    header.extend(&swept);
    header.extend(FIXED_TAIL);

    let mut buf = Vec::new();
    writeln!(buf, "{RESULTS_SCHEMA}")?;
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(&header)?;
        for row in rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
    }
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// A results file as a header plus string records.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

pub fn read_results(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    if first.trim_end() != RESULTS_SCHEMA {
        return Err(Error::Format(format!(
            "{}: expected `{RESULTS_SCHEMA}` on the first line",
            path.display()
        )));
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(ResultTable { columns, rows })
}
