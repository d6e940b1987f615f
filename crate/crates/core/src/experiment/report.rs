use std::io::Write;
use std::path::Path;

use super::results::{fmt_float, ResultTable};
use crate::error::{Error, Result};

/// log10 BER statistics of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    pub count: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics; `sorted` is non-empty.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Group rows by the given columns, in order of first appearance. Zero-error
/// rows enter as the `log10(1 / bits)` bound; rows with an error are skipped
/// and a group left without values is dropped with a warning.
pub fn summarize(table: &ResultTable, group_by: &[String]) -> Result<Vec<SummaryRow>> {
    let keys: Vec<usize> = group_by.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let ber = table.column("log10_ber")?;
    let bits = table.column("bits")?;
    let err = table.column("error")?;

    let mut groups: Vec<(Vec<String>, Vec<f64>)> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let key: Vec<String> = keys.iter().map(|&k| row[k].clone()).collect();
        let slot = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        if !row[err].is_empty() {
            continue;
        }
        let parse = |col: usize| -> Result<f64> {
            row[col]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: `{}` is not a number", i + 1, row[col])))
        };
        let mut v = parse(ber)?;
        if v == f64::NEG_INFINITY {
            v = -parse(bits)?.max(1.0).log10();
        }
        groups[slot].1.push(v);
    }

    let mut out = Vec::with_capacity(groups.len());
    for (key, mut values) in groups {
        if values.is_empty() {
            log::warn!("group {} has no successful rows; omitted", key.join(","));
            continue;
        }
        values.sort_by(f64::total_cmp);
        out.push(SummaryRow {
            count: values.len(),
            median: percentile(&values, 0.5),
            p25: percentile(&values, 0.25),
            p75: percentile(&values, 0.75),
            min: values[0],
            max: values[values.len() - 1],
            key,
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, group_by: &[String], rows: &[SummaryRow]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        let mut header: Vec<&str> = group_by.iter().map(String::as_str).collect();
        header.extend(["count", "median", "p25", "p75", "min", "max"]);
        w.write_record(&header)?;
        for r in rows {
            let mut rec = r.key.clone();
            rec.push(r.count.to_string());
            rec.extend([r.median, r.p25, r.p75, r.min, r.max].map(fmt_float));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
