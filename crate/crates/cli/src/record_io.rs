//! CSV formats: signal records (`sample_index,value_mhz` with metadata in
//! comment headers) and interval lists. All floats carry 17 significant
//! digits.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use folo_core::{ArmaModel, FoIntervals, SignalRecord};

/// 17 significant digits: enough to reproduce any f64 bit pattern.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn join_coeffs(coeffs: &[f64]) -> String {
    coeffs
        .iter()
        .map(|&c| fmt_f64(c))
        .collect::<Vec<_>>()
        .join(";")
}

/// Write a signal record with enough header metadata to regenerate it.
pub fn write_record(
    path: &Path,
    record: &SignalRecord,
    seed: Option<u64>,
    model: Option<&ArmaModel>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("# folo signal record v1\n");
    out.push_str(&format!("# label = {}\n", record.label));
    out.push_str(&format!(
        "# sample_rate_hz = {}\n",
        fmt_f64(record.sample_rate_hz)
    ));
    if let Some(seed) = seed {
        out.push_str(&format!("# seed = {seed}\n"));
    }
    if let Some(m) = model {
        out.push_str(&format!("# ar = {}\n", join_coeffs(m.ar_coeffs())));
        out.push_str(&format!("# ma = {}\n", join_coeffs(m.ma_coeffs())));
        out.push_str(&format!("# x = {}\n", join_coeffs(m.x_coeffs())));
        out.push_str(&format!(
            "# noise_variance = {}\n",
            fmt_f64(m.noise_variance)
        ));
    }
    out.push_str("sample_index,value_mhz\n");
    for (k, v) in record.samples.iter().enumerate() {
        out.push_str(&format!("{k},{}\n", fmt_f64(*v)));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Read a record written by [`write_record`] (or any CSV with the same
/// columns and a `sample_rate_hz` header comment).
pub fn read_record(path: &Path) -> Result<SignalRecord> {
    let file =
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = std::io::BufReader::new(file);
    let mut meta: HashMap<String, String> = HashMap::new();
    let mut samples: Vec<(usize, f64)> = Vec::new();
    let mut saw_header = false;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !saw_header {
            if !trimmed.starts_with("sample_index") {
                bail!(
                    "{}:{}: expected 'sample_index,value_mhz' header",
                    path.display(),
                    line_no + 1
                );
            }
            saw_header = true;
            continue;
        }
        let (idx, val) = trimmed.split_once(',').with_context(|| {
            format!("{}:{}: expected two columns", path.display(), line_no + 1)
        })?;
        samples.push((idx.trim().parse()?, val.trim().parse()?));
    }
    samples.sort_by_key(|&(k, _)| k);
    let values: Vec<f64> = samples.iter().map(|&(_, v)| v).collect();
    let rate: f64 = meta
        .get("sample_rate_hz")
        .context("record is missing the '# sample_rate_hz = ...' header")?
        .parse()
        .context("sample_rate_hz header is not a number")?;
    let label = meta.get("label").cloned().unwrap_or_default();
    SignalRecord::new(values, rate, label)
        .map_err(|e| anyhow::anyhow!("record {} invalid: {e}", path.display()))
}

/// Write intervals as `trial_id,interval_index,epsilon,eta` rows.
pub fn write_intervals(
    path: &Path,
    entries: &[(u64, &FoIntervals)],
    header_comments: &[String],
) -> Result<()> {
    let file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# folo intervals v1")?;
    for c in header_comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "trial_id,interval_index,epsilon,eta")?;
    for (trial, intervals) in entries {
        for (i, (eps, eta)) in intervals.as_slice().iter().enumerate() {
            writeln!(w, "{trial},{i},{eps},{eta}")?;
        }
    }
    Ok(())
}
