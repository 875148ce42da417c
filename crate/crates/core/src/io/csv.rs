//! Plot-ready CSV exports and the CDF re-import.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::Cdf;
use crate::doppler::Spectrum;
use crate::error::{Error, Result};
use crate::scenario::{SirSeries, SIR_CAP_DB};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Decimal text with 12 significant digits and trailing zeros trimmed
/// (keeping one digit after the point). Very large or small magnitudes fall
/// back to exponent notation.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&exp) {
        return format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
    } else {
        s.push_str(".0");
    }
    s
}

/// SIR in dB clamped to the serialization cap, so `+∞` is written as `300.0`.
pub fn format_sir(db: f64) -> String {
    if db.is_nan() {
        return "nan".into();
    }
    format_value(db.clamp(-SIR_CAP_DB, SIR_CAP_DB))
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns `t_norm,sir1_db,...`; time in units of `1/f_d`.
pub fn export_sir_csv(series: &SirSeries, path: impl AsRef<Path>) -> Result<()> {
    let header = std::iter::once("t_norm".to_string())
        .chain((1..=series.mode_count).map(|i| format!("sir{i}_db")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..series.len()).map(|n| {
        std::iter::once(format_value(series.t_norm[n]))
            .chain(series.sir_db.iter().map(|m| format_sir(m[n])))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_rows(path.as_ref(), &header, rows)
}

/// Columns `f_over_fd,psd_db`; PSD relative to the peak bin.
pub fn export_spectrum_csv(spectrum: &Spectrum, f_d: f64, path: impl AsRef<Path>) -> Result<()> {
    let rows = spectrum
        .bin_freqs
        .iter()
        .zip(&spectrum.psd_db)
        .map(|(f, p)| format!("{},{}", format_value(f / f_d), format_value(*p)));
    write_rows(path.as_ref(), "f_over_fd,psd_db", rows)
}

/// Columns `level_db,prob`.
pub fn export_cdf_csv(cdf: &Cdf, path: impl AsRef<Path>) -> Result<()> {
    let rows = cdf
        .levels_db
        .iter()
        .zip(&cdf.prob)
        .map(|(l, p)| format!("{},{}", format_value(*l), format_value(*p)));
    write_rows(path.as_ref(), "level_db,prob", rows)
}

/// Reads a CDF written by [`export_cdf_csv`]. The sample count is not stored
/// and is recovered from the smallest probability step, which is exact
/// whenever some level occurs only once.
pub fn import_cdf_csv(path: impl AsRef<Path>) -> Result<Cdf> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::TraceFormat {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "level_db,prob" => {}
        other => {
            return Err(bad(
                1,
                format!(
                    "expected header `level_db,prob`, found {:?}",
                    other.map(|o| o.1)
                ),
            ))
        }
    }
    let mut levels_db = Vec::new();
    let mut prob = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| {
            s.and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(i + 1, format!("cannot parse `{line}`")))
        };
        levels_db.push(parse(parts.next())?);
        prob.push(parse(parts.next())?);
        if parts.next().is_some() {
            return Err(bad(i + 1, "expected two columns".into()));
        }
    }
    let min_step = prob
        .iter()
        .scan(0.0, |prev, &p| {
            let d = p - *prev;
            *prev = p;
            Some(d)
        })
        .fold(f64::INFINITY, f64::min);
    let sample_count = if min_step.is_finite() && min_step > 0.0 {
        (1.0 / min_step).round() as usize
    } else {
        0
    };
    Ok(Cdf {
        levels_db,
        prob,
        sample_count,
    })
}
