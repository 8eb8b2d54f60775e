//! CSV rendering and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ris_locate_core::harness::{ComparisonOutput, SummaryRow, TrajectoryPoint, TrialResult};
use ris_locate_core::localizer::Warnings;

pub const TRAJECTORY_HEADER: [&str; 5] = ["actual_x", "actual_y", "est_x", "est_y", "err_m"];
pub const COMPARISON_HEADER: [&str; 4] =
    ["snr_db", "proposed_median_m", "baseline_median_m", "trials"];
pub const COMPARISON_TRIALS_HEADER: [&str; 4] =
    ["trial", "snr_db", "proposed_err_m", "baseline_err_m"];
pub const TRIALS_HEADER: [&str; 12] = [
    "trial",
    "snr_db",
    "n_ris",
    "true_x",
    "true_y",
    "est_x",
    "est_y",
    "err_m",
    "dist_err_1_m",
    "dist_err_2_m",
    "dist_err_3_m",
    "warnings",
];

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros
/// removed. Parsing the text back yields the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (16 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NaN".into())
}

fn warnings_field(w: &Warnings, failure: Option<&str>) -> String {
    let mut parts: Vec<String> = w
        .clamped_range
        .iter()
        .enumerate()
        .filter(|(_, c)| **c)
        .map(|(i, _)| format!("clamped_range_{}", i + 1))
        .collect();
    if let Some(f) = failure {
        parts.push(format!("failed: {f}"));
    }
    parts.join(";")
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> Vec<u8> {
    render(
        &TRAJECTORY_HEADER,
        points.iter().map(|p| {
            vec![
                fmt_f64(p.actual.x),
                fmt_f64(p.actual.y),
                opt(p.estimate.map(|e| e.x)),
                opt(p.estimate.map(|e| e.y)),
                fmt_f64(p.error),
            ]
        }),
    )
}

/// `key_column` is `snr_db` or `n_ris`.
pub fn summary_csv(key_column: &str, rows: &[SummaryRow]) -> Vec<u8> {
    render(
        &[key_column, "mean_m", "median_m", "p90_m", "trials"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.key),
                fmt_f64(r.mean),
                fmt_f64(r.median),
                fmt_f64(r.p90),
                r.trials.to_string(),
            ]
        }),
    )
}

pub fn trials_csv(trials: &[TrialResult]) -> Vec<u8> {
    render(
        &TRIALS_HEADER,
        trials.iter().map(|t| {
            vec![
                t.trial.to_string(),
                fmt_f64(t.snr_db),
                t.n_ris.to_string(),
                fmt_f64(t.true_position.x),
                fmt_f64(t.true_position.y),
                opt(t.estimate.map(|e| e.x)),
                opt(t.estimate.map(|e| e.y)),
                fmt_f64(t.position_error),
                fmt_f64(t.distance_errors[0]),
                fmt_f64(t.distance_errors[1]),
                fmt_f64(t.distance_errors[2]),
                warnings_field(&t.warnings, t.failure.as_deref()),
            ]
        }),
    )
}

pub fn comparison_csv(out: &ComparisonOutput) -> Vec<u8> {
    render(
        &COMPARISON_HEADER,
        out.rows.iter().map(|r| {
            vec![
                fmt_f64(r.snr_db),
                fmt_f64(r.proposed.median),
                fmt_f64(r.baseline.median),
                r.proposed.trials.to_string(),
            ]
        }),
    )
}

pub fn comparison_trials_csv(out: &ComparisonOutput) -> Vec<u8> {
    render(
        &COMPARISON_TRIALS_HEADER,
        out.proposed.iter().zip(&out.baseline).map(|(p, b)| {
            vec![
                p.trial.to_string(),
                fmt_f64(p.snr_db),
                fmt_f64(p.position_error),
                fmt_f64(b.position_error),
            ]
        }),
    )
}

/// Writes every file to a temporary sibling first and renames only after all
/// writes succeeded.
pub fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| {
        for (name, bytes) in files {
            let tmp = dir.join(format!(".{name}.tmp"));
            staged.push(tmp.clone());
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        Ok::<_, std::io::Error>(())
    })();
    if let Err(e) = result {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    let mut written = Vec::with_capacity(files.len());
    for ((name, _), tmp) in files.iter().zip(&staged) {
        let dest = dir.join(name);
        fs::rename(tmp, &dest)?;
        written.push(dest);
    }
    Ok(written)
}
