//! Result files. Output contains no timestamps, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::EpochRecord;

pub const METRICS: &str = "metrics.csv";
pub const SUMMARY: &str = "summary.csv";
pub const CONFIG_ECHO: &str = "config.echo.txt";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn metrics_csv(history: &[EpochRecord]) -> Result<String> {
    if history.is_empty() {
        return Err(Error::invalid("empty metric history"));
    }
    let mut out = String::from("epoch,loss,val_acc,test_acc\n");
    for r in history {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", r.epoch, r.loss, r.val_acc, r.test_acc);
    }
    Ok(out)
}

pub fn write_metrics(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write(path, &metrics_csv(history)?)
}

/// Mean and sample standard deviation (`n − 1`); the deviation is NaN for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// `variant,seed,test_acc,std` rows, one per seed, then `variant,mean,<mean>,<std>`.
pub fn summary_csv(variant: &str, runs: &[(u64, f64)]) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to summarize"));
    }
    let mut out = String::from("variant,seed,test_acc,std\n");
    for (seed, acc) in runs {
        let _ = writeln!(out, "{variant},{seed},{acc:.6},");
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (mean, std) = mean_std(&accs);
    let _ = writeln!(out, "{variant},mean,{mean:.6},{std:.6}");
    Ok(out)
}

pub fn write_summary(path: &Path, variant: &str, runs: &[(u64, f64)]) -> Result<()> {
    write(path, &summary_csv(variant, runs)?)
}

/// `key=value` lines in the given order.
pub fn write_config_echo(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let text: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write(path, &text)
}

/// Generic comma-separated table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_abs_diff_eq!(m, 3.0);
        assert_abs_diff_eq!(s, 2.5f64.sqrt());
        assert!(mean_std(&[1.0]).1.is_nan());
    }

    #[test]
    fn summary_rows() {
        let runs: Vec<(u64, f64)> = (0..5).map(|s| (s, 0.8 + 0.01 * s as f64)).collect();
        let text = summary_csv("geomix1", &runs).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "geomix1,0,0.800000,");
        assert!(lines[6].starts_with("geomix1,mean,0.820000,0.0158"));
        assert!(summary_csv("x", &[]).is_err());
    }

    #[test]
    fn metrics_need_history() {
        assert!(metrics_csv(&[]).is_err());
        let h = [EpochRecord { epoch: 0, loss: 1.5, val_acc: 0.5, test_acc: f64::NAN }];
        assert_eq!(metrics_csv(&h).unwrap(), "epoch,loss,val_acc,test_acc\n0,1.500000,0.500000,NaN\n");
    }

    #[test]
    fn files_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let runs = [(0, 0.5), (1, 0.75)];
        write_summary(&tmp.path().join("a.csv"), "basic", &runs).unwrap();
        write_summary(&tmp.path().join("b.csv"), "basic", &runs).unwrap();
        assert_eq!(fs::read(tmp.path().join("a.csv")).unwrap(), fs::read(tmp.path().join("b.csv")).unwrap());
    }
}
