use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::{AggregateStats, CdfKnot, Scheme};

pub const STATS_HEADER: &str = "scheme,M,snr_db,user,mean_rate,sched_freq,mean_sum_rate";
pub const CDF_HEADER: &str = "scheme,M,snr_db,sum_rate,cum_frac";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    /// CSVs plus a matplotlib script that reads them.
    PlotScript,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plot-script" => Ok(OutputFormat::PlotScript),
            other => Err(Error::InvalidConfig(format!("unknown output format {other:?}"))),
        }
    }
}

/// One row per (point, user); users are numbered from 1.
pub fn write_stats_csv(stats: &[AggregateStats]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        for (d, (rate, freq)) in s.mean_rate.iter().zip(&s.sched_freq).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.scheme,
                s.elements,
                s.snr_db,
                d + 1,
                rate,
                freq,
                s.mean_sum_rate
            );
        }
    }
    out
}

pub fn write_cdf_csv(stats: &[AggregateStats]) -> String {
    let mut out = String::from(CDF_HEADER);
    out.push('\n');
    for s in stats {
        for k in &s.cdf {
            let _ = writeln!(out, "{},{},{},{},{}", s.scheme, s.elements, s.snr_db, k.sum_rate, k.cum_frac);
        }
    }
    out
}

fn parse_err(what: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: PathBuf::from(what),
        message: format!("line {line}: {msg}"),
    }
}

fn field<T: FromStr>(what: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| parse_err(what, line, format!("{raw:?}: {e}")))
}

fn rows<'a>(what: &'a str, text: &'a str, header: &str, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(parse_err(what, 1, "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != width {
                return Err(parse_err(what, i + 2, format!("expected {width} columns")));
            }
            Ok((i + 2, cols))
        })
        .collect()
}

type PointKey = (Scheme, usize, u64);

fn key(what: &str, line: usize, cols: &[&str]) -> Result<PointKey> {
    let scheme: Scheme = cols[0].parse().map_err(|e| parse_err(what, line, e))?;
    Ok((scheme, field(what, line, cols[1])?, field::<f64>(what, line, cols[2])?.to_bits()))
}

/// Stats rows without CDF knots, in file order.
pub fn parse_stats_csv(text: &str) -> Result<Vec<AggregateStats>> {
    let what = "stats csv";
    let mut out: Vec<AggregateStats> = Vec::new();
    let mut last: Option<PointKey> = None;
    for (line, cols) in rows(what, text, STATS_HEADER, 7)? {
        let k = key(what, line, &cols)?;
        let user: usize = field(what, line, cols[3])?;
        if last != Some(k) {
            out.push(AggregateStats {
                scheme: k.0,
                elements: k.1,
                snr_db: f64::from_bits(k.2),
                mean_rate: Vec::new(),
                sched_freq: Vec::new(),
                mean_sum_rate: field(what, line, cols[6])?,
                cdf: Vec::new(),
            });
            last = Some(k);
        }
        let s = out.last_mut().expect("pushed above");
        if user != s.mean_rate.len() + 1 {
            return Err(parse_err(what, line, "users out of order"));
        }
        s.mean_rate.push(field(what, line, cols[4])?);
        s.sched_freq.push(field(what, line, cols[5])?);
    }
    Ok(out)
}

/// CDF knots grouped by point.
pub fn parse_cdf_csv(text: &str) -> Result<BTreeMap<(String, usize, u64), Vec<CdfKnot>>> {
    let what = "cdf csv";
    let mut out: BTreeMap<(String, usize, u64), Vec<CdfKnot>> = BTreeMap::new();
    for (line, cols) in rows(what, text, CDF_HEADER, 5)? {
        let (scheme, m, snr) = key(what, line, &cols)?;
        out.entry((scheme.to_string(), m, snr)).or_default().push(CdfKnot {
            sum_rate: field(what, line, cols[3])?,
            cum_frac: field(what, line, cols[4])?,
        });
    }
    Ok(out)
}

/// Rebuilds full stats from the two CSV files.
pub fn parse_outputs(stats_csv: &str, cdf_csv: &str) -> Result<Vec<AggregateStats>> {
    let mut stats = parse_stats_csv(stats_csv)?;
    let mut cdfs = parse_cdf_csv(cdf_csv)?;
    for s in &mut stats {
        s.cdf = cdfs
            .remove(&(s.scheme.to_string(), s.elements, s.snr_db.to_bits()))
            .unwrap_or_default();
    }
    Ok(stats)
}

/// Self-contained matplotlib script for `<stem>_stats.csv` and `<stem>_cdf.csv`.
pub fn plot_script(stem: &str) -> String {
    PLOT_TEMPLATE.replace("@STEM@", stem)
}

const PLOT_TEMPLATE: &str = r#"#!/usr/bin/env python3
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
STEM = "@STEM@"


def load(name):
    with open(os.path.join(HERE, name)) as f:
        return list(csv.DictReader(f))


stats = load(STEM + "_stats.csv")
cdf = load(STEM + "_cdf.csv")

points = {}
for r in stats:
    points[(r["scheme"], int(r["M"]), float(r["snr_db"]))] = float(r["mean_sum_rate"])

by_m = defaultdict(list)
by_snr = defaultdict(list)
for (scheme, m, snr), rate in sorted(points.items()):
    by_m[(scheme, m)].append((snr, rate))
    by_snr[(scheme, snr)].append((m, rate))

fig, ax = plt.subplots()
for (scheme, m), xs in sorted(by_m.items()):
    if len(xs) > 1:
        ax.plot([x for x, _ in xs], [y for _, y in xs], marker="o", label=f"{scheme}, M={m}")
ax.set_xlabel("SNR (dB)")
ax.set_ylabel("Average sum rate (bps/Hz)")
ax.grid(True)
if ax.lines:
    ax.legend()
    fig.savefig(os.path.join(HERE, STEM + "_sum_rate_vs_snr.png"), dpi=150)
plt.close(fig)

fig, ax = plt.subplots()
for (scheme, snr), xs in sorted(by_snr.items()):
    if len(xs) > 1:
        ax.plot([x for x, _ in xs], [y for _, y in xs], marker="s", label=f"{scheme}, {snr:g} dB")
ax.set_xlabel("Number of RHS elements M")
ax.set_ylabel("Average sum rate (bps/Hz)")
ax.grid(True)
if ax.lines:
    ax.legend()
    fig.savefig(os.path.join(HERE, STEM + "_sum_rate_vs_m.png"), dpi=150)
plt.close(fig)

freq = defaultdict(list)
for r in stats:
    freq[(r["scheme"], int(r["M"]), float(r["snr_db"]))].append(float(r["sched_freq"]))
fig, ax = plt.subplots()
for (scheme, m, snr), fs in sorted(freq.items()):
    ax.plot(range(1, len(fs) + 1), fs, marker="o", label=f"{scheme}, M={m}, {snr:g} dB")
ax.set_xlabel("User")
ax.set_ylabel("Normalized scheduling frequency")
ax.set_ylim(0, 1.05)
ax.grid(True)
if len(freq) <= 12:
    ax.legend(fontsize="small")
fig.savefig(os.path.join(HERE, STEM + "_sched_freq.png"), dpi=150)
plt.close(fig)

curves = defaultdict(list)
for r in cdf:
    curves[(r["scheme"], int(r["M"]), float(r["snr_db"]))].append((float(r["sum_rate"]), float(r["cum_frac"])))
fig, ax = plt.subplots()
for (scheme, m, snr), ks in sorted(curves.items()):
    xs = [ks[0][0]] + [x for x, _ in ks]
    ys = [0.0] + [y for _, y in ks]
    ax.step(xs, ys, where="post", label=f"{scheme}, M={m}, {snr:g} dB")
ax.set_xlabel("Sum rate (bps/Hz)")
ax.set_ylabel("CDF")
ax.grid(True)
ax.legend(fontsize="small")
fig.savefig(os.path.join(HERE, STEM + "_cdf.png"), dpi=150)
plt.close(fig)
"#;

/// Writes `<stem>_stats.csv` and `<stem>_cdf.csv` under `dir`, plus
/// `<stem>_plot.py` for [`OutputFormat::PlotScript`]. Returns the written paths.
pub fn emit_outputs(stats: &[AggregateStats], dir: &Path, stem: &str, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        (dir.join(format!("{stem}_stats.csv")), write_stats_csv(stats)),
        (dir.join(format!("{stem}_cdf.csv")), write_cdf_csv(stats)),
    ];
    if format == OutputFormat::PlotScript {
        files.push((dir.join(format!("{stem}_plot.py")), plot_script(stem)));
    }
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<AggregateStats> {
        vec![
            AggregateStats {
                scheme: Scheme::Proposed,
                elements: 36,
                snr_db: 10.0,
                mean_rate: vec![6.123456789012345, 0.1 + 0.2, 0.0],
                sched_freq: vec![1.0, 0.37, 0.0],
                mean_sum_rate: 6.423456789012345,
                cdf: vec![
                    CdfKnot { sum_rate: 5.5, cum_frac: 0.5 },
                    CdfKnot { sum_rate: 7.346913578024691, cum_frac: 1.0 },
                ],
            },
            AggregateStats {
                scheme: Scheme::Benchmark,
                elements: 64,
                snr_db: 32.5,
                mean_rate: vec![1e-300, 2.0, 3.0],
                sched_freq: vec![0.01, 0.99, 1.0 / 3.0],
                mean_sum_rate: 5.000000000000001,
                cdf: vec![CdfKnot { sum_rate: 5.000000000000001, cum_frac: 1.0 }],
            },
        ]
    }

    #[test]
    fn headers_are_exact() {
        let s = write_stats_csv(&sample());
        assert_eq!(s.lines().next().unwrap(), "scheme,M,snr_db,user,mean_rate,sched_freq,mean_sum_rate");
        let c = write_cdf_csv(&sample());
        assert_eq!(c.lines().next().unwrap(), "scheme,M,snr_db,sum_rate,cum_frac");
        assert_eq!(s.lines().nth(1).unwrap(), "proposed,36,10,1,6.123456789012345,1,6.423456789012345");
    }

    #[test]
    fn round_trip_is_identity() {
        let stats = sample();
        let back = parse_outputs(&write_stats_csv(&stats), &write_cdf_csv(&stats)).unwrap();
        assert_eq!(back, stats);
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(parse_stats_csv("wrong\n").is_err());
        assert!(parse_stats_csv(&format!("{STATS_HEADER}\nproposed,36,10,1,x,1,1\n")).is_err());
        assert!(parse_stats_csv(&format!("{STATS_HEADER}\nproposed,36,10,2,1,1,1\n")).is_err());
        assert!(parse_cdf_csv(&format!("{CDF_HEADER}\nother,36,10,1,1\n")).is_err());
    }

    #[test]
    fn plot_script_references_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&sample(), dir.path(), "snr", OutputFormat::PlotScript).unwrap();
        assert_eq!(files.len(), 3);
        let script = std::fs::read_to_string(&files[2]).unwrap();
        assert!(script.contains("STEM = \"snr\""));
        assert!(script.contains("_stats.csv") && script.contains("_cdf.csv"));
        assert!(script.contains("SNR (dB)"));
    }

    #[test]
    fn unwritable_path_reports_it() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = emit_outputs(&sample(), &blocker.join("sub"), "s", OutputFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("file"));
    }
}
