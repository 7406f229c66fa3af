//! Report files: CSV rows, an aligned text table, and per (learner, metric)
//! plot-data files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{compare, ErrReport};
use crate::dataset::Metric;
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::transfer::Strategy;

pub const CSV_COLUMNS: [&str; 9] = [
    "source_env",
    "target_env",
    "strategy",
    "learner",
    "metric",
    "err_percent",
    "err_dispersion",
    "cost",
    "seeds",
];

pub const CSV_FILE: &str = "report.csv";
pub const TABLE_FILE: &str = "report.txt";

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub table: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn seeds_field(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_report_csv<W: Write>(reports: &[ErrReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.write_record([
            r.source_env.to_string(),
            r.target_env.to_string(),
            r.strategy.to_string(),
            r.learner.to_string(),
            r.metric.to_string(),
            r.err_percent.to_string(),
            r.err_dispersion.to_string(),
            r.cost.to_string(),
            seeds_field(&r.seeds),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads rows written by [`write_report_csv`].
pub fn parse_report_csv<R: Read>(reader: R) -> Result<Vec<ErrReport>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in CSV_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let at = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let idx: Vec<usize> = CSV_COLUMNS.iter().map(|c| at(c)).collect();
    let bad = |line: u64, what: &str| Error::InvalidParameter(format!("report line {line}: bad {what}"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |k: usize| rec.get(idx[k]).unwrap_or("");
        let seeds = if f(8).is_empty() {
            vec![]
        } else {
            f(8).split(';')
                .map(|s| s.parse::<u64>().map_err(|_| bad(line, "seeds")))
                .collect::<Result<_>>()?
        };
        out.push(ErrReport {
            source_env: f(0).parse()?,
            target_env: f(1).parse()?,
            strategy: f(2).parse()?,
            learner: f(3).parse()?,
            metric: f(4).parse()?,
            err_percent: f(5).parse().map_err(|_| bad(line, "err_percent"))?,
            err_dispersion: f(6).parse().map_err(|_| bad(line, "err_dispersion"))?,
            cost: f(7).parse().map_err(|_| bad(line, "cost"))?,
            seeds,
        });
    }
    Ok(out)
}

/// Human-readable table, followed by relative reductions against `dm` when present.
pub fn render_table(reports: &[ErrReport]) -> String {
    let header = [
        "target", "strategy", "learner", "metric", "err_%", "disp", "cost", "seeds",
    ];
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            [
                r.target_env.to_string(),
                r.strategy.to_string(),
                r.learner.to_string(),
                r.metric.to_string(),
                format!("{:.3}", r.err_percent),
                format!("{:.3}", r.err_dispersion),
                r.cost.to_string(),
                r.seeds.len().to_string(),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(out, "source: {}", first.source_env);
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(width)
            .enumerate()
            .map(|(k, (c, w))| if k >= 4 { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(&header.map(String::from)));
    let _ = writeln!(out, "{}", line(&width.map(|w| "-".repeat(w))));
    for row in &rows {
        let _ = writeln!(out, "{}", line(row));
    }

    let mut comparisons = Vec::new();
    for improved in [Strategy::Lms, Strategy::Nlms, Strategy::Gs] {
        if let Ok(rows) = compare(reports, Strategy::Dm, improved) {
            comparisons.extend(rows);
        }
    }
    if !comparisons.is_empty() {
        out.push('\n');
        let _ = writeln!(
            out,
            "relative reduction of mean Err vs dm, (Err_dm - Err_x) / Err_dm * 100, averaged over targets:"
        );
        for c in comparisons {
            let _ = writeln!(
                out,
                "  {} {} {}: {:.2}% lower ({:.3} vs {:.3})",
                c.learner, c.metric, c.improved, c.relative_reduction_percent, c.improved_err, c.baseline_err
            );
        }
    }
    out
}

/// Plot-data text per (learner, metric): one `<target> <strategy> <err> <dispersion>` row per cell.
pub fn plot_data(reports: &[ErrReport]) -> BTreeMap<(LearnerKind, Metric), String> {
    let mut out: BTreeMap<(LearnerKind, Metric), String> = BTreeMap::new();
    for r in reports {
        let text = out.entry((r.learner, r.metric)).or_insert_with(|| {
            format!(
                "# learner {} metric {}\n# columns: target strategy err_percent err_dispersion\n# intended y-scale: logarithmic\n",
                r.learner, r.metric
            )
        });
        let _ = writeln!(
            text,
            "{} {} {} {}",
            r.target_env, r.strategy, r.err_percent, r.err_dispersion
        );
    }
    out
}

pub fn plot_file_name(learner: LearnerKind, metric: Metric) -> String {
    format!("plot_{learner}_{metric}.dat")
}

/// Writes the CSV, table and plot-data files into `dir`, which must exist.
pub fn emit_report(reports: &[ErrReport], dir: &Path) -> Result<ReportFiles> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let write = |name: &str, bytes: &[u8]| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let mut buf = Vec::new();
    write_report_csv(reports, &mut buf)?;
    let csv = write(CSV_FILE, &buf)?;
    let table = write(TABLE_FILE, render_table(reports).as_bytes())?;
    let plots = plot_data(reports)
        .into_iter()
        .map(|((l, m), text)| write(&plot_file_name(l, m), text.as_bytes()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportFiles { csv, table, plots })
}
