use std::fmt::Write as _;
use std::str::FromStr;

use super::run::ResultRow;
use crate::engine::MethodKind;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "method",
    "dataset",
    "train_fraction",
    "seed",
    "macro_auc_pr",
    "seconds",
    "iterations",
    "degenerate_labels",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn emit_report(rows: &[ResultRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Table => Ok(emit_table(rows)),
    }
}

/// Header plus one line per row. Floats use the shortest representation that
/// parses back to the same value.
pub fn emit_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.dataset.clone(),
            r.train_fraction.to_string(),
            r.seed.to_string(),
            r.macro_auc_pr.to_string(),
            r.seconds.to_string(),
            r.iterations.to_string(),
            r.degenerate_labels.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::parse(1, format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or("");
        fn num<T: FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::parse(line, format!("bad {name} `{s}`")))
        }
        rows.push(ResultRow {
            method: field(0).parse().map_err(|e: Error| Error::parse(line, e.to_string()))?,
            dataset: field(1).to_string(),
            train_fraction: num(line, "train_fraction", field(2))?,
            seed: num(line, "seed", field(3))?,
            macro_auc_pr: num(line, "macro_auc_pr", field(4))?,
            seconds: num(line, "seconds", field(5))?,
            iterations: num(line, "iterations", field(6))?,
            degenerate_labels: num(line, "degenerate_labels", field(7))?,
        });
    }
    Ok(rows)
}

fn unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Methods x datasets grid of mean macro PR-AUC (x100, two decimals), one
/// block per train fraction. Failed cells are left out of the mean and
/// counted.
pub fn emit_table(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str("# AUC: average precision (step-wise area under the precision-recall curve, no\n");
    out.push_str("# interpolation), averaged over label columns with both classes present in the\n");
    out.push_str("# test part; shown x100, mean over seeds.\n");
    let datasets = unique(rows.iter().map(|r| r.dataset.clone()));
    let mut fractions = unique(rows.iter().map(|r| r.train_fraction));
    fractions.sort_by(f64::total_cmp);
    let methods: Vec<MethodKind> = MethodKind::ALL
        .iter()
        .copied()
        .filter(|m| rows.iter().any(|r| r.method == *m))
        .collect();
    let method_width = methods.iter().map(|m| m.name().len()).max().unwrap_or(6).max(6);
    let col_width = datasets.iter().map(String::len).max().unwrap_or(0).max(8);

    for fraction in fractions {
        let block: Vec<&ResultRow> = rows.iter().filter(|r| r.train_fraction == fraction).collect();
        let seeds = unique(block.iter().map(|r| r.seed)).len();
        let _ = writeln!(out, "\ntrain_fraction = {fraction} ({seeds} seed{})", if seeds == 1 { "" } else { "s" });
        let _ = write!(out, "{:<method_width$}", "method");
        for d in &datasets {
            let _ = write!(out, "  {d:>col_width$}");
        }
        out.push('\n');
        let mut failures = 0;
        for m in &methods {
            let _ = write!(out, "{:<method_width$}", m.name());
            for d in &datasets {
                let cell: Vec<&&ResultRow> = block.iter().filter(|r| r.method == *m && &r.dataset == d).collect();
                let ok: Vec<f64> = cell.iter().map(|r| r.macro_auc_pr).filter(|v| v.is_finite()).collect();
                failures += cell.len() - ok.len();
                let text = if ok.is_empty() {
                    "-".to_string()
                } else {
                    format!("{:.2}", 100.0 * ok.iter().sum::<f64>() / ok.len() as f64)
                };
                let _ = write!(out, "  {text:>col_width$}");
            }
            out.push('\n');
        }
        let degenerate: usize = block.iter().map(|r| r.degenerate_labels).max().unwrap_or(0);
        if degenerate > 0 {
            let _ = writeln!(out, "(up to {degenerate} degenerate label column(s) skipped per run)");
        }
        if failures > 0 {
            let _ = writeln!(out, "({failures} failed run(s) excluded)");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: MethodKind, seed: u64, auc: f64) -> ResultRow {
        ResultRow {
            method,
            dataset: "synthetic".into(),
            train_fraction: 0.05,
            seed,
            macro_auc_pr: auc,
            seconds: 1.25,
            iterations: 2000,
            degenerate_labels: 0,
        }
    }

    #[test]
    fn single_row_csv_has_two_lines() {
        let csv = emit_report(&[row(MethodKind::Mv, 0, 0.5)], ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(
            csv.lines().next().unwrap(),
            "method,dataset,train_fraction,seed,macro_auc_pr,seconds,iterations,degenerate_labels"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "MV,synthetic,0.05,0,0.5,1.25,2000,0");
    }

    #[test]
    fn table_scales_by_100() {
        let table = emit_report(&[row(MethodKind::RbmAl, 0, 0.5987)], ReportFormat::Table).unwrap();
        assert!(table.contains("59.87"), "{table}");
        assert!(table.contains("RBM_AL"));
    }

    #[test]
    fn table_means_and_failures() {
        let rows = [row(MethodKind::Tmv, 0, 0.5), row(MethodKind::Tmv, 1, 0.7), row(MethodKind::Tmv, 2, f64::NAN)];
        let table = emit_table(&rows);
        assert!(table.contains("60.00"), "{table}");
        assert!(table.contains("1 failed"));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(MethodKind::Cv5, 0, 0.123456789012345),
            row(MethodKind::RbmAl, 7, 1.0 / 3.0),
            ResultRow { dataset: "yeast".into(), train_fraction: 0.1 + 0.2, ..row(MethodKind::TmvAl, 2, 0.0) },
        ];
        let text = emit_csv(&rows).unwrap();
        assert_eq!(parse_csv(&text).unwrap(), rows);
        let failed = parse_csv(&emit_csv(&[row(MethodKind::Rbm, 1, f64::NAN)]).unwrap()).unwrap();
        assert!(failed[0].macro_auc_pr.is_nan());
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let text = emit_csv(&[row(MethodKind::Mv, 0, 0.5)]).unwrap().replace("MV", "XX");
        assert!(matches!(parse_csv(&text), Err(Error::Parse { line: 2, .. })));
    }
}
