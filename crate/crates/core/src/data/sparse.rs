//! Line-based sparse text format.
//!
//! ```text
//! # comment
//! N D L
//! idx:val idx:val ... | label label ...
//! ```
//!
//! The header gives the row, feature and label counts. Each of the `N` rows
//! lists its nonzero features as `idx:val` pairs with `idx` in `[0, D)`, then
//! a mandatory `|`, then the indices of its positive labels in `[0, L)`.
//! Blank lines and lines starting with `#` are ignored. `L = 0` declares a
//! feature-only file; its rows must have an empty label section.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

pub fn load_sparse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    parse_sparse(&text, name)
}

pub fn save_sparse_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_sparse(dataset)).map_err(|e| Error::io(path, e))
}

fn parse_count(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}` in header")))
}

pub fn parse_sparse(text: &str, name: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(Error::parse(
            header_line,
            format!("header must be `N D L`, got `{header}`"),
        ));
    }
    let n = parse_count(tokens[0], header_line, "row count")?;
    let d = parse_count(tokens[1], header_line, "feature count")?;
    let l = parse_count(tokens[2], header_line, "label count")?;
    if n == 0 || d == 0 {
        return Err(Error::parse(header_line, "row and feature counts must be positive"));
    }

    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Array2::<f64>::zeros((n, l));
    let mut row = 0;
    for (line_no, line) in lines {
        if row == n {
            return Err(Error::parse(line_no, format!("more than {n} data rows")));
        }
        let (feat_part, label_part) = line
            .split_once('|')
            .ok_or_else(|| Error::parse(line_no, "missing `|` separator"))?;
        let mut seen = vec![false; d];
        for tok in feat_part.split_whitespace() {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid feature index `{idx}`")))?;
            if idx >= d {
                return Err(Error::parse(
                    line_no,
                    format!("feature index {idx} out of range [0, {d})"),
                ));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::parse(line_no, format!("duplicate feature index {idx}")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite feature value `{val}`")));
            }
            features[[row, idx]] = val;
        }
        for tok in label_part.split_whitespace() {
            let idx: usize = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid label token `{tok}`")))?;
            if idx >= l {
                return Err(Error::parse(
                    line_no,
                    format!("label index {idx} out of range [0, {l})"),
                ));
            }
            labels[[row, idx]] = 1.0;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::parse(
            header_line,
            format!("header declares {n} rows but found {row}"),
        ));
    }
    Dataset::new(name, features, (l > 0).then_some(labels))
}

pub fn write_sparse(dataset: &Dataset) -> String {
    let features = dataset.features();
    let labels = dataset.labels();
    let mut out = String::new();
    writeln!(
        out,
        "{} {} {}",
        dataset.n_instances(),
        dataset.n_features(),
        dataset.n_labels().unwrap_or(0)
    )
    .unwrap();
    for (i, row) in features.outer_iter().enumerate() {
        let mut first = true;
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                if !first {
                    out.push(' ');
                }
                write!(out, "{j}:{v}").unwrap();
                first = false;
            }
        }
        out.push_str(if first { "|" } else { " |" });
        if let Some(labels) = &labels {
            for (k, &y) in labels.row(i).iter().enumerate() {
                if y == 1.0 {
                    write!(out, " {k}").unwrap();
                }
            }
        }
        out.push('\n');
    }
    out
}
