//! Numeric-subset ARFF reader for Mulan-style multi-label files.
//!
//! Supports `numeric`/`real`/`integer` attributes and `{0,1}` nominal
//! attributes, with dense or sparse (`{idx val, ...}`) data rows. The last
//! `label_count` attributes are the labels.

use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum AttrKind {
    Numeric,
    Binary,
}

pub fn parse_arff_multilabel(path: impl AsRef<Path>, label_count: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arff_str(&text, label_count)
}

/// Splits off a possibly quoted leading token.
fn take_token(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    let quote = s.chars().next()?;
    if quote == '\'' || quote == '"' {
        let end = s[1..].find(quote)? + 1;
        Some((&s[1..end], &s[end + 1..]))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((&s[..end], &s[end..]))
    }
}

fn parse_attr_kind(spec: &str, line: usize) -> Result<AttrKind> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        let inner = spec
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| Error::parse(line, "unterminated nominal value list"))?;
        let values: Vec<&str> = inner
            .split(',')
            .map(|v| v.trim().trim_matches(|c| c == '\'' || c == '"'))
            .collect();
        if values.iter().all(|v| *v == "0" || *v == "1") {
            Ok(AttrKind::Binary)
        } else {
            Err(Error::parse(
                line,
                format!("unsupported nominal attribute {{{inner}}}; only {{0,1}} is accepted"),
            ))
        }
    } else {
        match spec.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => Ok(AttrKind::Numeric),
            other => Err(Error::parse(
                line,
                format!("unsupported attribute type `{other}`"),
            )),
        }
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    let tok = tok.trim().trim_matches(|c| c == '\'' || c == '"');
    if tok == "?" {
        return Err(Error::parse(line, "missing values are not supported"));
    }
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid numeric value `{tok}`")))
}

pub fn parse_arff_str(text: &str, label_count: usize) -> Result<Dataset> {
    if label_count == 0 {
        return Err(Error::InvalidArgument("label count must be positive".into()));
    }
    let mut relation = String::from("arff");
    let mut attrs: Vec<AttrKind> = Vec::new();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut in_data = false;
    let mut header_end = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                if let Some((name, _)) = take_token(&line["@relation".len()..]) {
                    relation = name.to_string();
                }
            } else if lower.starts_with("@attribute") {
                let (_, rest) = take_token(&line["@attribute".len()..])
                    .ok_or_else(|| Error::parse(line_no, "attribute without a name"))?;
                attrs.push(parse_attr_kind(rest, line_no)?);
            } else if lower.starts_with("@data") {
                in_data = true;
                header_end = line_no;
                if label_count >= attrs.len() {
                    return Err(Error::InvalidArgument(format!(
                        "label count {label_count} must be smaller than the attribute count {}",
                        attrs.len()
                    )));
                }
            } else {
                return Err(Error::parse(line_no, format!("unexpected header line `{line}`")));
            }
            continue;
        }

        let mut values = vec![0.0; attrs.len()];
        if let Some(inner) = line.strip_prefix('{') {
            let inner = inner
                .strip_suffix('}')
                .ok_or_else(|| Error::parse(line_no, "unterminated sparse row"))?;
            for pair in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (idx, val) = pair
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| Error::parse(line_no, format!("bad sparse entry `{pair}`")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad attribute index `{idx}`")))?;
                if idx >= attrs.len() {
                    return Err(Error::parse(
                        line_no,
                        format!("attribute index {idx} out of range"),
                    ));
                }
                values[idx] = parse_value(val, line_no)?;
            }
        } else {
            let toks: Vec<&str> = line.split(',').collect();
            if toks.len() != attrs.len() {
                return Err(Error::parse(
                    line_no,
                    format!("expected {} values, got {}", attrs.len(), toks.len()),
                ));
            }
            for (v, tok) in values.iter_mut().zip(toks) {
                *v = parse_value(tok, line_no)?;
            }
        }
        rows.push((line_no, values));
    }
    if !in_data {
        return Err(Error::parse(text.lines().count().max(1), "missing @data section"));
    }
    if rows.is_empty() {
        return Err(Error::parse(header_end, "no data rows"));
    }

    let d = attrs.len() - label_count;
    let n = rows.len();
    let mut features = Array2::zeros((n, d));
    let mut labels = Array2::zeros((n, label_count));
    for (r, (line_no, values)) in rows.iter().enumerate() {
        for (c, &v) in values.iter().enumerate() {
            if c < d {
                features[[r, c]] = v;
            } else {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::parse(
                        *line_no,
                        format!("label attribute {c} has value {v}, expected 0 or 1"),
                    ));
                }
                labels[[r, c - d]] = v;
            }
        }
    }
    for (c, kind) in attrs.iter().enumerate().take(d) {
        if *kind == AttrKind::Binary && features.column(c).iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binary attribute {c} holds a non-binary value"
            )));
        }
    }
    Dataset::new(relation, features, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const HEADER: &str = "@relation 'toy data'\n@attribute a numeric\n@attribute b REAL\n@attribute y {0,1}\n@data\n";

    #[test]
    fn dense_row() {
        let ds = parse_arff_str(&format!("{HEADER}0.5,1.0,1\n"), 1).unwrap();
        assert_eq!(ds.name(), "toy data");
        assert_eq!(ds.features(), array![[0.5, 1.0]]);
        assert_eq!(ds.labels().unwrap(), array![[1.0]]);
    }

    #[test]
    fn sparse_row() {
        let ds = parse_arff_str(&format!("{HEADER}{{0 2.0, 2 1}}\n"), 1).unwrap();
        assert_eq!(ds.features(), array![[2.0, 0.0]]);
        assert_eq!(ds.labels().unwrap(), array![[1.0]]);
    }

    #[test]
    fn label_count_too_large() {
        assert!(parse_arff_str(&format!("{HEADER}0.5,1.0,1\n"), 5).is_err());
        assert!(parse_arff_str(&format!("{HEADER}0.5,1.0,1\n"), 3).is_err());
    }

    #[test]
    fn rejects_unsupported_types() {
        let text = "@relation r\n@attribute s string\n@attribute y {0,1}\n@data\nx,1\n";
        assert!(matches!(parse_arff_str(text, 1), Err(Error::Parse { line: 2, .. })));
        let text = "@relation r\n@attribute d date\n@attribute y {0,1}\n@data\n";
        assert!(parse_arff_str(text, 1).is_err());
        let text = "@relation r\n@attribute c {a,b}\n@attribute y {0,1}\n@data\n";
        assert!(parse_arff_str(text, 1).is_err());
    }

    #[test]
    fn rejects_non_binary_label_value() {
        let err = parse_arff_str(&format!("{HEADER}0.5,1.0,2\n"), 1).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }));
    }

    #[test]
    fn two_labels_with_comments() {
        let text = "% c\n@relation r\n@attribute x numeric\n@attribute l1 {0,1}\n@attribute l2 {0,1}\n@data\n% row\n3,0,1\n{1 1}\n";
        let ds = parse_arff_str(text, 2).unwrap();
        assert_eq!(ds.features(), array![[3.0], [0.0]]);
        assert_eq!(ds.labels().unwrap(), array![[0.0, 1.0], [1.0, 0.0]]);
    }
}
