//! Parsers for the plain-text dataset files.
//!
//! All parsers take the file contents plus a display name for diagnostics.
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_string(), line, msg: msg.into() }
}

fn parse_index(tok: &str, file: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| parse_err(file, line, format!("expected a non-negative integer, found {tok:?}")))
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

/// `u v` pairs, whitespace or comma separated.
pub fn parse_edges(text: &str, file: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(no, line)| {
            let toks: Vec<&str> = fields(line).collect();
            if toks.len() != 2 {
                return Err(parse_err(file, no, format!("expected 2 fields, found {}", toks.len())));
            }
            Ok((parse_index(toks[0], file, no)?, parse_index(toks[1], file, no)?))
        })
        .collect()
}

/// Comma-separated rows of finite reals, all of equal width.
pub fn parse_features(text: &str, file: &str) -> Result<Array2<f64>> {
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (no, line) in content_lines(text) {
        let before = data.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let x: f64 =
                tok.parse().map_err(|_| parse_err(file, no, format!("expected a real number, found {tok:?}")))?;
            if !x.is_finite() {
                return Err(parse_err(file, no, format!("non-finite value {tok:?}")));
            }
            data.push(x);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(parse_err(file, no, format!("expected {expected} columns, found {w}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Array2::from_shape_vec((rows, width), data).map_err(|e| Error::Internal(e.to_string()))
}

/// One class index per line.
pub fn parse_labels(text: &str, file: &str) -> Result<Vec<usize>> {
    parse_index_list(text, file)
}

/// One node index per line.
pub fn parse_index_list(text: &str, file: &str) -> Result<Vec<usize>> {
    content_lines(text).map(|(no, line)| parse_index(line, file, no)).collect()
}

/// `key=value` lines in file order, with their line numbers. Keys and
/// values are trimmed; a repeated key is an error.
pub fn parse_key_values(text: &str, file: &str) -> Result<Vec<(String, String, usize)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        let (k, v) =
            line.split_once('=').ok_or_else(|| parse_err(file, no, format!("expected key=value, found {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(parse_err(file, no, "empty key"));
        }
        if let Some(prev) = seen.insert(k.to_string(), no) {
            return Err(parse_err(file, no, format!("key {k:?} already set on line {prev}")));
        }
        out.push((k.to_string(), v.to_string(), no));
    }
    Ok(out)
}

/// Contents of `meta.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Any other keys, e.g. `name` or construction parameters.
    pub extra: BTreeMap<String, String>,
}

pub fn parse_meta(text: &str, file: &str) -> Result<Meta> {
    let mut extra = BTreeMap::new();
    let (mut n, mut c, mut f) = (None, None, None);
    for (k, v, no) in parse_key_values(text, file)? {
        let slot = match k.as_str() {
            "num_nodes" => &mut n,
            "num_classes" => &mut c,
            "feature_dim" => &mut f,
            _ => {
                extra.insert(k, v);
                continue;
            }
        };
        *slot = Some(parse_index(&v, file, no)?);
    }
    let missing = |key: &str| parse_err(file, 0, format!("missing key {key}"));
    Ok(Meta {
        num_nodes: n.ok_or_else(|| missing("num_nodes"))?,
        num_classes: c.ok_or_else(|| missing("num_classes"))?,
        feature_dim: f.ok_or_else(|| missing("feature_dim"))?,
        extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_with_comments_and_commas() {
        let e = parse_edges("# header\n0 1\n\n1,2\n  2\t0 \n", "edges.txt").unwrap();
        assert_eq!(e, vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn edge_errors_name_the_line() {
        let err = parse_edges("0 1\n1 x\n", "edges.txt").unwrap_err();
        assert_eq!(err.to_string(), "edges.txt:2: expected a non-negative integer, found \"x\"");
        assert!(parse_edges("0 1 2\n", "e").is_err());
        assert!(parse_edges("-1 2\n", "e").is_err());
    }

    #[test]
    fn features_ragged_and_nan() {
        let x = parse_features("1,2\n3.5, -4e-1\n", "f").unwrap();
        assert_eq!(x, ndarray::array![[1.0, 2.0], [3.5, -0.4]]);
        assert!(parse_features("1,2\n3\n", "f").is_err());
        assert!(parse_features("1,NaN\n", "f").is_err());
        assert!(parse_features("1,,2\n", "f").is_err());
        assert_eq!(parse_features("", "f").unwrap().dim(), (0, 0));
    }

    #[test]
    fn meta_keys() {
        let m = parse_meta("num_nodes=3\nnum_classes = 2\nfeature_dim=1\nname=path\n", "meta.txt").unwrap();
        assert_eq!((m.num_nodes, m.num_classes, m.feature_dim), (3, 2, 1));
        assert_eq!(m.extra["name"], "path");
        assert!(parse_meta("num_nodes=3\nnum_classes=2\n", "m").is_err());
        assert!(parse_meta("num_nodes=3\nnum_nodes=4\n", "m").is_err());
        assert!(parse_meta("num_nodes\n", "m").is_err());
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("3\n1\n", "i").unwrap(), vec![3, 1]);
        assert!(parse_index_list("1 2\n", "i").is_err());
    }
}
