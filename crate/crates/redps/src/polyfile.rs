//! Polyhedral set files. A `[piece]` header starts each polyhedron; every
//! following line `w1 w2 ... wd >= b` adds one inequality. `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::Path;

use redps_core::{PolyhedralUnion, Polyhedron};

use crate::error::{CliError, CliResult};

pub fn parse_polyfile(text: &str, origin: &str) -> CliResult<PolyhedralUnion> {
    let mut pieces: Vec<Vec<(Vec<f64>, f64)>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let at = || format!("{origin}:{}", i + 1);
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if line == "[piece]" {
            pieces.push(Vec::new());
            continue;
        }
        let current = pieces.last_mut().ok_or_else(|| CliError::config(at(), "inequality before the first [piece]"))?;
        let (lhs, rhs) = line.split_once(">=").ok_or_else(|| CliError::config(at(), "expected `w1 ... wd >= b`"))?;
        let w = lhs
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::config(at(), "coefficients must be decimal numbers"))?;
        let b = rhs.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::config(at(), "right-hand side must be a decimal number"))?;
        if w.is_empty() {
            return Err(CliError::config(at(), "no coefficients"));
        }
        match dim {
            None => dim = Some(w.len()),
            Some(d) if d != w.len() => return Err(CliError::config(at(), format!("expected {d} coefficients, found {}", w.len()))),
            _ => {}
        }
        current.push((w, b));
    }
    let dim = dim.ok_or_else(|| CliError::config(origin, "no inequalities"))?;
    if pieces.iter().any(Vec::is_empty) {
        return Err(CliError::config(origin, "empty [piece]"));
    }
    let polys = pieces
        .into_iter()
        .map(|rows| Polyhedron::new(dim, rows))
        .collect::<redps_core::Result<Vec<_>>>()
        .map_err(|e| CliError::config(origin, e.to_string()))?;
    PolyhedralUnion::new(polys, 1.0).map_err(|e| CliError::config(origin, e.to_string()))
}

pub fn read_polyfile(path: &Path) -> CliResult<PolyhedralUnion> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
    parse_polyfile(&text, &path.display().to_string())
}

/// Inverse of [`parse_polyfile`] for the stored (normalised) rows.
pub fn format_polyfile(set: &PolyhedralUnion) -> String {
    let mut out = String::new();
    for piece in set.pieces() {
        out.push_str("[piece]\n");
        for row in piece.rows() {
            let w: Vec<String> = row.w.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{} >= {}", w.join(" "), row.b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pieces() {
        let text = "# wedge\n[piece]\n1 0 >= 2\n0 1 >= 2  # second\n\n[piece]\n-1 0 >= 3\n";
        let set = parse_polyfile(text, "t").unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.pieces().len(), 2);
        assert!(set.contains(&[2.5, 2.5]).unwrap());
        assert!(set.contains(&[-3.5, 0.0]).unwrap());
        assert!(!set.contains(&[2.5, 0.0]).unwrap());
        let again = parse_polyfile(&format_polyfile(&set), "t").unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = [("1 0 >= 2\n", "t:1"), ("[piece]\n1 0 >= 2\n1 >= 3\n", "t:3"), ("[piece]\n1 x >= 2\n", "t:2"), ("[piece]\n1 0 <= 2\n", "t:2")];
        for (text, at) in bad {
            match parse_polyfile(text, "t") {
                Err(CliError::Config { path, .. }) => assert_eq!(path, at),
                other => panic!("{other:?}"),
            }
        }
        assert!(parse_polyfile("[piece]\n", "t").is_err());
        assert!(parse_polyfile("[piece]\n1 >= 1\n-1 >= 0\n", "t").is_err());
    }
}
