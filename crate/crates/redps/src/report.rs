//! CSV rows and the human-readable summary.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::CliResult;
use crate::experiments::CellResult;

pub const CSV_COLUMNS: [&str; 20] = [
    "experiment",
    "params",
    "k_used",
    "r_found",
    "stop_reason",
    "n",
    "p_hat",
    "v_n",
    "rel_err",
    "eb_lo",
    "eb_hi",
    "clt_lo",
    "clt_hi",
    "hits_e2",
    "oracle_p",
    "seed_count",
    "wall_time",
    "seeds",
    "config_hash",
    "extras",
];

/// Index of the `wall_time` column, the only one that varies between reruns.
pub const WALL_TIME_COLUMN: usize = 16;

pub fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

pub fn csv_record(c: &CellResult) -> Vec<String> {
    let r = &c.report;
    vec![
        c.experiment().name().to_string(),
        c.params.clone(),
        c.k_used.to_string(),
        c.r_found.map(|v| v.to_string()).unwrap_or_default(),
        c.stop_reason.clone(),
        c.n.to_string(),
        sci(r.p_hat),
        sci(r.v_n),
        opt(c.rel_err),
        sci(c.eb.lo),
        sci(c.eb.hi),
        sci(c.clt.lo),
        sci(c.clt.hi),
        r.hits_e2.to_string(),
        opt(c.oracle.map(|o| o.p_exact)),
        c.seeds().len().to_string(),
        sci(r.wall_time),
        c.seeds().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
        c.config_hash.clone(),
        c.extras().iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
    ]
}

pub fn write_csv<W: Write>(out: W, cells: &[CellResult]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for c in cells {
        w.write_record(csv_record(c))?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(cells: &[CellResult]) -> CliResult<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, cells)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Attribute-value summary, one block per cell.
pub fn summary(cells: &[CellResult]) -> String {
    let mut s = String::new();
    for (i, c) in cells.iter().enumerate() {
        let r = &c.report;
        let _ = writeln!(s, "[cell {}/{}] {} {}={} estimator={}", i + 1, cells.len(), c.experiment(), c.sweep.0, c.sweep.1, c.estimator.label());
        let _ = writeln!(s, "  config_hash  = {}", c.config_hash);
        let _ = writeln!(s, "  params       = {}", c.params);
        if let Some(rf) = c.r_found {
            let _ = writeln!(s, "  points       = {} used of {} found (stop: {})", c.k_used, rf, c.stop_reason);
        }
        let _ = writeln!(s, "  n            = {} per run, {} total", c.n, r.n);
        let _ = writeln!(s, "  p_hat        = {}  (se {})", sci(r.p_hat), sci(r.std_error()));
        if let Some(o) = &c.oracle {
            let _ = writeln!(s, "  oracle_p     = {}  ({}, abs err {})", sci(o.p_exact), o.method, sci(o.est_abs_error));
        }
        let _ = writeln!(s, "  eb_ci        = [{}, {}]", sci(c.eb.lo), sci(c.eb.hi));
        let _ = writeln!(s, "  clt_ci       = [{}, {}]", sci(c.clt.lo), sci(c.clt.hi));
        let _ = writeln!(s, "  rel_err      = {}", opt(c.rel_err));
        let _ = writeln!(s, "  hits         = {} covered, {} residual, {} bound violations", r.hits_e1, r.hits_e2, r.bound_violations);
        for (k, v) in c.extras().into_iter().skip(7).filter(|(k, _)| !k.starts_with("oracle_")) {
            let _ = writeln!(s, "  {k:<12} = {v}");
        }
        let _ = writeln!(s, "  wall_time    = {:.3}s", r.wall_time);
    }
    s
}
