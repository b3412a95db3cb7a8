//! Efficiency profile across a rarity grid: discrepancy, relative error and
//! the asymptotic-efficiency ratio per estimator.

use std::fmt::Write as _;

use crate::error::{CliError, CliResult};
use crate::experiments::CellResult;

/// Tolerance on the extrapolated efficiency ratio around 2.
pub const AE_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub gamma: f64,
    pub n: u64,
    pub delta_hat: f64,
    pub rel_err: Option<f64>,
    pub ae_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorProfile {
    pub estimator: String,
    pub points: Vec<ProfilePoint>,
    /// `r + b / gamma^2` fitted through the last two ratios, evaluated at infinity.
    pub ae_limit: Option<f64>,
    pub ae_consistent: bool,
    pub pe_consistent: bool,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn report_efficiency_profile(cells: &[CellResult]) -> CliResult<Vec<EstimatorProfile>> {
    let mut labels: Vec<String> = Vec::new();
    for c in cells {
        let l = c.estimator.label();
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let mut out = Vec::new();
    for label in labels {
        let mut points: Vec<ProfilePoint> = cells
            .iter()
            .filter(|c| c.estimator.label() == label && c.sweep.0 == "gamma")
            .filter_map(|c| {
                let d = c.replication.as_ref()?.delta.as_ref()?;
                Some(ProfilePoint {
                    gamma: c.sweep.1,
                    n: c.n,
                    delta_hat: d.delta_hat,
                    rel_err: c.rel_err,
                    ae_ratio: c.ae_ratio_exact.or(c.ae_ratio),
                })
            })
            .collect();
        points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        points.dedup_by(|a, b| a.gamma == b.gamma);
        if points.len() < 3 {
            return Err(CliError::config(
                "set.gamma",
                format!("profile of {label} needs at least 3 gamma values with replications and oracle values, found {}", points.len()),
            ));
        }
        let ae_limit = match &points[points.len() - 2..] {
            [p, q] => match (p.ae_ratio, q.ae_ratio) {
                (Some(r1), Some(r2)) => {
                    let (g1, g2) = (p.gamma * p.gamma, q.gamma * q.gamma);
                    Some((g2 * r2 - g1 * r1) / (g2 - g1))
                }
                _ => None,
            },
            _ => None,
        };
        let ae_consistent = ae_limit.is_some_and(|r| (r - 2.0).abs() <= AE_TOLERANCE);
        let gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
        let deltas: Vec<f64> = points.iter().map(|p| p.delta_hat).collect();
        let (first, last) = (deltas[0], deltas[deltas.len() - 1]);
        let pe_consistent = slope(&gammas, &deltas) < 0.0 && last < first && last < 1.0;
        out.push(EstimatorProfile { estimator: label, points, ae_limit, ae_consistent, pe_consistent });
    }
    Ok(out)
}

pub fn format_profile(profiles: &[EstimatorProfile]) -> String {
    let mut s = String::new();
    for p in profiles {
        let _ = writeln!(s, "[profile] estimator={}", p.estimator);
        let _ = writeln!(s, "  {:>8} {:>10} {:>12} {:>12} {:>12}", "gamma", "n", "delta_hat", "rel_err", "ae_ratio");
        for q in &p.points {
            let f = |v: Option<f64>| v.map(|x| format!("{x:.5e}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "  {:>8} {:>10} {:>12.5e} {:>12} {:>12}", q.gamma, q.n, q.delta_hat, f(q.rel_err), f(q.ae_ratio));
        }
        let lim = p.ae_limit.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "  ae_limit      = {lim}");
        let _ = writeln!(s, "  AE-consistent = {}", p.ae_consistent);
        let _ = writeln!(s, "  PE-consistent = {}", p.pe_consistent);
    }
    s
}

pub fn profile_csv_rows(profiles: &[EstimatorProfile]) -> Vec<Vec<String>> {
    let mut rows = vec![["estimator", "gamma", "n", "delta_hat", "rel_err", "ae_ratio", "ae_consistent", "pe_consistent"].map(String::from).to_vec()];
    for p in profiles {
        for q in &p.points {
            let f = |v: Option<f64>| v.map(|x| format!("{x:.5e}")).unwrap_or_default();
            rows.push(vec![
                p.estimator.clone(),
                q.gamma.to_string(),
                q.n.to_string(),
                format!("{:.5e}", q.delta_hat),
                f(q.rel_err),
                f(q.ae_ratio),
                p.ae_consistent.to_string(),
                p.pe_consistent.to_string(),
            ]);
        }
    }
    rows
}
