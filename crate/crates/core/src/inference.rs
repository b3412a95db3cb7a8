//! Confidence intervals and efficiency diagnostics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sampling::EstimationReport;
use crate::special::{inv_norm_cdf, norm_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    EmpiricalBernstein,
    Clt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiSpec {
    pub alpha: f64,
    pub method: CiMethod,
    /// Upper bound on a single output; used by the Bernstein interval.
    pub bound_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl CiSpec {
    pub fn new(alpha: f64, method: CiMethod, bound_m: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if method == CiMethod::EmpiricalBernstein && !(bound_m > 0.0) {
            return Err(Error::invalid("Bernstein interval needs a positive output bound"));
        }
        Ok(CiSpec { alpha, method, bound_m })
    }

    pub fn halfwidth(&self, v_n: f64, n: u64) -> Result<f64> {
        match self.method {
            CiMethod::EmpiricalBernstein => eb_halfwidth(v_n, n, self.alpha, self.bound_m),
            CiMethod::Clt => clt_halfwidth(v_n, n, self.alpha),
        }
    }

    pub fn interval(&self, p_hat: f64, v_n: f64, n: u64) -> Result<Interval> {
        let h = self.halfwidth(v_n, n)?;
        Ok(Interval { lo: p_hat - h, hi: p_hat + h })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfDomain { value: alpha, reason: "alpha must lie in (0, 1)" });
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2"));
    }
    Ok(())
}

/// `sqrt(2 v log(4/alpha) / n) + 7 log(4/alpha) M / (3 (n - 1))`.
pub fn eb_halfwidth(v_n: f64, n: u64, alpha: f64, bound_m: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_n(n)?;
    let l = libm::log(4.0 / alpha);
    let nf = n as f64;
    Ok(libm::sqrt(2.0 * v_n.max(0.0) * l / nf) + 7.0 * l * bound_m / (3.0 * (nf - 1.0)))
}

/// `z_{1 - alpha/2}`.
pub fn z_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(inv_norm_cdf(1.0 - 0.5 * alpha))
}

/// `z_{1 - alpha/2} sqrt(v / n)`.
pub fn clt_halfwidth(v_n: f64, n: u64, alpha: f64) -> Result<f64> {
    check_n(n)?;
    Ok(z_quantile(alpha)? * libm::sqrt(v_n.max(0.0) / n as f64))
}

/// `sqrt(v_n) / p_hat`; `None` when `p_hat` is zero.
pub fn relative_error(report: &EstimationReport) -> Option<f64> {
    (report.p_hat > 0.0).then(|| libm::sqrt(report.v_n) / report.p_hat)
}

/// `log E(Z^2) / log p`.
pub fn asym_eff_ratio(second_moment: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(second_moment > 0.0) || !second_moment.is_finite() {
        return Err(Error::invalid("need 0 < p < 1 and a positive finite second moment"));
    }
    Ok(libm::log(second_moment) / libm::log(p))
}

/// `E~(Z^2)` for single-tilt IS with sampler `N(gamma, 1)` on
/// `{x >= gamma} U {x <= -k_tail gamma}` under `N(0, 1)`:
/// `exp(gamma^2) (Q(2 gamma) + Q((k_tail - 1) gamma))`.
pub fn second_moment_exact_two_tail(gamma: f64, k_tail: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(k_tail > 1.0) {
        return Err(Error::invalid("need gamma > 0 and k_tail > 1"));
    }
    Ok(libm::exp(gamma * gamma) * (norm_sf(2.0 * gamma) + norm_sf((k_tail - 1.0) * gamma)))
}

/// The right-tail part of [`second_moment_exact_two_tail`]: `exp(gamma^2) Q(2 gamma)`.
pub fn second_moment_right_tail(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("need gamma > 0"));
    }
    Ok(libm::exp(gamma * gamma) * norm_sf(2.0 * gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyEstimate {
    pub epsilon: f64,
    pub delta_hat: f64,
    pub replications: usize,
    pub true_p: f64,
}

fn min_replications(epsilon: f64) -> usize {
    libm::ceil(1.0 / epsilon - 1e-9) as usize
}

/// Smallest `delta` with at most `epsilon` of the replications having
/// `|p_hat - p| > delta p`.
pub fn delta_empirical(p_hats: &[f64], true_p: f64, epsilon: f64) -> Result<DiscrepancyEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfDomain { value: epsilon, reason: "epsilon must lie in (0, 1)" });
    }
    if !(true_p > 0.0) {
        return Err(Error::invalid("true probability must be positive"));
    }
    let required = min_replications(epsilon);
    if p_hats.len() < required {
        return Err(Error::TooFewReplications { required, got: p_hats.len() });
    }
    let mut dev: Vec<f64> = p_hats.iter().map(|p| libm::fabs(p - true_p) / true_p).collect();
    dev.sort_by(f64::total_cmp);
    let n = dev.len();
    let allowed = libm::floor(epsilon * n as f64 + 1e-9) as usize;
    let j = n - allowed;
    Ok(DiscrepancyEstimate { epsilon, delta_hat: dev[j - 1], replications: n, true_p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBound {
    /// `sqrt(Var(Z_1) / (n p_1^2 (eps - n p~_2)))`.
    pub variance_term: f64,
    /// `p_2 / p`, which does not vanish unless the residual region does.
    pub bias_term: f64,
    pub total: f64,
}

/// Upper bound on the minimal relative discrepancy for an estimator whose
/// covered part `Z_1` has variance `var_z1`, with covered and residual
/// probabilities `p1`, `p2` and residual hit probability `p_tilde_2` under
/// the sampler.
pub fn discrepancy_bound(
    var_z1: f64,
    n: u64,
    p1: f64,
    p2: f64,
    p: f64,
    p_tilde_2: f64,
    epsilon: f64,
) -> Result<DeltaBound> {
    if !(p1 > 0.0) || !(p > 0.0) || p2 < 0.0 || p_tilde_2 < 0.0 || var_z1 < 0.0 {
        return Err(Error::invalid("need p1, p > 0 and non-negative p2, p~2, variance"));
    }
    let np2 = n as f64 * p_tilde_2;
    if !(epsilon > np2) {
        return Err(Error::VacuousBound { epsilon, n_p_tilde_2: np2 });
    }
    let variance_term = libm::sqrt(var_z1 / (n as f64 * p1 * p1 * (epsilon - np2)));
    let bias_term = p2 / p;
    Ok(DeltaBound { variance_term, bias_term, total: variance_term + bias_term })
}

/// `exp(-2 rate_1) / min_alpha^2`.
pub fn variance_upper_bound(min_alpha: f64, rate_1: f64) -> Result<f64> {
    if !(min_alpha > 0.0 && min_alpha <= 1.0) || !(rate_1 >= 0.0) {
        return Err(Error::invalid("need 0 < min_alpha <= 1 and rate_1 >= 0"));
    }
    Ok(libm::exp(-2.0 * rate_1) / (min_alpha * min_alpha))
}

/// Plug-in `E|Z - p|^3 / (sqrt(n) Var^{3/2})`, the normal-approximation
/// error scale. `None` when the sample variance is zero.
pub fn third_moment_ratio(outputs: &[f64]) -> Option<f64> {
    let n = outputs.len();
    if n < 2 {
        return None;
    }
    let mean = outputs.iter().sum::<f64>() / n as f64;
    let var = outputs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return None;
    }
    let m3 = outputs.iter().map(|z| { let d = libm::fabs(z - mean); d * d * d }).sum::<f64>() / n as f64;
    Some(m3 / (libm::sqrt(n as f64) * var * libm::sqrt(var)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bernstein_halfwidth() {
        let h = eb_halfwidth(0.0, 101, 0.05, 1.0).unwrap();
        assert!((h - 7.0 * libm::log(80.0) / 300.0).abs() < 1e-15);
        assert!((h - 0.1022472881).abs() < 1e-9);
        assert!((libm::sqrt(2.0 * libm::log(80.0)) - 2.96).abs() < 5e-3);
        let h1 = eb_halfwidth(0.3, 500, 0.05, 1.0).unwrap();
        let h2 = eb_halfwidth(0.3, 500, 0.05, 2.0).unwrap();
        let first = libm::sqrt(2.0 * 0.3 * libm::log(80.0) / 500.0);
        assert!(((h2 - first) - 2.0 * (h1 - first)).abs() < 1e-15);
        assert!(eb_halfwidth(1.0, 10, 1.0, 1.0).is_err());
        assert!(eb_halfwidth(1.0, 10, 0.0, 1.0).is_err());
    }

    #[test]
    fn clt_halfwidth_values() {
        assert!((z_quantile(0.05).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert_eq!(clt_halfwidth(0.0, 10, 0.05).unwrap(), 0.0);
        assert!((clt_halfwidth(50.0, 50, 0.05).unwrap() - z_quantile(0.05).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ci_ordering() {
        for (v, n) in [(0.01, 10u64), (0.5, 100), (1e-6, 10_000)] {
            let m = libm::sqrt(v);
            assert!(eb_halfwidth(v, n, 0.05, m).unwrap() >= clt_halfwidth(v, n, 0.05).unwrap());
        }
    }

    #[test]
    fn relative_error_cases() {
        let mut r = EstimationReport {
            p_hat: 0.0,
            v_n: 0.0,
            n: 10,
            seed: 0,
            hits_e1: 0,
            hits_e2: 0,
            max_log_lr_on_hit: f64::NEG_INFINITY,
            per_component_draws: vec![10],
            bound_violations: 0,
            output_bound: 1.0,
            wall_time: 0.0,
            outputs: None,
        };
        assert_eq!(relative_error(&r), None);
        r.p_hat = 0.25;
        assert_eq!(relative_error(&r), Some(0.0));
        let (p, n) = (0.01, 1e7);
        r.p_hat = p;
        r.v_n = p * (1.0 - p) * n / (n - 1.0);
        assert!((relative_error(&r).unwrap() - libm::sqrt((1.0 - p) / p)).abs() < 1e-5);
    }

    #[test]
    fn second_moment_and_efficiency() {
        assert_eq!(asym_eff_ratio(0.25, 0.5).unwrap(), 2.0);
        // With k_tail = 2 this reduces to exp(g^2)(Q(g) + Q(2g)).
        for g in [1.5, 2.0, 3.0] {
            let m = second_moment_exact_two_tail(g, 2.0).unwrap();
            let want = libm::exp(g * g) * (norm_sf(g) + norm_sf(2.0 * g));
            assert!((m - want).abs() <= 1e-15 * want);
        }
        let ratios: Vec<f64> = [2.0, 3.0, 4.0]
            .iter()
            .map(|&g| {
                let p = norm_sf(g) + norm_sf(2.0 * g);
                asym_eff_ratio(second_moment_exact_two_tail(g, 2.0).unwrap(), p).unwrap()
            })
            .collect();
        assert!(ratios.iter().all(|r| *r < 2.0));
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2]);

        let ratios: Vec<f64> = [2.0, 3.0, 4.0, 6.0]
            .iter()
            .map(|&g| {
                let p = norm_sf(g) + norm_sf(3.0 * g);
                asym_eff_ratio(second_moment_exact_two_tail(g, 3.0).unwrap(), p).unwrap()
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
        assert!(ratios[3] > 1.85 && ratios[3] < 2.0);
        assert!(second_moment_exact_two_tail(1.0, 1.0).is_err());
    }

    #[test]
    fn single_tilt_second_moment_growth() {
        // log(E Z^2 / p^2) grows like 3/2 g^2 + log g.
        let gs = [1.5, 2.0, 2.5, 3.0];
        let f = |g: f64| {
            let p = norm_sf(g) + norm_sf(2.0 * g);
            libm::log(second_moment_exact_two_tail(g, 2.0).unwrap() / (p * p))
        };
        for w in gs.windows(2) {
            let got = f(w[1]) - f(w[0]);
            let want = 1.5 * (w[1] * w[1] - w[0] * w[0]) + libm::log(w[1] / w[0]);
            assert!((got - want).abs() < 0.05 * want);
        }
    }

    #[test]
    fn empirical_discrepancy() {
        let d = delta_empirical(&[0.2; 40], 0.2, 0.05).unwrap();
        assert_eq!(d.delta_hat, 0.0);
        assert_eq!(
            delta_empirical(&[0.2; 19], 0.2, 0.05),
            Err(Error::TooFewReplications { required: 20, got: 19 })
        );
        // Deviations 0.01, 0.02, ..., 1.00: 5 of 100 may exceed delta.
        let p_hats: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64 / 100.0).collect();
        let d = delta_empirical(&p_hats, 1.0, 0.05).unwrap();
        assert!((d.delta_hat - 0.95).abs() < 1e-12);
        let d1 = delta_empirical(&p_hats, 1.0, 0.01).unwrap().delta_hat;
        let d10 = delta_empirical(&p_hats, 1.0, 0.1).unwrap().delta_hat;
        assert!(d1 >= d.delta_hat && d.delta_hat >= d10);
    }

    #[test]
    fn delta_bound_cases() {
        let b = discrepancy_bound(4.0, 100, 0.5, 0.0, 0.5, 0.0, 0.04).unwrap();
        assert!((b.total - libm::sqrt(4.0 / (100.0 * 0.25 * 0.04))).abs() < 1e-15);
        assert_eq!(b.bias_term, 0.0);

        let (p1, p2) = (norm_sf(4.0), norm_sf(4.04));
        let pt2 = norm_sf(8.04);
        let var = second_moment_right_tail(4.0).unwrap() - p1 * p1;
        let b = discrepancy_bound(var, 1000, p1, p2, p1 + p2, pt2, 0.05).unwrap();
        assert!((b.bias_term - 0.457).abs() < 2e-3);
        assert!(matches!(discrepancy_bound(var, 1000, p1, p2, p1 + p2, 1e-4, 0.05), Err(Error::VacuousBound { .. })));
    }

    #[test]
    fn variance_bound_values() {
        assert_eq!(variance_upper_bound(1.0, 0.0).unwrap(), 1.0);
        assert!((variance_upper_bound(0.2, 4.0).unwrap() - 25.0 * libm::exp(-8.0)).abs() < 1e-15);
        assert!(variance_upper_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn third_moment() {
        assert_eq!(third_moment_ratio(&[1.0, 1.0, 1.0]), None);
        let r = third_moment_ratio(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        // mean 1/2, E|Z - 1/2|^3 = 1/8, var = 1/3.
        let want = 0.125 / (2.0 * libm::pow(1.0 / 3.0, 1.5));
        assert!((r - want).abs() < 1e-15);
    }
}
