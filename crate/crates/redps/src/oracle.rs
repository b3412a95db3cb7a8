//! Reference probabilities computed without simulation (plus a crude Monte
//! Carlo fallback), used to anchor the estimators.

use std::fmt;

use redps_core::event_sets::PolyhedralUnion;
use redps_core::sampling::CrudeMc;
use redps_core::special::{norm_pdf, norm_sf};
use redps_core::{Error, IncrementSum, RateModel, Result};

use crate::parallel::Runner;
use crate::quad::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    ClosedFormTail,
    GammaNormalQuadrature,
    WalkRecursion,
    DirectQuadrature,
    CrudeMcReference,
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMethod::ClosedFormTail => "closed_form_tail",
            OracleMethod::GammaNormalQuadrature => "gamma_normal_quadrature",
            OracleMethod::WalkRecursion => "walk_recursion",
            OracleMethod::DirectQuadrature => "direct_quadrature",
            OracleMethod::CrudeMcReference => "crude_mc_reference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub p_exact: f64,
    pub method: OracleMethod,
    pub est_abs_error: f64,
}

impl OracleValue {
    fn exact(p: f64, method: OracleMethod, est_abs_error: f64) -> Result<Self> {
        if !(p >= f64::MIN_POSITIVE) {
            return Err(Error::Numerical("probability underflows double precision"));
        }
        Ok(OracleValue { p_exact: p, method, est_abs_error })
    }

    pub fn rel_error(&self) -> f64 {
        self.est_abs_error / self.p_exact
    }
}

/// `Q(gamma) + Q(k_tail gamma)`; `k_tail = inf` drops the left tail.
pub fn oracle_two_tail(gamma: f64, k_tail: f64) -> Result<OracleValue> {
    if !(gamma > 0.0) || !(k_tail >= 1.0) {
        return Err(Error::InvalidArgument("two-tail oracle needs gamma > 0 and k_tail >= 1".into()));
    }
    let left = if k_tail.is_infinite() { 0.0 } else { norm_sf(k_tail * gamma) };
    let p = norm_sf(gamma) + left;
    OracleValue::exact(p, OracleMethod::ClosedFormTail, 4.0 * f64::EPSILON * p)
}

/// Integrate `f` over `[lo, lo + width]` in panels, to relative accuracy `rel`.
fn tail_integral(f: impl Fn(f64) -> f64, lo: f64, width: f64, rel: f64) -> Result<(f64, f64)> {
    let q = integrate(f, lo, lo + width, 16, 0.0, rel, 20_000)?;
    Ok((q.value, q.abs_error))
}

/// The two-tail probability by quadrature of the normal density.
pub fn two_tail_by_quadrature(gamma: f64, k_tail: f64) -> Result<OracleValue> {
    let (r, er) = tail_integral(norm_pdf, gamma, 40.0, 1e-13)?;
    let (l, el) = if k_tail.is_infinite() { (0.0, 0.0) } else { tail_integral(norm_pdf, k_tail * gamma, 40.0, 1e-13)? };
    Ok(OracleValue { p_exact: r + l, method: OracleMethod::DirectQuadrature, est_abs_error: er + el })
}

/// `E~(Z^2) = int_E exp(-gamma x + gamma^2 / 2) phi(x) dx` for single-tilt IS
/// at `gamma` on the two-tail set, by quadrature.
pub fn two_tail_second_moment_by_quadrature(gamma: f64, k_tail: f64) -> Result<OracleValue> {
    let lr = |x: f64| (-gamma * x + 0.5 * gamma * gamma).exp() * norm_pdf(x);
    let (r, er) = tail_integral(lr, gamma, 40.0 + 2.0 * gamma, 1e-13)?;
    let (l, el) = tail_integral(|y| lr(-y), k_tail * gamma, 40.0 + 2.0 * gamma, 1e-13)?;
    Ok(OracleValue { p_exact: r + l, method: OracleMethod::DirectQuadrature, est_abs_error: er + el })
}

/// `P(|S_m| >= a m)` with `S_m = N - G`, `N ~ N(m mu_a, m sigma_a^2)`,
/// `G ~ Gamma(m, rate_b)`, conditioning on `G`.
pub fn oracle_iid_sum(model: &IncrementSum, a: f64) -> Result<OracleValue> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument("level a must be positive".into()));
    }
    let m = model.m as f64;
    let r = model.rate_b;
    let sd = model.sigma_a * m.sqrt();
    let shift = model.mu_a * m;
    let level = a * m;
    let log_norm = m * r.ln() - libm::lgamma(m);
    let density = move |g: f64| {
        if g <= 0.0 {
            return 0.0;
        }
        ((m - 1.0) * g.ln() - r * g + log_norm).exp()
    };
    let g_max = m / r + 60.0 * m.sqrt() / r + 50.0 / r;
    let upper = integrate(|g| density(g) * norm_sf((level - shift + g) / sd), 0.0, g_max, 64, 0.0, 1e-9, 50_000)?;
    let lower = integrate(|g| density(g) * norm_sf((level + shift - g) / sd), 0.0, g_max, 64, 0.0, 1e-9, 50_000)?;
    let p = upper.value + lower.value;
    let err = upper.abs_error + lower.abs_error;
    if !(err <= 1e-6 * p) {
        return Err(Error::Numerical("iid-sum quadrature missed its tolerance"));
    }
    OracleValue::exact(p, OracleMethod::GammaNormalQuadrature, err)
}

/// Simpson weights on `n + 1` points (`n` even).
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// First-passage probability on a Simpson grid with `n` intervals over
/// `[-lower, a]`: `p = Q(a / s) + sum_m int q_m(t) Q((a - t) / s) dt`, with
/// `q_m` the sub-threshold density after `m` steps.
fn overshoot_on_grid(horizon: usize, a: f64, sigma: f64, n: usize) -> f64 {
    let lower = 12.0 * sigma * (horizon as f64).sqrt();
    let h = (a + lower) / n as f64;
    let t: Vec<f64> = (0..=n).map(|i| -lower + i as f64 * h).collect();
    let w = simpson_weights(n, h);
    let kernel: Vec<f64> = (0..=n).map(|k| norm_pdf(k as f64 * h / sigma) / sigma).collect();
    let cross: Vec<f64> = t.iter().map(|ti| norm_sf((a - ti) / sigma)).collect();
    let mut q: Vec<f64> = t.iter().map(|ti| norm_pdf(ti / sigma) / sigma).collect();
    let mut p = norm_sf(a / sigma);
    let mut wq = vec![0.0; n + 1];
    for m in 1..horizon {
        for i in 0..=n {
            wq[i] = w[i] * q[i];
        }
        p += wq.iter().zip(&cross).map(|(x, c)| x * c).sum::<f64>();
        if m + 1 == horizon {
            break;
        }
        for (i, qi) in q.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, wqj) in wq.iter().enumerate() {
                s += wqj * kernel[i.abs_diff(j)];
            }
            *qi = s;
        }
    }
    p
}

/// `P(max_{m <= T} S_m >= a)` for a Gaussian walk with step sd `sigma`,
/// refining the grid until the Richardson error estimate is below 1e-6
/// relative.
pub fn oracle_overshoot(horizon: usize, a: f64, sigma: f64) -> Result<OracleValue> {
    if horizon == 0 || horizon > 50 || !(sigma > 0.0) || !(a > 0.0) {
        return Err(Error::InvalidArgument("overshoot oracle needs 1 <= T <= 50, a > 0, sigma > 0".into()));
    }
    if horizon == 1 {
        let p = norm_sf(a / sigma);
        return OracleValue::exact(p, OracleMethod::ClosedFormTail, 4.0 * f64::EPSILON * p);
    }
    let mut n = 200;
    let mut prev = overshoot_on_grid(horizon, a, sigma, n);
    while n < 12_800 {
        n *= 2;
        let cur = overshoot_on_grid(horizon, a, sigma, n);
        let err = (cur - prev).abs() / 15.0;
        if err <= 1e-6 * cur {
            return OracleValue::exact(cur, OracleMethod::WalkRecursion, err.max(1e-12 * cur));
        }
        prev = cur;
    }
    Err(Error::Numerical("overshoot grid exhausted before reaching 1e-6 relative"))
}

/// Crude Monte Carlo estimate with a three-standard-error band.
pub fn crude_mc_reference(runner: &Runner, model: &RateModel, set: &PolyhedralUnion, n: u64, seed: u64) -> Result<OracleValue> {
    let rep = runner.run(&CrudeMc::new(model, set)?, n, seed, false)?;
    Ok(OracleValue { p_exact: rep.p_hat, method: OracleMethod::CrudeMcReference, est_abs_error: 3.0 * rep.std_error() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tail_values() {
        let o = oracle_two_tail(4.0, 2.0).unwrap();
        assert!((o.p_exact - (3.167124183311992e-5 + 6.220960574271785e-16)).abs() < 1e-19);
        let p1 = oracle_two_tail(4.0, f64::INFINITY).unwrap().p_exact;
        let p = oracle_two_tail(4.0, 1.01).unwrap().p_exact;
        assert!(((p - p1) / p1 - 0.84).abs() < 5e-3);
        assert_eq!(oracle_two_tail(3.0, f64::INFINITY).unwrap().p_exact, norm_sf(3.0));
        for (g, k) in [(1.0, 2.0), (2.0, 1.5), (4.0, 1.01), (3.0, 3.0)] {
            let a = oracle_two_tail(g, k).unwrap().p_exact;
            let b = two_tail_by_quadrature(g, k).unwrap().p_exact;
            assert!((a - b).abs() < 1e-10 * a, "{g} {k}: {a} vs {b}");
        }
    }

    #[test]
    fn iid_sum_values() {
        // mpmath quadrature of the same conditional representation, 30 digits.
        let cases = [(10u32, 8.489797e-3), (30, 1.579512e-5), (50, 3.755083e-8), (100, 1.343603e-14)];
        for (m, want) in cases {
            let o = oracle_iid_sum(&IncrementSum::standard(m), 1.5).unwrap();
            assert!(o.rel_error() <= 1e-6);
            assert!((o.p_exact - want).abs() < 1e-6 * want, "m={m}: {} vs {want}", o.p_exact);
        }
    }

    #[test]
    fn overshoot_closed_form_and_two_steps() {
        let o = oracle_overshoot(1, 1.3, 0.7).unwrap();
        assert!((o.p_exact - norm_sf(1.3 / 0.7)).abs() <= 1e-12 * o.p_exact);
        // P(X1 >= 1) + P(X1 < 1, X1 + X2 >= 1) by nested quadrature.
        let o = oracle_overshoot(2, 1.0, 1.0).unwrap();
        let inner = |x1: f64| norm_pdf(x1) * norm_sf(1.0 - x1);
        let two_d = norm_sf(1.0) + integrate(inner, -40.0, 1.0, 32, 0.0, 1e-13, 10_000).unwrap().value;
        assert!((o.p_exact - two_d).abs() < 1e-5 * two_d, "{} vs {two_d}", o.p_exact);
    }

    #[test]
    fn overshoot_reference_values() {
        let o = oracle_overshoot(10, 3.3, 0.2).unwrap();
        assert!((o.p_exact - 9.7488178e-8).abs() < 1e-5 * 9.7488178e-8, "{}", o.p_exact);
        let o = oracle_overshoot(10, 3.3, 0.3).unwrap();
        assert!((o.p_exact - 3.0081991e-4).abs() < 1e-5 * 3.0081991e-4, "{}", o.p_exact);
    }
}
