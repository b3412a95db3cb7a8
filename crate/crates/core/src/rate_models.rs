//! Input laws: cumulant generating function `mu`, its Legendre transform `I`,
//! the tilt solve `grad mu(s_y) = y`, and exponentially tilted sampling.
//!
//! Two kinds are provided:
//!
//! - a multivariate Gaussian `N(mean, cov)`, where everything is closed form
//!   (`mu(x) = mean.x + x' cov x / 2`, `I(y) = (y - mean)' cov^{-1} (y - mean) / 2`,
//!   `s_y = cov^{-1} (y - mean)`); `cov^{-1}` is never formed, all solves go
//!   through the Cholesky factor;
//! - the scalar sum `S_m` of `m` i.i.d. increments `A - B` with
//!   `A ~ N(mu_a, sigma_a^2)` and `B ~ Exp(rate_b)`, whose tilt is found by a
//!   safeguarded Newton iteration.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, Cholesky};

/// Convergence tolerance of the tilt solve, relative to `1 + |y|`.
pub const TOL_NEWTON: f64 = 1e-12;
/// Iteration cap of the tilt solve.
pub const MAX_NEWTON_ITER: usize = 100;
/// Tilts closer than this to the pole of the exponential part are rejected.
pub const EXP_DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Cholesky,
}

impl GaussianModel {
    /// `cov` is row-major `d x d`, symmetric positive definite.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("gaussian model needs dimension >= 1"));
        }
        let chol = Cholesky::new(&cov, d)?;
        Ok(GaussianModel { mean, cov, chol })
    }

    /// `N(0, sigma^2 I_d)`.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = sigma * sigma;
        }
        Self::new(vec![0.0; dim], cov)
    }

    pub fn standard(dim: usize) -> Self {
        Self::isotropic(dim, 1.0).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn chol(&self) -> &Cholesky {
        &self.chol
    }

    pub fn cgf(&self, x: &[f64]) -> f64 {
        dot(&self.mean, x) + 0.5 * dot(x, &mat_vec(&self.cov, self.dim(), x))
    }

    pub fn cgf_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = mat_vec(&self.cov, self.dim(), x);
        for (gi, mi) in g.iter_mut().zip(&self.mean) {
            *gi += mi;
        }
        g
    }

    /// `(y - mean)' cov^{-1} (y - mean) / 2`
    pub fn rate(&self, y: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        0.5 * self.chol.inv_quad_form(&diff)
    }

    /// `cov^{-1} (y - mean)`
    pub fn tilt(&self, y: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.chol.solve(&diff)
    }

    /// Mean of the law tilted by `s`: `mean + cov s`.
    pub fn tilted_mean(&self, s: &[f64]) -> Vec<f64> {
        self.cgf_grad(s)
    }

    /// Draw `center + L z` with `z` standard normal, into `out`.
    pub fn sample_around<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let l = self.chol.factor();
        let mut z = [0.0_f64; 32];
        if d <= z.len() {
            for zi in z[..d].iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            lower_mul_into(l, d, &z[..d], center, out);
        } else {
            let zs: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            lower_mul_into(l, d, &zs, center, out);
        }
    }
}

fn lower_mul_into(l: &[f64], d: usize, z: &[f64], center: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = center[i] + dot(&l[i * d..i * d + i + 1], &z[..=i]);
    }
}

/// Sum of `m` i.i.d. increments `A - B`, `A ~ N(mu_a, sigma_a^2)`, `B ~ Exp(rate_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementSum {
    pub m: u32,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub rate_b: f64,
}

impl IncrementSum {
    pub fn new(m: u32, mu_a: f64, sigma_a: f64, rate_b: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("number of summands must be >= 1"));
        }
        if !(sigma_a > 0.0) || !(rate_b > 0.0) || !mu_a.is_finite() {
            return Err(Error::invalid("need sigma_a > 0, rate_b > 0 and finite mu_a"));
        }
        Ok(IncrementSum { m, mu_a, sigma_a, rate_b })
    }

    /// `A ~ N(1.5, 1)`, `B ~ Exp(1)`.
    pub fn standard(m: u32) -> Self {
        IncrementSum { m, mu_a: 1.5, sigma_a: 1.0, rate_b: 1.0 }
    }

    fn check_domain(&self, theta: f64) -> Result<()> {
        if !(theta > -self.rate_b + EXP_DOMAIN_MARGIN) || !theta.is_finite() {
            return Err(Error::OutOfDomain { value: theta, reason: "theta <= -rate_b" });
        }
        Ok(())
    }

    /// Per-increment `mu(theta) = mu_a theta + sigma_a^2 theta^2 / 2 - log(1 + theta / rate_b)`.
    pub fn increment_cgf(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(self.mu_a * theta + 0.5 * self.sigma_a * self.sigma_a * theta * theta
            - libm::log1p(theta / self.rate_b))
    }

    pub fn increment_cgf_d1(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(self.mu_a + self.sigma_a * self.sigma_a * theta - 1.0 / (self.rate_b + theta))
    }

    fn d1_unchecked(&self, theta: f64) -> f64 {
        self.mu_a + self.sigma_a * self.sigma_a * theta - 1.0 / (self.rate_b + theta)
    }

    fn d2_unchecked(&self, theta: f64) -> f64 {
        let r = self.rate_b + theta;
        self.sigma_a * self.sigma_a + 1.0 / (r * r)
    }

    /// Solve `mu'(theta) = y` per increment. `mu'` is strictly increasing on
    /// `(-rate_b, inf)` with limits `-inf` and `+inf`, so a bracket always
    /// exists; Newton steps that leave it are replaced by bisection.
    pub fn increment_tilt(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::OutOfDomain { value: y, reason: "non-finite level" });
        }
        let tol = TOL_NEWTON * (1.0 + y.abs());
        let mut lo = -self.rate_b + EXP_DOMAIN_MARGIN;
        if self.d1_unchecked(lo) >= y {
            return Err(Error::OutOfDomain { value: y, reason: "level below the reachable range" });
        }
        let mut hi = 1.0_f64.max(lo + 1.0);
        while self.d1_unchecked(hi) <= y {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::TiltNotConverged { last_iterate: hi, residual: f64::INFINITY });
            }
        }
        let mut theta = 0.0_f64.clamp(lo, hi);
        let mut residual = self.d1_unchecked(theta) - y;
        for _ in 0..MAX_NEWTON_ITER {
            if residual.abs() <= tol {
                return Ok(theta);
            }
            if residual > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let newton = theta - residual / self.d2_unchecked(theta);
            theta = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            residual = self.d1_unchecked(theta) - y;
            if hi - lo <= f64::EPSILON * theta.abs().max(1.0) {
                break;
            }
        }
        if residual.abs() <= tol {
            Ok(theta)
        } else {
            Err(Error::TiltNotConverged { last_iterate: theta, residual })
        }
    }

    /// Per-increment rate `I(y) = theta_y y - mu(theta_y)`.
    pub fn increment_rate(&self, y: f64) -> Result<f64> {
        let theta = self.increment_tilt(y)?;
        Ok(theta * y - self.increment_cgf(theta)?)
    }

    /// Sampler for `S_m` under the tilt `theta`.
    ///
    /// The tilted increment is `N(mu_a + sigma_a^2 theta, sigma_a^2) - Exp(rate_b + theta)`;
    /// the sum of `m` of them is drawn exactly as one normal minus one
    /// `Gamma(m, rate_b + theta)`.
    pub fn tilted_sampler(&self, theta: f64) -> Result<IncrementSampler> {
        self.check_domain(theta)?;
        let m = self.m as f64;
        let normal = Normal::new(m * (self.mu_a + self.sigma_a * self.sigma_a * theta), self.sigma_a * libm::sqrt(m))
            .map_err(|_| Error::invalid("bad normal parameters"))?;
        let gamma = Gamma::new(m, 1.0 / (self.rate_b + theta)).map_err(|_| Error::invalid("bad gamma parameters"))?;
        Ok(IncrementSampler { normal, gamma })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    normal: Normal<f64>,
    gamma: Gamma<f64>,
}

impl IncrementSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.normal.sample(rng);
        let b = self.gamma.sample(rng);
        a - b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    Gaussian(GaussianModel),
    NormalMinusExpSum(IncrementSum),
}

impl From<GaussianModel> for RateModel {
    fn from(g: GaussianModel) -> Self {
        RateModel::Gaussian(g)
    }
}

impl From<IncrementSum> for RateModel {
    fn from(s: IncrementSum) -> Self {
        RateModel::NormalMinusExpSum(s)
    }
}

impl RateModel {
    pub fn dim(&self) -> usize {
        match self {
            RateModel::Gaussian(g) => g.dim(),
            RateModel::NormalMinusExpSum(_) => 1,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `mu(x) = log E exp(x . X)`. For the increment sum this is `m` times the
    /// per-increment value.
    pub fn cgf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match self {
            RateModel::Gaussian(g) => Ok(g.cgf(x)),
            RateModel::NormalMinusExpSum(s) => Ok(s.m as f64 * s.increment_cgf(x[0])?),
        }
    }

    pub fn cgf_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self {
            RateModel::Gaussian(g) => Ok(g.cgf_grad(x)),
            RateModel::NormalMinusExpSum(s) => Ok(vec![s.m as f64 * s.increment_cgf_d1(x[0])?]),
        }
    }

    /// Rate function `I(y) = sup_x {x.y - mu(x)}`.
    pub fn rate(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        match self {
            RateModel::Gaussian(g) => Ok(g.rate(y)),
            RateModel::NormalMinusExpSum(_) => {
                let s = self.tilt_param(y)?;
                Ok(dot(&s, y) - self.cgf(&s)?)
            }
        }
    }

    /// The unique `s_y` with `grad mu(s_y) = y`.
    pub fn tilt_param(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        match self {
            RateModel::Gaussian(g) => Ok(g.tilt(y)),
            RateModel::NormalMinusExpSum(s) => Ok(vec![s.increment_tilt(y[0] / s.m as f64)?]),
        }
    }

    /// Tilt solve by Newton's method on `grad mu(s) = y` for either kind,
    /// independent of the Gaussian closed form.
    pub fn tilt_param_newton(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        match self {
            RateModel::Gaussian(g) => {
                let tol = TOL_NEWTON * (1.0 + crate::linalg::norm(y));
                let mut s = vec![0.0; g.dim()];
                let mut residual = f64::INFINITY;
                for _ in 0..MAX_NEWTON_ITER {
                    let r: Vec<f64> = g.cgf_grad(&s).iter().zip(y).map(|(a, b)| a - b).collect();
                    residual = crate::linalg::norm(&r);
                    if residual <= tol {
                        return Ok(s);
                    }
                    // Hessian of mu is cov.
                    let step = g.chol().solve(&r);
                    for (si, di) in s.iter_mut().zip(&step) {
                        *si -= di;
                    }
                }
                Err(Error::TiltNotConverged { last_iterate: s[0], residual })
            }
            RateModel::NormalMinusExpSum(_) => self.tilt_param(y),
        }
    }

    /// One draw from the law tilted by `s`.
    pub fn sample_tilted<R: Rng + ?Sized>(&self, s: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_dim(s)?;
        match self {
            RateModel::Gaussian(g) => {
                let center = g.tilted_mean(s);
                let mut out = vec![0.0; g.dim()];
                g.sample_around(&center, rng, &mut out);
                Ok(out)
            }
            RateModel::NormalMinusExpSum(m) => Ok(vec![m.tilted_sampler(s[0])?.sample(rng)]),
        }
    }

    /// Log likelihood ratio of the base law against the single tilt `s`:
    /// `-(s.x - mu(s))`.
    pub fn log_lr_single(&self, s: &[f64], x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(-(dot(s, x) - self.cgf(s)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;
    use libm::sqrt;

    fn inc(m: u32) -> RateModel {
        IncrementSum::standard(m).into()
    }

    #[test]
    fn gaussian_cgf_closed_form() {
        let g: RateModel = GaussianModel::standard(2).into();
        assert_eq!(g.cgf(&[0.0, 0.0]).unwrap(), 0.0);
        let g2: RateModel = GaussianModel::new(vec![1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap().into();
        assert_eq!(g2.cgf(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(g2.cgf_grad(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(g.cgf_grad(&[2.0, 2.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(g.tilt_param(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(g2.rate(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn increment_tilts_match_known_roots() {
        let m = inc(1);
        let theta_a = m.tilt_param(&[1.5]).unwrap()[0];
        assert!((theta_a - (sqrt(5.0) - 1.0) / 2.0).abs() < 1e-12);
        let theta_b = m.tilt_param(&[-1.5]).unwrap()[0];
        assert!((theta_b - (-2.0 + sqrt(2.0))).abs() < 1e-12);
        assert!((m.cgf_grad(&[(sqrt(5.0) - 1.0) / 2.0]).unwrap()[0] - 1.5).abs() < 1e-12);
        assert!((m.cgf_grad(&[-2.0 + sqrt(2.0)]).unwrap()[0] + 1.5).abs() < 1e-12);
        let ia = m.rate(&[1.5]).unwrap();
        let ib = m.rate(&[-1.5]).unwrap();
        assert!((ia - 0.2902).abs() < 5e-5, "{ia}");
        assert!((ib - 0.7044).abs() < 5e-5, "{ib}");
    }

    #[test]
    fn increment_sum_scales_with_m() {
        let one = inc(1);
        let thirty = inc(30);
        let t = (sqrt(5.0) - 1.0) / 2.0;
        assert!((thirty.cgf(&[t]).unwrap() - 30.0 * one.cgf(&[t]).unwrap()).abs() < 1e-12);
        assert!((thirty.tilt_param(&[45.0]).unwrap()[0] - t).abs() < 1e-12);
        let ia = one.rate(&[1.5]).unwrap();
        let llr = thirty.log_lr_single(&[t], &[45.0]).unwrap();
        assert!((llr + 30.0 * ia).abs() < 1e-9);
        assert!((llr + 8.706).abs() < 2e-3);
    }

    #[test]
    fn domain_violation_is_an_error() {
        let m = inc(1);
        assert!(matches!(m.cgf(&[-1.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.cgf(&[-1.5]), Err(Error::OutOfDomain { .. })));
        assert!(m.cgf(&[-0.99]).is_ok());
        assert!(matches!(m.cgf(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_tilt_log_lr_vanishes() {
        let g: RateModel = GaussianModel::standard(3).into();
        assert_eq!(g.log_lr_single(&[0.0; 3], &[1.0, -2.0, 5.0]).unwrap(), 0.0);
        let g1: RateModel = GaussianModel::standard(1).into();
        let gamma = 2.5;
        assert!((g1.log_lr_single(&[gamma], &[gamma]).unwrap() + gamma * gamma / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_gaussian_mean_hits_target() {
        let g = GaussianModel::new(vec![0.5, -1.0], vec![2.0, 0.6, 0.6, 1.0]).unwrap();
        let model: RateModel = g.clone().into();
        let a = [2.0, 1.0];
        let s = model.tilt_param(&a).unwrap();
        let mut rng = block_rng(11, 0);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let x = model.sample_tilted(&s, &mut rng).unwrap();
            sum[0] += x[0];
            sum[1] += x[1];
        }
        let se = [sqrt(2.0 / n as f64), sqrt(1.0 / n as f64)];
        for i in 0..2 {
            assert!((sum[i] / n as f64 - a[i]).abs() < 4.0 * se[i]);
        }
    }

    #[test]
    fn tilted_increment_mean_hits_level() {
        let model = inc(30);
        let t = (sqrt(5.0) - 1.0) / 2.0;
        let sampler = IncrementSum::standard(30).tilted_sampler(t).unwrap();
        let mut rng = block_rng(5, 0);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = sampler.sample(&mut rng) / 30.0;
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 1.5).abs() < 4.0 * sqrt(var / n as f64));
        assert!(model.sample_tilted(&[t], &mut rng).is_ok());
    }
}
