//! Importance-sampling estimators and their streaming accumulation.
//!
//! Every estimator implements [`Replication`]: one call draws whatever a
//! single replication needs and pushes one output into an [`Accumulator`].
//! Runs are split into blocks of [`crate::rng::BLOCK_LEN`] replications, block `b`
//! drawing from its own stream, and block accumulators are merged in block
//! order. The sequential runners here and the parallel runner in the std
//! crate therefore produce bit-identical reports.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dominating::DominatingSet;
use crate::error::{Error, Result};
use crate::event_sets::{PolyhedralUnion, Region, RegionSplit};
use crate::linalg::dot;
use crate::rate_models::{IncrementSampler, IncrementSum, RateModel};
use crate::rng::{block_count, block_len, block_rng};

/// Relative slack allowed on the covered-region output bound.
pub const BOUND_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Draw {
    /// Gaussian: `center + L z`.
    Shift(Vec<f64>),
    Increments(IncrementSampler),
}

#[derive(Debug, Clone)]
pub struct Component {
    pub tilt: Vec<f64>,
    /// `mu(tilt)`.
    pub mu: f64,
    pub point: Vec<f64>,
    /// `tilt' point - mu`, the rate at `point` when `tilt` is its tilt.
    pub rate: f64,
    draw: Draw,
}

/// `f~(x) = f(x) sum_i alpha_i exp(s_i' x - mu(s_i))`.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    model: RateModel,
    components: Vec<Component>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MixtureSampler {
    /// Components given as `(tilt, point)` pairs. Weights must be positive
    /// and sum to one.
    pub fn new(model: RateModel, components: Vec<(Vec<f64>, Vec<f64>)>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch { expected: components.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must sum to 1"));
        }
        let d = model.dim();
        let mut comps = Vec::with_capacity(components.len());
        for (tilt, point) in components {
            if tilt.len() != d || point.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: tilt.len().max(point.len()) });
            }
            let mu = model.cgf(&tilt)?;
            let draw = match &model {
                RateModel::Gaussian(g) => Draw::Shift(g.tilted_mean(&tilt)),
                RateModel::NormalMinusExpSum(s) => Draw::Increments(s.tilted_sampler(tilt[0])?),
            };
            let rate = dot(&tilt, &point) - mu;
            comps.push(Component { tilt, mu, point, rate, draw });
        }
        let log_weights = weights.iter().map(|w| libm::log(*w)).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(MixtureSampler { model, components: comps, weights, log_weights, cumulative })
    }

    /// Equal-weight mixture over the first `k` points of `dom`.
    pub fn from_dominating(model: &RateModel, dom: &DominatingSet, k: usize) -> Result<Self> {
        if k == 0 || k > dom.len() {
            return Err(Error::invalid("mixture needs 1 <= k <= number of dominating points"));
        }
        let comps = dom.points[..k].iter().map(|p| (p.tilt.clone(), p.point.clone())).collect();
        Self::new(model.clone(), comps, vec![1.0 / k as f64; k])
    }

    /// The base law itself (one component with zero tilt).
    pub fn untilted(model: &RateModel) -> Result<Self> {
        let d = model.dim();
        let point = model.cgf_grad(&vec![0.0; d])?;
        Self::new(model.clone(), vec![(vec![0.0; d], point)], vec![1.0])
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest component rate.
    pub fn rate_1(&self) -> f64 {
        self.components.iter().map(|c| c.rate).fold(f64::INFINITY, f64::min)
    }

    /// `exp(-rate_1) / min alpha`, the bound on outputs from covered hits.
    pub fn e1_bound(&self) -> f64 {
        libm::exp(-self.rate_1()) / self.min_weight()
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.components.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        self.cumulative.iter().position(|c| u < *c).unwrap_or(self.components.len() - 1)
    }

    /// Draw into `out`; returns the component index.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let i = self.pick(rng);
        match (&self.components[i].draw, &self.model) {
            (Draw::Shift(center), RateModel::Gaussian(g)) => g.sample_around(center, rng, out),
            (Draw::Increments(s), _) => out[0] = s.sample(rng),
            _ => unreachable!("component draw matches the model"),
        }
        i
    }

    pub fn sample_mixture<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let mut x = vec![0.0; self.model.dim()];
        let i = self.sample_into(rng, &mut x);
        (x, i)
    }

    /// `log L(x) = -logsumexp_i(log alpha_i + s_i' x - mu_i)`.
    pub fn log_likelihood_ratio(&self, x: &[f64]) -> f64 {
        let mut hi = f64::NEG_INFINITY;
        for (c, lw) in self.components.iter().zip(&self.log_weights) {
            hi = hi.max(lw + dot(&c.tilt, x) - c.mu);
        }
        let mut s = 0.0;
        for (c, lw) in self.components.iter().zip(&self.log_weights) {
            s += libm::exp(lw + dot(&c.tilt, x) - c.mu - hi);
        }
        -(hi + libm::log(s))
    }
}

/// Streaming mean/variance plus hit bookkeeping; merges associatively in a
/// fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub hits_e1: u64,
    pub hits_e2: u64,
    pub max_log_lr_on_hit: f64,
    pub component_draws: Vec<u64>,
    pub bound_violations: u64,
    pub outputs: Option<Vec<f64>>,
}

impl Accumulator {
    pub fn new(components: usize, keep_outputs: bool) -> Self {
        Accumulator {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            hits_e1: 0,
            hits_e2: 0,
            max_log_lr_on_hit: f64::NEG_INFINITY,
            component_draws: vec![0; components],
            bound_violations: 0,
            outputs: keep_outputs.then(Vec::new),
        }
    }

    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
        if let Some(o) = self.outputs.as_mut() {
            o.push(value);
        }
    }

    fn note_hit(&mut self, log_lr: f64) {
        if log_lr > self.max_log_lr_on_hit {
            self.max_log_lr_on_hit = log_lr;
        }
    }

    /// Append `other`, which must come after `self` in block order.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n > 0 {
            let (na, nb) = (self.n as f64, other.n as f64);
            let n = na + nb;
            let delta = other.mean - self.mean;
            self.mean += delta * nb / n;
            self.m2 += other.m2 + delta * delta * na * nb / n;
            self.n += other.n;
        }
        self.hits_e1 += other.hits_e1;
        self.hits_e2 += other.hits_e2;
        self.max_log_lr_on_hit = self.max_log_lr_on_hit.max(other.max_log_lr_on_hit);
        for (a, b) in self.component_draws.iter_mut().zip(&other.component_draws) {
            *a += b;
        }
        self.bound_violations += other.bound_violations;
        if let (Some(a), Some(b)) = (self.outputs.as_mut(), other.outputs.as_ref()) {
            a.extend_from_slice(b);
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub p_hat: f64,
    /// Sample variance of the per-replication outputs.
    pub v_n: f64,
    pub n: u64,
    pub seed: u64,
    /// Hits in the covered region (all hits for estimators without a split).
    pub hits_e1: u64,
    /// Hits in the residual region.
    pub hits_e2: u64,
    pub max_log_lr_on_hit: f64,
    pub per_component_draws: Vec<u64>,
    /// Covered-region outputs above the bound; zero unless something is wrong.
    pub bound_violations: u64,
    /// Bound the covered-region outputs were checked against.
    pub output_bound: f64,
    /// Seconds; filled in by callers that time the run.
    pub wall_time: f64,
    pub outputs: Option<Vec<f64>>,
}

impl EstimationReport {
    pub fn std_error(&self) -> f64 {
        libm::sqrt(self.v_n / self.n as f64)
    }
}

/// One independent replication of an estimator.
pub trait Replication: Sync {
    /// Number of sampling components whose draws are counted.
    fn components(&self) -> usize;
    /// Bound on covered-region outputs.
    fn output_bound(&self) -> f64;
    /// Sample variance under the estimator's own convention.
    fn variance(&self, acc: &Accumulator) -> f64 {
        acc.variance()
    }
    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut Accumulator, scratch: &mut [f64]);
    fn dim(&self) -> usize;
}

fn check_bound(acc: &mut Accumulator, value: f64, bound: f64) {
    if value > bound * (1.0 + BOUND_RTOL) {
        acc.bound_violations += 1;
    }
}

/// Mixture IS for `I_E(X) L(X)`.
#[derive(Debug, Clone)]
pub struct MixtureIs<'a> {
    pub mixture: &'a MixtureSampler,
    pub split: &'a RegionSplit,
    bound: f64,
}

impl<'a> MixtureIs<'a> {
    pub fn new(mixture: &'a MixtureSampler, split: &'a RegionSplit) -> Result<Self> {
        if mixture.model().dim() != split.base().dim() {
            return Err(Error::DimensionMismatch { expected: split.base().dim(), got: mixture.model().dim() });
        }
        Ok(MixtureIs { mixture, split, bound: mixture.e1_bound() })
    }
}

impl Replication for MixtureIs<'_> {
    fn components(&self) -> usize {
        self.mixture.len()
    }

    fn output_bound(&self) -> f64 {
        self.bound
    }

    fn dim(&self) -> usize {
        self.mixture.model().dim()
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut Accumulator, x: &mut [f64]) {
        let c = self.mixture.sample_into(rng, x);
        acc.component_draws[c] += 1;
        match self.split.classify(x) {
            Region::Outside => acc.push(0.0),
            region => {
                let llr = self.mixture.log_likelihood_ratio(x);
                let v = libm::exp(llr);
                acc.note_hit(llr);
                if region == Region::Residual {
                    acc.hits_e2 += 1;
                } else {
                    acc.hits_e1 += 1;
                    check_bound(acc, v, self.bound);
                }
                acc.push(v);
            }
        }
    }
}

/// Crude Monte Carlo: `I_E(X)` under the base law.
#[derive(Debug, Clone)]
pub struct CrudeMc<'a> {
    base: MixtureSampler,
    set: &'a PolyhedralUnion,
}

impl<'a> CrudeMc<'a> {
    pub fn new(model: &RateModel, set: &'a PolyhedralUnion) -> Result<Self> {
        if model.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), got: model.dim() });
        }
        Ok(CrudeMc { base: MixtureSampler::untilted(model)?, set })
    }
}

impl Replication for CrudeMc<'_> {
    fn components(&self) -> usize {
        1
    }

    fn output_bound(&self) -> f64 {
        1.0
    }

    fn dim(&self) -> usize {
        self.set.dim()
    }

    /// `p(1 - p) n / (n - 1)`.
    fn variance(&self, acc: &Accumulator) -> f64 {
        if acc.n < 2 {
            return 0.0;
        }
        let p = acc.hits_e1 as f64 / acc.n as f64;
        p * (1.0 - p) * acc.n as f64 / (acc.n - 1) as f64
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut Accumulator, x: &mut [f64]) {
        self.base.sample_into(rng, x);
        acc.component_draws[0] += 1;
        if self.set.contains_unchecked(x) {
            acc.hits_e1 += 1;
            acc.note_hit(0.0);
            acc.push(1.0);
        } else {
            acc.push(0.0);
        }
    }
}

/// One tilted term `exp(-theta S + m mu(theta)) I{S on its side of the level}`.
#[derive(Debug, Clone, Copy)]
pub struct TiltedTail {
    pub theta: f64,
    /// `m mu(theta)`.
    pub log_mgf: f64,
    pub level: f64,
    /// `true` for `S >= level`, `false` for `S <= level`.
    pub upper: bool,
    /// `m I(level / m)`.
    pub rate: f64,
    sampler: IncrementSampler,
}

impl TiltedTail {
    /// Tilt solved at `level`, i.e. the dominating point of that tail.
    pub fn at_level(model: &IncrementSum, level: f64, upper: bool) -> Result<Self> {
        let m = model.m as f64;
        let theta = model.increment_tilt(level / m)?;
        let log_mgf = m * model.increment_cgf(theta)?;
        Ok(TiltedTail {
            theta,
            log_mgf,
            level,
            upper,
            rate: theta * level - log_mgf,
            sampler: model.tilted_sampler(theta)?,
        })
    }

    fn hits(&self, s: f64) -> bool {
        if self.upper {
            s >= self.level
        } else {
            s <= self.level
        }
    }

    fn log_weight(&self, s: f64) -> f64 {
        -self.theta * s + self.log_mgf
    }
}

/// Single-tilt estimator of `P(|S_m| >= a m)` with tilt at `+a`. Hits in the
/// lower tail are residual-region hits.
#[derive(Debug, Clone, Copy)]
pub struct AlphaHat {
    pub tail: TiltedTail,
    lower_level: f64,
}

impl AlphaHat {
    pub fn new(model: &IncrementSum, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("level a must be positive"));
        }
        let level = a * model.m as f64;
        Ok(AlphaHat { tail: TiltedTail::at_level(model, level, true)?, lower_level: -level })
    }
}

impl Replication for AlphaHat {
    fn components(&self) -> usize {
        1
    }

    fn output_bound(&self) -> f64 {
        libm::exp(-self.tail.rate)
    }

    fn dim(&self) -> usize {
        1
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut Accumulator, _x: &mut [f64]) {
        let s = self.tail.sampler.sample(rng);
        acc.component_draws[0] += 1;
        if self.tail.hits(s) {
            let lw = self.tail.log_weight(s);
            let v = libm::exp(lw);
            acc.hits_e1 += 1;
            acc.note_hit(lw);
            check_bound(acc, v, self.output_bound());
            acc.push(v);
        } else if s <= self.lower_level {
            let lw = self.tail.log_weight(s);
            acc.hits_e2 += 1;
            acc.note_hit(lw);
            acc.push(libm::exp(lw));
        } else {
            acc.push(0.0);
        }
    }
}

/// Two-tilt estimator of `P(|S_m| >= a m)`: each replication draws one sum
/// under the `+a` tilt for the upper term and an independent sum under the
/// `-a` tilt for the lower term, and outputs the sum of both terms.
#[derive(Debug, Clone, Copy)]
pub struct BetaHat {
    pub upper: TiltedTail,
    pub lower: TiltedTail,
}

impl BetaHat {
    pub fn new(model: &IncrementSum, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("level a must be positive"));
        }
        let level = a * model.m as f64;
        Ok(BetaHat {
            upper: TiltedTail::at_level(model, level, true)?,
            lower: TiltedTail::at_level(model, -level, false)?,
        })
    }
}

impl Replication for BetaHat {
    fn components(&self) -> usize {
        2
    }

    /// Each term's bound; the output bound is their sum.
    fn output_bound(&self) -> f64 {
        libm::exp(-self.upper.rate) + libm::exp(-self.lower.rate)
    }

    fn dim(&self) -> usize {
        1
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut Accumulator, _x: &mut [f64]) {
        let mut total = 0.0;
        let mut hit = false;
        for tail in [&self.upper, &self.lower] {
            let s = tail.sampler.sample(rng);
            if tail.hits(s) {
                let lw = tail.log_weight(s);
                let v = libm::exp(lw);
                check_bound(acc, v, libm::exp(-tail.rate));
                acc.note_hit(lw);
                total += v;
                hit = true;
            }
        }
        acc.component_draws[0] += 1;
        acc.component_draws[1] += 1;
        if hit {
            acc.hits_e1 += 1;
        }
        acc.push(total);
    }
}

/// Run block `block` of an `n`-replication run.
pub fn run_block<E: Replication + ?Sized>(est: &E, n: u64, seed: u64, block: u64, keep_outputs: bool) -> Accumulator {
    let mut rng = block_rng(seed, block);
    let mut acc = Accumulator::new(est.components(), keep_outputs);
    let mut x = vec![0.0; est.dim()];
    for _ in 0..block_len(n, block) {
        est.replicate(&mut rng, &mut acc, &mut x);
    }
    acc
}

/// Merge block accumulators (in block order) into a report.
pub fn finish<E: Replication + ?Sized>(est: &E, blocks: impl IntoIterator<Item = Accumulator>, seed: u64) -> EstimationReport {
    let mut it = blocks.into_iter();
    let mut acc = it.next().unwrap_or_else(|| Accumulator::new(est.components(), false));
    for b in it {
        acc.merge(&b);
    }
    EstimationReport {
        p_hat: acc.mean.max(0.0),
        v_n: est.variance(&acc),
        n: acc.n,
        seed,
        hits_e1: acc.hits_e1,
        hits_e2: acc.hits_e2,
        max_log_lr_on_hit: acc.max_log_lr_on_hit,
        per_component_draws: acc.component_draws,
        bound_violations: acc.bound_violations,
        output_bound: est.output_bound(),
        wall_time: 0.0,
        outputs: acc.outputs,
    }
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2 replications"));
    }
    Ok(())
}

/// Single-threaded run of `n` replications.
pub fn run<E: Replication + ?Sized>(est: &E, n: u64, seed: u64, keep_outputs: bool) -> Result<EstimationReport> {
    check_n(n)?;
    let blocks = (0..block_count(n)).map(|b| run_block(est, n, seed, b, keep_outputs));
    Ok(finish(est, blocks, seed))
}

pub fn run_is_estimation(split: &RegionSplit, mix: &MixtureSampler, n: u64, seed: u64) -> Result<EstimationReport> {
    run(&MixtureIs::new(mix, split)?, n, seed, false)
}

pub fn run_crude_mc(model: &RateModel, set: &PolyhedralUnion, n: u64, seed: u64) -> Result<EstimationReport> {
    run(&CrudeMc::new(model, set)?, n, seed, false)
}

pub fn run_alpha_hat(model: &IncrementSum, a: f64, n: u64, seed: u64) -> Result<EstimationReport> {
    run(&AlphaHat::new(model, a)?, n, seed, false)
}

pub fn run_beta_hat(model: &IncrementSum, a: f64, n: u64, seed: u64) -> Result<EstimationReport> {
    run(&BetaHat::new(model, a)?, n, seed, false)
}
