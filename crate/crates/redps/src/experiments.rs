//! Experiment execution: one [`CellResult`] per single-valued configuration.

use std::collections::HashMap;

use redps_core::dominating::find_dominating_set;
use redps_core::event_sets::{overshoot_set, split_regions, two_tail_set};
use redps_core::inference::{
    asym_eff_ratio, delta_empirical, relative_error, discrepancy_bound, third_moment_ratio, CiMethod, CiSpec,
    DeltaBound, DiscrepancyEstimate, Interval,
};
use redps_core::rng::derive_seed;
use redps_core::sampling::{self, AlphaHat, BetaHat, CrudeMc, MixtureIs, Replication};
use redps_core::special::norm_sf;
use redps_core::{
    DominatingSet, Error, EstimationReport, GaussianModel, IncrementSum, MixtureSampler, PolyhedralUnion, RateModel,
};

use crate::config::{Estimator, Experiment, ExperimentConfig, KChoice, SetSource};
use crate::error::{CliError, CliResult};
use crate::oracle::{
    crude_mc_reference, oracle_iid_sum, oracle_overshoot, oracle_two_tail, OracleValue,
};
use crate::parallel::Runner;
use crate::polyfile::read_polyfile;
use crate::quad::integrate;
use crate::synthetic::synthetic_set;

/// Keep per-replication outputs for the third-moment diagnostic up to this
/// many replications.
const MAX_KEPT_OUTPUTS: u64 = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub p_hats: Vec<f64>,
    pub hits_e2: Vec<u64>,
    pub eb_cover: Option<f64>,
    pub clt_cover: Option<f64>,
    pub delta: Option<DiscrepancyEstimate>,
    /// Median of `p_hat / p`.
    pub median_ratio: Option<f64>,
    /// Replications without a residual-region hit.
    pub e2_free: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub config: ExperimentConfig,
    pub params: String,
    pub config_hash: String,
    pub estimator: Estimator,
    /// `(key, value)` of the swept parameter.
    pub sweep: (&'static str, f64),
    pub k_used: usize,
    pub r_found: Option<usize>,
    pub stop_reason: String,
    /// Replications per run.
    pub n: u64,
    /// All runs of the cell pooled.
    pub report: EstimationReport,
    pub rel_err: Option<f64>,
    pub eb: Interval,
    pub clt: Interval,
    pub oracle: Option<OracleValue>,
    pub replication: Option<ReplicationSummary>,
    /// `log E(Z^2) / log p` with plug-in moments.
    pub ae_ratio: Option<f64>,
    /// The same ratio from exact moments, where available.
    pub ae_ratio_exact: Option<f64>,
    pub third_moment: Option<f64>,
    pub bound: Option<DeltaBound>,
    /// Rates of the points in the mixture.
    pub rates: Vec<f64>,
}

impl CellResult {
    pub fn experiment(&self) -> Experiment {
        self.config.experiment
    }

    pub fn seeds(&self) -> &[u64] {
        &self.config.seeds
    }

    /// `key=value` diagnostics beyond the fixed columns.
    pub fn extras(&self) -> Vec<(String, String)> {
        let e = |v: f64| format!("{v:.5e}");
        let mut out = vec![
            ("estimator".to_string(), self.estimator.label()),
            (self.sweep.0.to_string(), self.sweep.1.to_string()),
            ("n_total".into(), self.report.n.to_string()),
            ("hits_e1".into(), self.report.hits_e1.to_string()),
            ("bound_violations".into(), self.report.bound_violations.to_string()),
            ("output_bound".into(), e(self.report.output_bound)),
            ("max_log_lr".into(), e(self.report.max_log_lr_on_hit)),
        ];
        if let Some(o) = &self.oracle {
            out.push(("oracle_method".into(), o.method.to_string()));
            out.push(("oracle_abs_err".into(), e(o.est_abs_error)));
        }
        if let Some(v) = self.ae_ratio {
            out.push(("ae_ratio".into(), e(v)));
        }
        if let Some(v) = self.ae_ratio_exact {
            out.push(("ae_ratio_exact".into(), e(v)));
        }
        if let Some(v) = self.third_moment {
            out.push(("third_moment_ratio".into(), e(v)));
        }
        if let Some(r) = &self.replication {
            out.push(("replications".into(), r.p_hats.len().to_string()));
            out.push(("e2_free_reps".into(), r.e2_free.to_string()));
            if let Some(d) = &r.delta {
                out.push((format!("delta_hat_{}", d.epsilon), e(d.delta_hat)));
            }
            if let Some(v) = r.median_ratio {
                out.push(("median_ratio".into(), e(v)));
            }
            if let Some(v) = r.eb_cover {
                out.push(("eb_cover".into(), e(v)));
            }
            if let Some(v) = r.clt_cover {
                out.push(("clt_cover".into(), e(v)));
            }
        }
        if let Some(b) = &self.bound {
            out.push(("bound_total".into(), e(b.total)));
            out.push(("bound_variance".into(), e(b.variance_term)));
            out.push(("bound_bias".into(), e(b.bias_term)));
        }
        out
    }
}

/// Gaussian model and rare-event set of a single-valued Gaussian cell.
pub fn gaussian_problem(cell: &ExperimentConfig) -> CliResult<(RateModel, PolyhedralUnion)> {
    match cell.experiment {
        Experiment::Overshoot => {
            let model = GaussianModel::isotropic(cell.horizon, cell.sigma[0])?;
            Ok((model.into(), overshoot_set(cell.horizon, cell.a)?))
        }
        Experiment::TwoTail | Experiment::CiCoverage | Experiment::DeltaSweep => {
            Ok((GaussianModel::standard(1).into(), two_tail_set(cell.gamma[0], cell.k_tail)?))
        }
        Experiment::CustomPolyhedral => {
            let set = match &cell.set {
                Some(SetSource::File(p)) => read_polyfile(p)?,
                Some(SetSource::Synthetic(s)) => synthetic_set(s)?.set,
                None => return Err(CliError::config("set.set_file", "missing")),
            };
            let d = set.dim();
            let sigma = cell.sigma[0];
            let mean = match &cell.mean {
                Some(m) if m.len() != d => {
                    return Err(CliError::config("model.mean", format!("expected {d} entries, found {}", m.len())))
                }
                Some(m) => m.clone(),
                None => vec![0.0; d],
            };
            let mut cov = vec![0.0; d * d];
            for i in 0..d {
                cov[i * d + i] = sigma * sigma;
            }
            Ok((GaussianModel::new(mean, cov)?.into(), set))
        }
        Experiment::IidSum => Err(CliError::config("experiment.name", "iid_sum has no polyhedral set")),
    }
}

fn increment_model(cell: &ExperimentConfig) -> CliResult<IncrementSum> {
    Ok(IncrementSum::new(cell.m[0], cell.mu_a, cell.sigma_a, cell.rate_b)?)
}

pub fn oracle_for(cell: &ExperimentConfig, runner: &Runner) -> CliResult<Option<OracleValue>> {
    Ok(Some(match cell.experiment {
        Experiment::IidSum => oracle_iid_sum(&increment_model(cell)?, cell.a)?,
        Experiment::Overshoot => oracle_overshoot(cell.horizon, cell.a, cell.sigma[0])?,
        Experiment::TwoTail | Experiment::CiCoverage | Experiment::DeltaSweep => oracle_two_tail(cell.gamma[0], cell.k_tail)?,
        Experiment::CustomPolyhedral => {
            if cell.oracle_n == 0 {
                return Ok(None);
            }
            let (model, set) = gaussian_problem(cell)?;
            crude_mc_reference(runner, &model, &set, cell.oracle_n, derive_seed(cell.seeds[0], u64::MAX))?
        }
    }))
}

/// Dominating-set searches, shared across cells with the same problem.
#[derive(Default)]
pub struct SearchCache {
    sets: HashMap<(String, u64), DominatingSet>,
}

impl SearchCache {
    fn get(&mut self, key: &str, model: &RateModel, set: &PolyhedralUnion, c: f64, max_points: usize) -> CliResult<DominatingSet> {
        let k = (key.to_string(), c.to_bits());
        if let Some(d) = self.sets.get(&k) {
            return Ok(d.clone());
        }
        let d = find_dominating_set(model, set, c, max_points)?;
        self.sets.insert(k, d.clone());
        Ok(d)
    }
}

/// Problem identity of a cell, ignoring estimator and run settings.
fn problem_key(cell: &ExperimentConfig) -> String {
    let mut c = cell.clone();
    c.estimators = vec![Estimator::Crude];
    c.n = 2;
    c.n_scale = None;
    c.seeds = vec![0];
    c.replications = 0;
    c.canonical()
}

/// The dominating set used for an IS cell and the number of points kept.
fn select_points(
    cell: &ExperimentConfig,
    model: &RateModel,
    set: &PolyhedralUnion,
    cache: &mut SearchCache,
) -> CliResult<(DominatingSet, usize)> {
    let key = problem_key(cell);
    let (dom, k) = match cell.estimators[0] {
        Estimator::IsAll => {
            let d = cache.get(&key, model, set, f64::INFINITY, cell.max_points)?;
            let k = d.len();
            (d, k)
        }
        Estimator::IsK(KChoice::Auto) => {
            let d = cache.get(&key, model, set, cell.c, cell.max_points)?;
            let k = d.len();
            (d, k)
        }
        Estimator::IsK(KChoice::Fixed(k)) => {
            let mut d = cache.get(&key, model, set, cell.c, cell.max_points)?;
            if k > d.len() && !d.exhausted {
                d = cache.get(&key, model, set, f64::INFINITY, cell.max_points)?;
            }
            if k > d.len() {
                return Err(CliError::config("estimator.k", format!("k = {k} exceeds the {} dominating points", d.len())));
            }
            (d, k)
        }
        _ => unreachable!("select_points is only called for IS estimators"),
    };
    if k == 0 {
        return Err(CliError::Core(Error::EmptySet));
    }
    Ok((dom, k))
}

/// Pool independent reports of equal design (Chan's combination).
pub fn pool_reports(reports: &[EstimationReport]) -> EstimationReport {
    let mut out = reports[0].clone();
    let mut m2 = out.v_n * (out.n as f64 - 1.0);
    for r in &reports[1..] {
        let (na, nb) = (out.n as f64, r.n as f64);
        let delta = r.p_hat - out.p_hat;
        let n = na + nb;
        m2 += r.v_n * (nb - 1.0) + delta * delta * na * nb / n;
        out.p_hat += delta * nb / n;
        out.n += r.n;
        out.hits_e1 += r.hits_e1;
        out.hits_e2 += r.hits_e2;
        out.max_log_lr_on_hit = out.max_log_lr_on_hit.max(r.max_log_lr_on_hit);
        for (a, b) in out.per_component_draws.iter_mut().zip(&r.per_component_draws) {
            *a += b;
        }
        out.bound_violations += r.bound_violations;
        out.wall_time += r.wall_time;
        match (&mut out.outputs, &r.outputs) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => out.outputs = None,
        }
    }
    out.v_n = if out.n > 1 { (m2 / (out.n as f64 - 1.0)).max(0.0) } else { 0.0 };
    out
}

/// Output bound for the Bernstein interval: the covered-region bound, raised
/// to the largest observed output if residual hits occurred.
fn bernstein_bound(r: &EstimationReport) -> f64 {
    if r.hits_e2 > 0 {
        r.output_bound.max(r.max_log_lr_on_hit.exp())
    } else {
        r.output_bound
    }
}

fn intervals(r: &EstimationReport, alpha: f64) -> CliResult<(Interval, Interval)> {
    if !(bernstein_bound(r) > 0.0) {
        return Err(CliError::Core(Error::Numerical("output bound underflows double precision")));
    }
    let eb = CiSpec::new(alpha, CiMethod::EmpiricalBernstein, bernstein_bound(r))?.interval(r.p_hat, r.v_n, r.n)?;
    let clt = CiSpec::new(alpha, CiMethod::Clt, 1.0)?.interval(r.p_hat, r.v_n, r.n)?;
    Ok((eb, clt))
}

struct Execution {
    pooled: EstimationReport,
    summary: Option<ReplicationSummary>,
    third_moment: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn execute<E: Replication>(est: &E, cell: &ExperimentConfig, runner: &Runner, oracle: Option<&OracleValue>) -> CliResult<Execution> {
    let n = cell.cell_n();
    if cell.replications == 0 {
        let keep = n * cell.seeds.len() as u64 <= MAX_KEPT_OUTPUTS;
        let reports = cell.seeds.iter().map(|&s| runner.run(est, n, s, keep)).collect::<redps_core::Result<Vec<_>>>()?;
        let mut pooled = pool_reports(&reports);
        let third_moment = pooled.outputs.take().and_then(|o| third_moment_ratio(&o));
        return Ok(Execution { pooled, summary: None, third_moment });
    }
    let reps = cell.replications;
    let jobs: Vec<u64> = cell.seeds.iter().flat_map(|&s| (0..reps).map(move |r| derive_seed(s, r))).collect();
    let start = std::time::Instant::now();
    let reports = runner.map(jobs.len(), |i| sampling::run(est, n, jobs[i], false)).into_iter().collect::<redps_core::Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let p_hats: Vec<f64> = reports.iter().map(|r| r.p_hat).collect();
    let hits_e2: Vec<u64> = reports.iter().map(|r| r.hits_e2).collect();
    let e2_free = hits_e2.iter().filter(|&&h| h == 0).count();
    let (mut eb_cover, mut clt_cover, mut delta, mut median_ratio) = (None, None, None, None);
    if let Some(o) = oracle {
        let p = o.p_exact;
        let mut eb_hits = 0usize;
        let mut clt_hits = 0usize;
        for r in &reports {
            let (eb, clt) = intervals(r, cell.alpha)?;
            eb_hits += eb.contains(p) as usize;
            clt_hits += clt.contains(p) as usize;
        }
        let count = reports.len() as f64;
        eb_cover = Some(eb_hits as f64 / count);
        clt_cover = Some(clt_hits as f64 / count);
        delta = Some(delta_empirical(&p_hats, p, cell.epsilon)?);
        median_ratio = Some(median(p_hats.iter().map(|x| x / p).collect()));
    }
    let mut pooled = pool_reports(&reports);
    pooled.seed = cell.seeds[0];
    pooled.wall_time = elapsed;
    Ok(Execution {
        pooled,
        summary: Some(ReplicationSummary { p_hats, hits_e2, eb_cover, clt_cover, delta, median_ratio, e2_free }),
        third_moment: None,
    })
}

/// Exact second moment and split probabilities for IS on the two-tail set.
struct TwoTailMoments {
    second_moment: f64,
    /// `E~(Z_1^2)` over the covered region.
    covered_second_moment: f64,
    p1: f64,
    p2: f64,
    /// Residual-region probability under the sampler.
    p_tilde_2: f64,
}

fn two_tail_moments(mix: &MixtureSampler, gamma: f64, k_tail: f64, k: usize) -> CliResult<TwoTailMoments> {
    let width = 40.0 + 2.0 * gamma * k_tail;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let lr = |x: f64| mix.log_likelihood_ratio(&[x]).exp();
    let moment = |lo: f64, hi: f64| -> CliResult<f64> { Ok(integrate(|x| phi(x) * lr(x), lo, hi, 32, 0.0, 1e-11, 50_000)?.value) };
    let tilted = |lo: f64, hi: f64| -> CliResult<f64> { Ok(integrate(|x| phi(x) / lr(x), lo, hi, 32, 0.0, 1e-11, 50_000)?.value) };
    let right = moment(gamma, gamma + width)?;
    let left = moment(-k_tail * gamma - width, -k_tail * gamma)?;
    let (p_right, p_left) = (norm_sf(gamma), norm_sf(k_tail * gamma));
    Ok(if k >= 2 {
        TwoTailMoments { second_moment: right + left, covered_second_moment: right + left, p1: p_right + p_left, p2: 0.0, p_tilde_2: 0.0 }
    } else {
        TwoTailMoments {
            second_moment: right + left,
            covered_second_moment: right,
            p1: p_right,
            p2: p_left,
            p_tilde_2: tilted(-k_tail * gamma - width, -k_tail * gamma)?,
        }
    })
}

/// Run one single-valued cell.
pub fn run_cell(cell: &ExperimentConfig, runner: &Runner, cache: &mut SearchCache) -> CliResult<CellResult> {
    let estimator = cell.estimators[0];
    let oracle = oracle_for(cell, runner)?;
    let sweep = match cell.experiment {
        Experiment::IidSum => ("m", cell.m[0] as f64),
        Experiment::Overshoot | Experiment::CustomPolyhedral => ("sigma", cell.sigma[0]),
        _ => ("gamma", cell.gamma[0]),
    };
    let mut r_found = None;
    let mut stop_reason = "n/a".to_string();
    let mut k_used = 0;
    let mut rates = Vec::new();
    let mut ae_ratio_exact = None;
    let mut bound = None;
    let exec = match (cell.experiment, estimator) {
        (Experiment::IidSum, Estimator::AlphaHat | Estimator::BetaHat | Estimator::Crude) => {
            let model = increment_model(cell)?;
            r_found = Some(2);
            stop_reason = "analytic".into();
            match estimator {
                Estimator::AlphaHat => {
                    let est = AlphaHat::new(&model, cell.a)?;
                    k_used = 1;
                    rates = vec![est.tail.rate];
                    execute(&est, cell, runner, oracle.as_ref())?
                }
                Estimator::BetaHat => {
                    let est = BetaHat::new(&model, cell.a)?;
                    k_used = 2;
                    rates = vec![est.upper.rate, est.lower.rate];
                    execute(&est, cell, runner, oracle.as_ref())?
                }
                _ => {
                    let level = cell.a * cell.m[0] as f64;
                    let set = two_sided_line(level)?;
                    let model: RateModel = model.into();
                    execute(&CrudeMc::new(&model, &set)?, cell, runner, oracle.as_ref())?
                }
            }
        }
        (_, Estimator::Crude) => {
            let (model, set) = gaussian_problem(cell)?;
            if let Some(o) = &oracle {
                if o.p_exact > 0.0 && o.p_exact < 1.0 {
                    ae_ratio_exact = Some(asym_eff_ratio(o.p_exact, o.p_exact)?);
                }
            }
            execute(&CrudeMc::new(&model, &set)?, cell, runner, oracle.as_ref())?
        }
        (_, Estimator::IsK(_) | Estimator::IsAll) => {
            let (model, set) = gaussian_problem(cell)?;
            let (dom, k) = select_points(cell, &model, &set, cache)?;
            r_found = Some(dom.len());
            stop_reason = dom.stop_reason().to_string();
            k_used = k;
            rates = dom.rates()[..k].to_vec();
            let mix = MixtureSampler::from_dominating(&model, &dom, k)?;
            let split = split_regions(&set, &dom, k)?;
            if matches!(cell.experiment, Experiment::TwoTail | Experiment::CiCoverage | Experiment::DeltaSweep) {
                let mo = two_tail_moments(&mix, cell.gamma[0], cell.k_tail, k)?;
                let p = mo.p1 + mo.p2;
                ae_ratio_exact = asym_eff_ratio(mo.second_moment, p).ok();
                if cell.bound {
                    let var_z1 = (mo.covered_second_moment - mo.p1 * mo.p1).max(0.0);
                    bound = Some(discrepancy_bound(var_z1, cell.cell_n(), mo.p1, mo.p2, p, mo.p_tilde_2, cell.epsilon)?);
                }
            }
            execute(&MixtureIs::new(&mix, &split)?, cell, runner, oracle.as_ref())?
        }
        (e, est) => return Err(CliError::config("estimator.kind", format!("{} is not available for {e}", est.kind()))),
    };
    let pooled = exec.pooled;
    let (eb, clt) = intervals(&pooled, cell.alpha)?;
    let ae_ratio = if pooled.p_hat > 0.0 && pooled.p_hat < 1.0 {
        let second = pooled.v_n * (pooled.n as f64 - 1.0) / pooled.n as f64 + pooled.p_hat * pooled.p_hat;
        asym_eff_ratio(second, pooled.p_hat).ok()
    } else {
        None
    };
    Ok(CellResult {
        config: cell.clone(),
        params: cell.canonical(),
        config_hash: cell.hash(),
        estimator,
        sweep,
        k_used,
        r_found,
        stop_reason,
        n: cell.cell_n(),
        rel_err: relative_error(&pooled),
        eb,
        clt,
        oracle,
        replication: exec.summary,
        ae_ratio,
        ae_ratio_exact,
        third_moment: exec.third_moment,
        bound,
        rates,
        report: pooled,
    })
}

/// `{s >= level} U {s <= -level}` on the line.
fn two_sided_line(level: f64) -> CliResult<PolyhedralUnion> {
    use redps_core::Polyhedron;
    Ok(PolyhedralUnion::new_allow_empty(
        vec![Polyhedron::halfspace(vec![1.0], level)?, Polyhedron::halfspace(vec![-1.0], level)?],
        level,
    )?)
}

/// Run every cell of `config` in order.
pub fn run_experiment(config: &ExperimentConfig, runner: &Runner) -> CliResult<Vec<CellResult>> {
    let mut cache = SearchCache::default();
    config.cells().iter().map(|c| run_cell(c, runner, &mut cache)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn cfg(pairs: &str) -> ExperimentConfig {
        ExperimentConfig::from_raw(&RawConfig::parse_params(pairs).unwrap()).unwrap()
    }

    #[test]
    fn pooling_matches_single_sample() {
        let data = [0.3, 1.2, -0.4, 2.2, 0.9, 1.1, 0.0];
        let report = |xs: &[f64]| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let v = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            EstimationReport {
                p_hat: mean,
                v_n: v,
                n: xs.len() as u64,
                seed: 0,
                hits_e1: 0,
                hits_e2: 0,
                max_log_lr_on_hit: f64::NEG_INFINITY,
                per_component_draws: vec![xs.len() as u64],
                bound_violations: 0,
                output_bound: 1.0,
                wall_time: 0.0,
                outputs: None,
            }
        };
        let whole = report(&data);
        let pooled = pool_reports(&[report(&data[..3]), report(&data[3..])]);
        assert!((pooled.p_hat - whole.p_hat).abs() < 1e-15);
        assert!((pooled.v_n - whole.v_n).abs() < 1e-14);
        assert_eq!(pooled.per_component_draws, vec![7]);
    }

    #[test]
    fn two_tail_exact_moments() {
        // Single tilt: the closed form exp(g^2)(Q(2g) + Q((k-1)g)).
        let runner = Runner::new(2).unwrap();
        let mut cache = SearchCache::default();
        let cell = cfg("experiment=two_tail;gamma=3;k_tail=3;estimator=is_k;k=1;n=2000");
        let res = run_cell(&cell, &runner, &mut cache).unwrap();
        let m = redps_core::inference::second_moment_exact_two_tail(3.0, 3.0).unwrap();
        let p = norm_sf(3.0) + norm_sf(9.0);
        let want = m.ln() / p.ln();
        assert!((res.ae_ratio_exact.unwrap() - want).abs() < 1e-8);
        assert_eq!(res.k_used, 1);
        assert_eq!(res.r_found, Some(1));
        assert_eq!(res.stop_reason, "threshold");
    }

    #[test]
    fn k_beyond_threshold_triggers_full_search() {
        let runner = Runner::new(2).unwrap();
        let mut cache = SearchCache::default();
        // Consecutive rate ratios are m / (m - 1); only 2 / 1 exceeds 1.5.
        let cell = cfg("experiment=overshoot;sigma=0.3;estimator=is_k;k=10;n=4000");
        let res = run_cell(&cell, &runner, &mut cache).unwrap();
        assert_eq!(res.k_used, 10);
        assert_eq!(res.r_found, Some(10));
        assert_eq!(res.stop_reason, "exhausted");
        let auto = run_cell(&cfg("experiment=overshoot;sigma=0.3;n=4000"), &runner, &mut cache).unwrap();
        assert_eq!(auto.k_used, 9);
        assert_eq!(auto.stop_reason, "threshold");
        let err = run_cell(&cfg("experiment=overshoot;T=3;sigma=0.3;estimator=is_k;k=4;n=100"), &runner, &mut cache).unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "estimator.k"));
    }

    #[test]
    fn vacuous_bound_is_reported() {
        let runner = Runner::new(1).unwrap();
        let mut cache = SearchCache::default();
        // Residual hit probability Q(2 gamma) under the single tilt, times n, exceeds epsilon.
        let cell = cfg("experiment=two_tail;gamma=1;k_tail=1.01;estimator=is_k;k=1;n=10000;bound=true");
        let err = run_cell(&cell, &runner, &mut cache).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let ok = run_cell(&cfg("experiment=two_tail;gamma=4;k_tail=3;estimator=is_k;k=1;n=1000;bound=true"), &runner, &mut cache).unwrap();
        assert!(ok.bound.unwrap().total > 0.0);
    }
}
