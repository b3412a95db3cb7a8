//! Experiment configuration: flat `key = value` files with `[section]`
//! headers, overridable from the command line. Every key has a canonical
//! dotted path (`set.T`) and a bare alias (`T`) usable anywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// `(section.key, bare alias)` in canonical output order.
const KEYS: &[(&str, &str)] = &[
    ("experiment.name", "experiment"),
    ("model.m", "m"),
    ("model.mu_a", "mu_a"),
    ("model.sigma_a", "sigma_a"),
    ("model.rate_b", "rate_b"),
    ("model.sigma", "sigma"),
    ("model.mean", "mean"),
    ("set.a", "a"),
    ("set.T", "T"),
    ("set.gamma", "gamma"),
    ("set.k_tail", "k_tail"),
    ("set.set_file", "set_file"),
    ("set.synthetic", "synthetic"),
    ("set.synthetic_dim", "synthetic_dim"),
    ("set.synthetic_pieces", "synthetic_pieces"),
    ("set.synthetic_i0", "synthetic_i0"),
    ("set.synthetic_seed", "synthetic_seed"),
    ("estimator.kind", "estimator"),
    ("estimator.k", "k"),
    ("run.n", "n"),
    ("run.n_scale", "n_scale"),
    ("run.seeds", "seeds"),
    ("run.replications", "replications"),
    ("run.C", "C"),
    ("run.alpha", "alpha"),
    ("run.epsilon", "epsilon"),
    ("run.bound", "bound"),
    ("run.max_points", "max_points"),
    ("run.oracle_n", "oracle_n"),
    ("output.out", "out"),
    ("output.threads", "threads"),
];

/// Resolve a dotted path or bare alias to its dotted path.
fn resolve(key: &str) -> CliResult<&'static str> {
    let key = key.trim();
    let key = if key == "seed" { "seeds" } else { key };
    KEYS.iter()
        .find(|(path, bare)| *path == key || *bare == key)
        .map(|(path, _)| *path)
        .ok_or_else(|| CliError::config(key, "unknown key"))
}

fn bare(path: &str) -> &'static str {
    KEYS.iter().find(|(p, _)| *p == path).map(|(_, b)| *b).expect("known key")
}

/// Unvalidated key/value pairs keyed by dotted path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<&'static str, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| CliError::config("config", e.to_string()))?;
        let mut raw = RawConfig::default();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{s}.{k}"),
                    None => k.to_string(),
                };
                let path = resolve(&key)?;
                if let Some(s) = section {
                    if !path.starts_with(&format!("{s}.")) {
                        return Err(CliError::config(format!("{s}.{k}"), format!("key belongs in section [{}]", path.split('.').next().unwrap())));
                    }
                }
                raw.values.insert(path, v.trim().to_string());
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// `key=value;key=value`, the form echoed in output rows.
    pub fn parse_params(s: &str) -> CliResult<Self> {
        let mut raw = RawConfig::default();
        for item in s.split(';').filter(|t| !t.trim().is_empty()) {
            raw.set_pair(item)?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        self.values.insert(resolve(key)?, value.into().trim().to_string());
        Ok(())
    }

    /// `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::config(pair, "expected key=value"))?;
        self.set(k, v)
    }

    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.values {
            self.values.insert(k, v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        resolve(key).is_ok_and(|p| self.values.contains_key(p))
    }

    fn get(&self, path: &'static str) -> Option<&str> {
        self.values.get(path).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    IidSum,
    Overshoot,
    TwoTail,
    CustomPolyhedral,
    CiCoverage,
    DeltaSweep,
}

impl Experiment {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "iid_sum" => Experiment::IidSum,
            "overshoot" => Experiment::Overshoot,
            "two_tail" => Experiment::TwoTail,
            "custom_polyhedral" => Experiment::CustomPolyhedral,
            "ci_coverage" => Experiment::CiCoverage,
            "delta_sweep" => Experiment::DeltaSweep,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::IidSum => "iid_sum",
            Experiment::Overshoot => "overshoot",
            Experiment::TwoTail => "two_tail",
            Experiment::CustomPolyhedral => "custom_polyhedral",
            Experiment::CiCoverage => "ci_coverage",
            Experiment::DeltaSweep => "delta_sweep",
        }
    }

    /// Keys the experiment reads, besides the estimator, run and output ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::IidSum => &["model.m", "model.mu_a", "model.sigma_a", "model.rate_b", "set.a"],
            Experiment::Overshoot => &["model.sigma", "set.a", "set.T"],
            Experiment::TwoTail | Experiment::CiCoverage | Experiment::DeltaSweep => &["set.gamma", "set.k_tail"],
            Experiment::CustomPolyhedral => &[
                "model.sigma",
                "model.mean",
                "set.set_file",
                "set.synthetic",
                "set.synthetic_dim",
                "set.synthetic_pieces",
                "set.synthetic_i0",
                "set.synthetic_seed",
            ],
        }
    }

    fn is_gaussian(self) -> bool {
        self != Experiment::IidSum
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    /// Every point the threshold-stopped search returns.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Crude,
    IsK(KChoice),
    IsAll,
    AlphaHat,
    BetaHat,
}

impl Estimator {
    pub fn kind(self) -> &'static str {
        match self {
            Estimator::Crude => "crude",
            Estimator::IsK(_) => "is_k",
            Estimator::IsAll => "is_all",
            Estimator::AlphaHat => "alpha_hat",
            Estimator::BetaHat => "beta_hat",
        }
    }

    /// Short label, e.g. `is_k(3)`.
    pub fn label(self) -> String {
        match self {
            Estimator::IsK(KChoice::Fixed(k)) => format!("is_k({k})"),
            Estimator::IsK(KChoice::Auto) => "is_k(auto)".into(),
            e => e.kind().into(),
        }
    }
}

/// `auto`, `3`, `1,2,5` or `1..10` (inclusive).
pub fn parse_k_spec(s: &str) -> Result<Vec<KChoice>, String> {
    let s = s.trim();
    if s == "auto" {
        return Ok(vec![KChoice::Auto]);
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start {lo:?}"))?;
            let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end {hi:?}"))?;
            if lo == 0 || hi < lo {
                return Err(format!("empty or zero-based range {part:?}"));
            }
            out.extend((lo..=hi).map(KChoice::Fixed));
        } else {
            let k: usize = part.parse().map_err(|_| format!("bad k {part:?}"))?;
            if k == 0 {
                return Err("k must be at least 1".into());
            }
            out.push(KChoice::Fixed(k));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub pieces: usize,
    pub i0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

/// A validated experiment. Sweep parameters (`m`, `sigma`, `gamma`) and the
/// estimator may hold several values; [`ExperimentConfig::cells`] expands
/// them into single-valued configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub m: Vec<u32>,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub rate_b: f64,
    pub sigma: Vec<f64>,
    pub mean: Option<Vec<f64>>,
    pub a: f64,
    pub horizon: usize,
    pub gamma: Vec<f64>,
    pub k_tail: f64,
    pub set: Option<SetSource>,
    pub estimators: Vec<Estimator>,
    pub n: u64,
    /// When set, each cell uses `n = ceil(n_scale * gamma^2)`.
    pub n_scale: Option<f64>,
    pub seeds: Vec<u64>,
    pub replications: u64,
    pub c: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub bound: bool,
    pub max_points: usize,
    pub oracle_n: u64,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn value<T>(&self, path: &'static str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<T> {
        match self.raw.get(path) {
            None => Ok(default),
            Some(v) => parse(v).map_err(|m| CliError::config(path, m)),
        }
    }

    fn f64(&self, path: &'static str, default: f64) -> CliResult<f64> {
        self.value(path, default, parse_f64)
    }

    fn u64(&self, path: &'static str, default: u64) -> CliResult<u64> {
        self.value(path, default, |s| s.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got {s:?}")))
    }

    fn f64_list(&self, path: &'static str, default: Vec<f64>) -> CliResult<Vec<f64>> {
        self.value(path, default, |s| s.split(',').map(parse_f64).collect())
    }

    fn bool(&self, path: &'static str, default: bool) -> CliResult<bool> {
        self.value(path, default, |s| match s {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(format!("expected true or false, got {s:?}")),
        })
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(|| format!("expected a number, got {s:?}"))
}

fn check(ok: bool, path: &str, msg: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, msg))
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> CliResult<Self> {
        let name = raw.get("experiment.name").ok_or_else(|| CliError::config("experiment.name", "missing"))?;
        let experiment = Experiment::parse(name).ok_or_else(|| {
            CliError::config("experiment.name", format!("unknown experiment {name:?}; expected iid_sum, overshoot, two_tail, custom_polyhedral, ci_coverage or delta_sweep"))
        })?;
        for path in raw.values.keys() {
            let generic = path.starts_with("estimator.") || path.starts_with("run.") || path.starts_with("output.") || *path == "experiment.name";
            if !generic && !experiment.keys().contains(path) {
                return Err(CliError::config(*path, format!("not used by experiment {experiment}")));
            }
        }
        let r = Reader { raw };
        use Experiment::*;

        let m = r.value("model.m", vec![10u32], |s| {
            s.split(',').map(|t| t.trim().parse::<u32>().ok().filter(|&m| m >= 1).ok_or_else(|| format!("bad m {t:?}"))).collect()
        })?;
        let mu_a = r.f64("model.mu_a", 1.5)?;
        let sigma_a = r.f64("model.sigma_a", 1.0)?;
        let rate_b = r.f64("model.rate_b", 1.0)?;
        check(sigma_a > 0.0 && sigma_a.is_finite(), "model.sigma_a", "must be positive")?;
        check(rate_b > 0.0 && rate_b.is_finite(), "model.rate_b", "must be positive")?;

        let sigma = r.f64_list("model.sigma", vec![if experiment == Overshoot { 0.2 } else { 1.0 }])?;
        check(sigma.iter().all(|s| *s > 0.0 && s.is_finite()), "model.sigma", "must be positive")?;
        let mean = match raw.get("model.mean") {
            None => None,
            Some(_) => Some(r.f64_list("model.mean", vec![])?),
        };

        let a = r.f64("set.a", if experiment == IidSum { 1.5 } else { 3.3 })?;
        check(a > 0.0 && a.is_finite(), "set.a", "must be positive")?;
        let horizon = r.u64("set.T", 10)? as usize;
        check((1..=50).contains(&horizon), "set.T", "must lie in 1..=50")?;
        let gamma_default = match experiment {
            TwoTail => vec![4.0],
            DeltaSweep => vec![2.0, 3.0, 4.0, 5.0],
            _ => vec![2.0],
        };
        let gamma = r.f64_list("set.gamma", gamma_default)?;
        check(gamma.iter().all(|g| *g > 0.0 && g.is_finite()), "set.gamma", "must be positive")?;
        let k_tail = r.f64("set.k_tail", 2.0)?;
        check(k_tail > 1.0, "set.k_tail", "must exceed 1")?;

        let set = if experiment == CustomPolyhedral {
            let synthetic = r.bool("set.synthetic", false)?;
            match (raw.get("set.set_file"), synthetic) {
                (Some(_), true) => return Err(CliError::config("set.set_file", "give either set_file or synthetic = true, not both")),
                (Some(p), false) => Some(SetSource::File(PathBuf::from(p))),
                (None, true) => {
                    let spec = SyntheticSpec {
                        dim: r.u64("set.synthetic_dim", 20)? as usize,
                        pieces: r.u64("set.synthetic_pieces", 60)? as usize,
                        i0: r.f64("set.synthetic_i0", 4.0)?,
                        seed: r.u64("set.synthetic_seed", 1)?,
                    };
                    check(spec.dim >= 1, "set.synthetic_dim", "must be at least 1")?;
                    check(spec.pieces >= 1, "set.synthetic_pieces", "must be at least 1")?;
                    check(spec.i0 > 0.0 && spec.i0.is_finite(), "set.synthetic_i0", "must be positive")?;
                    Some(SetSource::Synthetic(spec))
                }
                (None, false) => return Err(CliError::config("set.set_file", "custom_polyhedral needs set_file or synthetic = true")),
            }
        } else {
            None
        };

        let default_kind = match experiment {
            IidSum => "beta_hat",
            TwoTail | CiCoverage => "is_all",
            _ => "is_k",
        };
        let default_k = if experiment == DeltaSweep { "1" } else { "auto" };
        let ks = r.value("estimator.k", parse_k_spec(default_k).unwrap(), parse_k_spec)?;
        let kinds = raw.get("estimator.kind").unwrap_or(default_kind);
        let mut estimators = Vec::new();
        for kind in kinds.split(',').map(str::trim) {
            let e = match kind {
                "crude" => Estimator::Crude,
                "is_all" => Estimator::IsAll,
                "alpha_hat" => Estimator::AlphaHat,
                "beta_hat" => Estimator::BetaHat,
                "is_k" => {
                    estimators.extend(ks.iter().map(|k| Estimator::IsK(*k)));
                    continue;
                }
                other => return Err(CliError::config("estimator.kind", format!("unknown estimator {other:?}"))),
            };
            estimators.push(e);
        }
        for e in &estimators {
            let ok = match e {
                Estimator::AlphaHat | Estimator::BetaHat => experiment == IidSum,
                Estimator::IsK(_) | Estimator::IsAll => experiment.is_gaussian(),
                Estimator::Crude => true,
            };
            check(ok, "estimator.kind", &format!("{} is not available for {experiment}", e.kind()))?;
        }

        let n_default = match experiment {
            IidSum => 1_000_000,
            Overshoot | CustomPolyhedral => 100_000,
            TwoTail | CiCoverage => 10_000,
            DeltaSweep => 1_000,
        };
        let n = r.u64("run.n", n_default)?;
        check(n >= 2, "run.n", "must be at least 2")?;
        let n_scale = match raw.get("run.n_scale") {
            None => None,
            Some(_) => Some(r.f64("run.n_scale", 0.0)?),
        };
        if let Some(s) = n_scale {
            check(s > 0.0 && s.is_finite(), "run.n_scale", "must be positive")?;
            check(experiment != IidSum && experiment != Overshoot && experiment != CustomPolyhedral, "run.n_scale", "only applies to gamma sweeps")?;
        }
        let seeds = r.value("run.seeds", vec![1u64], |s| {
            s.split(',').map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad seed {t:?}"))).collect()
        })?;
        check(!seeds.is_empty(), "run.seeds", "must not be empty")?;
        let rep_default = match experiment {
            CiCoverage => 1000,
            DeltaSweep => 200,
            _ => 0,
        };
        let replications = r.u64("run.replications", rep_default)?;
        check(replications != 1, "run.replications", "use 0 (single run) or at least 2")?;
        let c = r.f64("run.C", 1.5)?;
        check(c > 1.0, "run.C", "must exceed 1")?;
        let alpha = r.f64("run.alpha", 0.05)?;
        check(alpha > 0.0 && alpha < 1.0, "run.alpha", "must lie in (0, 1)")?;
        let epsilon = r.f64("run.epsilon", 0.05)?;
        check(epsilon > 0.0 && epsilon < 1.0, "run.epsilon", "must lie in (0, 1)")?;
        let bound = r.bool("run.bound", false)?;
        check(!bound || matches!(experiment, TwoTail | CiCoverage | DeltaSweep), "run.bound", "the discrepancy bound is only available for two-tail experiments")?;
        let max_points = r.u64("run.max_points", 1000)? as usize;
        check(max_points >= 1, "run.max_points", "must be at least 1")?;
        let oracle_n = r.u64("run.oracle_n", 0)?;
        check(oracle_n == 0 || oracle_n >= 2, "run.oracle_n", "use 0 (none) or at least 2")?;
        let out = raw.get("output.out").map(PathBuf::from);
        let threads = r.u64("output.threads", 0)? as usize;

        Ok(ExperimentConfig {
            experiment,
            m,
            mu_a,
            sigma_a,
            rate_b,
            sigma,
            mean,
            a,
            horizon,
            gamma,
            k_tail,
            set,
            estimators,
            n,
            n_scale,
            seeds,
            replications,
            c,
            alpha,
            epsilon,
            bound,
            max_points,
            oracle_n,
            out,
            threads,
        })
    }

    /// Values of the swept parameter, as `(bare key, values)`.
    fn sweep(&self) -> (&'static str, Vec<f64>) {
        match self.experiment {
            Experiment::IidSum => ("m", self.m.iter().map(|&m| m as f64).collect()),
            Experiment::Overshoot | Experiment::CustomPolyhedral => ("sigma", self.sigma.clone()),
            _ => ("gamma", self.gamma.clone()),
        }
    }

    /// Single-valued configurations in output order: sweep value, then
    /// estimator.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let (_, values) = self.sweep();
        let mut out = Vec::new();
        for (i, _) in values.iter().enumerate() {
            for e in &self.estimators {
                let mut c = self.clone();
                match self.experiment {
                    Experiment::IidSum => c.m = vec![self.m[i]],
                    Experiment::Overshoot | Experiment::CustomPolyhedral => c.sigma = vec![self.sigma[i]],
                    _ => c.gamma = vec![self.gamma[i]],
                }
                c.estimators = vec![*e];
                out.push(c);
            }
        }
        out
    }

    /// Sample size for a single-valued configuration.
    pub fn cell_n(&self) -> u64 {
        match self.n_scale {
            Some(s) => (s * self.gamma[0] * self.gamma[0]).ceil().max(2.0) as u64,
            None => self.n,
        }
    }

    /// `key=value;...` covering everything that affects results. Parsing it
    /// back yields a configuration with the same canonical form.
    pub fn canonical(&self) -> String {
        let mut parts: Vec<(&'static str, String)> = Vec::new();
        let list_f = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut push = |path: &'static str, v: String| parts.push((path, v));
        push("experiment.name", self.experiment.name().into());
        for &path in self.experiment.keys() {
            let v = match path {
                "model.m" => self.m.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
                "model.mu_a" => self.mu_a.to_string(),
                "model.sigma_a" => self.sigma_a.to_string(),
                "model.rate_b" => self.rate_b.to_string(),
                "model.sigma" => list_f(&self.sigma),
                "model.mean" => match &self.mean {
                    Some(m) => list_f(m),
                    None => continue,
                },
                "set.a" => self.a.to_string(),
                "set.T" => self.horizon.to_string(),
                "set.gamma" => list_f(&self.gamma),
                "set.k_tail" => self.k_tail.to_string(),
                "set.set_file" => match &self.set {
                    Some(SetSource::File(p)) => p.display().to_string(),
                    _ => continue,
                },
                "set.synthetic" => match &self.set {
                    Some(SetSource::Synthetic(_)) => "true".into(),
                    _ => continue,
                },
                "set.synthetic_dim" | "set.synthetic_pieces" | "set.synthetic_i0" | "set.synthetic_seed" => match &self.set {
                    Some(SetSource::Synthetic(s)) => match path {
                        "set.synthetic_dim" => s.dim.to_string(),
                        "set.synthetic_pieces" => s.pieces.to_string(),
                        "set.synthetic_i0" => s.i0.to_string(),
                        _ => s.seed.to_string(),
                    },
                    _ => continue,
                },
                _ => unreachable!(),
            };
            push(path, v);
        }
        let mut kinds: Vec<&str> = Vec::new();
        let mut ks: Vec<String> = Vec::new();
        for e in &self.estimators {
            if !kinds.contains(&e.kind()) {
                kinds.push(e.kind());
            }
            if let Estimator::IsK(k) = e {
                ks.push(match k {
                    KChoice::Auto => "auto".into(),
                    KChoice::Fixed(k) => k.to_string(),
                });
            }
        }
        push("estimator.kind", kinds.join(","));
        if !ks.is_empty() {
            push("estimator.k", ks.join(","));
        }
        push("run.n", self.n.to_string());
        if let Some(s) = self.n_scale {
            push("run.n_scale", s.to_string());
        }
        push("run.seeds", self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
        push("run.replications", self.replications.to_string());
        push("run.C", self.c.to_string());
        push("run.alpha", self.alpha.to_string());
        push("run.epsilon", self.epsilon.to_string());
        push("run.bound", self.bound.to_string());
        push("run.max_points", self.max_points.to_string());
        if self.experiment == Experiment::CustomPolyhedral {
            push("run.oracle_n", self.oracle_n.to_string());
        }
        parts.iter().map(|(p, v)| format!("{}={v}", bare(p))).collect::<Vec<_>>().join(";")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn sections_and_defaults() {
        let c = cfg("[experiment]\nname = overshoot\n[model]\nsigma = 0.2, 0.3\n[estimator]\nkind = is_k\nk = 1..3\n").unwrap();
        assert_eq!(c.horizon, 10);
        assert_eq!(c.a, 3.3);
        assert_eq!(c.n, 100_000);
        assert_eq!(c.c, 1.5);
        assert_eq!(c.estimators, (1..=3).map(|k| Estimator::IsK(KChoice::Fixed(k))).collect::<Vec<_>>());
        let cells = c.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[4].sigma, vec![0.3]);
        assert_eq!(cells[4].estimators, vec![Estimator::IsK(KChoice::Fixed(2))]);
    }

    #[test]
    fn field_paths_in_errors() {
        let err = cfg("experiment = overshoot\n[set]\nT = 0\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "set.T"), "{err}");
        let err = cfg("experiment = overshoot\ngamma = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "set.gamma"), "{err}");
        let err = cfg("experiment = iid_sum\nestimator = is_all\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "estimator.kind"));
        let err = cfg("[run]\nT = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "run.T"));
        let err = cfg("experiment = two_tail\nn = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(cfg("experiment = custom_polyhedral\n").is_err());
        assert!(cfg("experiment = nope\n").is_err());
        assert!(cfg("experiment = two_tail\nwhat = 1\n").is_err());
    }

    #[test]
    fn k_specs() {
        assert_eq!(parse_k_spec("auto").unwrap(), vec![KChoice::Auto]);
        assert_eq!(parse_k_spec("4").unwrap(), vec![KChoice::Fixed(4)]);
        assert_eq!(parse_k_spec("1, 3").unwrap(), vec![KChoice::Fixed(1), KChoice::Fixed(3)]);
        assert_eq!(parse_k_spec("2..4").unwrap().len(), 3);
        assert!(parse_k_spec("0").is_err());
        assert!(parse_k_spec("5..2").is_err());
        assert!(parse_k_spec("x").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let texts = [
            "experiment = iid_sum\nm = 10,30\nestimator = alpha_hat,beta_hat\nseed = 7\n",
            "experiment = overshoot\nsigma = 0.3\nestimator = is_k\nk = 1..10\nC = inf\n",
            "experiment = delta_sweep\ngamma = 2,3\nn_scale = 1000\nestimator = is_k,crude\nk = 1\n",
            "experiment = custom_polyhedral\nsynthetic = true\nsynthetic_i0 = 3\nmean = 0,0\n",
        ];
        for t in texts {
            let c = cfg(t).unwrap();
            for cell in c.cells() {
                let again = ExperimentConfig::from_raw(&RawConfig::parse_params(&cell.canonical()).unwrap()).unwrap();
                assert_eq!(again.canonical(), cell.canonical());
                assert_eq!(again.hash(), cell.hash());
                assert_eq!(again.hash().len(), 16);
            }
        }
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse("experiment = two_tail\n[set]\ngamma = 3\n").unwrap();
        let mut cli = RawConfig::default();
        cli.set("gamma", "5").unwrap();
        cli.set_pair("set.k_tail=3").unwrap();
        raw.merge(&cli);
        let c = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(c.gamma, vec![5.0]);
        assert_eq!(c.k_tail, 3.0);
    }
}
