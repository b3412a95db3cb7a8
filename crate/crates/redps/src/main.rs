use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redps::config::{Experiment, ExperimentConfig, RawConfig};
use redps::error::{CliError, CliResult};
use redps::experiments::{gaussian_problem, oracle_for, run_experiment};
use redps::parallel::Runner;
use redps::profile::{format_profile, profile_csv_rows, report_efficiency_profile};
use redps::report::{sci, summary, write_csv};
use redps_core::dominating::verify_dominating_set;
use redps_core::find_dominating_set;
use redps_core::rng::block_rng;

#[derive(Parser)]
#[command(name = "redps", version, about = "Rare-event probability estimation with dominating-point importance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for dominating points and print them.
    Dominating {
        #[command(flatten)]
        common: Common,
        /// Hit-and-run probes per piece used to check the cover (0 skips the check).
        #[arg(long, default_value_t = 0)]
        probes: usize,
    },
    /// Run an experiment and write one CSV row per cell.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Print reference probabilities.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Discrepancy, relative error and efficiency ratio across a gamma grid.
    Profile {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines under `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Configuration as `key=value;key=value`, e.g. copied from a CSV row.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    /// `auto`, a single k, a list `1,3,5` or a range `1..10`.
    #[arg(long)]
    k: Option<String>,
    /// Stopping threshold on consecutive rate ratios.
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "k-tail")]
    k_tail: Option<f64>,
    /// crude, is_k, is_all, alpha_hat, beta_hat, or a comma-separated list.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long = "set-file")]
    set_file: Option<PathBuf>,
    /// Report the discrepancy bound; exits with status 4 when it is vacuous.
    #[arg(long)]
    bound: bool,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn raw(&self, default_experiment: Option<&str>) -> CliResult<RawConfig> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        if let Some(p) = &self.params {
            raw.merge(&RawConfig::parse_params(p)?);
        }
        let mut cli = RawConfig::default();
        let mut put = |key: &str, v: Option<String>| -> CliResult<()> {
            match v {
                Some(v) => cli.set(key, v),
                None => Ok(()),
            }
        };
        put("experiment", self.experiment.clone())?;
        put("seeds", self.seed.map(|v| v.to_string()))?;
        put("n", self.n.map(|v| v.to_string()))?;
        put("k", self.k.clone())?;
        put("C", self.c.map(|v| v.to_string()))?;
        put("alpha", self.alpha.map(|v| v.to_string()))?;
        put("epsilon", self.epsilon.map(|v| v.to_string()))?;
        put("replications", self.replications.map(|v| v.to_string()))?;
        put("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        put("threads", self.threads.map(|v| v.to_string()))?;
        put("m", self.m.clone())?;
        put("a", self.a.map(|v| v.to_string()))?;
        put("T", self.horizon.map(|v| v.to_string()))?;
        put("sigma", self.sigma.clone())?;
        put("gamma", self.gamma.clone())?;
        put("k_tail", self.k_tail.map(|v| v.to_string()))?;
        put("estimator", self.estimator.clone())?;
        put("set_file", self.set_file.as_ref().map(|p| p.display().to_string()))?;
        put("bound", self.bound.then(|| "true".to_string()))?;
        for s in &self.sets {
            cli.set_pair(s)?;
        }
        raw.merge(&cli);
        if let Some(e) = default_experiment {
            if !raw.contains("experiment") {
                raw.set("experiment", e)?;
            }
        }
        Ok(raw)
    }

    fn config(&self, default_experiment: Option<&str>) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_raw(&self.raw(default_experiment)?)
    }
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout()),
    })
}

fn cmd_run(common: &Common) -> CliResult<()> {
    let cfg = common.config(None)?;
    let runner = Runner::new(cfg.threads)?;
    let cells = run_experiment(&cfg, &runner)?;
    print!("{}", summary(&cells));
    if cfg.out.is_none() {
        println!();
    }
    write_csv(output(&cfg.out)?, &cells)
}

fn cmd_dominating(common: &Common, probes: usize) -> CliResult<()> {
    let cfg = common.config(None)?;
    if cfg.experiment == Experiment::IidSum {
        return Err(CliError::config("experiment.name", "the iid_sum experiment has analytic tilts; use a Gaussian experiment"));
    }
    let mut rows: Vec<Vec<String>> = vec![["experiment", "params", "index", "rate", "rate_ratio", "point", "tilt", "stop_reason"].map(String::from).to_vec()];
    let mut stdout = io::stdout().lock();
    let mut seen = Vec::new();
    for cell in cfg.cells() {
        let params = cell.canonical();
        let (model, set) = gaussian_problem(&cell)?;
        let key = format!("{:?}", (cell.sigma.clone(), cell.gamma.clone()));
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let dom = find_dominating_set(&model, &set, cell.c, cell.max_points)?;
        writeln!(stdout, "[dominating] {} C={} points={} stop={} stopped_early={} exhausted={}", cell.experiment, cell.c, dom.len(), dom.stop_reason(), dom.stopped_early, dom.exhausted)?;
        writeln!(stdout, "  params = {params}")?;
        if let Some(r) = dom.rejected_rate {
            writeln!(stdout, "  rejected candidate rate = {}", sci(r))?;
        }
        let mut prev: Option<f64> = None;
        for (i, p) in dom.points.iter().enumerate() {
            let ratio = prev.map(|q| p.rate / q);
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
            writeln!(stdout, "  a_{:<3} rate={} ratio={} point=[{}]", i + 1, sci(p.rate), ratio.map(sci).unwrap_or_else(|| "-".into()), fmt(&p.point))?;
            rows.push(vec![
                cell.experiment.name().into(),
                params.clone(),
                (i + 1).to_string(),
                sci(p.rate),
                ratio.map(sci).unwrap_or_default(),
                p.point.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(" "),
                p.tilt.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(" "),
                dom.stop_reason().into(),
            ]);
            prev = Some(p.rate);
        }
        if probes > 0 {
            let mut rng = block_rng(cell.seeds[0], 0);
            let rep = verify_dominating_set(&dom, &set, probes, &mut rng)?;
            writeln!(stdout, "  cover check: {} probes, {} uncovered, cover holds: {}", rep.probes, rep.counterexample_count, rep.cover_holds())?;
        }
    }
    drop(stdout);
    if let Some(p) = &cfg.out {
        let mut w = csv::Writer::from_writer(output(&Some(p.clone()))?);
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_oracle(common: &Common) -> CliResult<()> {
    let cfg = common.config(None)?;
    let runner = Runner::new(cfg.threads)?;
    let mut seen = Vec::new();
    for cell in cfg.cells() {
        let key = format!("{:?}", (cell.m.clone(), cell.sigma.clone(), cell.gamma.clone()));
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let (k, v) = match cell.experiment {
            Experiment::IidSum => ("m", cell.m[0] as f64),
            Experiment::Overshoot | Experiment::CustomPolyhedral => ("sigma", cell.sigma[0]),
            _ => ("gamma", cell.gamma[0]),
        };
        match oracle_for(&cell, &runner)? {
            Some(o) => println!("[oracle] {} {k}={v} p={} method={} abs_err={} rel_err={}", cell.experiment, sci(o.p_exact), o.method, sci(o.est_abs_error), sci(o.rel_error())),
            None => println!("[oracle] {} {k}={v} none (set oracle_n for a crude Monte Carlo reference)", cell.experiment),
        }
    }
    Ok(())
}

fn cmd_profile(common: &Common) -> CliResult<()> {
    let mut raw = common.raw(Some("delta_sweep"))?;
    let probe = ExperimentConfig::from_raw(&raw)?;
    if probe.n_scale.is_none() && common.n.is_none() && probe.experiment == Experiment::DeltaSweep {
        raw.set("n_scale", "1000")?;
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let runner = Runner::new(cfg.threads)?;
    let cells = run_experiment(&cfg, &runner)?;
    let profiles = report_efficiency_profile(&cells)?;
    print!("{}", format_profile(&profiles));
    if let Some(p) = &cfg.out {
        let mut w = csv::Writer::from_writer(output(&Some(p.clone()))?);
        for r in profile_csv_rows(&profiles) {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dominating { common, probes } => cmd_dominating(common, *probes),
        Command::Run { common } => cmd_run(common),
        Command::Oracle { common } => cmd_oracle(common),
        Command::Profile { common } => cmd_profile(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("redps: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
