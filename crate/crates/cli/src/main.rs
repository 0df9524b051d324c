//! `rcpolar`: construct RCP codes, design HARQ schemes and simulate them.

mod config;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use rcpolar::channel::channel_llr_distribution;
use rcpolar::design::{design_scheme, DesignOptions};
use rcpolar::rcp::construct_rcp;
use rcpolar::sim::{bound_check, run_campaign, simulate_bler, write_report_csv, CampaignOptions};
use rcpolar::ChannelParams;
use serde::Serialize;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Bumped on any breaking change to the emitted files.
const SCHEMA_VERSION: u32 = 1;
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<rcpolar::Error> for CliError {
    fn from(e: rcpolar::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "rcpolar", version, about = "Rate-compatible polar codes for incremental-redundancy HARQ")]
struct Cli {
    /// TOML experiment file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for design and simulation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one (N, K, M) code: code.json and reliability.csv.
    Construct(Params),
    /// Greedy HARQ design per SNR point: design.json.
    Design(Params),
    /// Design and simulate the protocol per SNR point: simulate.json and simulate.csv.
    Simulate(Params),
    /// Monte Carlo BLER of a fixed (N, K, M) code next to its union-bound estimate: bler.csv.
    Bler(Params),
}

#[derive(Args, Default)]
struct Params {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Symbol SNR Es/N0 in dB; comma-separated for a grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    /// Noise standard deviation, instead of --snr-db (construct only).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Pin the first transmission to exactly the M polar bits.
    #[arg(long)]
    force_n1_equals_m: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, p) = match cli.command {
        Command::Construct(p) => ("construct", p),
        Command::Design(p) => ("design", p),
        Command::Simulate(p) => ("simulate", p),
        Command::Bler(p) => ("bler", p),
    };
    let file = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let flags = ExperimentConfig {
        k: p.k,
        m: p.m,
        n: p.n,
        t_max: p.t_max,
        q: p.q,
        snr_db: p.snr_db,
        sigma: p.sigma,
        trials: p.trials,
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
        force_n1_equals_m: p.force_n1_equals_m,
    };
    let cfg = file.overridden_by(flags);
    cfg.validate_threads()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let out = Output { dir: cfg.out_dir(), command: name, config: &cfg };
    match name {
        "construct" => cmd_construct(&cfg, &out),
        "design" => cmd_design(&cfg, &out),
        "simulate" => cmd_simulate(&cfg, &out),
        _ => cmd_bler(&cfg, &out),
    }
}

/// Writes files carrying the tool version and the resolved configuration.
struct Output<'a> {
    dir: PathBuf,
    command: &'a str,
    config: &'a ExperimentConfig,
}

impl Output<'_> {
    fn path(&self, file: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir)?;
        Ok(self.dir.join(file))
    }

    fn json<T: Serialize>(&self, file: &str, result: &T) -> Result<PathBuf, CliError> {
        let doc = json!({
            "tool": "rcpolar",
            "version": VERSION,
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "result": result,
        });
        let path = self.path(file)?;
        let mut text = serde_json::to_string_pretty(&doc).map_err(rcpolar::Error::from)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    fn csv(&self, file: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# rcpolar {VERSION} schema_version={SCHEMA_VERSION} command={}", self.command)?;
        let cfg = serde_json::to_string(self.config).map_err(rcpolar::Error::from)?;
        writeln!(buf, "# config {cfg}")?;
        body(&mut buf)?;
        let path = self.path(file)?;
        std::fs::write(&path, buf)?;
        Ok(path)
    }
}

fn done(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_nkm(n: usize, k: usize, m: usize) -> Result<(), CliError> {
    if k == 0 || k > m || m > n {
        return Err(usage(format!("need 1 <= k <= m <= n, got n = {n}, k = {k}, m = {m}")));
    }
    Ok(())
}

fn check_design(k: usize, t_max: usize, q: usize) -> Result<(), CliError> {
    if k == 0 || t_max == 0 || q < k {
        return Err(usage(format!("need k >= 1, t-max >= 1 and q >= k, got k = {k}, t-max = {t_max}, q = {q}")));
    }
    Ok(())
}

fn check_trials(trials: u64) -> Result<(), CliError> {
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    Ok(())
}

fn channel(snr_db: f64) -> Result<ChannelParams, CliError> {
    ChannelParams::from_snr_db(snr_db).map_err(|e| usage(e.to_string()))
}

fn cmd_construct(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let n = cfg.require(cfg.n, "n")?;
    let k = cfg.require(cfg.k, "k")?;
    let m = cfg.require(cfg.m, "m")?;
    check_nkm(n, k, m)?;
    let params = match (cfg.sigma, cfg.snr_db.as_slice()) {
        (Some(s), []) => ChannelParams::from_sigma(s).map_err(|e| usage(e.to_string()))?,
        (None, [db]) => channel(*db)?,
        (None, []) => return Err(usage("missing required parameter --snr-db or --sigma")),
        _ => return Err(usage("construct takes exactly one of --sigma or a single --snr-db")),
    };
    let c = construct_rcp(n, k, m, channel_llr_distribution::<f64>(&params))?;
    let result = json!({
        "snr_db": params.snr_db(),
        "sigma": params.sigma(),
        "code": c.code,
        "bler_estimate": c.bler.value,
    });
    let a = out.json("code.json", &result)?;
    let b = out.csv("reliability.csv", |w| c.table.write_csv(w))?;
    done(&[a, b]);
    Ok(())
}

fn cmd_design(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let k = cfg.require(cfg.k, "k")?;
    let t_max = cfg.require(cfg.t_max, "t_max")?;
    let q = cfg.require(cfg.q, "q")?;
    check_design(k, t_max, q)?;
    let grid = cfg.snr_grid()?;
    let params = grid.iter().map(|&db| channel(db)).collect::<Result<Vec<_>, _>>()?;
    let opts = DesignOptions { first_length_is_m: cfg.force_n1_equals_m };
    let mut schemes = Vec::new();
    for p in &params {
        eprintln!("design: {} dB", p.snr_db());
        let d = design_scheme(k, t_max, q, channel_llr_distribution::<f64>(p), opts)?;
        schemes.push(json!({
            "snr_db": p.snr_db(),
            "scheme": d.scheme,
            "convolutions": d.convolutions,
        }));
    }
    done(&[out.json("design.json", &schemes)?]);
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let k = cfg.require(cfg.k, "k")?;
    let t_max = cfg.require(cfg.t_max, "t_max")?;
    let q = cfg.require(cfg.q, "q")?;
    let trials = cfg.require(cfg.trials, "trials")?;
    check_design(k, t_max, q)?;
    check_trials(trials)?;
    let grid = cfg.snr_grid()?;
    let params = grid.iter().map(|&db| channel(db)).collect::<Result<Vec<_>, _>>()?;
    let opts = DesignOptions { first_length_is_m: cfg.force_n1_equals_m };
    let campaign = CampaignOptions { threads: None, progress: true };
    let mut reports = Vec::new();
    let mut entries = Vec::new();
    for (i, p) in params.iter().enumerate() {
        eprintln!("simulate: {} dB ({}/{})", p.snr_db(), i + 1, params.len());
        let d = design_scheme(k, t_max, q, channel_llr_distribution::<f64>(p), opts)?;
        // one seed stream per grid point
        let seed = cfg.seed().wrapping_add(i as u64);
        let r = run_campaign(&d.scheme, p, trials, seed, campaign)?;
        entries.push(json!({
            "snr_db": p.snr_db(),
            "seed": seed,
            "scheme": d.scheme,
            "report": r,
            "bounds": bound_check(&r),
        }));
        reports.push(r);
    }
    let a = out.json("simulate.json", &entries)?;
    let b = out.csv("simulate.csv", |w| write_report_csv(w, &reports))?;
    done(&[a, b]);
    Ok(())
}

fn cmd_bler(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let n = cfg.require(cfg.n, "n")?;
    let k = cfg.require(cfg.k, "k")?;
    let m = cfg.require(cfg.m, "m")?;
    let trials = cfg.require(cfg.trials, "trials")?;
    check_nkm(n, k, m)?;
    check_trials(trials)?;
    let grid = cfg.snr_grid()?;
    let params = grid.iter().map(|&db| channel(db)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, p) in params.iter().enumerate() {
        eprintln!("bler: {} dB ({}/{})", p.snr_db(), i + 1, params.len());
        let c = construct_rcp(n, k, m, channel_llr_distribution::<f64>(p))?;
        let seed = cfg.seed().wrapping_add(i as u64);
        let e = simulate_bler(&c.code, p, trials, seed, None)?;
        rows.push((p.snr_db(), p.ebn0_db(k, n), e, c.bler.value));
    }
    let path = out.csv("bler.csv", |w| {
        writeln!(w, "snr_db,ebn0_db,n,k,m,trials,errors,bler,ci,bound")?;
        for (snr, ebn0, e, bound) in &rows {
            writeln!(
                w,
                "{snr},{ebn0},{n},{k},{m},{},{},{},{},{bound:e}",
                e.trials,
                e.count,
                e.estimate(),
                e.half_width95()
            )?;
        }
        Ok(())
    })?;
    done(&[path]);
    Ok(())
}
