//! The `mbsim` command line: argument parsing and dispatch.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on a usage error.

pub mod experiments;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mbsim_core::audit::best_response_gain_parallel;
use mbsim_core::ironing::{build_curve, iron, DEFAULT_GRID};
use mbsim_core::sim::run_trials_parallel;
use mbsim_core::{
    optimal_utility, AuditConfig, DistributionSpec, Error, FiniteInstance, MarketConfig, MarketSpec, MechanismId,
};
use serde::Serialize;

use experiments::{run_experiment, ExperimentId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mbsim", version, about = "Money-burning mechanisms for unit-demand bidders")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Emit CSV instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long, global = true, env = "MBSIM_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimates of utility, welfare and revenue.
    Simulate(SimulateArgs),
    /// Empirical best-response audit of one bidder.
    BicAudit(AuditArgs),
    /// Utility-optimal BIC mechanism on a finite type space.
    OptLp(OptLpArgs),
    /// Virtual values and their ironed version on a quantile grid (CSV).
    Iron(IronArgs),
    /// Run a pinned experiment and check its bound.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Mechanism name; repeat for several. `single-dim-optimal` uses --dist as its prior.
    #[arg(long = "mechanism", required = true)]
    pub mechanisms: Vec<String>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// e.g. uniform:0,1  exp:1  pareto:3,1  discrete:0@0.5,1@0.5
    #[arg(long)]
    pub dist: DistributionSpec,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub mechanism: String,
    /// Market JSON file; otherwise an i.i.d. market from --n, --m and --dist.
    #[arg(long, conflicts_with_all = ["n", "m", "dist"])]
    pub instance: Option<PathBuf>,
    #[arg(long, requires_all = ["m", "dist"])]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub dist: Option<DistributionSpec>,
    #[arg(long, default_value_t = 0)]
    pub bidder: usize,
    /// Comma-separated values, one per item.
    #[arg(long, value_delimiter = ',', required = true)]
    pub true_type: Vec<f64>,
    /// A candidate misreport (comma-separated); repeat for several.
    #[arg(long = "report", value_parser = parse_vector)]
    pub reports: Vec<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Exit 1 when some misreport gains with a z-score above this.
    #[arg(long)]
    pub max_z: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptLpArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Require every item to be allocated at every profile.
    #[arg(long)]
    pub full_allocation: bool,
}

#[derive(Debug, Args)]
pub struct IronArgs {
    #[arg(long)]
    pub dist: DistributionSpec,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub id: ExperimentId,
    /// Override the pinned trial count (per configuration).
    #[arg(long)]
    pub trials: Option<u64>,
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Stall { .. } => EXIT_CHECK_FAILED,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_USAGE, message: e.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return e.exit_code();
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = &cli.global;
    let threads = g.threads as usize;
    match &cli.command {
        Command::Simulate(a) => {
            let mechanisms = a
                .mechanisms
                .iter()
                .map(|name| MechanismId::parse_with(name, &a.dist))
                .collect::<mbsim_core::Result<Vec<_>>>()?;
            let config = MarketConfig {
                n: a.n,
                m: a.m,
                dist: a.dist.clone(),
                seed: g.seed,
                trials: a.trials,
            };
            let report = run_trials_parallel(&config, &mechanisms, threads)?;
            let text = if g.csv { report.to_csv() } else { to_json(&report) };
            out.write_all(text.as_bytes())?;
            Ok(if report.checks.total() == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::BicAudit(a) => {
            let market = match (&a.instance, a.n, a.m, &a.dist) {
                (Some(path), ..) => MarketSpec::from_json(&read_file(path)?)?,
                (None, Some(n), Some(m), Some(dist)) => MarketSpec::iid(n, m, dist),
                _ => {
                    return Err(Failure {
                        code: EXIT_USAGE,
                        message: "give --instance or all of --n, --m and --dist".into(),
                    })
                }
            };
            let first_dist = match market.bidders.first() {
                Some(mbsim_core::BidderPrior::Independent { items }) => items.first().cloned(),
                _ => None,
            };
            let mechanism = match first_dist {
                Some(d) => MechanismId::parse_with(&a.mechanism, &d)?,
                None => a.mechanism.parse()?,
            };
            let config = AuditConfig {
                mechanism,
                market,
                bidder: a.bidder,
                true_type: a.true_type.clone(),
                reports: a.reports.clone(),
                trials: a.trials,
                seed: g.seed,
            };
            let report = best_response_gain_parallel(&config, threads)?;
            if g.csv {
                let mut s = String::from("report,utility,utility_se,gain,gain_se,z\n");
                for c in &report.candidates {
                    let r: Vec<String> = c.report.iter().map(|v| v.to_string()).collect();
                    s.push_str(&format!(
                        "\"{}\",{},{},{},{},{}\n",
                        r.join(","),
                        c.utility.mean,
                        c.utility.stderr,
                        c.gain.mean,
                        c.gain.stderr,
                        c.z
                    ));
                }
                out.write_all(s.as_bytes())?;
            } else {
                out.write_all(to_json(&report).as_bytes())?;
            }
            let gain_ok = a.max_z.map_or(true, |z| !(report.best.gain.mean > 0.0 && report.best.z > z));
            Ok(if gain_ok && report.ir_violations == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::OptLp(a) => {
            let inst = FiniteInstance::from_json(&read_file(&a.instance)?)?;
            let sol = optimal_utility(&inst, a.full_allocation)?;
            if g.csv {
                let mut s = String::from("profile,prob,bidder,item,probability,payment\n");
                for (k, p) in sol.profiles.iter().enumerate() {
                    for (i, row) in p.allocation.iter().enumerate() {
                        for (j, x) in row.iter().enumerate() {
                            s.push_str(&format!("{k},{},{i},{j},{x},{}\n", p.prob, p.payments[i]));
                        }
                    }
                    for (j, u) in p.unallocated.iter().enumerate() {
                        s.push_str(&format!("{k},{},unallocated,{j},{u},\n", p.prob));
                    }
                }
                out.write_all(s.as_bytes())?;
            } else {
                out.write_all(to_json(&sol).as_bytes())?;
            }
            Ok(if sol.checks_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Iron(a) => {
            let r = iron(&build_curve(&a.dist, a.grid)?)?;
            let mut s = String::from("q_mid,theta,ironed_theta\n");
            for (k, (t, it)) in r.theta.iter().zip(&r.ironed_theta).enumerate() {
                let q = 0.5 * (r.grid[k] + r.grid[k + 1]);
                s.push_str(&format!("{q},{t},{it}\n"));
            }
            out.write_all(s.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Experiment(a) => {
            let report = run_experiment(a.id, g.seed, a.trials, threads)?;
            let text = if g.csv { report.table.to_csv() } else { to_json(&report) };
            out.write_all(text.as_bytes())?;
            Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}
