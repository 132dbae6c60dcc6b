use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluctlab::cli::{run, Command};
use fluctlab::config::ExperimentConfig;
use fluctlab::Error;

#[derive(Parser)]
#[command(name = "fluctlab", version, about = "Exclusion process in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the exclusion process and record final densities.
    Simulate(Opts),
    /// Lowest eigenvalues of the generator.
    Spectrum(Opts),
    /// Fit the effective coefficients.
    Homogenize(Opts),
    /// L² and energy gaps against the homogenized solution.
    Energy(Opts),
    /// Fluctuation field, martingale and quadratic variation.
    Fluct(Opts),
    /// Empirical quadratic variation against its expectation.
    QvCheck(Opts),
    /// Boltzmann-Gibbs statistic and equivalence of ensembles.
    BgCheck(Opts),
    /// Sample the Ornstein-Uhlenbeck limit.
    OuSimulate(Opts),
    /// Compare an empirical field file with the OU limit.
    OuCompare(Opts),
    /// Run the acceptance criteria.
    Accept(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override any config key, e.g. `--set env.kind=iid`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long = "N", allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long = "T", allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    replicas: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long = "N-list", allow_hyphen_values = true)]
    n_list: Option<String>,
    #[arg(long = "G-set", allow_hyphen_values = true)]
    g_set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    empirical: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let flags = [
            ("N", &self.n),
            ("d", &self.d),
            ("rho", &self.rho),
            ("b", &self.b),
            ("T", &self.t),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("K", &self.k),
            ("lambda", &self.lambda),
            ("N-list", &self.n_list),
            ("G-set", &self.g_set),
            ("f", &self.f),
            ("empirical", &self.empirical),
        ];
        out.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))),
        );
        Ok(out)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::Spectrum(o) => (Command::Spectrum, o),
        Cmd::Homogenize(o) => (Command::Homogenize, o),
        Cmd::Energy(o) => (Command::Energy, o),
        Cmd::Fluct(o) => (Command::Fluct, o),
        Cmd::QvCheck(o) => (Command::QvCheck, o),
        Cmd::BgCheck(o) => (Command::BgCheck, o),
        Cmd::OuSimulate(o) => (Command::OuSimulate, o),
        Cmd::OuCompare(o) => (Command::OuCompare, o),
        Cmd::Accept(o) => (Command::Accept, o),
    };
    let overrides = match opts.overrides() {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let config = match ExperimentConfig::load(opts.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(Error::Config(problems)) => {
            for p in problems {
                eprintln!("config error: {p}");
            }
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config, command, &opts.out) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
