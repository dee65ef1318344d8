//! `qsdc`: seeded experiment runner for the k-cycle walk communication
//! simulator.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! verification fails (layout mismatch, message not delivered intact,
//! Monte Carlo outside 3σ of its oracle).

mod commands;
mod output;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "qsdc", version, about = "k-cycle quantum walk direct communication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Return probability P(initial position) for t = 0..steps
    Walk,
    /// Recurrence period, P(l_min) and Eve's information for every tabulated cycle
    Table1,
    /// Return probability and coin-position mutual information under noise
    NoiseSweep,
    /// Joint distribution P(l, t) of the measured OAM and the step count
    Joint,
    /// One protocol run with its transcript, or a batch summary when --trials > 1
    Protocol,
    /// Eavesdropping simulations and closed-form security figures
    Attack,
    /// Compare an optical layout with the walk step operator
    VerifyOptics {
        /// Layout file, or `canonical` / `sorter-bank`
        layout: Option<String>,
    },
}

/// Every flag can also be given as a `key=value` line in the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// key=value configuration file; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cycle length
    #[arg(long, global = true)]
    k: Option<String>,
    /// Coin parameter, `table1` for the tabulated value of k, or `table1:K`
    #[arg(long, global = true)]
    rho: Option<String>,
    /// Initial coin angle
    #[arg(long, global = true)]
    chi: Option<String>,
    /// none | amplitude-damping | depolarizing
    #[arg(long, global = true)]
    noise: Option<String>,
    /// per-element | per-step
    #[arg(long, global = true)]
    placement: Option<String>,
    /// Noise strength; a comma-separated list for noise-sweep
    #[arg(long, global = true)]
    gamma: Option<String>,
    /// Largest step count
    #[arg(long, global = true)]
    steps: Option<String>,
    /// Photons per protocol run (multiple of 4)
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    trials: Option<String>,
    /// Repetitions for majority voting (odd)
    #[arg(long, global = true)]
    reps: Option<String>,
    /// Output file instead of stdout
    #[arg(long, global = true)]
    out: Option<String>,
    /// none | intercept-resend | tamper
    #[arg(long, global = true)]
    eve: Option<String>,
    /// Photons tampered with by Eve
    #[arg(long, global = true)]
    x: Option<String>,
    /// Text sent by the protocol
    #[arg(long, global = true)]
    message: Option<String>,
    /// Step window of the joint distribution: period (1..t_r-1) | protocol (2..t_r)
    #[arg(long, global = true)]
    window: Option<String>,
    /// Operator a layout is compared with: step | identity | shift | coin
    #[arg(long, global = true)]
    reference: Option<String>,
    /// Protocol restarts allowed before giving up
    #[arg(long, global = true)]
    attempts: Option<String>,
}

impl Flags {
    fn overlay(&self, map: &mut BTreeMap<String, String>) {
        let pairs = [
            ("k", &self.k),
            ("rho", &self.rho),
            ("chi", &self.chi),
            ("noise", &self.noise),
            ("placement", &self.placement),
            ("gamma", &self.gamma),
            ("steps", &self.steps),
            ("n", &self.n),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("reps", &self.reps),
            ("out", &self.out),
            ("eve", &self.eve),
            ("x", &self.x),
            ("message", &self.message),
            ("window", &self.window),
            ("reference", &self.reference),
            ("attempts", &self.attempts),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<commands::Status> {
    let mut map = match &cli.flags.config {
        Some(path) => settings::load_config(path)?,
        None => BTreeMap::new(),
    };
    cli.flags.overlay(&mut map);
    if let Command::VerifyOptics { layout: Some(l) } = &cli.command {
        map.insert("layout".into(), l.clone());
    }
    let s = settings::Settings::resolve(&map)?;
    match cli.command {
        Command::Walk => commands::walk(&s),
        Command::Table1 => commands::table1(&s),
        Command::NoiseSweep => commands::noise_sweep(&s),
        Command::Joint => commands::joint(&s),
        Command::Protocol => commands::protocol(&s),
        Command::Attack => commands::attack(&s),
        Command::VerifyOptics { .. } => commands::verify_optics(&s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::VerificationFailed(why)) => {
            eprintln!("verification failed: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
