//! `rdlab`: reference-state analysis of reduced open-system dynamics.
//!
//! Exit status: 0 on success or an affirmative verdict, 1 on a negative
//! verdict, 2 on any error.

mod commands;
mod io;

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use serde_json::{json, Value};

use rdlab::experiments::{CampaignConfig, ThetaGrid};
use rdlab::tol::Tolerances;

use commands::{AssignmentSource, UnitarySource, Verdict};

#[derive(Debug, Parser)]
#[command(name = "rdlab", version, about = "Reference states, Markov tests and reduced dynamics")]
struct Cli {
    /// Choi / state positivity tolerance.
    #[arg(long, global = true, value_name = "EPS")]
    tol_psd: Option<f64>,

    /// Conditional-mutual-information threshold for the Markov verdict.
    #[arg(long, global = true, value_name = "EPS")]
    tol_cmi: Option<f64>,

    /// Write the JSON report here instead of stdout.
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Markov verdict for a tripartite reference state (dims [m, d_S, d_E]).
    MarkovTest {
        input: PathBuf,
        /// Same as --tol-cmi.
        #[arg(long, value_name = "EPS")]
        tol: Option<f64>,
    },
    /// Signed operator-sum decomposition of a map.
    Opsum { input: PathBuf },
    /// Hermiticity, trace preservation and complete positivity of a map.
    Classify { input: PathBuf },
    /// Steer a reference state with an operator on the flag register.
    Steer {
        reference: PathBuf,
        #[arg(long)]
        operator: PathBuf,
        /// Allow any operator and skip normalization.
        #[arg(long)]
        generalized: bool,
    },
    /// Reduced dynamics Tr_E ∘ Ad_U ∘ Λ of an assignment.
    #[command(group(ArgGroup::new("source").required(true).args(["pairs", "config"])))]
    #[command(group(ArgGroup::new("dynamics").required(true).args(["unitary", "theta"])))]
    Reduce {
        /// Paired basis file defining the assignment.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Two-qubit scenario config defining the assignment.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        unitary: Option<PathBuf>,
        /// Partial-swap angle (two-qubit assignments only).
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
    },
    /// Reduced-dynamics positivity along the partial-swap family.
    SweepTheta {
        #[arg(long)]
        config: PathBuf,
        /// Destination of the per-angle CSV.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Reduced-dynamics positivity along exp(-i t Σ σ_i⊗σ_i).
    CommutingFamily {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t_start: f64,
        #[arg(long, default_value_t = 2.0 * PI, allow_hyphen_values = true)]
        t_stop: f64,
        #[arg(long, default_value_t = 30)]
        t_count: usize,
    },
    /// Randomized Markov ⇔ CP campaign over random references.
    Campaign {
        #[arg(long, env = "RDLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        instances: usize,
        /// Haar unitaries per Markov reference.
        #[arg(long, default_value_t = 10)]
        unitaries: usize,
        /// Haar unitaries tried per non-Markov reference after the θ family.
        #[arg(long, default_value_t = 200)]
        search: usize,
        /// Comma-separated d_SxD_E pairs, cycled over instances.
        #[arg(long, default_value = "2x2,2x3,3x2,3x3")]
        dims: String,
    },
    /// Subspace split and U-consistency of an operator subspace.
    Consistency {
        basis: PathBuf,
        #[arg(long)]
        unitary: Option<PathBuf>,
    },
}

fn parse_dims(list: &str) -> Result<Vec<(usize, usize)>> {
    list.split(',')
        .map(|pair| {
            let (s, e) = pair
                .trim()
                .split_once('x')
                .with_context(|| format!("bad dims entry {pair:?}, expected e.g. 2x3"))?;
            let (s, e): (usize, usize) = (s.parse()?, e.parse()?);
            if s < 2 || e < 1 {
                bail!("dims entry {pair:?}: need d_S >= 2 and d_E >= 1");
            }
            Ok((s, e))
        })
        .collect()
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::MarkovTest { .. } => "markov-test",
        Command::Opsum { .. } => "opsum",
        Command::Classify { .. } => "classify",
        Command::Steer { .. } => "steer",
        Command::Reduce { .. } => "reduce",
        Command::SweepTheta { .. } => "sweep-theta",
        Command::CommutingFamily { .. } => "commuting-family",
        Command::Campaign { .. } => "campaign",
        Command::Consistency { .. } => "consistency",
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let defaults = Tolerances::default();
    let tol_cmi = match &cli.command {
        Command::MarkovTest { tol: Some(t), .. } => Some(*t),
        _ => cli.tol_cmi,
    };
    let tols = Tolerances {
        psd: cli.tol_psd.unwrap_or(defaults.psd),
        cmi: tol_cmi.unwrap_or(defaults.cmi),
    };
    for (name, v) in [("psd", tols.psd), ("cmi", tols.cmi)] {
        if !(v.is_finite() && v >= 0.0) {
            bail!("tolerance {name} must be a finite non-negative number, got {v}");
        }
    }
    let mut overridden = Vec::new();
    if cli.tol_psd.is_some() {
        overridden.push("psd");
    }
    if tol_cmi.is_some() {
        overridden.push("cmi");
    }
    let mut metadata = json!({
        "tool": "rdlab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "tolerances": tols,
        "overridden": overridden,
    });

    let out = match &cli.command {
        Command::MarkovTest { input, .. } => commands::markov_test(input, &tols)?,
        Command::Opsum { input } => commands::opsum(input)?,
        Command::Classify { input } => commands::classify(input, &tols)?,
        Command::Steer {
            reference,
            operator,
            generalized,
        } => commands::steer_cmd(reference, operator, *generalized)?,
        Command::Reduce {
            pairs,
            config,
            unitary,
            theta,
        } => {
            let source = match (pairs, config) {
                (Some(p), _) => AssignmentSource::Pairs(p),
                (None, Some(c)) => AssignmentSource::Scenario(c),
                (None, None) => unreachable!("clap enforces the source group"),
            };
            let dynamics = match (unitary, theta) {
                (Some(u), _) => UnitarySource::File(u),
                (None, Some(t)) => UnitarySource::Theta(*t),
                (None, None) => unreachable!("clap enforces the dynamics group"),
            };
            commands::reduce(source, dynamics, &tols)?
        }
        Command::SweepTheta { config, csv } => commands::sweep_theta(config, csv, &tols)?,
        Command::CommutingFamily {
            config,
            csv,
            t_start,
            t_stop,
            t_count,
        } => {
            if *t_count == 0 {
                bail!("--t-count must be at least 1");
            }
            let grid = ThetaGrid {
                start: *t_start,
                stop: *t_stop,
                count: *t_count,
            };
            commands::commuting_family(config, csv, &grid.points(), &tols)?
        }
        Command::Campaign {
            seed,
            instances,
            unitaries,
            search,
            dims,
        } => {
            metadata["seed"] = json!(seed);
            let config = CampaignConfig {
                seed: *seed,
                n_instances: *instances,
                n_unitaries: *unitaries,
                n_search: *search,
            };
            commands::campaign(config, &parse_dims(dims)?, &tols)?
        }
        Command::Consistency { basis, unitary } => commands::consistency(basis, unitary.as_deref())?,
    };

    let mut body = out.body;
    match &mut body {
        Value::Object(map) => {
            map.insert("metadata".into(), metadata);
        }
        _ => bail!("internal: report body is not a JSON object"),
    }
    let text = serde_json::to_string_pretty(&body)? + "\n";
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(out.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Verdict::Affirmative) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
