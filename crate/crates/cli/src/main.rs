//! `doseopt` command-line interface.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use doseopt::api::{
    doptimal_document, evaluate, local_document, maximin_document, transform_document,
    DOptimalRequest, EfficiencyKind, EvaluateRequest, LocalRequest, MaximinRequest,
    TransformRequest,
};
use doseopt::{
    round_design, run_simulation, ContinuousDesign, DesignDocument, EfficiencyReport, Error,
    ModelId, OptimizerConfig, Param, Scaling, SimulationRequest, Theta,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "doseopt",
    version,
    about = "Optimal designs for nested exponential dose-response models"
)]
struct Cli {
    /// Default seed for optimizers and simulations.
    #[arg(long, global = true, env = "DOSEOPT_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ThetaArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    d: f64,
}

impl ThetaArgs {
    fn theta(&self) -> Theta {
        Theta::new(self.a, self.b, self.c, self.d)
    }
}

/// Optional overrides of a document's nominal values.
#[derive(Args, Clone, Copy)]
struct ThetaOverride {
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
}

impl ThetaOverride {
    fn apply(&self, mut theta: Theta) -> Theta {
        for (p, v) in [
            (Param::A, self.a),
            (Param::B, self.b),
            (Param::C, self.c),
            (Param::D, self.d),
        ] {
            if let Some(v) = v {
                theta.set(p, v);
            }
        }
        theta
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    C,
    D,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Locally optimal discriminating design.
    Local {
        #[arg(long, value_parser = parse_model)]
        model: ModelId,
        #[arg(long, value_enum)]
        target: Target,
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long = "T", default_value_t = 1.0)]
        space_upper: f64,
    },
    /// Maximin efficient design for the four model comparisons.
    Maximin {
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long = "T", default_value_t = 1.0)]
        space_upper: f64,
    },
    /// Locally D-optimal design.
    Doptimal {
        #[arg(long, value_parser = parse_model)]
        model: ModelId,
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long = "T", default_value_t = 1.0)]
        space_upper: f64,
    },
    /// Efficiencies of a design document.
    Evaluate {
        /// Design document, or `-` for stdin.
        #[arg(long)]
        design: PathBuf,
        /// Common reference design; optimal designs are used when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        theta: ThetaOverride,
        /// Models for D- and parameter efficiencies, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_model)]
        models: Vec<ModelId>,
        #[arg(long)]
        pairs: bool,
        #[arg(long = "d-eff")]
        d_eff: bool,
        #[arg(long = "param-eff")]
        param_eff: bool,
    },
    /// Rescale a design document to another (b, d, T).
    Transform {
        #[arg(long)]
        design: PathBuf,
        #[arg(long = "to-b")]
        to_b: f64,
        #[arg(long = "to-d", default_value_t = 1.0)]
        to_d: f64,
        #[arg(long = "to-T")]
        to_t: f64,
    },
    /// Round a design document to integer replicate counts.
    Round {
        #[arg(long)]
        design: PathBuf,
        #[arg(long = "N")]
        n: usize,
    },
    /// Run a simulation request file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
    },
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// A full document or a bare `{points, weights, T}` design.
#[derive(Deserialize)]
#[serde(untagged)]
enum DesignInput {
    Document(Box<DesignDocument>),
    Bare(ContinuousDesign),
}

fn read_design(path: &PathBuf) -> Result<DesignInput, Failure> {
    let text = read_input(path)?;
    let input: DesignInput = serde_json::from_str(&text).map_err(|e| {
        Error::InvalidDesign(format!(
            "{}: not a design or document ({e})",
            path.display()
        ))
    })?;
    if let DesignInput::Document(doc) = &input {
        doc.validate()?;
    }
    Ok(input)
}

fn read_document(path: &PathBuf) -> Result<DesignDocument, Failure> {
    Ok(DesignDocument::from_json(&read_input(path)?)?)
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn efficiency_table(report: &EfficiencyReport) -> String {
    let mut s = String::from("pair        efficiency\n");
    for (k, v) in &report.pair_effs {
        s.push_str(&format!("{k:<11} {v:.4}\n"));
    }
    s
}

fn config(seed: Option<u64>) -> Option<OptimizerConfig> {
    seed.map(|s| OptimizerConfig::default().with_seed(s))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Local {
            model,
            target,
            theta,
            space_upper,
        } => {
            let target = match target {
                Target::C => Param::C,
                Target::D => Param::D,
            };
            emit(&local_document(&LocalRequest {
                model,
                theta: theta.theta(),
                target,
                space_upper,
                config: config(seed),
            })?)
        }
        Command::Maximin { theta, space_upper } => {
            let doc = maximin_document(&MaximinRequest {
                theta: theta.theta(),
                space_upper,
                config: config(seed),
            })?;
            if let Some(e) = &doc.efficiencies {
                eprint!("{}", efficiency_table(e));
            }
            emit(&doc)
        }
        Command::Doptimal {
            model,
            theta,
            space_upper,
        } => emit(&doptimal_document(&DOptimalRequest {
            model,
            theta: theta.theta(),
            space_upper,
            config: config(seed),
        })?),
        Command::Evaluate {
            design,
            reference,
            theta,
            models,
            pairs,
            d_eff,
            param_eff,
        } => {
            let (design, base, own_model) = match read_design(&design)? {
                DesignInput::Document(doc) => (doc.design, doc.theta, Some(doc.model)),
                DesignInput::Bare(_) if theta.b.is_none() => {
                    return Err(Error::InvalidParameter {
                        field: "theta.b".into(),
                        message: "a bare design needs --b".into(),
                    }
                    .into())
                }
                DesignInput::Bare(d) => (d, Theta::default(), None),
            };
            let models = match (models.is_empty(), own_model) {
                (false, _) => models,
                (true, Some(m)) if m != ModelId::Constant => vec![m],
                _ => doseopt::ESTIMATION_MODELS.to_vec(),
            };
            let reference = match reference {
                Some(p) => Some(match read_design(&p)? {
                    DesignInput::Document(doc) => doc.design,
                    DesignInput::Bare(d) => d,
                }),
                None => None,
            };
            let mut requests = Vec::new();
            if pairs {
                requests.push(EfficiencyKind::Pairs);
            }
            if d_eff {
                requests.push(EfficiencyKind::D);
            }
            if param_eff {
                requests.push(EfficiencyKind::Params);
            }
            if requests.is_empty() {
                requests = vec![EfficiencyKind::D, EfficiencyKind::Params];
                if own_model.is_none_or(|m| m == ModelId::Full) {
                    requests.insert(0, EfficiencyKind::Pairs);
                }
            }
            emit(&evaluate(&EvaluateRequest {
                design,
                theta: theta.apply(base),
                requests,
                models,
                reference,
                config: config(seed),
            })?)
        }
        Command::Transform {
            design,
            to_b,
            to_d,
            to_t,
        } => emit(&transform_document(&TransformRequest {
            design: read_document(&design)?,
            from: None,
            to: Scaling::new(to_b, to_d, to_t),
        })?),
        Command::Round { design, n } => emit(&round_design(&read_document(&design)?.design, n)?),
        Command::Simulate { spec, format } => {
            let text = read_input(&spec)?;
            let request: SimulationRequest = serde_json::from_str(&text).map_err(|e| {
                Error::InvalidDesign(format!(
                    "{}: malformed simulation request ({e})",
                    spec.display()
                ))
            })?;
            let report = run_simulation(&request, seed.unwrap_or(doseopt_service::DEFAULT_SEED))?;
            match format {
                ReportFormat::Json => emit(&report),
                ReportFormat::Csv => {
                    io::stdout().lock().write_all(report.to_csv().as_bytes())?;
                    Ok(())
                }
            }
        }
        Command::Serve { port } => {
            doseopt_service::serve_blocking(port, seed.unwrap_or(doseopt_service::DEFAULT_SEED))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(EXIT_SOLVER)
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
