//! Command-line front end: reproduces the bound curves as CSV files and
//! runs one-shot quantifications on JSON inputs.
//!
//! Exit codes: 0 success, 2 input/schema error, 3 solver failure,
//! 4 infeasible-input certificate.

mod figures;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use steerkit::amm::{self, DiBound, DiStatus};
use steerkit::entanglement;
use steerkit::incompat;
use steerkit::npa;
use steerkit::steering;
use steerkit::Error;

#[derive(Parser)]
#[command(name = "steerkit", version, about = "Steering, incompatibility, and entanglement quantifiers from Bell-experiment data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes one of the bound-curve CSV files.
    Figure {
        /// Which curve set to compute.
        name: FigureName,
        /// Output CSV path.
        #[arg(long, default_value = "figure.csv")]
        out: PathBuf,
        /// Grid resolution (points per curve).
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// Moment-matrix level where applicable.
        #[arg(long)]
        level: Option<usize>,
        /// Seed for the see-saw measurement search.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Quantifies one JSON input and prints a JSON report.
    Quantify {
        /// Quantifier to run.
        kind: QuantifyKind,
        /// Input JSON file (assemblage, measurements, state, or correlation,
        /// depending on the kind).
        #[arg(long)]
        input: PathBuf,
        /// Moment-matrix level for device-independent kinds.
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Feasibility threshold used for yes/no verdicts.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Certified lower bound on the one-way subchannel-discrimination
    /// advantage of the underlying state, from a correlation.
    SubchannelAdvantage {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureName {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantifyKind {
    /// Steering robustness of an assemblage.
    Sr,
    /// Consistent steering robustness of an assemblage.
    Src,
    /// Steerable weight of an assemblage.
    Sw,
    /// Incompatibility robustness of a measurement assemblage.
    Ir,
    /// Incompatibility weight of a measurement assemblage.
    Iw,
    /// Generalized robustness of entanglement (PPT bound) of a state.
    Er,
    /// Nonlocal robustness of a correlation.
    Nr,
    /// Consistent nonlocal robustness of a correlation.
    Nrc,
    /// DI steering-robustness bound from a correlation.
    SrDi,
    /// DI consistent-steering-robustness bound from a correlation.
    SrcDi,
    /// DI steerable-weight bound from a correlation.
    SwDi,
    /// DI entanglement-robustness bound from a correlation.
    ErDi,
    /// Membership in the level-l outer approximation of the quantum set.
    QMember,
}

#[derive(Serialize)]
struct Report {
    kind: String,
    value: Option<f64>,
    status: String,
    level: Option<usize>,
    feasible: Option<bool>,
    /// Where the reported value sits in the bound hierarchy.
    context: &'static str,
    diagnostics: Option<DiagnosticsReport>,
}

#[derive(Serialize)]
struct DiagnosticsReport {
    solver_status: String,
    gap: f64,
    primal_residual: f64,
    dual_residual: f64,
    iterations: usize,
}

impl From<&steering::Diagnostics> for DiagnosticsReport {
    fn from(d: &steering::Diagnostics) -> Self {
        Self {
            solver_status: format!("{:?}", d.status),
            gap: d.gap,
            primal_residual: d.residuals.0,
            dual_residual: d.residuals.1,
            iterations: d.iterations,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Schema(_) | Error::Dimension(_) | Error::InvalidArgument(_)
                | Error::NonHermitian(_) | Error::NotPsd(_) | Error::NonProjective(_)
                | Error::Overflow(_) => ExitCode::from(2),
                Error::Solver(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Figure { name, out, grid, level, seed } => {
            let grid = grid.max(2);
            match name {
                FigureName::Fig1 => figures::fig1(&out, grid, level.unwrap_or(3))?,
                FigureName::Fig2 => figures::fig2(&out, grid, level.unwrap_or(1), seed)?,
                FigureName::Fig3a => figures::fig3(&out, grid, level.unwrap_or(1), seed, false)?,
                FigureName::Fig3b => figures::fig3(&out, grid, level.unwrap_or(1), seed, true)?,
                FigureName::Fig4 => figures::fig4(&out, grid, level.unwrap_or(1), seed)?,
                FigureName::Fig5 => figures::fig5(&out, grid, level.unwrap_or(1))?,
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Quantify { kind, input, level, tol } => quantify(kind, &input, level, tol),
        Command::SubchannelAdvantage { input, level } => {
            let p = inputs::read_correlation(&input)?;
            let bound = amm::sr_di(&p, level)?;
            if bound.status == DiStatus::Infeasible {
                let report = di_report("subchannel-advantage", &bound, level);
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
                return Ok(ExitCode::from(4));
            }
            let report = Report {
                kind: "subchannel-advantage".into(),
                value: Some(bound.value + 1.0),
                status: format!("{:?}", bound.status),
                level: Some(level),
                feasible: None,
                context: "equals SR_DI + 1: a certified lower bound on sup_I p(B->A)/p(NE)",
                diagnostics: Some((&bound.diagnostics).into()),
            };
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn di_report(kind: &str, bound: &DiBound, level: usize) -> Report {
    Report {
        kind: kind.into(),
        value: if bound.value.is_nan() { None } else { Some(bound.value) },
        status: format!("{:?}", bound.status),
        level: Some(level),
        feasible: Some(bound.status != DiStatus::Infeasible),
        context: match kind {
            "sr-di" => "lower-bounds SR, SR^c, IR, and ER of any compatible realization",
            "src-di" => "lower-bounds SR^c and IR; dominates sr-di at the same level",
            "sw-di" => "lower-bounds SW and IW of any compatible realization",
            "er-di" => "lower-bounds ER of any compatible state",
            _ => "",
        },
        diagnostics: Some((&bound.diagnostics).into()),
    }
}

fn quantify(kind: QuantifyKind, input: &PathBuf, level: usize, tol: f64) -> Result<ExitCode, Error> {
    let report = match kind {
        QuantifyKind::Sr | QuantifyKind::Src | QuantifyKind::Sw => {
            let asm = inputs::read_assemblage(input)?;
            let (name, res, context) = match kind {
                QuantifyKind::Sr => (
                    "sr",
                    steering::steering_robustness(&asm)?,
                    "device-dependent; upper-bounded by SR^c and IR, lower-bounded by sr-di",
                ),
                QuantifyKind::Src => (
                    "src",
                    steering::consistent_steering_robustness(&asm)?,
                    "device-dependent; equals IR of the steering-equivalent observables",
                ),
                _ => (
                    "sw",
                    steering::steerable_weight(&asm)?,
                    "device-dependent; upper-bounds sw-di and lower-bounds IW",
                ),
            };
            Report {
                kind: name.into(),
                value: Some(res.value),
                status: "Optimal".into(),
                level: None,
                feasible: None,
                context,
                diagnostics: Some((&res.diagnostics).into()),
            }
        }
        QuantifyKind::Ir | QuantifyKind::Iw => {
            let meas = inputs::read_measurements(input)?;
            let (name, res, context) = match kind {
                QuantifyKind::Ir => (
                    "ir",
                    incompat::incompatibility_robustness(&meas)?,
                    "device-dependent; upper-bounds SR^c of any steered assemblage",
                ),
                _ => (
                    "iw",
                    incompat::incompatibility_weight(&meas)?,
                    "device-dependent; upper-bounds SW of any steered assemblage",
                ),
            };
            Report {
                kind: name.into(),
                value: Some(res.value),
                status: "Optimal".into(),
                level: None,
                feasible: None,
                context,
                diagnostics: Some((&res.diagnostics).into()),
            }
        }
        QuantifyKind::Er => {
            let (rho, dims) = inputs::read_state(input)?;
            let value = entanglement::er_ppt(&rho, dims)?;
            Report {
                kind: "er".into(),
                value: Some(value),
                status: "Optimal".into(),
                level: None,
                feasible: None,
                context: "PPT relaxation; exact for qubit-qubit and qubit-qutrit states",
                diagnostics: None,
            }
        }
        QuantifyKind::Nr | QuantifyKind::Nrc => {
            let p = inputs::read_correlation(input)?;
            let consistent = matches!(kind, QuantifyKind::Nrc);
            let bound = npa::nonlocal_robustness(&p, level, consistent)?;
            Report {
                kind: if consistent { "nrc".into() } else { "nr".into() },
                value: Some(bound.value),
                status: format!("{:?}", bound.status),
                level: Some(level),
                feasible: None,
                context: "lower-bounds SR (consistent variant: SR^c) of any realization",
                diagnostics: Some((&bound.diagnostics).into()),
            }
        }
        QuantifyKind::SrDi | QuantifyKind::SrcDi | QuantifyKind::SwDi | QuantifyKind::ErDi => {
            let p = inputs::read_correlation(input)?;
            let (name, bound) = match kind {
                QuantifyKind::SrDi => ("sr-di", amm::sr_di(&p, level)?),
                QuantifyKind::SrcDi => ("src-di", amm::sr_di_consistent(&p, level)?),
                QuantifyKind::SwDi => ("sw-di", amm::sw_di(&p, level, true)?),
                _ => ("er-di", npa::er_di_mblhg(&p, level)?),
            };
            let infeasible = bound.status == DiStatus::Infeasible;
            let report = di_report(name, &bound, level);
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            return Ok(if infeasible { ExitCode::from(4) } else { ExitCode::SUCCESS });
        }
        QuantifyKind::QMember => {
            let p = inputs::read_correlation(input)?;
            let m = npa::q_membership(&p, level)?;
            let feasible = m.slack <= tol;
            let report = Report {
                kind: "q-member".into(),
                value: Some(m.slack),
                status: if feasible { "Feasible".into() } else { "Infeasible".into() },
                level: Some(level),
                feasible: Some(feasible),
                context: "infeasibility certifies the correlation is not quantum realizable",
                diagnostics: Some((&m.diagnostics).into()),
            };
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            return Ok(if feasible { ExitCode::SUCCESS } else { ExitCode::from(4) });
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(ExitCode::SUCCESS)
}
