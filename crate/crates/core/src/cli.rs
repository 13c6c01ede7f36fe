//! Command-line front end. Every run ends with a `STATUS: <label>` line and
//! exits 0 on success, 2 on invalid input and 3 when a computation fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{coercivity_constant, loglog_slope, noncoercive_csv, noncoercive_probe, rayleigh_min_op, tame_probe_seeded};
use crate::dump::{read_field_file, write_field_file};
use crate::error::{Error, Result};
use crate::euler::{pressure, verify_state, FlowState, VerificationReport};
use crate::extract::extract_streams;
use crate::field::{ScalarField3, VectorField3};
use crate::grid::Grid;
use crate::linearized::LinearizedOperator;
use crate::nash_moser::{nash_moser_solve, newton_solve, Method, SolveOutcome};
use crate::pair::FieldPair;
use crate::problem::StreamPair;
use crate::scenario::{parse_grid_override, parse_scenario, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Thresholds of the `verify` command relative to max |v|^2.
pub const EULER_THRESHOLD: f64 = 1e-5;
pub const DIVERGENCE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "twostream", version, about = "Steady Euler flows in a periodic channel through two stream functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory; defaults to the scenario's outputs.directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid override, e.g. 32x32x32.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// newton or nash-moser.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonlinear solve; dumps f, g, v, p and the iteration tables.
    Solve(Common),
    /// Stream functions from a dumped velocity (v1.dsf, v2.dsf, v3.dsf).
    Extract {
        #[command(flatten)]
        common: Common,
        /// Directory holding the velocity dumps.
        #[arg(long)]
        input: PathBuf,
    },
    /// Euler residual, divergence and Bernoulli drift of dumped f.dsf, g.dsf.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Smallest Rayleigh quotient and the non-coercive sequence.
    Spectrum(Common),
    /// Empirical tame-inverse constants.
    ProbeTame(Common),
}

/// Output directory that records every file it writes.
pub struct OutputDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path)?;
        Ok(OutputDir { path: path.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.path.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn dump(&mut self, name: &str, field: &ScalarField3) -> Result<()> {
        let file = format!("{name}.dsf");
        write_field_file(&self.path.join(&file), field, name)?;
        self.files.push(file);
        Ok(())
    }

    /// Writes VERSION and MANIFEST.
    pub fn finish(mut self) -> Result<()> {
        self.write("VERSION", &format!("{} {}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")))?;
        self.files.push("MANIFEST".into());
        self.files.sort();
        self.files.dedup();
        fs::write(self.path.join("MANIFEST"), self.files.join("\n") + "\n")?;
        Ok(())
    }
}

/// Result of one command: the status label and the summary text.
pub struct Outcome {
    pub status: String,
    pub summary: String,
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    let path = common.scenario.as_ref().ok_or_else(|| Error::Invariant { name: "--scenario given", detail: "this command needs a scenario".into() })?;
    let grid = common.grid.as_deref().map(parse_grid_override).transpose()?;
    parse_scenario(path)?.with_overrides(grid, common.tol, common.method.as_deref(), common.seed)
}

fn open_output(common: &Common, scenario: Option<&Scenario>) -> Result<OutputDir> {
    let dir = common.out.clone().or_else(|| scenario.map(|s| s.outputs.directory.clone())).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&dir)?;
    if let Some(s) = scenario {
        out.write("scenario.resolved.toml", &s.resolved_toml())?;
    }
    Ok(out)
}

fn verification_passes(r: &VerificationReport) -> bool {
    r.euler_interior <= EULER_THRESHOLD * r.max_v_sq.max(f64::MIN_POSITIVE) && r.divergence_interior <= DIVERGENCE_THRESHOLD
}

fn dump_state(out: &mut OutputDir, state: &FlowState, which: &[String]) -> Result<()> {
    for w in which {
        match w.as_str() {
            "f" => out.dump("f", &state.pair.total_f())?,
            "g" => out.dump("g", &state.pair.total_g())?,
            "v" => {
                out.dump("v1", &state.v.x)?;
                out.dump("v2", &state.v.y)?;
                out.dump("v3", &state.v.z)?;
            }
            "p" => out.dump("p", &pressure(state))?,
            _ => {}
        }
    }
    Ok(())
}

pub fn run_solve(common: &Common) -> Result<Outcome> {
    let sc = load_scenario(common)?;
    let mut out = open_output(common, Some(&sc))?;
    let data = sc.problem_data()?;
    let params = sc.nash_moser_params()?;
    let tol = sc.solver.tol;
    let solved: Result<SolveOutcome> = match sc.method()? {
        Method::Newton => newton_solve(&data, &FieldPair::zeros(&data.grid), tol, &params),
        Method::NashMoser => nash_moser_solve(&data, tol, &params),
    };
    let outcome = match solved {
        Ok(o) => o,
        Err(Error::Solve { report }) => {
            if sc.outputs.tables {
                out.write("solve_report.csv", &report.to_csv())?;
            }
            out.write("solve_summary.txt", &report.to_string())?;
            out.finish()?;
            return Err(Error::Solve { report });
        }
        Err(e) => return Err(e),
    };
    let state = FlowState::from_solution(&outcome.pair, &data)?;
    let ver = verify_state(&state)?;
    dump_state(&mut out, &state, &sc.outputs.dumps)?;
    if sc.outputs.tables {
        out.write("solve_report.csv", &outcome.report.to_csv())?;
    }
    let mut summary = outcome.report.to_string();
    let _ = writeln!(summary, "{ver}");
    let _ = writeln!(summary, "verification {}", if verification_passes(&ver) { "passed" } else { "failed" });
    out.write("solve_summary.txt", &summary)?;
    out.finish()?;
    Ok(Outcome { status: outcome.report.verdict_label().to_string(), summary })
}

fn read_dump(dir: &Path, name: &str, grid: Option<&Arc<Grid>>) -> Result<ScalarField3> {
    let d = read_field_file(&dir.join(format!("{name}.dsf")))?;
    match grid {
        Some(g) => d.into_field(g),
        None => {
            let g = Grid::new(d.spec)?;
            d.into_field(&g)
        }
    }
}

pub fn run_extract(common: &Common, input: &Path) -> Result<Outcome> {
    let sc = common.scenario.as_ref().map(|_| load_scenario(common)).transpose()?;
    let v1 = read_dump(input, "v1", None)?;
    let grid = v1.grid().clone();
    let v = VectorField3::new(v1, read_dump(input, "v2", Some(&grid))?, read_dump(input, "v3", Some(&grid))?)?;
    let mut out = open_output(common, sc.as_ref())?;
    let ex = extract_streams(&v)?;
    out.dump("f_extracted", &ex.pair.total_f())?;
    out.dump("g_extracted", &ex.pair.total_g())?;
    let mut csv = String::from("node,Y,Z,T\n");
    for (n, l) in ex.landing.iter().enumerate() {
        let _ = writeln!(csv, "{n},{:.15e},{:.15e},{:.15e}", l[0], l[1], l[2]);
    }
    out.write("landing.csv", &csv)?;
    let summary = ex.report.to_string();
    out.write("extract_report.txt", &summary)?;
    out.finish()?;
    Ok(Outcome { status: "ok".into(), summary })
}

pub fn run_verify(common: &Common, input: &Path) -> Result<Outcome> {
    let sc = load_scenario(common)?;
    let grid = sc.build_grid()?;
    let f = read_dump(input, "f", Some(&grid))?;
    let g = read_dump(input, "g", Some(&grid))?;
    let (lf, lg) = (sc.base.grad_f, sc.base.grad_g);
    let lin = |l: [f64; 3]| ScalarField3::from_fn(&grid, |x, y, z| l[0] * x + l[1] * y + l[2] * z);
    let pair = StreamPair::new(lf, lg, f.sub(&lin(lf))?, g.sub(&lin(lg))?)?;
    let state = FlowState::new(pair, sc.bernoulli_spec()?)?;
    let ver = verify_state(&state)?;
    let mut out = open_output(common, Some(&sc))?;
    let pass = verification_passes(&ver);
    let summary = format!("{ver}\nverification {}\n", if pass { "passed" } else { "failed" });
    out.write("verify_report.txt", &summary)?;
    out.finish()?;
    if !pass {
        return Err(Error::Invariant { name: "verification thresholds", detail: summary });
    }
    Ok(Outcome { status: "verified".into(), summary })
}

fn background_operator(sc: &Scenario) -> Result<LinearizedOperator> {
    let data = sc.problem_data()?;
    LinearizedOperator::at_iterate(&data, &FieldPair::zeros(&data.grid), sc.diagnostics.epsilon)
}

pub fn run_spectrum(common: &Common) -> Result<Outcome> {
    let sc = load_scenario(common)?;
    let mut out = open_output(common, Some(&sc))?;
    let op = background_operator(&sc)?;
    let ray = rayleigh_min_op(&op)?;
    let min_v1 = op.velocity().x.values().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let bound = coercivity_constant(min_v1, sc.grid.length);
    let mut table = String::from("quantity,value\n");
    let _ = writeln!(table, "min_quotient,{:.12e}", ray.min_quotient);
    let _ = writeln!(table, "coercivity_constant,{bound:.12e}");
    let _ = writeln!(table, "margin,{:.12e}", ray.min_quotient / bound);
    let _ = writeln!(table, "epsilon,{:.12e}", ray.epsilon);
    let _ = writeln!(table, "iterations,{}", ray.iterations);
    out.write("rayleigh.csv", &table)?;
    let rows = noncoercive_probe(&op, &sc.n_list())?;
    out.write("noncoercive.csv", &noncoercive_csv(&rows))?;
    let mut summary = format!(
        "min Rayleigh quotient {:.6e} (eps = {}), constant pi^2 min v1^2 / (32 L^2) = {:.6e}, ratio {:.3}\n",
        ray.min_quotient,
        ray.epsilon,
        bound,
        ray.min_quotient / bound
    );
    if rows.len() >= 2 {
        let slope = loglog_slope(&rows.iter().map(|r| (r.n as f64, r.quotient_h1)).collect::<Vec<_>>());
        let _ = writeln!(summary, "H1-normalised quotient slope {slope:.4} (expected -2)");
    }
    out.write("spectrum_summary.txt", &summary)?;
    out.finish()?;
    Ok(Outcome { status: if ray.is_negative() { "indefinite".into() } else { "ok".into() }, summary })
}

pub fn run_probe_tame(common: &Common) -> Result<Outcome> {
    let sc = load_scenario(common)?;
    let mut out = open_output(common, Some(&sc))?;
    let op = background_operator(&sc)?;
    let d = &sc.diagnostics;
    let probe = tame_probe_seeded(&op, d.tame_order, d.tame_samples, d.seed)?;
    out.write("tame.csv", &probe.csv())?;
    let summary = format!("{probe}\n");
    out.write("tame_summary.txt", &summary)?;
    out.finish()?;
    Ok(Outcome { status: "ok".into(), summary })
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        EXIT_VALIDATION
    } else {
        EXIT_SOLVER
    }
}

pub fn status_label(e: &Error) -> String {
    match e {
        Error::Solve { report } => report.verdict_label().to_string(),
        Error::GateRejected { .. } => "gate-rejected".into(),
        Error::Invariant { name: "verification thresholds", .. } => "verify-failed".into(),
        e if exit_code(e) == EXIT_VALIDATION => "validation-error".into(),
        _ => "solver-error".into(),
    }
}

/// Runs a parsed command line, printing the summary and the status line.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(c) => run_solve(c),
        Command::Extract { common, input } => run_extract(common, input),
        Command::Verify { common, input } => run_verify(common, input),
        Command::Spectrum(c) => run_spectrum(c),
        Command::ProbeTame(c) => run_probe_tame(c),
    };
    match result {
        Ok(o) => {
            print!("{}", o.summary);
            println!("STATUS: {}", o.status);
            EXIT_OK
        }
        Err(e) => {
            if let Error::Solve { report } = &e {
                print!("{report}");
            }
            eprintln!("error: {e}");
            println!("STATUS: {}", status_label(&e));
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(&Cli::parse())
}
