//! Subcommand implementations. Each returns the JSON report it printed; file
//! outputs go to `config.out` when set.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gdcycles::dynamics::{analyze, run_gd, spectral_peaks, spectral_period, AnalysisOptions, CycleReport};
use gdcycles::io::{self, fmt_f64};
use gdcycles::lift::{self, build_lift, lifted_solution, min_dimension, DimChoice};
use gdcycles::model::{LiftedDataset, Objective, Problem};
use gdcycles::onedim::{
    self, cobweb, crossing_point, rate_estimate, verify_lemmas, LemmaGrid, LemmaReport, OneDimProblem,
};
use gdcycles::solver::{lambda_max, solve_newton, step_size};
use gdcycles::transforms::{hunt_cycles, scale_dataset, verify_scaling};
use gdcycles::verify::{self, Check, Effort};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// A failed internal check; maps to exit code 4.
#[derive(Debug)]
pub struct InvariantViolation(pub String);

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantViolation {}

/// `{base_csv, ambient_dim}`; a relative `base_csv` is resolved against the
/// spec file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedSpec {
    pub base_csv: PathBuf,
    pub ambient_dim: usize,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    report: T,
}

struct Output<'a> {
    config: &'a RunConfig,
    command: &'a str,
}

impl<'a> Output<'a> {
    fn new(config: &'a RunConfig, command: &'a str) -> Result<Self> {
        if let Some(dir) = &config.out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Self { config, command })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.config.out.as_ref().map(|d| d.join(name))
    }

    /// Writes the enveloped report to `name` and returns it.
    fn report<T: Serialize>(&self, name: &str, report: T) -> Result<String> {
        let text = io::to_json_pretty(&Envelope { command: self.command, config: self.config, report })?;
        if let Some(p) = self.path(name) {
            fs::write(&p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(text)
    }

    /// CSV files start with a `#` line holding the effective config.
    fn csv(&self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> gdcycles::Result<()>) -> Result<()> {
        let Some(p) = self.path(name) else { return Ok(()) };
        let mut buf = format!("# {}\n", io::to_json_line(self.config)?).into_bytes();
        write(&mut buf)?;
        fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        if let Some(p) = self.path(name) {
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }
}

fn input(config: &RunConfig) -> Result<&Path> {
    config.input.as_deref().context("no input file given (positional argument or `input` in the config file)")
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: LiftedSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base_path = match path.parent() {
            Some(dir) if spec.base_csv.is_relative() => dir.join(&spec.base_csv),
            _ => spec.base_csv.clone(),
        };
        let base = io::read_dataset(&base_path).with_context(|| format!("reading {}", base_path.display()))?;
        Ok(Problem::Lifted(LiftedDataset::new(base, spec.ambient_dim)?))
    } else {
        Ok(Problem::Dense(io::read_dataset(path).with_context(|| format!("reading {}", path.display()))?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSolution {
    pub kind: &'static str,
    pub dim: usize,
    pub examples: usize,
    pub w_star: Vec<f64>,
    pub lambda_max: f64,
    pub grad_norm: f64,
    pub newton_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_dim: Option<usize>,
}

/// Minimizer and top curvature; lifted problems are solved through the base.
pub fn solve_problem(problem: &Problem, config: &RunConfig) -> Result<ProblemSolution> {
    let opts = config.newton();
    match problem {
        Problem::Dense(data) => {
            let r = solve_newton(data, &opts)?;
            Ok(ProblemSolution {
                kind: "dense",
                dim: data.dim(),
                examples: data.len(),
                w_star: r.w_star,
                lambda_max: r.lambda_max,
                grad_norm: r.grad_norm,
                newton_iters: r.newton_iters,
                lambda_b: None,
                c_b: None,
                min_dim: None,
            })
        }
        Problem::Lifted(lifted) => {
            let base = solve_newton(lifted.base(), &opts)?;
            let c_b = lift::c_b(lifted.base(), &base.w_star)?;
            let w = lifted_solution(&base.w_star, lifted.ambient_dim())?;
            let lambda = lambda_max(lifted, &w, opts.eig)?;
            let grad_norm = gdcycles::linalg::norm(&lifted.grad(&w)?);
            Ok(ProblemSolution {
                kind: "lifted",
                dim: lifted.ambient_dim(),
                examples: lifted.len(),
                w_star: w,
                lambda_max: lambda,
                grad_norm,
                newton_iters: base.newton_iters,
                lambda_b: Some(base.lambda_max),
                c_b: Some(c_b),
                min_dim: Some(min_dimension(base.lambda_max, c_b)?),
            })
        }
    }
}

pub fn cmd_solve(config: &RunConfig) -> Result<String> {
    let problem = load_problem(input(config)?)?;
    let solution = solve_problem(&problem, config)?;
    Output::new(config, "solve")?.report("solve.json", solution)
}

#[derive(Serialize)]
struct RunReport {
    problem: ProblemSolution,
    eta: f64,
    steps_run: usize,
    final_norm: f64,
    final_loss: f64,
    cycle: Option<CycleReport>,
    spectral_peaks: Vec<(f64, f64)>,
    spectral_period: Option<usize>,
}

pub fn cmd_run(config: &RunConfig) -> Result<String> {
    let problem = load_problem(input(config)?)?;
    let solution = solve_problem(&problem, config)?;
    let eta = step_size(config.gamma, solution.lambda_max)?;
    let mut w0 = config.w0.clone().unwrap_or_else(|| vec![0.0; problem.dim()]);
    if let Problem::Lifted(lifted) = &problem {
        // a base-dimensional start is embedded with a zero tail
        if w0.len() == lifted.base_dim() {
            w0.resize(lifted.ambient_dim(), 0.0);
        }
    }
    let mut record = config.record_spec();
    record.sample_coords.retain(|&j| j < problem.dim());
    let traj = run_gd(&problem, &w0, eta, config.steps, &record)?;
    let opts = AnalysisOptions {
        tol: config.tol_cycle,
        window: config.window,
        max_peaks: config.record.max_peaks,
        floquet: true,
    };
    let cycle = analyze(&problem, &traj, &opts)?;
    let (spectrum, period) = if traj.norm_series.len() >= config.window {
        spectral_period(&traj.norm_series, config.window)?
    } else {
        (Vec::new(), None)
    };
    let out = Output::new(config, "run")?;
    out.csv("trajectory.csv", |b| io::write_trajectory_csv(&traj, b))?;
    out.csv("spectrum.csv", |b| io::write_spectrum_csv(&spectrum, b))?;
    let report = RunReport {
        eta,
        steps_run: traj.steps_run,
        final_norm: *traj.norm_series.last().expect("series holds w0"),
        final_loss: problem.loss(traj.last())?,
        cycle,
        spectral_peaks: spectral_peaks(&spectrum, config.record.max_peaks),
        spectral_period: period,
        problem: solution,
    };
    out.report("run.json", report)
}

#[derive(Serialize)]
struct OneDimReport {
    c: f64,
    gamma: f64,
    w_star: f64,
    lambda: f64,
    eta: f64,
    crossing_point: Option<f64>,
    rate_estimate: Option<f64>,
    lemmas: LemmaReport,
}

fn onedim_report(p: &OneDimProblem, gamma: f64, grid: LemmaGrid) -> Result<OneDimReport> {
    Ok(OneDimReport {
        c: p.c,
        gamma,
        w_star: p.w_star,
        lambda: p.lambda,
        eta: p.eta(gamma),
        crossing_point: crossing_point(p, gamma).ok(),
        rate_estimate: rate_estimate(gamma).ok(),
        lemmas: verify_lemmas(p, gamma, grid)?,
    })
}

pub fn cmd_analyze_1d(config: &RunConfig, sweep: bool) -> Result<String> {
    let cfg = &config.onedim;
    let p = OneDimProblem::new(cfg.c)?;
    let grid = LemmaGrid { points: cfg.grid_points, span: cfg.grid_span };
    let out = Output::new(config, "analyze-1d")?;
    if sweep {
        let reports = verify::GAMMAS.par_iter().map(|&g| onedim_report(&p, g, grid)).collect::<Result<Vec<_>>>()?;
        return out.report("lemma_sweep.json", reports);
    }
    let gamma = config.gamma;
    let segments = cobweb(cfg.cobweb_w0, cfg.cobweb_steps, &p, gamma);
    out.csv("cobweb.csv", |b| io::write_cobweb_csv(&segments, b))?;
    if let Some(path) = out.path("map.csv") {
        let (lo, hi) = (p.w_star - cfg.grid_span, p.w_star + cfg.grid_span);
        let n = cfg.map_points.max(2);
        let mut text = format!("# {}\nw,t\n", io::to_json_line(config)?);
        for i in 0..n {
            let w = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            text.push_str(&format!("{},{}\n", fmt_f64(w), fmt_f64(onedim::map_t(w, &p, gamma))));
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    out.report("lemmas.json", onedim_report(&p, gamma, grid)?)
}

#[derive(Serialize)]
struct LiftOutput {
    lift: gdcycles::LiftReport,
    spec: LiftedSpec,
}

pub fn cmd_lift(config: &RunConfig) -> Result<String> {
    let path = input(config)?;
    let base = io::read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    let choice = config.lift.dim.map_or(DimChoice::Auto, DimChoice::Fixed);
    let (lifted, report) = build_lift(&base, choice, &config.newton())?;
    if report.chosen_dim < report.min_dim {
        eprintln!(
            "warning: d = {} is below the minimal dimension {}; the top curvature becomes c_b/(d-2) = {}",
            report.chosen_dim, report.min_dim, report.lambda_lifted
        );
    }
    let spec = LiftedSpec { base_csv: PathBuf::from("base.csv"), ambient_dim: lifted.ambient_dim() };
    let out = Output::new(config, "lift")?;
    out.text("base.csv", &io::dataset_to_csv(lifted.base()))?;
    out.text("lifted.json", &format!("{}\n", serde_json::to_string_pretty(&spec)?))?;
    out.report("lift.json", LiftOutput { lift: report, spec })
}

/// Hit lines are JSONL on stdout and in `hunt.jsonl`; the summary is returned.
pub fn cmd_hunt(config: &RunConfig) -> Result<String> {
    let (hits, summary) = hunt_cycles(&config.hunt_config())?;
    let out = Output::new(config, "hunt")?;
    let mut lines = String::new();
    for h in &hits {
        lines.push_str(&io::to_json_line(h)?);
        lines.push('\n');
    }
    print!("{lines}");
    out.text("hunt.jsonl", &lines)?;
    out.report("hunt_summary.json", summary)
}

pub fn cmd_scale(config: &RunConfig) -> Result<String> {
    let path = input(config)?;
    let data = io::read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    let w0 = config.w0.clone().unwrap_or_else(|| vec![0.0; data.dim()]);
    let report = verify_scaling(&data, config.scale.c, &w0, config.gamma, config.steps, &config.newton())?;
    let out = Output::new(config, "scale")?;
    out.text("scaled.csv", &io::dataset_to_csv(&scale_dataset(&data, config.scale.c)?))?;
    out.report("scale.json", report)
}

#[derive(Serialize)]
struct VerifyReport {
    suite: String,
    effort: Effort,
    passed: bool,
    checks: Vec<Check>,
}

/// Prints one line per criterion to stderr; any failure is an invariant violation.
pub fn cmd_verify(config: &RunConfig, suite: &str, effort: Effort) -> Result<String> {
    let Some(checks) = verify::run_suite(suite, effort) else {
        bail!("unknown suite {suite:?}; expected one of {:?}", verify::SUITES);
    };
    for c in &checks {
        eprintln!("{c}");
    }
    let passed = checks.iter().all(|c| c.passed);
    let failed: Vec<u8> = checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    let text = Output::new(config, "verify")?
        .report("verify.json", VerifyReport { suite: suite.to_string(), effort, passed, checks })?;
    if !passed {
        println!("{text}");
        return Err(InvariantViolation(format!("criteria {failed:?} failed")).into());
    }
    Ok(text)
}

#[derive(Serialize)]
struct SpectrumReport {
    column: String,
    samples: usize,
    window: usize,
    peaks: Vec<(f64, f64)>,
    period: Option<usize>,
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("column {column:?} not found in {}", path.display()))?;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(idx).unwrap_or_default();
        values.push(field.parse::<f64>().with_context(|| format!("row {}: {field:?} is not a number", line + 1))?);
    }
    Ok(values)
}

pub fn cmd_spectrum(config: &RunConfig, column: &str) -> Result<String> {
    let path = input(config)?;
    let series = read_column(path, column)?;
    let (spectrum, period) = spectral_period(&series, config.window)?;
    let out = Output::new(config, "spectrum")?;
    out.csv("spectrum.csv", |b| io::write_spectrum_csv(&spectrum, b))?;
    out.report(
        "spectrum.json",
        SpectrumReport {
            column: column.to_string(),
            samples: series.len(),
            window: config.window,
            peaks: spectral_peaks(&spectrum, config.record.max_peaks),
            period,
        },
    )
}
