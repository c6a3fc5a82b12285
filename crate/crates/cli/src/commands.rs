//! Subcommand implementations. Each returns the process exit code; errors
//! are reported on standard error by the caller.

use std::fmt::Write as _;
use std::path::PathBuf;

use pbe_core::equilibrium::{CellOutcome, Sweep, SweepTable, TrendSummary};
use pbe_core::verification::{
    best_response_iterate, compare_with_grid, draw_parameters, grid_search_pbe, simulate_mm1,
    DrawOutcome, DrawSpec, DynamicsStatus, OracleError, QueueSimResult, TrajectoryPoint,
    ORACLE_SIGMA_TOL,
};
use pbe_core::{
    misbehavior_threshold, Classification, Equilibrium, GameParams, Mm1Cost, Regime, SolveError,
    Solver, SolverTolerances, Threshold, TrafficEnvironment,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Check, ConfigError, QueueSettings, Scenario, SweepVariable, VerifySettings};
use crate::output::{say, sweep_csv, to_json, write_file, Metadata};
use crate::svg::{Axis, Overlay, RegimeMap};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Config = 1,
    Boundary = 2,
    Assumption = 3,
    VerificationFailed = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(ExitCode::Config, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::BoundaryParameters(_) => ExitCode::Boundary,
            SolveError::Inconsistent { .. } => ExitCode::VerificationFailed,
            SolveError::AssumptionViolation(_) | SolveError::Cost(_) => ExitCode::Assumption,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solve(e) => e.into(),
            OracleError::Param(e) => Failure::new(ExitCode::Config, e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(ExitCode::Config, format!("{e:#}"))
    }
}

pub type Outcome = Result<ExitCode, Failure>;

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Options {
    fn scenario(&self) -> Result<Scenario, Failure> {
        Ok(Scenario::load(&self.config)?.with_seed(self.seed))
    }
}

fn solver(s: &Scenario) -> Result<Solver<'_, Mm1Cost>, Failure> {
    Ok(Solver::new(s.env, &s.model, s.tolerances)?)
}

/// Inputs echoed into result documents.
#[derive(Serialize)]
struct Inputs<'a> {
    traffic: &'a TrafficEnvironment,
    cost_model: &'a Mm1Cost,
    game: &'a GameParams,
    solver: &'a SolverTolerances,
}

impl<'a> Inputs<'a> {
    fn of(s: &'a Scenario) -> Self {
        Self {
            traffic: &s.env,
            cost_model: &s.model,
            game: &s.params,
            solver: &s.tolerances,
        }
    }
}

#[derive(Serialize)]
struct SolveDoc<'a> {
    inputs: Inputs<'a>,
    equilibrium: &'a Equilibrium,
}

pub fn solve(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let eq = solver(&s)?.solve(&s.params)?;
    let json = to_json(
        &Metadata::new(&s),
        &SolveDoc {
            inputs: Inputs::of(&s),
            equilibrium: &eq,
        },
    )?;
    write_file(&opts.out, "equilibrium.json", json.as_bytes())?;
    say(opts.quiet, &json);
    if !eq.diagnostics.passed {
        return Err(Failure::new(
            ExitCode::VerificationFailed,
            format!(
                "solver output fails the equilibrium check: {:?}",
                eq.diagnostics.violated().collect::<Vec<_>>()
            ),
        ));
    }
    Ok(ExitCode::Success)
}

#[derive(Serialize)]
struct ClassifyDoc<'a> {
    inputs: Inputs<'a>,
    classification: &'a Classification,
}

pub fn classify(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let c = solver(&s)?.classify(&s.params)?;
    let json = to_json(
        &Metadata::new(&s),
        &ClassifyDoc {
            inputs: Inputs::of(&s),
            classification: &c,
        },
    )?;
    write_file(&opts.out, "classification.json", json.as_bytes())?;
    say(opts.quiet, &json);
    match c.regime {
        Regime::Boundary(d) => Err(Failure::new(
            ExitCode::Boundary,
            format!("parameters lie on a regime boundary ({d})"),
        )),
        _ => Ok(ExitCode::Success),
    }
}

fn run_sweep(s: &Scenario) -> Result<SweepTable, Failure> {
    let grid = s.sweep_grid();
    let sweep = Sweep::new(&s.env, &s.model, s.params, grid.clone(), s.tolerances);
    let rows: Vec<_> = (0..sweep.len())
        .into_par_iter()
        .map(|i| sweep.evaluate(i))
        .collect();
    if let Some(CellOutcome::Failed { error }) = rows.first().map(|r| &r.outcome) {
        if rows
            .iter()
            .all(|r| matches!(r.outcome, CellOutcome::Failed { .. }))
        {
            return Err(Failure::new(ExitCode::Assumption, error.clone()));
        }
    }
    Ok(SweepTable::from_rows(&grid, rows))
}

#[derive(Serialize)]
struct RegimeCount {
    regime: &'static str,
    cells: usize,
}

fn regime_counts(table: &SweepTable) -> Vec<RegimeCount> {
    ["A", "B1", "B2", "B3", "Boundary", ""]
        .into_iter()
        .map(|label| RegimeCount {
            regime: if label.is_empty() { "failed" } else { label },
            cells: table
                .rows
                .iter()
                .filter(|r| r.outcome.regime_label() == label)
                .count(),
        })
        .collect()
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    inputs: Inputs<'a>,
    axes: Vec<AxisDoc>,
    cells: usize,
    regime_counts: Vec<RegimeCount>,
    /// Direction of `σ_l*` and `σ_H^d*` along each swept axis, per regime.
    trends: &'a [TrendSummary],
}

#[derive(Serialize)]
struct AxisDoc {
    variable: &'static str,
    min: f64,
    max: f64,
    steps: usize,
    scale: &'static str,
}

fn axes_doc(s: &Scenario) -> Vec<AxisDoc> {
    s.axes
        .iter()
        .map(|(v, a)| AxisDoc {
            variable: v.name(),
            min: a.min,
            max: a.max,
            steps: a.steps,
            scale: if a.log { "log" } else { "linear" },
        })
        .collect()
}

fn trend_text(table: &SweepTable) -> String {
    let mut t = String::from("regime  axis   sigma_l  sigma_dH  pairs\n");
    for s in &table.summary {
        let _ = writeln!(
            t,
            "{:<7} {:<6} {:<8} {:<9} {}",
            s.regime.label(),
            s.axis,
            s.sigma_l.to_string(),
            s.sigma_d_h.to_string(),
            s.pairs
        );
    }
    t
}

fn counts_text(table: &SweepTable) -> String {
    regime_counts(table)
        .iter()
        .filter(|c| c.cells > 0)
        .map(|c| format!("{}={}", c.regime, c.cells))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn sweep(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let table = run_sweep(&s)?;
    write_file(&opts.out, "sweep.csv", &sweep_csv(&table.rows)?)?;
    let json = to_json(
        &Metadata::new(&s),
        &SweepDoc {
            inputs: Inputs::of(&s),
            axes: axes_doc(&s),
            cells: table.rows.len(),
            regime_counts: regime_counts(&table),
            trends: &table.summary,
        },
    )?;
    write_file(&opts.out, "sweep.json", json.as_bytes())?;
    say(
        opts.quiet,
        &format!(
            "{} cells: {}\n{}",
            table.rows.len(),
            counts_text(&table),
            trend_text(&table)
        ),
    );
    Ok(ExitCode::Success)
}

/// Builds the regime map for a scenario whose sweep axes are `p_t_l` and
/// `p_d` only.
pub fn regime_map_svg(s: &Scenario, table: &SweepTable) -> Result<String, Failure> {
    let solver = solver(s)?;
    let x = s.axis(SweepVariable::PTL).expect("checked by caller");
    let y = s.axis(SweepVariable::PD).expect("checked by caller");
    let fine = s.params.effective_fine_low();
    let theta = s.env.theta();
    let dc0 = solver.delta_c_zero();
    let max_fine = (1.0 - theta) * fine;

    // boundary curves parametrized by p_d, sampled densely in axis space
    let samples = 400;
    let p_d_at = |k: usize| {
        let t = k as f64 / samples as f64;
        if y.log {
            (y.min.ln() + t * (y.max.ln() - y.min.ln())).exp()
        } else {
            y.min + t * (y.max - y.min)
        }
    };
    let mut b1b2 = Vec::with_capacity(samples + 1);
    let mut b2b3 = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let p_d = p_d_at(k);
        let incentive =
            s.params
                .with_p_d(p_d)
                .ok()
                .and_then(|p| match misbehavior_threshold(&s.env, &p) {
                    Threshold::Rate(hat) => solver.delta_c(hat).ok().and_then(|d| d.finite()),
                    Threshold::NoInspectionEver => None,
                });
        b1b2.push(incentive.filter(|v| *v > 0.0).map(|v| (v, p_d)));
        b2b3.push(
            incentive
                .map(|v| v - fine)
                .filter(|v| *v > 0.0)
                .map(|v| (v, p_d)),
        );
    }
    let map = RegimeMap {
        title: format!(
            "Equilibrium regimes (theta = {}, F_l = {} USD, detection {})",
            theta,
            s.params.f_l(),
            s.params.detect_prob()
        ),
        x: Axis {
            values: x.values(),
            log: x.log,
            label: "toll-lane price p_t_l (USD)".into(),
        },
        y: Axis {
            values: y.values(),
            log: y.log,
            label: "inspection cost p_d (USD)".into(),
        },
        labels: table
            .rows
            .iter()
            .map(|r| r.outcome.regime_label().to_string())
            .collect(),
        overlays: vec![
            Overlay {
                label: format!("p_t_l = Δc(0) = {}", crate::svg::tick_label(dc0)),
                color: "#000000",
                dash: "6 3",
                points: vec![Some((dc0, y.min)), Some((dc0, y.max))],
            },
            Overlay {
                label: format!("p_d = (1−θ)F̃ = {}", crate::svg::tick_label(max_fine)),
                color: "#444444",
                dash: "2 3",
                points: vec![Some((x.min, max_fine)), Some((x.max, max_fine))],
            },
            Overlay {
                label: "p_t_l = Δc(σ̂)".into(),
                color: "#1b1b1b",
                dash: "none",
                points: b1b2,
            },
            Overlay {
                label: "p_t_l = Δc(σ̂) − F̃".into(),
                color: "#8b0000",
                dash: "8 2 2 2",
                points: b2b3,
            },
        ],
    };
    Ok(map.render())
}

pub fn regime_map(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let has = |v| s.axis(v).is_some();
    if !(has(SweepVariable::PTL) && has(SweepVariable::PD))
        || has(SweepVariable::Theta)
        || has(SweepVariable::FL)
    {
        return Err(Failure::new(
            ExitCode::Config,
            "sweep.axes: a regime map needs exactly the axes p_t_l (x) and p_d (y)",
        ));
    }
    let table = run_sweep(&s)?;
    write_file(&opts.out, "sweep.csv", &sweep_csv(&table.rows)?)?;
    let svg = regime_map_svg(&s, &table)?;
    write_file(&opts.out, "regime_map.svg", svg.as_bytes())?;
    say(
        opts.quiet,
        &format!("{} cells: {}", table.rows.len(), counts_text(&table)),
    );
    Ok(ExitCode::Success)
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub metrics: serde_json::Value,
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    inputs: Inputs<'a>,
    settings: &'a VerifySettings,
    passed: bool,
    checks: &'a [CheckResult],
}

fn queue_check(q: &QueueSettings, seed: u64) -> Result<(QueueSimResult, f64), Failure> {
    let r = simulate_mm1(q.arrival_rate, q.service_rate, q.horizon, seed)
        .map_err(|e| Failure::new(ExitCode::Config, format!("verify.queue: {e}")))?;
    let rel = r.relative_error(q.arrival_rate, q.service_rate);
    Ok((r, rel))
}

/// Runs every enabled check; the returned list is in a fixed order.
pub fn verify_checks(s: &Scenario) -> Result<Vec<CheckResult>, Failure> {
    let solver = solver(s)?;
    let v = &s.verify;
    let tol = s.tolerances.utility_tol;
    let eq = solver.solve(&s.params)?;
    let mut checks = vec![CheckResult {
        name: "solver_self_check",
        passed: eq.diagnostics.passed,
        detail: format!(
            "regime {}; min condition slack {:e} USD",
            eq.regime,
            eq.diagnostics.min_slack()
        ),
        metrics: serde_json::to_value(&eq.diagnostics).unwrap_or_default(),
    }];

    if v.checks.contains(&Check::Grid) {
        let grid = grid_search_pbe(&s.env, &s.model, &s.params, v.sigma_steps, tol)
            .map_err(|e| Failure::new(ExitCode::Config, format!("verify.{e}")))?;
        let (dl, dd) = grid.max_deviation(&eq);
        let passed = grid.is_unique() && grid.matches(&eq, ORACLE_SIGMA_TOL);
        checks.push(CheckResult {
            name: "grid_search",
            passed,
            detail: format!(
                "{} candidate(s), unique = {}, |Δσ_l| = {dl:e} (limit {:e}), |Δσ_H^d| = {dd:e} (limit {ORACLE_SIGMA_TOL:e})",
                grid.candidates.len(),
                grid.is_unique(),
                2.0 * grid.step()
            ),
            metrics: serde_json::json!({
                "sigma_steps": v.sigma_steps,
                "candidates": grid.candidates,
                "sigma_l_deviation": dl,
                "sigma_d_h_deviation": dd,
            }),
        });
    }

    if v.checks.contains(&Check::Dynamics) {
        let out = best_response_iterate(
            &s.env,
            &s.model,
            &s.params,
            v.damping,
            v.max_iter,
            v.dynamics_tol,
        )
        .map_err(|e| Failure::new(ExitCode::Config, format!("verify: {e}")))?;
        let last = *out.trajectory.last().expect("trajectory holds the start");
        let (passed, detail, limit): (bool, String, Option<TrajectoryPoint>) = match &out.status {
            DynamicsStatus::Converged { limit, report, .. } => {
                let dl = (limit.sigma_l - eq.sigma_l()).abs();
                let dd = (limit.sigma_d_h - eq.sigma_d_h()).abs();
                let close = dl <= ORACLE_SIGMA_TOL && dd <= ORACLE_SIGMA_TOL;
                (
                    report.passed && close,
                    format!(
                        "converged after {} iterations; checker {}; |Δσ_l| = {dl:e}, |Δσ_H^d| = {dd:e}",
                        out.iterations,
                        if report.passed { "passes" } else { "fails" }
                    ),
                    Some(*limit),
                )
            }
            DynamicsStatus::NonConvergence => (
                false,
                format!("no convergence within {} iterations", out.iterations),
                None,
            ),
        };
        checks.push(CheckResult {
            name: "best_response_dynamics",
            passed,
            detail,
            metrics: serde_json::json!({
                "damping": v.damping,
                "iterations": out.iterations,
                "limit": limit,
                "last_iterate": last,
            }),
        });
    }

    if v.checks.contains(&Check::Draws) && v.draws > 0 {
        let spec = DrawSpec {
            count: v.draws,
            seed: v.seed,
            sigma_steps: v.sigma_steps,
            tol,
        };
        let draws = draw_parameters(&solver, &s.params, spec.count, spec.seed)?;
        let outcomes: Vec<DrawOutcome> = draws
            .into_par_iter()
            .map(|(p, r)| compare_with_grid(&solver, p, r, &spec))
            .collect::<Result<_, _>>()?;
        let matched = outcomes.iter().filter(|o| o.matched).count();
        let regimes: Vec<&str> = Regime::INTERIOR
            .iter()
            .filter(|r| outcomes.iter().any(|o| o.regime == **r))
            .map(|r| r.label())
            .collect();
        checks.push(CheckResult {
            name: "oracle_equivalence",
            passed: matched == outcomes.len(),
            detail: format!(
                "{matched}/{} draws match (regimes covered: {})",
                outcomes.len(),
                regimes.join(", ")
            ),
            metrics: serde_json::json!({ "seed": v.seed, "draws": outcomes }),
        });
    }

    if v.checks.contains(&Check::Queue) {
        let (r, rel) = queue_check(&v.queue, v.seed)?;
        checks.push(CheckResult {
            name: "queue_simulation",
            passed: rel < v.queue.rel_tol,
            detail: format!(
                "mean system time {:.6e} hr vs 1/(μ−λ) = {:.6e} hr; relative error {:.3}% (limit {}%)",
                r.mean_system_time,
                1.0 / (v.queue.service_rate - v.queue.arrival_rate),
                100.0 * rel,
                100.0 * v.queue.rel_tol
            ),
            metrics: serde_json::json!({ "result": r, "relative_error": rel }),
        });
    }
    Ok(checks)
}

pub fn verify(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let checks = verify_checks(&s)?;
    let passed = checks.iter().all(|c| c.passed);
    let json = to_json(
        &Metadata::new(&s),
        &VerifyDoc {
            inputs: Inputs::of(&s),
            settings: &s.verify,
            passed,
            checks: &checks,
        },
    )?;
    write_file(&opts.out, "verify.json", json.as_bytes())?;
    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(
            text,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    say(opts.quiet, &text);
    if passed {
        Ok(ExitCode::Success)
    } else {
        Err(Failure::new(
            ExitCode::VerificationFailed,
            "an oracle disagrees with the closed-form solution",
        ))
    }
}

#[derive(Serialize)]
struct QueueDoc<'a> {
    settings: &'a QueueSettings,
    result: QueueSimResult,
    analytic_mean_system_time: f64,
    relative_error: f64,
}

pub fn simulate_queue(opts: &Options) -> Outcome {
    let s = opts.scenario()?;
    let q = &s.verify.queue;
    let (r, rel) = queue_check(q, s.verify.seed)?;
    let json = to_json(
        &Metadata::new(&s),
        &QueueDoc {
            settings: q,
            result: r,
            analytic_mean_system_time: 1.0 / (q.service_rate - q.arrival_rate),
            relative_error: rel,
        },
    )?;
    write_file(&opts.out, "queue.json", json.as_bytes())?;
    say(
        opts.quiet,
        &format!(
            "mean system time {:.6e} hr ± {:.2e} (95%), relative error {:.3}% over {} departures",
            r.mean_system_time,
            r.half_width_95,
            100.0 * rel,
            r.sample_count
        ),
    );
    Ok(ExitCode::Success)
}
