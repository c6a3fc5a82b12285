//! Comparative-statics sweeps over `(p_t_l, p_d)` and optionally `θ`, `F_l`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{BoundaryDetail, Regime, SolveError, Solver, SolverTolerances};
use crate::cost::{CostModel, TrafficEnvironment};
use crate::game::GameParams;

/// Axis specification: `steps` points from `min` to `max` inclusive, spaced
/// linearly or logarithmically.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub log: bool,
}

impl SweepAxis {
    pub fn linear(min: f64, max: f64, steps: usize) -> Self {
        Self {
            min,
            max,
            steps,
            log: false,
        }
    }

    pub fn log(min: f64, max: f64, steps: usize) -> Self {
        Self {
            min,
            max,
            steps,
            log: true,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 0 {
            return Vec::new();
        }
        if self.steps == 1 {
            return alloc::vec![self.min];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / n;
                if i == 0 {
                    self.min
                } else if i + 1 == self.steps {
                    self.max
                } else if self.log {
                    libm::exp(libm::log(self.min) + t * (libm::log(self.max) - libm::log(self.min)))
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect()
    }
}

/// Grid of sweep values. Empty `theta`/`f_l` lists mean "use the base
/// value".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub p_t_l: Vec<f64>,
    pub p_d: Vec<f64>,
    pub theta: Vec<f64>,
    pub f_l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepCell {
    pub p_t_l: f64,
    pub p_d: f64,
    pub theta: f64,
    pub f_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CellSolution {
    pub regime: Regime,
    pub sigma_l: f64,
    pub sigma_d_h: f64,
    /// Equilibrium utility of a type-`l` traveler.
    pub u_l: f64,
    /// Equilibrium utility of a type-`h` traveler.
    pub u_h: f64,
    /// Operator utility per traveler, averaged over the two signals.
    pub u_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum CellOutcome {
    Solved(CellSolution),
    Boundary { detail: BoundaryDetail },
    Failed { error: String },
}

impl CellOutcome {
    pub fn solution(&self) -> Option<&CellSolution> {
        match self {
            CellOutcome::Solved(s) => Some(s),
            _ => None,
        }
    }

    pub fn regime_label(&self) -> &'static str {
        match self {
            CellOutcome::Solved(s) => s.regime.label(),
            CellOutcome::Boundary { .. } => "Boundary",
            CellOutcome::Failed { .. } => "",
        }
    }

    /// Short status token: `ok`, `boundary:<detail>` or `error:<message>`.
    pub fn status(&self) -> String {
        match self {
            CellOutcome::Solved(_) => "ok".to_string(),
            CellOutcome::Boundary { detail } => format!("boundary:{detail}"),
            CellOutcome::Failed { error } => format!("error:{error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepRow {
    pub cell: SweepCell,
    pub outcome: CellOutcome,
}

/// Qualitative direction of a quantity along an axis, with tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Trend {
    Constant,
    Nondecreasing,
    Nonincreasing,
    Mixed,
    /// No two adjacent cells of this regime along the axis.
    Insufficient,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Constant => "-",
            Trend::Nondecreasing => "up",
            Trend::Nonincreasing => "down",
            Trend::Mixed => "mixed",
            Trend::Insufficient => "n/a",
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct TrendAcc {
    pairs: usize,
    up: bool,
    down: bool,
}

impl TrendAcc {
    fn push(&mut self, diff: f64, tol: f64) {
        self.pairs += 1;
        if diff > tol {
            self.up = true;
        } else if diff < -tol {
            self.down = true;
        }
    }

    fn trend(&self) -> Trend {
        match (self.pairs, self.up, self.down) {
            (0, _, _) => Trend::Insufficient,
            (_, false, false) => Trend::Constant,
            (_, true, false) => Trend::Nondecreasing,
            (_, false, true) => Trend::Nonincreasing,
            (_, true, true) => Trend::Mixed,
        }
    }
}

/// Sign pattern of `σ_l*` and `σ_H^d*` along one axis inside one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrendSummary {
    pub regime: Regime,
    /// `"p_t_l"` or `"p_d"`.
    pub axis: &'static str,
    pub sigma_l: Trend,
    pub sigma_d_h: Trend,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<TrendSummary>,
}

pub const MONOTONE_TOL: f64 = 1e-9;

impl SweepTable {
    /// Assembles a table from rows in the grid's cell order and computes the
    /// per-regime monotonicity summary.
    pub fn from_rows(grid: &SweepGrid, rows: Vec<SweepRow>) -> Self {
        let summary = summarize(grid, &rows);
        Self { rows, summary }
    }

    pub fn trend(&self, regime: Regime, axis: &str) -> Option<&TrendSummary> {
        self.summary
            .iter()
            .find(|s| s.regime == regime && s.axis == axis)
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.rows
            .iter()
            .filter(|r| r.outcome.solution().is_some_and(|s| s.regime == regime))
            .count()
    }
}

fn dims(grid: &SweepGrid) -> [usize; 4] {
    [
        grid.theta.len().max(1),
        grid.f_l.len().max(1),
        grid.p_d.len(),
        grid.p_t_l.len(),
    ]
}

fn summarize(grid: &SweepGrid, rows: &[SweepRow]) -> Vec<TrendSummary> {
    let [nt, nf, nd, np] = dims(grid);
    let idx = |t: usize, f: usize, d: usize, p: usize| ((t * nf + f) * nd + d) * np + p;
    let mut out = Vec::new();
    for regime in Regime::INTERIOR {
        for axis in ["p_t_l", "p_d"] {
            let mut acc_l = TrendAcc::default();
            let mut acc_d = TrendAcc::default();
            let mut visit = |a: usize, b: usize| {
                let (ra, rb) = (&rows[a].outcome, &rows[b].outcome);
                if let (Some(x), Some(y)) = (ra.solution(), rb.solution()) {
                    if x.regime == regime && y.regime == regime {
                        acc_l.push(y.sigma_l - x.sigma_l, MONOTONE_TOL);
                        acc_d.push(y.sigma_d_h - x.sigma_d_h, MONOTONE_TOL);
                    }
                }
            };
            for t in 0..nt {
                for f in 0..nf {
                    if axis == "p_t_l" {
                        for d in 0..nd {
                            for p in 1..np {
                                visit(idx(t, f, d, p - 1), idx(t, f, d, p));
                            }
                        }
                    } else {
                        for p in 0..np {
                            for d in 1..nd {
                                visit(idx(t, f, d - 1, p), idx(t, f, d, p));
                            }
                        }
                    }
                }
            }
            out.push(TrendSummary {
                regime,
                axis,
                sigma_l: acc_l.trend(),
                sigma_d_h: acc_d.trend(),
                pairs: acc_l.pairs,
            });
        }
    }
    out
}

/// A prepared sweep: one solver per `θ` value, cells in fixed order
/// (`θ`, then `F_l`, then `p_d`, then `p_t_l` innermost). Cells are
/// independent and may be evaluated in any order.
pub struct Sweep<'m, M: ?Sized> {
    grid: SweepGrid,
    base: GameParams,
    solvers: Vec<(f64, Result<Solver<'m, M>, SolveError>)>,
    f_l: Vec<f64>,
}

impl<'m, M: CostModel + ?Sized> Sweep<'m, M> {
    pub fn new(
        env: &TrafficEnvironment,
        model: &'m M,
        base: GameParams,
        grid: SweepGrid,
        tol: SolverTolerances,
    ) -> Self {
        let thetas = if grid.theta.is_empty() {
            alloc::vec![env.theta()]
        } else {
            grid.theta.clone()
        };
        let solvers = thetas
            .into_iter()
            .map(|theta| {
                let solver = env
                    .with_theta(theta)
                    .map_err(|e| SolveError::AssumptionViolation(e.to_string()))
                    .and_then(|e| Solver::new(e, model, tol));
                (theta, solver)
            })
            .collect();
        let f_l = if grid.f_l.is_empty() {
            alloc::vec![base.f_l()]
        } else {
            grid.f_l.clone()
        };
        Self {
            grid,
            base,
            solvers,
            f_l,
        }
    }

    pub fn grid(&self) -> &SweepGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        dims(&self.grid).iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, index: usize) -> SweepCell {
        let [_, nf, nd, np] = dims(&self.grid);
        let p = index % np;
        let d = (index / np) % nd;
        let f = (index / (np * nd)) % nf;
        let t = index / (np * nd * nf);
        SweepCell {
            p_t_l: self.grid.p_t_l[p],
            p_d: self.grid.p_d[d],
            theta: self.solvers[t].0,
            f_l: self.f_l[f],
        }
    }

    pub fn evaluate(&self, index: usize) -> SweepRow {
        let [_, nf, nd, np] = dims(&self.grid);
        let cell = self.cell(index);
        let solver = &self.solvers[index / (np * nd * nf)].1;
        let outcome = match solver {
            Err(e) => CellOutcome::Failed {
                error: e.to_string(),
            },
            Ok(solver) => solve_cell(solver, &self.base, &cell),
        };
        SweepRow { cell, outcome }
    }

    /// Evaluates every cell sequentially.
    pub fn run(&self) -> SweepTable {
        let rows = (0..self.len()).map(|i| self.evaluate(i)).collect();
        SweepTable::from_rows(&self.grid, rows)
    }
}

fn solve_cell<M: CostModel + ?Sized>(
    solver: &Solver<'_, M>,
    base: &GameParams,
    cell: &SweepCell,
) -> CellOutcome {
    let params = match base
        .with_p_t_l(cell.p_t_l)
        .and_then(|p| p.with_p_d(cell.p_d))
        .and_then(|p| p.with_f_l(cell.f_l))
    {
        Ok(p) => p,
        Err(e) => {
            return CellOutcome::Failed {
                error: e.to_string(),
            }
        }
    };
    match solver.solve(&params) {
        Ok(eq) => {
            let theta = solver.env().theta();
            let t = &eq.profile.traveler;
            let on_h = theta * (1.0 - t.sigma_h) + (1.0 - theta) * t.sigma_l;
            let (u_dh, u_dl) = eq.operator_utilities;
            CellOutcome::Solved(CellSolution {
                regime: eq.regime,
                sigma_l: eq.sigma_l(),
                sigma_d_h: eq.sigma_d_h(),
                u_l: eq.utilities.u_l_on_l.as_f64(),
                u_h: eq.utilities.u_h_on_h.as_f64(),
                u_d: on_h * u_dh + (1.0 - on_h) * u_dl,
            })
        }
        Err(SolveError::BoundaryParameters(detail)) => CellOutcome::Boundary { detail },
        Err(e) => CellOutcome::Failed {
            error: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Mm1Cost, Mm1CostParams};

    fn etc() -> (TrafficEnvironment, Mm1Cost) {
        (
            TrafficEnvironment::new(0.3, 2400.0).unwrap(),
            Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap()),
        )
    }

    #[test]
    fn axis_values() {
        assert_eq!(SweepAxis::linear(0.0, 1.0, 3).values(), [0.0, 0.5, 1.0]);
        let v = SweepAxis::log(0.01, 100.0, 5).values();
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-14);
        assert_eq!(v[4], 100.0);
        assert_eq!(SweepAxis::linear(2.0, 3.0, 1).values(), [2.0]);
    }

    #[test]
    fn crossing_the_deterrence_threshold() {
        let (env, m) = etc();
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let grid = SweepGrid {
            p_t_l: alloc::vec![2.0, 3.0],
            p_d: alloc::vec![80.0],
            ..Default::default()
        };
        let table = Sweep::new(&env, &m, base, grid, SolverTolerances::default()).run();
        let s: Vec<_> = table
            .rows
            .iter()
            .map(|r| *r.outcome.solution().unwrap())
            .collect();
        assert_eq!((s[0].regime, s[1].regime), (Regime::B1, Regime::A));
        assert!(s[0].sigma_l > 0.0 && s[1].sigma_l == 0.0);
    }

    #[test]
    fn summary_matches_qualitative_table() {
        let (env, m) = etc();
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let grid = SweepGrid {
            p_t_l: SweepAxis::linear(0.05, 3.5, 60).values(),
            p_d: SweepAxis::linear(0.5, 90.0, 60).values(),
            ..Default::default()
        };
        let table = Sweep::new(&env, &m, base, grid, SolverTolerances::default()).run();
        let b1 = table.trend(Regime::B1, "p_t_l").unwrap();
        assert_eq!(b1.sigma_l, Trend::Nonincreasing);
        assert_eq!(b1.sigma_d_h, Trend::Constant);
        let b2 = table.trend(Regime::B2, "p_d").unwrap();
        assert_eq!(b2.sigma_l, Trend::Nondecreasing);
        assert_eq!(b2.sigma_d_h, Trend::Nonincreasing);
        assert_eq!(
            table.trend(Regime::B2, "p_t_l").unwrap().sigma_l,
            Trend::Constant
        );
        assert_eq!(
            table.trend(Regime::A, "p_t_l").unwrap().sigma_l,
            Trend::Constant
        );
        assert_eq!(table.count(Regime::B3), 0);
    }

    #[test]
    fn cell_order_is_theta_then_fine_then_pd_then_ptl() {
        let (env, m) = etc();
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let grid = SweepGrid {
            p_t_l: alloc::vec![0.5, 1.0],
            p_d: alloc::vec![5.0, 6.0, 7.0],
            theta: alloc::vec![0.3, 0.35],
            f_l: alloc::vec![50.0, 100.0],
        };
        let sweep = Sweep::new(&env, &m, base, grid, SolverTolerances::default());
        assert_eq!(sweep.len(), 24);
        let c = sweep.cell(1);
        assert_eq!((c.p_t_l, c.p_d, c.theta, c.f_l), (1.0, 5.0, 0.3, 50.0));
        let c = sweep.cell(2);
        assert_eq!((c.p_t_l, c.p_d), (0.5, 6.0));
        let c = sweep.cell(6);
        assert_eq!((c.p_d, c.f_l), (5.0, 100.0));
        let c = sweep.cell(12);
        assert_eq!((c.theta, c.f_l), (0.35, 50.0));
    }

    #[test]
    fn invalid_theta_is_recorded_per_cell() {
        let (env, m) = etc();
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let grid = SweepGrid {
            p_t_l: alloc::vec![0.5],
            p_d: alloc::vec![5.0],
            // at θ = 0.05 the L queue is saturated without misbehavior
            theta: alloc::vec![0.05, 0.3],
            f_l: Vec::new(),
        };
        let table = Sweep::new(&env, &m, base, grid, SolverTolerances::default()).run();
        assert!(matches!(table.rows[0].outcome, CellOutcome::Failed { .. }));
        assert!(table.rows[1].outcome.solution().is_some());
    }
}
