//! Seeded random parameter draws and the grid-versus-solver comparison.
//!
//! Draws are log-uniform: `F_l ∈ [0.1, 50]·Δc(0)`,
//! `p_t_l ∈ [0.01, 10]·Δc(0)` and `p_d ∈ [0.01, 2]·(1−θ)F̃`. Draw `k` is
//! resampled until it lands in regime `[A, B1, B2, B3][k mod 4]`, so every
//! regime is exercised; Boundary draws are always rejected.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::grid_search_pbe;
use crate::cost::CostModel;
use crate::equilibrium::{Regime, SolveError, Solver};
use crate::game::GameParams;
use crate::ParamError;

/// Allowed gap on `σ_H^d` between grid candidates and the solver.
pub const ORACLE_SIGMA_TOL: f64 = 1e-6;

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawSpec {
    pub count: usize,
    pub seed: u64,
    pub sigma_steps: usize,
    /// Checker tolerance (USD) used by the grid search.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DrawOutcome {
    pub params: GameParams,
    pub regime: Regime,
    pub solver_sigma_l: f64,
    pub solver_sigma_d_h: f64,
    pub candidates: usize,
    pub unique: bool,
    /// Largest `|Δσ_l|` between a candidate and the solver.
    pub sigma_l_deviation: f64,
    /// Largest `|Δσ_H^d|` between a candidate and the solver.
    pub sigma_d_h_deviation: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)))
}

/// Draws `count` non-boundary parameter points around `base` (which supplies
/// `p_t_h`, `f_h` and `detect_prob`).
pub fn draw_parameters<M: CostModel + ?Sized>(
    solver: &Solver<'_, M>,
    base: &GameParams,
    count: usize,
    seed: u64,
) -> Result<Vec<(GameParams, Regime)>, SolveError> {
    const TARGETS: [Regime; 4] = Regime::INTERIOR;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dc0 = solver.delta_c_zero();
    let theta = solver.env().theta();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let target = TARGETS[k % TARGETS.len()];
        let mut fallback = None;
        let mut chosen = None;
        for _ in 0..MAX_ATTEMPTS {
            let f_l = log_uniform(&mut rng, 0.1 * dc0, 50.0 * dc0);
            let p_t_l = log_uniform(&mut rng, 0.01 * dc0, 10.0 * dc0);
            let fine = f_l * base.detect_prob();
            let p_d = log_uniform(
                &mut rng,
                0.01 * (1.0 - theta) * fine,
                2.0 * (1.0 - theta) * fine,
            );
            let params = base
                .with_f_l(f_l)
                .and_then(|p| p.with_p_t_l(p_t_l))
                .and_then(|p| p.with_p_d(p_d))
                .expect("sampled values are positive and finite");
            let regime = solver.classify(&params)?.regime;
            if regime.is_boundary() {
                continue;
            }
            if regime == target {
                chosen = Some((params, regime));
                break;
            }
            fallback.get_or_insert((params, regime));
        }
        if let Some(d) = chosen.or(fallback) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Runs the grid search on each seeded draw and compares it with the solver.
pub fn oracle_equivalence<M: CostModel + ?Sized>(
    solver: &Solver<'_, M>,
    base: &GameParams,
    spec: &DrawSpec,
) -> Result<Vec<DrawOutcome>, OracleError> {
    draw_parameters(solver, base, spec.count, spec.seed)?
        .into_iter()
        .map(|(params, regime)| compare_with_grid(solver, params, regime, spec))
        .collect()
}

/// Grid search versus solver on one parameter point.
pub fn compare_with_grid<M: CostModel + ?Sized>(
    solver: &Solver<'_, M>,
    params: GameParams,
    regime: Regime,
    spec: &DrawSpec,
) -> Result<DrawOutcome, OracleError> {
    let eq = solver.solve(&params)?;
    let grid = grid_search_pbe(
        solver.env(),
        solver.model(),
        &params,
        spec.sigma_steps,
        spec.tol,
    )?;
    let (dl, dd) = grid.max_deviation(&eq);
    Ok(DrawOutcome {
        params,
        regime,
        solver_sigma_l: eq.sigma_l(),
        solver_sigma_d_h: eq.sigma_d_h(),
        candidates: grid.candidates.len(),
        unique: grid.is_unique(),
        sigma_l_deviation: dl,
        sigma_d_h_deviation: dd,
        matched: grid.is_unique() && grid.matches(&eq, ORACLE_SIGMA_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Mm1Cost, Mm1CostParams, TrafficEnvironment};
    use crate::equilibrium::SolverTolerances;

    fn solver(m: &Mm1Cost) -> Solver<'_, Mm1Cost> {
        Solver::new(
            TrafficEnvironment::new(0.3, 2400.0).unwrap(),
            m,
            SolverTolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn draws_cover_every_regime_and_are_reproducible() {
        let m = Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap());
        let s = solver(&m);
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let a = draw_parameters(&s, &base, 20, 2024).unwrap();
        assert_eq!(a.len(), 20);
        for r in Regime::INTERIOR {
            assert_eq!(a.iter().filter(|d| d.1 == r).count(), 5, "{r}");
        }
        assert_eq!(a, draw_parameters(&s, &base, 20, 2024).unwrap());
        assert_ne!(a, draw_parameters(&s, &base, 20, 2025).unwrap());
    }

    #[test]
    fn small_protocol_run_agrees() {
        let m = Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap());
        let s = solver(&m);
        let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let spec = DrawSpec {
            count: 8,
            seed: 11,
            sigma_steps: 500,
            tol: 1e-9,
        };
        for d in oracle_equivalence(&s, &base, &spec).unwrap() {
            assert!(d.matched, "{d:?}");
        }
    }
}
