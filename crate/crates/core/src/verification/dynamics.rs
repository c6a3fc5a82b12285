//! Damped alternating best responses.
//!
//! Each iteration moves `σ_l` a fraction `damping` toward the traveler's
//! indifference point `Δc⁻¹(p_t_l + F̃·σ_H^d)` and then moves `σ_H^d` toward
//! the operator's best response under Bayes beliefs. The operator response
//! is bang-bang away from indifference, so with `damping < 1` its step is
//! halved each time the response flips between 0 and 1; this lets mixed
//! equilibria settle instead of cycling.
//!
//! Once steps fall below `tol` the state is polished: an inspection rate
//! within `tol` of a pure response snaps to it, and `σ_l` is replaced by the
//! traveler's exact best response to that rate.

use alloc::vec::Vec;

use crate::cost::{
    delta_c, inverse_delta_c, CostError, CostModel, MisbehaviorStrategy, TrafficEnvironment,
};
use crate::game::{
    bayes_update, check_pbe, inspection_gains, Belief, GameParams, PbeReport, StrategyProfile,
    DEFAULT_UTILITY_TOL,
};
use crate::ParamError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrajectoryPoint {
    pub sigma_l: f64,
    pub sigma_d_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum DynamicsStatus {
    /// Steps fell below `tol`; `report` is the checker's verdict on the
    /// polished limit.
    Converged {
        limit: TrajectoryPoint,
        belief: Belief,
        report: PbeReport,
    },
    NonConvergence,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DynamicsOutcome {
    pub status: DynamicsStatus,
    pub iterations: usize,
    /// Starting point followed by every iterate.
    pub trajectory: Vec<TrajectoryPoint>,
}

impl DynamicsOutcome {
    /// Limit point when the iteration converged and the limit passes the
    /// equilibrium checker.
    pub fn equilibrium(&self) -> Option<TrajectoryPoint> {
        match &self.status {
            DynamicsStatus::Converged { limit, report, .. } if report.passed => Some(*limit),
            _ => None,
        }
    }
}

/// Runs from `(σ_l, σ_H^d) = (0, 0)`. `tol` bounds the final step size on
/// both rates; the limit is checked at the default utility tolerance.
pub fn best_response_iterate<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<DynamicsOutcome, DynamicsError> {
    best_response_from(
        env,
        model,
        params,
        TrajectoryPoint {
            sigma_l: 0.0,
            sigma_d_h: 0.0,
        },
        damping,
        max_iter,
        tol,
    )
}

/// As [`best_response_iterate`] from an arbitrary start.
pub fn best_response_from<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    start: TrajectoryPoint,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<DynamicsOutcome, DynamicsError> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(ParamError::new("damping", damping, "in (0, 1]").into());
    }
    let fine = params.effective_fine_low();
    let max_incentive = delta_c(env, model, 0.0)?.as_f64();
    let traveler_target = |sigma_d_h: f64| -> Result<f64, CostError> {
        let target = params.p_t_l() + fine * sigma_d_h;
        if target >= max_incentive {
            return Ok(0.0);
        }
        match inverse_delta_c(env, model, target, 1e-15) {
            Err(CostError::TargetBelowMin { .. }) => Ok(1.0),
            r => r,
        }
    };

    let mut state = start;
    let mut trajectory = alloc::vec![state];
    let mut operator_step = damping;
    let mut last_pure: Option<bool> = None;
    let mut last_response;
    for iter in 1..=max_iter {
        let target = traveler_target(state.sigma_d_h)?;
        let sigma_l = state.sigma_l + damping * (target - state.sigma_l);

        let belief = bayes_update(env, &MisbehaviorStrategy::low_only(sigma_l));
        let (gain, _) = inspection_gains(params, &belief);
        let response = if gain.abs() <= DEFAULT_UTILITY_TOL {
            // indifferent: pick the rate that makes the traveler indifferent
            let incentive = delta_c(env, model, sigma_l)?.as_f64();
            ((incentive - params.p_t_l()) / fine).clamp(0.0, 1.0)
        } else {
            let up = gain > 0.0;
            if damping < 1.0 && last_pure.is_some_and(|prev| prev != up) {
                operator_step *= 0.5;
            }
            last_pure = Some(up);
            if up {
                1.0
            } else {
                0.0
            }
        };
        let sigma_d_h = state.sigma_d_h + operator_step * (response - state.sigma_d_h);
        last_response = response;

        let next = TrajectoryPoint { sigma_l, sigma_d_h };
        let moved = (next.sigma_l - state.sigma_l)
            .abs()
            .max((next.sigma_d_h - state.sigma_d_h).abs());
        state = next;
        trajectory.push(state);
        if moved < tol {
            let pure = last_response == 0.0 || last_response == 1.0;
            // remaining distance of a geometric approach is moved / step
            if pure && (state.sigma_d_h - last_response).abs() <= tol / operator_step {
                state.sigma_d_h = last_response;
            }
            state.sigma_l = traveler_target(state.sigma_d_h)?;
            let profile = StrategyProfile::reduced(state.sigma_l, state.sigma_d_h);
            let belief = bayes_update(env, &profile.traveler);
            let report = check_pbe(env, model, params, &profile, &belief, DEFAULT_UTILITY_TOL);
            return Ok(DynamicsOutcome {
                status: DynamicsStatus::Converged {
                    limit: state,
                    belief,
                    report,
                },
                iterations: iter,
                trajectory,
            });
        }
    }
    Ok(DynamicsOutcome {
        status: DynamicsStatus::NonConvergence,
        iterations: max_iter,
        trajectory,
    })
}
