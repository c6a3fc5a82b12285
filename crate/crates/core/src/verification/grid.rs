//! Exhaustive search for equilibria on a `σ_l` grid.
//!
//! For each operator branch the traveler gap
//! `g(σ) = Δc(σ) − p_t_l − F̃·σ_H^d` is tabulated on the grid. Corner
//! candidates (`σ_l = 0` or `1`) are checked directly. An interior sign
//! change of `g` brackets a traveler-indifference point, which is refined by
//! bisection inside its grid cell and then checked. The interior operator
//! branch brackets the sign change of the inspection gain under Bayes
//! beliefs, refines it, and solves the traveler indifference for
//! `σ_H^d`. Every reported candidate passes the equilibrium checker at the
//! requested tolerance.

use alloc::vec::Vec;

use crate::cost::{delta_c, CostModel, MisbehaviorStrategy, TrafficEnvironment};
use crate::equilibrium::Equilibrium;
use crate::game::{bayes_update, check_pbe, inspection_gains, Belief, GameParams, StrategyProfile};
use crate::ParamError;

pub const MIN_SIGMA_STEPS: usize = 100;

/// Which operator response produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Branch {
    Zero,
    Interior,
    One,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GridCandidate {
    pub profile: StrategyProfile,
    pub belief: Belief,
    pub branch: Branch,
    /// Smallest condition slack reported by the checker (USD).
    #[cfg_attr(
        feature = "serde",
        serde(serialize_with = "crate::num::token_f64::serialize")
    )]
    pub slack: f64,
    /// `true` when `σ_l` was refined inside a grid cell rather than taken
    /// from a grid point.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GridSearchResult {
    pub candidates: Vec<GridCandidate>,
    pub sigma_steps: usize,
}

impl GridSearchResult {
    pub fn step(&self) -> f64 {
        1.0 / self.sigma_steps as f64
    }

    /// Spread of the candidates in `σ_l`; `None` when nothing passed.
    pub fn sigma_l_range(&self) -> Option<(f64, f64)> {
        let mut it = self.candidates.iter().map(|c| c.profile.traveler.sigma_l);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), s| (lo.min(s), hi.max(s))))
    }

    /// All candidates lie within two grid steps of each other.
    pub fn is_unique(&self) -> bool {
        self.sigma_l_range()
            .is_some_and(|(lo, hi)| hi - lo <= 2.0 * self.step() + 1e-15)
    }

    /// Every candidate is within two grid steps of the solver's `σ_l` and
    /// within `sigma_d_tol` of its `σ_H^d`.
    pub fn matches(&self, eq: &Equilibrium, sigma_d_tol: f64) -> bool {
        !self.candidates.is_empty()
            && self.candidates.iter().all(|c| {
                (c.profile.traveler.sigma_l - eq.sigma_l()).abs() <= 2.0 * self.step() + 1e-15
                    && (c.profile.operator.sigma_d_h - eq.sigma_d_h()).abs() <= sigma_d_tol
            })
    }

    /// Largest deviation from the solver over all candidates, as
    /// `(|Δσ_l|, |Δσ_H^d|)`.
    pub fn max_deviation(&self, eq: &Equilibrium) -> (f64, f64) {
        self.candidates.iter().fold((0.0, 0.0), |(a, b), c| {
            (
                f64::max(a, (c.profile.traveler.sigma_l - eq.sigma_l()).abs()),
                f64::max(b, (c.profile.operator.sigma_d_h - eq.sigma_d_h()).abs()),
            )
        })
    }
}

/// Grid search with `sigma_steps + 1` points `σ_l = i / sigma_steps`.
pub fn grid_search_pbe<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    sigma_steps: usize,
    tol: f64,
) -> Result<GridSearchResult, ParamError> {
    if sigma_steps < MIN_SIGMA_STEPS {
        return Err(ParamError::new(
            "sigma_steps",
            sigma_steps as f64,
            "at least 100",
        ));
    }
    let n = sigma_steps;
    let point = |i: usize| i as f64 / n as f64;
    let fine = params.effective_fine_low();
    // −∞ past the stability edge of H; NaN only if L saturates, which the
    // checker then rejects.
    let incentive = |s: f64| match delta_c(env, model, s) {
        Ok(d) => d.as_f64(),
        Err(_) => f64::NAN,
    };
    let incentives: Vec<f64> = (0..=n).map(|i| incentive(point(i))).collect();

    let mut out = Vec::new();
    let mut push = |sigma_l: f64, sigma_d_h: f64, branch: Branch, refined: bool| {
        let profile = StrategyProfile::reduced(sigma_l, sigma_d_h);
        let belief = bayes_update(env, &profile.traveler);
        let report = check_pbe(env, model, params, &profile, &belief, tol);
        if report.passed {
            out.push(GridCandidate {
                profile,
                belief,
                branch,
                slack: report.min_slack(),
                refined,
            });
        }
    };

    for (branch, rate) in [(Branch::Zero, 0.0), (Branch::One, 1.0)] {
        let gap = |v: f64| v - params.p_t_l() - fine * rate;
        push(0.0, rate, branch, false);
        push(1.0, rate, branch, false);
        for i in 0..n {
            let (a, b) = (gap(incentives[i]), gap(incentives[i + 1]));
            if i > 0 && a == 0.0 {
                push(point(i), rate, branch, false);
            } else if a > 0.0 && b < 0.0 {
                let s = bisect(point(i), point(i + 1), |s| gap(incentive(s)) > 0.0);
                push(s, rate, branch, true);
            }
        }
    }

    let gain = |s: f64| {
        inspection_gains(
            params,
            &bayes_update(env, &MisbehaviorStrategy::low_only(s)),
        )
        .0
    };
    let gains: Vec<f64> = (0..=n).map(|i| gain(point(i))).collect();
    for i in 0..n {
        let (a, b) = (gains[i], gains[i + 1]);
        let s = if a == 0.0 {
            point(i)
        } else if a < 0.0 && b > 0.0 || a > 0.0 && b < 0.0 {
            bisect(point(i), point(i + 1), |s| (gain(s) > 0.0) == (a > 0.0))
        } else {
            continue;
        };
        let rate = (incentive(s) - params.p_t_l()) / fine;
        if (0.0..=1.0).contains(&rate) {
            push(s, rate, Branch::Interior, a != 0.0);
        }
    }
    Ok(GridSearchResult {
        candidates: out,
        sigma_steps,
    })
}

/// Shrinks `[lo, hi]` to adjacent floats around the point where `left`
/// stops holding; `left(lo)` is assumed true and `left(hi)` false.
fn bisect(mut lo: f64, mut hi: f64, left: impl Fn(f64) -> bool) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if left(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
