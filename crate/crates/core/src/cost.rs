//! Congestion costs of the two servers.
//!
//! Server `H` is meant for type-`h` travelers and server `L` for type-`l`
//! travelers. Misbehaving travelers shift demand from one server to the
//! other, so each server's cost depends on the population split `θ` and the
//! misbehavior strategy `(σ_h, σ_l)`. The [`CostModel`] trait is the opaque
//! cost interface used everywhere else; [`Mm1Cost`] models each server as an
//! M/M/1 queue with cost `VoT / (μ − demand)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::ParamError;

/// Exogenous traffic facts: population split and total demand.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrafficEnvironment {
    theta: f64,
    lambda_total: f64,
}

impl TrafficEnvironment {
    /// `theta` is the fraction of type-`h` travelers, `lambda_total` the total
    /// arrival rate in veh/hr.
    pub fn new(theta: f64, lambda_total: f64) -> Result<Self, ParamError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ParamError::new("theta", theta, "a fraction in (0, 1)"));
        }
        if !(lambda_total > 0.0 && lambda_total.is_finite()) {
            return Err(ParamError::new(
                "lambda_total",
                lambda_total,
                "a finite rate > 0",
            ));
        }
        Ok(Self {
            theta,
            lambda_total,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_total
    }

    /// Same demand with a different population split.
    pub fn with_theta(&self, theta: f64) -> Result<Self, ParamError> {
        Self::new(theta, self.lambda_total)
    }
}

/// Service rates (veh/hr) of the two servers and the value of time (USD/hr).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Mm1CostParams {
    mu_high: f64,
    mu_low: f64,
    vot: f64,
}

impl Mm1CostParams {
    pub fn new(mu_high: f64, mu_low: f64, vot: f64) -> Result<Self, ParamError> {
        for (field, v) in [("mu_h", mu_high), ("mu_l", mu_low), ("vot", vot)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new(field, v, "a finite value > 0"));
            }
        }
        Ok(Self {
            mu_high,
            mu_low,
            vot,
        })
    }

    pub fn mu_high(&self) -> f64 {
        self.mu_high
    }

    pub fn mu_low(&self) -> f64 {
        self.mu_low
    }

    pub fn vot(&self) -> f64 {
        self.vot
    }
}

/// Fractions of each traveler type that take the server not meant for them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MisbehaviorStrategy {
    pub sigma_h: f64,
    pub sigma_l: f64,
}

impl MisbehaviorStrategy {
    pub fn new(sigma_h: f64, sigma_l: f64) -> Result<Self, ParamError> {
        let s = Self { sigma_h, sigma_l };
        s.validate()?;
        Ok(s)
    }

    /// Only type-`l` travelers misbehave.
    pub fn low_only(sigma_l: f64) -> Self {
        Self {
            sigma_h: 0.0,
            sigma_l,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=1.0).contains(&self.sigma_h) {
            return Err(ParamError::new(
                "sigma_h",
                self.sigma_h,
                "a fraction in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.sigma_l) {
            return Err(ParamError::new(
                "sigma_l",
                self.sigma_l,
                "a fraction in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Travel cost of one server. A queue whose demand reaches its capacity has
/// no finite expected cost and is reported as [`ServerCost::Unstable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerCost {
    Stable(f64),
    Unstable,
}

impl ServerCost {
    pub fn value(&self) -> Option<f64> {
        match *self {
            ServerCost::Stable(v) => Some(v),
            ServerCost::Unstable => None,
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, ServerCost::Stable(_))
    }

    /// Total order with `Unstable` above every finite cost.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ServerCost::Stable(a), ServerCost::Stable(b)) => a.total_cmp(b),
            (ServerCost::Stable(_), ServerCost::Unstable) => Ordering::Less,
            (ServerCost::Unstable, ServerCost::Stable(_)) => Ordering::Greater,
            (ServerCost::Unstable, ServerCost::Unstable) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ServerCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerCost::Stable(v) => write!(f, "{v}"),
            ServerCost::Unstable => f.write_str("unstable"),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ServerCost {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ServerCost::Stable(v) => s.serialize_f64(*v),
            ServerCost::Unstable => s.serialize_str("unstable"),
        }
    }
}

/// Congestion cost interface `c_H^θ(σ)`, `c_L^θ(σ)`.
pub trait CostModel {
    fn cost_high(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost;

    fn cost_low(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost;

    /// Supremum of `σ_l` (with `σ_h = 0`) at which server `H` is stable,
    /// capped at 1. The default locates the stability edge by bisection.
    fn high_stability_bound(&self, env: &TrafficEnvironment) -> f64 {
        let stable = |s: f64| {
            self.cost_high(env, &MisbehaviorStrategy::low_only(s))
                .is_stable()
        };
        if stable(1.0) {
            return 1.0;
        }
        if !stable(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > f64::EPSILON {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if stable(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

impl<M: CostModel + ?Sized> CostModel for &M {
    fn cost_high(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost {
        (**self).cost_high(env, strat)
    }

    fn cost_low(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost {
        (**self).cost_low(env, strat)
    }

    fn high_stability_bound(&self, env: &TrafficEnvironment) -> f64 {
        (**self).high_stability_bound(env)
    }
}

/// Two parallel M/M/1 queues; the expected cost of a server is the value of
/// time times the mean system time `1 / (μ − demand)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Mm1Cost {
    pub params: Mm1CostParams,
}

impl Mm1Cost {
    pub fn new(params: Mm1CostParams) -> Self {
        Self { params }
    }

    /// Arrival rate routed to server `H`.
    pub fn demand_high(env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> f64 {
        let (theta, lambda) = (env.theta, env.lambda_total);
        theta * lambda * (1.0 - strat.sigma_h) + (1.0 - theta) * lambda * strat.sigma_l
    }

    /// Arrival rate routed to server `L`.
    pub fn demand_low(env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> f64 {
        let (theta, lambda) = (env.theta, env.lambda_total);
        (1.0 - theta) * lambda * (1.0 - strat.sigma_l) + theta * lambda * strat.sigma_h
    }

    fn queue_cost(&self, capacity: f64, demand: f64) -> ServerCost {
        // demand == capacity is already unstable
        if demand < capacity {
            ServerCost::Stable(self.params.vot / (capacity - demand))
        } else {
            ServerCost::Unstable
        }
    }
}

impl CostModel for Mm1Cost {
    fn cost_high(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost {
        self.queue_cost(self.params.mu_high, Self::demand_high(env, strat))
    }

    fn cost_low(&self, env: &TrafficEnvironment, strat: &MisbehaviorStrategy) -> ServerCost {
        self.queue_cost(self.params.mu_low, Self::demand_low(env, strat))
    }

    fn high_stability_bound(&self, env: &TrafficEnvironment) -> f64 {
        let (theta, lambda) = (env.theta, env.lambda_total);
        let bound = (self.params.mu_high - theta * lambda) / ((1.0 - theta) * lambda);
        bound.clamp(0.0, 1.0)
    }
}

/// Cost of server `H` under the M/M/1 model.
pub fn cost_high(
    env: &TrafficEnvironment,
    params: &Mm1CostParams,
    strat: &MisbehaviorStrategy,
) -> ServerCost {
    Mm1Cost::new(*params).cost_high(env, strat)
}

/// Cost of server `L` under the M/M/1 model.
pub fn cost_low(
    env: &TrafficEnvironment,
    params: &Mm1CostParams,
    strat: &MisbehaviorStrategy,
) -> ServerCost {
    Mm1Cost::new(*params).cost_low(env, strat)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("server L is unstable at sigma_l = {sigma_l}; only sigma_h = 0 profiles with a stable L are in the incentive domain")]
    LUnstable { sigma_l: f64 },
    #[error("target {target} exceeds the maximal incentive {max}; no misbehavior rate attains it")]
    TargetAboveMax { target: f64, max: f64 },
    #[error("target {target} lies below the incentive at sigma_l = 1 ({min})")]
    TargetBelowMin { target: f64, min: f64 },
    #[error("incentive is not decreasing near sigma_l = {sigma_l}")]
    NotMonotone { sigma_l: f64 },
}

/// Value of the incentive `Δc(σ_l) = c_L − c_H` at `σ_h = 0`. It tends to
/// `−∞` as server `H` approaches saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaC {
    Finite(f64),
    UnboundedBelow,
}

impl DeltaC {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            DeltaC::Finite(v) => Some(v),
            DeltaC::UnboundedBelow => None,
        }
    }

    /// Value as an extended real (`−∞` when unbounded).
    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for DeltaC {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DeltaC::Finite(v) => s.serialize_f64(*v),
            DeltaC::UnboundedBelow => s.serialize_str("unbounded"),
        }
    }
}

/// Incentive of a type-`l` traveler to misbehave when a fraction `sigma_l` of
/// its population already does and no type-`h` traveler misbehaves.
pub fn delta_c<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    sigma_l: f64,
) -> Result<DeltaC, CostError> {
    let strat = MisbehaviorStrategy::low_only(sigma_l);
    let low = match model.cost_low(env, &strat) {
        ServerCost::Stable(v) => v,
        ServerCost::Unstable => return Err(CostError::LUnstable { sigma_l }),
    };
    Ok(match model.cost_high(env, &strat) {
        ServerCost::Stable(high) => DeltaC::Finite(low - high),
        ServerCost::Unstable => DeltaC::UnboundedBelow,
    })
}

/// Misbehavior rate `σ_l` at which the incentive equals `target`.
///
/// `Δc` is strictly decreasing, so the root is bracketed between `0` and a
/// point just short of the stability edge of server `H`, where `Δc → −∞`.
/// The bracket is then bisected until it is narrower than `sigma_tol`.
pub fn inverse_delta_c<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    target: f64,
    sigma_tol: f64,
) -> Result<f64, CostError> {
    let at = |s: f64| delta_c(env, model, s).map(|d| d.as_f64());
    let max = at(0.0)?;
    if target > max {
        return Err(CostError::TargetAboveMax { target, max });
    }
    if target == max {
        return Ok(0.0);
    }

    let edge = model.high_stability_bound(env);
    let (mut hi, mut hi_val);
    if edge >= 1.0
        && model
            .cost_high(env, &MisbehaviorStrategy::low_only(1.0))
            .is_stable()
    {
        hi = 1.0;
        hi_val = at(1.0)?;
        if target < hi_val {
            return Err(CostError::TargetBelowMin {
                target,
                min: hi_val,
            });
        }
    } else {
        // walk toward the edge geometrically until the incentive drops below target
        let mut gap = 0.5 * edge;
        loop {
            hi = edge - gap;
            hi_val = at(hi)?;
            if hi_val.is_finite() && hi_val <= target {
                break;
            }
            gap *= 0.5;
            if edge - gap <= hi {
                // unreachable for finite targets when Δc really diverges
                return Err(CostError::TargetBelowMin {
                    target,
                    min: hi_val,
                });
            }
        }
    }
    if hi_val == target {
        return Ok(hi);
    }

    let (mut lo, mut lo_val) = (0.0, max);
    while hi - lo > sigma_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = at(mid)?;
        if !(v <= lo_val && v >= hi_val) {
            return Err(CostError::NotMonotone { sigma_l: mid });
        }
        if v >= target {
            lo = mid;
            lo_val = v;
        } else {
            hi = mid;
            hi_val = v;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Point at which a sampled cost check was evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Sample {
    pub theta: f64,
    pub sigma_h: f64,
    pub sigma_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Violation {
    pub sample: Sample,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionOutcome {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl AssumptionOutcome {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
        }
    }
}

/// Result of the sampled checks of the three cost assumptions:
/// baseline priority (`a1`), congestion in the strategy (`a2`), and
/// congestion in the population split (`a3`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionReport {
    pub a1: AssumptionOutcome,
    pub a2: AssumptionOutcome,
    pub a3: AssumptionOutcome,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.a1.passed && self.a2.passed && self.a3.passed
    }

    /// First violation across all checks, for diagnostics.
    pub fn first_violation(&self) -> Option<&Violation> {
        self.a1
            .violations
            .iter()
            .chain(&self.a2.violations)
            .chain(&self.a3.violations)
            .next()
    }
}

pub const DEFAULT_ASSUMPTION_GRID: usize = 64;

/// Sampled check of the cost assumptions.
///
/// * baseline: both servers stable without misbehavior, `c_H(0,0) < c_L(0,0)`
///   and `c_H(0,1) > c_L(0,1)`;
/// * strategy congestion: on a `grid_n × grid_n` lattice of `(σ_h, σ_l)`,
///   `c_H` strictly decreases in `σ_h` and increases in `σ_l`, and `c_L`
///   the reverse;
/// * split congestion: at `σ_h = 0`, `c_H` is nondecreasing and `c_L`
///   nonincreasing in `θ` over `grid_n` interior points.
///
/// Unstable costs order above every finite cost; pairs of unstable samples
/// are skipped.
pub fn check_assumptions<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    grid_n: usize,
) -> AssumptionReport {
    let grid_n = grid_n.max(2);
    AssumptionReport {
        a1: check_baseline(env, model),
        a2: check_strategy_monotone(env, model, grid_n),
        a3: check_split_monotone(env, model, grid_n),
    }
}

fn check_baseline<M: CostModel + ?Sized>(env: &TrafficEnvironment, model: &M) -> AssumptionOutcome {
    let mut violations = Vec::new();
    let sample = |sigma_l: f64| Sample {
        theta: env.theta,
        sigma_h: 0.0,
        sigma_l,
    };
    let s00 = MisbehaviorStrategy::low_only(0.0);
    let s01 = MisbehaviorStrategy::low_only(1.0);
    let (h00, l00) = (model.cost_high(env, &s00), model.cost_low(env, &s00));
    let (h01, l01) = (model.cost_high(env, &s01), model.cost_low(env, &s01));
    if !h00.is_stable() {
        violations.push(Violation {
            sample: sample(0.0),
            message: "c_H(0,0) is not finite".into(),
        });
    }
    if !l00.is_stable() {
        violations.push(Violation {
            sample: sample(0.0),
            message: "c_L(0,0) is not finite".into(),
        });
    }
    if h00.total_cmp(&l00) != Ordering::Less {
        violations.push(Violation {
            sample: sample(0.0),
            message: format!("c_H(0,0) = {h00} is not below c_L(0,0) = {l00}"),
        });
    }
    if h01.total_cmp(&l01) != Ordering::Greater {
        violations.push(Violation {
            sample: sample(1.0),
            message: format!("c_H(0,1) = {h01} is not above c_L(0,1) = {l01}"),
        });
    }
    AssumptionOutcome::from_violations(violations)
}

/// Compares consecutive samples; `expect` is the required ordering of
/// `next` relative to `prev`.
fn monotone_step(prev: ServerCost, next: ServerCost, expect: Ordering, strict: bool) -> bool {
    if !prev.is_stable() && !next.is_stable() {
        return true;
    }
    match prev.total_cmp(&next).reverse() {
        Ordering::Equal => !strict,
        o => o == expect,
    }
}

fn check_strategy_monotone<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    grid_n: usize,
) -> AssumptionOutcome {
    let step = 1.0 / (grid_n - 1) as f64;
    let point = |i: usize| {
        if i + 1 == grid_n {
            1.0
        } else {
            i as f64 * step
        }
    };
    let mut violations = Vec::new();
    let mut record = |sh: f64, sl: f64, msg: &str| {
        violations.push(Violation {
            sample: Sample {
                theta: env.theta,
                sigma_h: sh,
                sigma_l: sl,
            },
            message: msg.into(),
        })
    };
    for i in 0..grid_n {
        for j in 0..grid_n {
            let (sh, sl) = (point(i), point(j));
            let here = MisbehaviorStrategy {
                sigma_h: sh,
                sigma_l: sl,
            };
            let (h, l) = (model.cost_high(env, &here), model.cost_low(env, &here));
            if i + 1 < grid_n {
                let next = MisbehaviorStrategy {
                    sigma_h: point(i + 1),
                    sigma_l: sl,
                };
                if !monotone_step(h, model.cost_high(env, &next), Ordering::Less, true) {
                    record(sh, sl, "c_H does not decrease in sigma_h");
                }
                if !monotone_step(l, model.cost_low(env, &next), Ordering::Greater, true) {
                    record(sh, sl, "c_L does not increase in sigma_h");
                }
            }
            if j + 1 < grid_n {
                let next = MisbehaviorStrategy {
                    sigma_h: sh,
                    sigma_l: point(j + 1),
                };
                if !monotone_step(h, model.cost_high(env, &next), Ordering::Greater, true) {
                    record(sh, sl, "c_H does not increase in sigma_l");
                }
                if !monotone_step(l, model.cost_low(env, &next), Ordering::Less, true) {
                    record(sh, sl, "c_L does not decrease in sigma_l");
                }
            }
        }
    }
    AssumptionOutcome::from_violations(violations)
}

fn check_split_monotone<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    grid_n: usize,
) -> AssumptionOutcome {
    let thetas: Vec<TrafficEnvironment> = (1..=grid_n)
        .filter_map(|k| env.with_theta(k as f64 / (grid_n + 1) as f64).ok())
        .collect();
    let mut violations = Vec::new();
    for j in 0..grid_n {
        let strat = MisbehaviorStrategy::low_only(j as f64 / grid_n as f64);
        for pair in thetas.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let sample = Sample {
                theta: a.theta,
                sigma_h: 0.0,
                sigma_l: strat.sigma_l,
            };
            let (ha, hb) = (model.cost_high(a, &strat), model.cost_high(b, &strat));
            if !monotone_step(ha, hb, Ordering::Greater, false) {
                violations.push(Violation {
                    sample,
                    message: "c_H decreases in theta".into(),
                });
            }
            let (la, lb) = (model.cost_low(a, &strat), model.cost_low(b, &strat));
            if !monotone_step(la, lb, Ordering::Less, false) {
                violations.push(Violation {
                    sample,
                    message: "c_L increases in theta".into(),
                });
            }
        }
    }
    AssumptionOutcome::from_violations(violations)
}
