//! Game parameters, expected utilities, beliefs and the equilibrium checker.

use alloc::vec::Vec;
use core::fmt;

use crate::cost::{CostModel, MisbehaviorStrategy, ServerCost, TrafficEnvironment};
use crate::ParamError;

/// Costs, fines and detection probability. All monetary values in USD.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GameParams {
    p_t_h: f64,
    p_t_l: f64,
    p_d: f64,
    f_h: f64,
    f_l: f64,
    detect_prob: f64,
}

impl GameParams {
    pub fn new(
        p_t_h: f64,
        p_t_l: f64,
        p_d: f64,
        f_h: f64,
        f_l: f64,
        detect_prob: f64,
    ) -> Result<Self, ParamError> {
        let nonneg = |field, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::new(field, v, "a finite value >= 0"))
            }
        };
        let pos = |field, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::new(field, v, "a finite value > 0"))
            }
        };
        nonneg("p_t_h", p_t_h)?;
        pos("p_t_l", p_t_l)?;
        pos("p_d", p_d)?;
        nonneg("f_h", f_h)?;
        nonneg("f_l", f_l)?;
        if !(detect_prob > 0.0 && detect_prob <= 1.0) {
            return Err(ParamError::new(
                "detect_prob",
                detect_prob,
                "a probability in (0, 1]",
            ));
        }
        Ok(Self {
            p_t_h,
            p_t_l,
            p_d,
            f_h,
            f_l,
            detect_prob,
        })
    }

    /// Parameters with perfect detection and no type-`h` cost or fine.
    pub fn low_type(p_t_l: f64, p_d: f64, f_l: f64) -> Result<Self, ParamError> {
        Self::new(0.0, p_t_l, p_d, 0.0, f_l, 1.0)
    }

    pub fn p_t_h(&self) -> f64 {
        self.p_t_h
    }
    pub fn p_t_l(&self) -> f64 {
        self.p_t_l
    }
    pub fn p_d(&self) -> f64 {
        self.p_d
    }
    pub fn f_h(&self) -> f64 {
        self.f_h
    }
    pub fn f_l(&self) -> f64 {
        self.f_l
    }
    pub fn detect_prob(&self) -> f64 {
        self.detect_prob
    }

    /// Fine on type `l` scaled by the detection probability.
    pub fn effective_fine_low(&self) -> f64 {
        self.f_l * self.detect_prob
    }

    /// Fine on type `h` scaled by the detection probability.
    pub fn effective_fine_high(&self) -> f64 {
        self.f_h * self.detect_prob
    }

    pub fn with_p_t_l(&self, p_t_l: f64) -> Result<Self, ParamError> {
        Self::new(
            self.p_t_h,
            p_t_l,
            self.p_d,
            self.f_h,
            self.f_l,
            self.detect_prob,
        )
    }

    pub fn with_p_d(&self, p_d: f64) -> Result<Self, ParamError> {
        Self::new(
            self.p_t_h,
            self.p_t_l,
            p_d,
            self.f_h,
            self.f_l,
            self.detect_prob,
        )
    }

    pub fn with_f_l(&self, f_l: f64) -> Result<Self, ParamError> {
        Self::new(
            self.p_t_h,
            self.p_t_l,
            self.p_d,
            self.f_h,
            f_l,
            self.detect_prob,
        )
    }

    pub fn with_detect_prob(&self, detect_prob: f64) -> Result<Self, ParamError> {
        Self::new(
            self.p_t_h,
            self.p_t_l,
            self.p_d,
            self.f_h,
            self.f_l,
            detect_prob,
        )
    }
}

/// Inspection probabilities on each server.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OperatorStrategy {
    pub sigma_d_h: f64,
    pub sigma_d_l: f64,
}

impl OperatorStrategy {
    pub fn new(sigma_d_h: f64, sigma_d_l: f64) -> Result<Self, ParamError> {
        let s = Self {
            sigma_d_h,
            sigma_d_l,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=1.0).contains(&self.sigma_d_h) {
            return Err(ParamError::new(
                "sigma_d_h",
                self.sigma_d_h,
                "a probability in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.sigma_d_l) {
            return Err(ParamError::new(
                "sigma_d_l",
                self.sigma_d_l,
                "a probability in [0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StrategyProfile {
    pub traveler: MisbehaviorStrategy,
    pub operator: OperatorStrategy,
}

impl StrategyProfile {
    pub fn new(traveler: MisbehaviorStrategy, operator: OperatorStrategy) -> Self {
        Self { traveler, operator }
    }

    /// Profile with `σ_h = 0` and `σ_L^d = 0`.
    pub fn reduced(sigma_l: f64, sigma_d_h: f64) -> Self {
        Self {
            traveler: MisbehaviorStrategy::low_only(sigma_l),
            operator: OperatorStrategy {
                sigma_d_h,
                sigma_d_l: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.traveler.validate()?;
        self.operator.validate()
    }
}

/// Operator's posterior over traveler types given the observed server.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Belief {
    pub b_h_given_h: f64,
    pub b_l_given_h: f64,
    pub b_h_given_l: f64,
    pub b_l_given_l: f64,
    /// Server `H` has zero probability under the traveler strategy.
    pub off_path_h: bool,
    /// Server `L` has zero probability under the traveler strategy.
    pub off_path_l: bool,
}

impl Belief {
    /// Belief from the posterior weight on type `h` for each signal.
    pub fn from_high_weights(b_h_given_h: f64, b_h_given_l: f64) -> Self {
        Self {
            b_h_given_h,
            b_l_given_h: 1.0 - b_h_given_h,
            b_h_given_l,
            b_l_given_l: 1.0 - b_h_given_l,
            off_path_h: false,
            off_path_l: false,
        }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        let probs = [
            self.b_h_given_h,
            self.b_l_given_h,
            self.b_h_given_l,
            self.b_l_given_l,
        ];
        probs.iter().all(|p| (-tol..=1.0 + tol).contains(p))
            && (self.b_h_given_h + self.b_l_given_h - 1.0).abs() <= tol
            && (self.b_h_given_l + self.b_l_given_l - 1.0).abs() <= tol
    }
}

/// Posterior beliefs from the prior `θ` and the traveler strategy.
///
/// A server that no traveler uses is off path. Its belief puts all weight on
/// the type for whom that server is the truthful choice.
pub fn bayes_update(env: &TrafficEnvironment, traveler: &MisbehaviorStrategy) -> Belief {
    let theta = env.theta();
    let mass_h_on_h = theta * (1.0 - traveler.sigma_h);
    let mass_l_on_h = (1.0 - theta) * traveler.sigma_l;
    let mass_h_on_l = theta * traveler.sigma_h;
    let mass_l_on_l = (1.0 - theta) * (1.0 - traveler.sigma_l);

    let on_h = mass_h_on_h + mass_l_on_h;
    let on_l = mass_h_on_l + mass_l_on_l;
    let (b_h_given_h, off_path_h) = if on_h > 0.0 {
        (mass_h_on_h / on_h, false)
    } else {
        (1.0, true)
    };
    let (b_h_given_l, off_path_l) = if on_l > 0.0 {
        (mass_h_on_l / on_l, false)
    } else {
        (0.0, true)
    };
    Belief {
        off_path_h,
        off_path_l,
        ..Belief::from_high_weights(b_h_given_h, b_h_given_l)
    }
}

/// Expected utility of a traveler; `Unbounded` stands for `−∞` when the
/// chosen server is unstable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Finite(f64),
    Unbounded,
}

impl Utility {
    fn from_cost(cost: ServerCost, extra: f64) -> Self {
        match cost {
            ServerCost::Stable(c) => Utility::Finite(-c - extra),
            ServerCost::Unstable => Utility::Unbounded,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Utility::Finite(v) => Some(v),
            Utility::Unbounded => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    /// `self − other` as an extended real. Two unbounded utilities cannot be
    /// compared and yield `−∞`, which fails every check that uses it.
    pub fn gap(&self, other: &Utility) -> f64 {
        match (self, other) {
            (Utility::Finite(a), Utility::Finite(b)) => a - b,
            (Utility::Unbounded, Utility::Finite(_)) => f64::NEG_INFINITY,
            (Utility::Finite(_), Utility::Unbounded) => f64::INFINITY,
            (Utility::Unbounded, Utility::Unbounded) => f64::NEG_INFINITY,
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Utility {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Utility::Finite(v) => s.serialize_f64(*v),
            Utility::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// Expected utilities of each traveler type on each server.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AgentUtilities {
    pub u_h_on_h: Utility,
    pub u_h_on_l: Utility,
    pub u_l_on_h: Utility,
    pub u_l_on_l: Utility,
}

pub fn agent_utilities<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    profile: &StrategyProfile,
) -> AgentUtilities {
    let c_h = model.cost_high(env, &profile.traveler);
    let c_l = model.cost_low(env, &profile.traveler);
    let fine_h = params.effective_fine_high() * profile.operator.sigma_d_l;
    let fine_l = params.effective_fine_low() * profile.operator.sigma_d_h;
    AgentUtilities {
        u_h_on_h: Utility::from_cost(c_h, 0.0),
        u_h_on_l: Utility::from_cost(c_l, params.p_t_h + fine_h),
        u_l_on_h: Utility::from_cost(c_h, params.p_t_l + fine_l),
        u_l_on_l: Utility::from_cost(c_l, 0.0),
    }
}

/// Marginal value of inspecting on `H` and on `L` given the belief; the
/// operator's utility on each server is this coefficient times its
/// inspection probability.
pub fn inspection_gains(params: &GameParams, belief: &Belief) -> (f64, f64) {
    (
        -params.p_d + params.effective_fine_low() * belief.b_l_given_h,
        -params.p_d + params.effective_fine_high() * belief.b_h_given_l,
    )
}

/// Operator's expected utility on server `H` and on server `L`.
pub fn operator_utilities(
    params: &GameParams,
    profile: &StrategyProfile,
    belief: &Belief,
) -> (f64, f64) {
    let (gain_h, gain_l) = inspection_gains(params, belief);
    (
        gain_h * profile.operator.sigma_d_h,
        gain_l * profile.operator.sigma_d_l,
    )
}

/// One condition of the equilibrium definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Condition {
    /// Misbehaving type-`h` travelers do at least as well on `L`.
    HighMisbehaves,
    /// Compliant type-`h` travelers do at least as well on `H`.
    HighComplies,
    /// Misbehaving type-`l` travelers do at least as well on `H`.
    LowMisbehaves,
    /// Compliant type-`l` travelers do at least as well on `L`.
    LowComplies,
    /// Inspection rate on `H` maximizes the operator's utility.
    OperatorOnHigh,
    /// Inspection rate on `L` maximizes the operator's utility.
    OperatorOnLow,
    /// Belief after signal `H` matches Bayes' rule.
    BeliefOnHigh,
    /// Belief after signal `L` matches Bayes' rule.
    BeliefOnLow,
}

impl Condition {
    pub fn is_traveler(&self) -> bool {
        matches!(
            self,
            Condition::HighMisbehaves
                | Condition::HighComplies
                | Condition::LowMisbehaves
                | Condition::LowComplies
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Condition::HighMisbehaves => "high_misbehaves",
            Condition::HighComplies => "high_complies",
            Condition::LowMisbehaves => "low_misbehaves",
            Condition::LowComplies => "low_complies",
            Condition::OperatorOnHigh => "operator_on_high",
            Condition::OperatorOnLow => "operator_on_low",
            Condition::BeliefOnHigh => "belief_on_high",
            Condition::BeliefOnLow => "belief_on_low",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one condition. `slack` is the signed margin (`≥ 0` means
/// satisfied with room to spare); `None` when the condition is vacuous.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionCheck {
    pub condition: Condition,
    #[cfg_attr(
        feature = "serde",
        serde(serialize_with = "crate::num::token_f64::option::serialize")
    )]
    pub slack: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PbeReport {
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
}

impl PbeReport {
    pub fn violated(&self) -> impl Iterator<Item = Condition> + '_ {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.condition)
    }

    pub fn check(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    /// Smallest slack over the active conditions (`+∞` if none is active).
    pub fn min_slack(&self) -> f64 {
        self.checks
            .iter()
            .filter_map(|c| c.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tolerances for [`check_pbe_with`]. Traveler and operator comparisons are
/// in USD; belief consistency is on probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbeTolerance {
    pub traveler: f64,
    pub operator: f64,
    pub belief: f64,
}

impl PbeTolerance {
    pub const BELIEF: f64 = 1e-12;

    pub fn uniform(tol: f64) -> Self {
        Self {
            traveler: tol,
            operator: tol,
            belief: Self::BELIEF,
        }
    }
}

pub const DEFAULT_UTILITY_TOL: f64 = 1e-9;

/// Checks every equilibrium condition with absolute tolerance `tol` (USD)
/// on utility comparisons.
pub fn check_pbe<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    profile: &StrategyProfile,
    belief: &Belief,
    tol: f64,
) -> PbeReport {
    check_pbe_with(
        env,
        model,
        params,
        profile,
        belief,
        &PbeTolerance::uniform(tol),
    )
}

pub fn check_pbe_with<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    profile: &StrategyProfile,
    belief: &Belief,
    tol: &PbeTolerance,
) -> PbeReport {
    let u = agent_utilities(env, model, params, profile);
    let t = &profile.traveler;
    let o = &profile.operator;
    let mut checks = Vec::with_capacity(8);

    let mut traveler = |condition, active: bool, slack: f64| {
        checks.push(ConditionCheck {
            condition,
            slack: active.then_some(slack),
            passed: !active || slack >= -tol.traveler,
        });
    };
    traveler(
        Condition::HighMisbehaves,
        t.sigma_h > 0.0,
        u.u_h_on_l.gap(&u.u_h_on_h),
    );
    traveler(
        Condition::HighComplies,
        t.sigma_h < 1.0,
        u.u_h_on_h.gap(&u.u_h_on_l),
    );
    traveler(
        Condition::LowMisbehaves,
        t.sigma_l > 0.0,
        u.u_l_on_h.gap(&u.u_l_on_l),
    );
    traveler(
        Condition::LowComplies,
        t.sigma_l < 1.0,
        u.u_l_on_l.gap(&u.u_l_on_h),
    );

    // Utility is linear in the inspection rate; the rate is optimal iff it
    // sits at the end of [0, 1] selected by the sign of the gain.
    let (gain_h, gain_l) = inspection_gains(params, belief);
    for (condition, gain, rate) in [
        (Condition::OperatorOnHigh, gain_h, o.sigma_d_h),
        (Condition::OperatorOnLow, gain_l, o.sigma_d_l),
    ] {
        let slack = operator_slack(gain, rate);
        checks.push(ConditionCheck {
            condition,
            slack: Some(slack),
            passed: slack >= -tol.operator,
        });
    }

    let bayes = bayes_update(env, t);
    for (condition, off_path, diff) in [
        (
            Condition::BeliefOnHigh,
            bayes.off_path_h,
            (belief.b_h_given_h - bayes.b_h_given_h)
                .abs()
                .max((belief.b_l_given_h - bayes.b_l_given_h).abs()),
        ),
        (
            Condition::BeliefOnLow,
            bayes.off_path_l,
            (belief.b_h_given_l - bayes.b_h_given_l)
                .abs()
                .max((belief.b_l_given_l - bayes.b_l_given_l).abs()),
        ),
    ] {
        let active = !off_path;
        let slack = -diff;
        checks.push(ConditionCheck {
            condition,
            slack: active.then_some(slack),
            passed: !active || (slack >= -tol.belief && !diff.is_nan()),
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    PbeReport { checks, passed }
}

/// Margin by which `rate` is optimal for a utility `gain · rate`.
fn operator_slack(gain: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        -gain
    } else if rate >= 1.0 {
        gain
    } else {
        -gain.abs()
    }
}
