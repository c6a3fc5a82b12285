//! Closed-form equilibria.
//!
//! Type-`h` travelers never misbehave and server `L` is never inspected in
//! equilibrium, so the game reduces to the pair `(σ_l, σ_H^d)`. Which pair
//! arises depends on where `(p_t_l, p_d)` falls relative to three
//! thresholds: the deterrence cost `Δc(0)`, the maximal expected fine
//! `(1−θ)F̃`, and the incentive `Δc(σ̂)` at the misbehavior rate `σ̂` that
//! leaves the operator indifferent. `F̃` is the fine on type `l` scaled by the
//! detection probability.

mod sweep;

pub use sweep::{
    CellOutcome, CellSolution, Sweep, SweepAxis, SweepCell, SweepGrid, SweepRow, SweepTable, Trend,
    TrendSummary,
};

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::cost::{
    check_assumptions, delta_c, inverse_delta_c, CostError, CostModel, DeltaC, TrafficEnvironment,
    DEFAULT_ASSUMPTION_GRID,
};
use crate::game::{
    agent_utilities, bayes_update, check_pbe, operator_utilities, AgentUtilities, Belief,
    GameParams, PbeReport, StrategyProfile, DEFAULT_UTILITY_TOL,
};
use crate::num::rel_close;

/// Misbehavior rate at which the operator is indifferent about inspecting
/// server `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Rate(f64),
    /// Inspection cost is at or above the maximal expected fine; the operator
    /// never inspects.
    NoInspectionEver,
}

impl Threshold {
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Threshold::Rate(r) => Some(r),
            Threshold::NoInspectionEver => None,
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Rate(r) => s.serialize_f64(*r),
            Threshold::NoInspectionEver => s.serialize_str("no_inspection_ever"),
        }
    }
}

/// `σ̂ = p_d θ / ((1−θ)(F̃ − p_d))`, defined when `p_d < (1−θ)F̃`.
pub fn misbehavior_threshold(env: &TrafficEnvironment, params: &GameParams) -> Threshold {
    let theta = env.theta();
    let fine = params.effective_fine_low();
    let p_d = params.p_d();
    if p_d >= (1.0 - theta) * fine {
        Threshold::NoInspectionEver
    } else {
        Threshold::Rate(p_d * theta / ((1.0 - theta) * (fine - p_d)))
    }
}

/// Best inspection response on server `H` to a misbehavior rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InspectionResponse {
    Zero,
    /// Indifferent: any rate in `[0, 1]` is a best response.
    Interval01,
    One,
}

/// Best-response correspondence of the operator; `sigma_l` within `tol` of
/// the threshold counts as indifference.
pub fn operator_best_response(
    env: &TrafficEnvironment,
    params: &GameParams,
    sigma_l: f64,
    tol: f64,
) -> InspectionResponse {
    match misbehavior_threshold(env, params) {
        Threshold::NoInspectionEver => InspectionResponse::Zero,
        Threshold::Rate(hat) if (sigma_l - hat).abs() <= tol => InspectionResponse::Interval01,
        Threshold::Rate(hat) if sigma_l < hat => InspectionResponse::Zero,
        Threshold::Rate(_) => InspectionResponse::One,
    }
}

/// Which defining comparison of the regime partition is (numerically) tight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundaryDetail {
    /// `p_t_l ≈ Δc(0)`
    AB,
    /// `p_d ≈ (1−θ)F̃`
    InspectionCost,
    /// `p_t_l ≈ max(Δc(σ̂), 0)`
    B1B2,
    /// `p_t_l ≈ max(Δc(σ̂) − F̃, 0)`
    B2B3,
}

impl fmt::Display for BoundaryDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryDetail::AB => "A/B boundary",
            BoundaryDetail::InspectionCost => "inspection cost equals maximal expected fine",
            BoundaryDetail::B1B2 => "B1/B2 boundary",
            BoundaryDetail::B2B3 => "B2/B3 boundary",
        })
    }
}

/// Equilibrium regime: `A` deters misbehavior; in `B1`, `B2`, `B3`
/// misbehavior occurs and the operator inspects never, partially, or always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    A,
    B1,
    B2,
    B3,
    Boundary(BoundaryDetail),
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::A => "A",
            Regime::B1 => "B1",
            Regime::B2 => "B2",
            Regime::B3 => "B3",
            Regime::Boundary(_) => "Boundary",
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Regime::Boundary(_))
    }

    pub const INTERIOR: [Regime; 4] = [Regime::A, Regime::B1, Regime::B2, Regime::B3];
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Boundary(d) => write!(f, "Boundary ({d})"),
            r => f.write_str(r.label()),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Regime", 2)?;
        st.serialize_field("label", self.label())?;
        let detail = match self {
            Regime::Boundary(d) => Some(d),
            _ => None,
        };
        st.serialize_field("boundary_detail", &detail)?;
        st.end()
    }
}

/// Thresholds computed while classifying a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Derived {
    pub delta_c_zero: f64,
    pub effective_fine: f64,
    pub max_expected_fine: f64,
    pub sigma_hat: Threshold,
    /// `None` when the operator never inspects.
    pub delta_c_at_sigma_hat: Option<DeltaC>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Classification {
    pub regime: Regime,
    pub derived: Derived,
}

/// Solver output: strategies, beliefs and the checker's verdict on them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Equilibrium {
    pub regime: Regime,
    pub profile: StrategyProfile,
    pub belief: Belief,
    pub utilities: AgentUtilities,
    /// Operator utility on `H` and on `L`.
    pub operator_utilities: (f64, f64),
    pub derived: Derived,
    pub diagnostics: PbeReport,
}

impl Equilibrium {
    pub fn sigma_l(&self) -> f64 {
        self.profile.traveler.sigma_l
    }

    pub fn sigma_d_h(&self) -> f64 {
        self.profile.operator.sigma_d_h
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("parameters lie on a regime boundary ({0}); the equilibrium may not be unique")]
    BoundaryParameters(BoundaryDetail),
    #[error("cost model violates the modeling assumptions: {0}")]
    AssumptionViolation(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("partial inspection rate {sigma_d_h} fell outside [0, 1]; classification and solution disagree")]
    Inconsistent { sigma_d_h: f64 },
}

/// Numerical tolerances of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolverTolerances {
    /// Relative distance to a regime boundary below which a point is
    /// classified as `Boundary`.
    pub boundary_rel_tol: f64,
    /// Absolute tolerance (USD) on utility comparisons.
    pub utility_tol: f64,
    /// Absolute tolerance on `σ_l` when inverting the incentive.
    pub bisection_tol: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            boundary_rel_tol: 1e-9,
            utility_tol: DEFAULT_UTILITY_TOL,
            bisection_tol: 1e-12,
        }
    }
}

/// Closed-form solver bound to one traffic environment and cost model. The
/// cost assumptions are checked once at construction.
#[derive(Debug, Clone)]
pub struct Solver<'m, M: ?Sized> {
    env: TrafficEnvironment,
    model: &'m M,
    tol: SolverTolerances,
    delta_c_zero: f64,
}

impl<'m, M: CostModel + ?Sized> Solver<'m, M> {
    pub fn new(
        env: TrafficEnvironment,
        model: &'m M,
        tol: SolverTolerances,
    ) -> Result<Self, SolveError> {
        let report = check_assumptions(&env, model, DEFAULT_ASSUMPTION_GRID);
        if !report.passed() {
            let msg = report
                .first_violation()
                .map(|v| {
                    format!(
                        "{} (theta = {}, sigma_h = {}, sigma_l = {})",
                        v.message, v.sample.theta, v.sample.sigma_h, v.sample.sigma_l
                    )
                })
                .unwrap_or_default();
            return Err(SolveError::AssumptionViolation(msg));
        }
        let delta_c_zero = delta_c(&env, model, 0.0)?
            .finite()
            .ok_or_else(|| SolveError::AssumptionViolation("c_H(0,0) is not finite".into()))?;
        Ok(Self {
            env,
            model,
            tol,
            delta_c_zero,
        })
    }

    pub fn env(&self) -> &TrafficEnvironment {
        &self.env
    }

    pub fn model(&self) -> &'m M {
        self.model
    }

    pub fn tolerances(&self) -> &SolverTolerances {
        &self.tol
    }

    /// `Δc(0)`: the smallest misbehavior cost that deters misbehavior.
    pub fn delta_c_zero(&self) -> f64 {
        self.delta_c_zero
    }

    pub fn delta_c(&self, sigma_l: f64) -> Result<DeltaC, CostError> {
        delta_c(&self.env, self.model, sigma_l)
    }

    pub fn inverse_delta_c(&self, target: f64) -> Result<f64, CostError> {
        inverse_delta_c(&self.env, self.model, target, self.tol.bisection_tol)
    }

    fn derived(&self, params: &GameParams) -> Result<Derived, SolveError> {
        let fine = params.effective_fine_low();
        let sigma_hat = misbehavior_threshold(&self.env, params);
        let delta_c_at_sigma_hat = match sigma_hat {
            Threshold::Rate(hat) => Some(self.delta_c(hat)?),
            Threshold::NoInspectionEver => None,
        };
        Ok(Derived {
            delta_c_zero: self.delta_c_zero,
            effective_fine: fine,
            max_expected_fine: (1.0 - self.env.theta()) * fine,
            sigma_hat,
            delta_c_at_sigma_hat,
        })
    }

    pub fn classify(&self, params: &GameParams) -> Result<Classification, SolveError> {
        let derived = self.derived(params)?;
        let regime = self.regime_for(params, &derived);
        Ok(Classification { regime, derived })
    }

    fn regime_for(&self, params: &GameParams, d: &Derived) -> Regime {
        let rel = self.tol.boundary_rel_tol;
        let p = params.p_t_l();
        if rel_close(p, d.delta_c_zero, rel) {
            return Regime::Boundary(BoundaryDetail::AB);
        }
        if p > d.delta_c_zero {
            return Regime::A;
        }
        if rel_close(params.p_d(), d.max_expected_fine, rel) {
            return Regime::Boundary(BoundaryDetail::InspectionCost);
        }
        let incentive = match d.delta_c_at_sigma_hat {
            None => return Regime::B1,
            Some(v) => v.as_f64(),
        };
        let upper = incentive.max(0.0);
        let lower = (incentive - d.effective_fine).max(0.0);
        if rel_close(p, upper, rel) {
            return Regime::Boundary(BoundaryDetail::B1B2);
        }
        if p > upper {
            return Regime::B1;
        }
        if rel_close(p, lower, rel) {
            return Regime::Boundary(BoundaryDetail::B2B3);
        }
        if p > lower {
            Regime::B2
        } else {
            Regime::B3
        }
    }

    pub fn solve(&self, params: &GameParams) -> Result<Equilibrium, SolveError> {
        let Classification { regime, derived } = self.classify(params)?;
        let fine = derived.effective_fine;
        let (sigma_l, sigma_d_h) = match regime {
            Regime::Boundary(detail) => return Err(SolveError::BoundaryParameters(detail)),
            Regime::A => (0.0, 0.0),
            Regime::B1 => (self.inverse_delta_c(params.p_t_l())?, 0.0),
            Regime::B2 => {
                let hat = derived.sigma_hat.rate().expect("B2 requires a threshold");
                let incentive = derived
                    .delta_c_at_sigma_hat
                    .and_then(|d| d.finite())
                    .expect("B2 requires a finite incentive at the threshold");
                let rate = (incentive - params.p_t_l()) / fine;
                if !(-1e-9..=1.0 + 1e-9).contains(&rate) {
                    return Err(SolveError::Inconsistent { sigma_d_h: rate });
                }
                (hat, rate.clamp(0.0, 1.0))
            }
            Regime::B3 => (self.inverse_delta_c(params.p_t_l() + fine)?, 1.0),
        };

        let profile = StrategyProfile::reduced(sigma_l, sigma_d_h);
        let belief = match regime {
            // indifference belief of the operator
            Regime::B2 => Belief::from_high_weights(1.0 - params.p_d() / fine, 0.0),
            _ => bayes_update(&self.env, &profile.traveler),
        };
        let diagnostics = check_pbe(
            &self.env,
            self.model,
            params,
            &profile,
            &belief,
            self.tol.utility_tol,
        );
        Ok(Equilibrium {
            regime,
            profile,
            belief,
            utilities: agent_utilities(&self.env, self.model, params, &profile),
            operator_utilities: operator_utilities(params, &profile, &belief),
            derived,
            diagnostics,
        })
    }
}

/// Classifies `params` into a regime, checking the cost assumptions first.
pub fn classify_regime<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
    rel_tol: f64,
) -> Result<Regime, SolveError> {
    let tol = SolverTolerances {
        boundary_rel_tol: rel_tol,
        ..SolverTolerances::default()
    };
    Ok(Solver::new(*env, model, tol)?.classify(params)?.regime)
}

/// Solves for the unique equilibrium with default tolerances.
pub fn solve_pbe<M: CostModel + ?Sized>(
    env: &TrafficEnvironment,
    model: &M,
    params: &GameParams,
) -> Result<Equilibrium, SolveError> {
    Solver::new(*env, model, SolverTolerances::default())?.solve(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Mm1Cost, Mm1CostParams};
    use crate::game::Condition;
    use approx::assert_abs_diff_eq;

    const HAT: f64 = 0.022_556_390_977_443_61; // 1.5 / 66.5
    const DC_HAT: f64 = 0.810_563_737_938_039_6;
    const DC_ZERO: f64 = 2.448_979_591_836_734_7;

    fn etc() -> (TrafficEnvironment, Mm1Cost) {
        (
            TrafficEnvironment::new(0.3, 2400.0).unwrap(),
            Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap()),
        )
    }

    #[test]
    fn threshold_examples() {
        let (env, _) = etc();
        let params = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let hat = misbehavior_threshold(&env, &params).rate().unwrap();
        assert_abs_diff_eq!(hat, HAT, epsilon = 1e-16);

        let high = GameParams::low_type(0.5, 70.0, 100.0).unwrap();
        assert_eq!(
            misbehavior_threshold(&env, &high),
            Threshold::NoInspectionEver
        );

        let mut last = f64::INFINITY;
        for theta in [0.3, 0.1, 0.01, 1e-4, 1e-6] {
            let e = env.with_theta(theta).unwrap();
            let hat = misbehavior_threshold(&e, &params).rate().unwrap();
            assert!(hat < last);
            last = hat;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn best_response_examples() {
        let (env, _) = etc();
        let params = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        assert_eq!(
            operator_best_response(&env, &params, 0.0, 1e-12),
            InspectionResponse::Zero
        );
        assert_eq!(
            operator_best_response(&env, &params, HAT, 1e-12),
            InspectionResponse::Interval01
        );
        assert_eq!(
            operator_best_response(&env, &params, 1.0, 1e-12),
            InspectionResponse::One
        );
        let costly = GameParams::low_type(0.5, 80.0, 100.0).unwrap();
        assert_eq!(
            operator_best_response(&env, &costly, 1.0, 1e-12),
            InspectionResponse::Zero
        );
    }

    #[test]
    fn classification_examples() {
        let (env, m) = etc();
        let solver = Solver::new(env, &m, SolverTolerances::default()).unwrap();
        assert_abs_diff_eq!(solver.delta_c_zero(), DC_ZERO, epsilon = 1e-12);
        for p_d in [0.1, 5.0, 50.0, 100.0] {
            let params = GameParams::low_type(3.0, p_d, 100.0).unwrap();
            assert_eq!(solver.classify(&params).unwrap().regime, Regime::A);
        }
        let params = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let c = solver.classify(&params).unwrap();
        assert_eq!(c.regime, Regime::B2);
        assert_abs_diff_eq!(
            c.derived.delta_c_at_sigma_hat.unwrap().as_f64(),
            DC_HAT,
            epsilon = 1e-12
        );
        // high inspection cost
        let params = GameParams::low_type(0.5, 80.0, 100.0).unwrap();
        assert_eq!(solver.classify(&params).unwrap().regime, Regime::B1);
    }

    #[test]
    fn boundary_detection() {
        let (env, m) = etc();
        let solver = Solver::new(env, &m, SolverTolerances::default()).unwrap();
        let at_ab = GameParams::low_type(solver.delta_c_zero(), 5.0, 100.0).unwrap();
        assert_eq!(
            solver.classify(&at_ab).unwrap().regime,
            Regime::Boundary(BoundaryDetail::AB)
        );
        assert_eq!(
            solver.solve(&at_ab).unwrap_err(),
            SolveError::BoundaryParameters(BoundaryDetail::AB)
        );
        let at_cost = GameParams::low_type(0.5, 70.0, 100.0).unwrap();
        assert_eq!(
            solver.classify(&at_cost).unwrap().regime,
            Regime::Boundary(BoundaryDetail::InspectionCost)
        );
        let at_b1b2 = GameParams::low_type(DC_HAT, 5.0, 100.0).unwrap();
        assert_eq!(
            solver.classify(&at_b1b2).unwrap().regime,
            Regime::Boundary(BoundaryDetail::B1B2)
        );
    }

    #[test]
    fn solve_regime_a() {
        let (env, m) = etc();
        let eq = solve_pbe(&env, &m, &GameParams::low_type(3.0, 5.0, 100.0).unwrap()).unwrap();
        assert_eq!(eq.regime, Regime::A);
        assert_eq!((eq.sigma_l(), eq.sigma_d_h()), (0.0, 0.0));
        assert_eq!((eq.belief.b_h_given_h, eq.belief.b_l_given_h), (1.0, 0.0));
        assert!(eq.diagnostics.passed);
    }

    #[test]
    fn solve_b2_at_etc_parameters() {
        let (env, m) = etc();
        let eq = solve_pbe(&env, &m, &GameParams::low_type(0.5, 5.0, 100.0).unwrap()).unwrap();
        assert_eq!(eq.regime, Regime::B2);
        assert_abs_diff_eq!(eq.sigma_l(), HAT, epsilon = 1e-15);
        assert_abs_diff_eq!(eq.sigma_d_h(), (DC_HAT - 0.5) / 100.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eq.belief.b_l_given_h, 0.05, epsilon = 1e-15);
        assert!(eq.diagnostics.passed, "{:?}", eq.diagnostics);
        assert_eq!(eq.profile.traveler.sigma_h, 0.0);
        assert_eq!(eq.profile.operator.sigma_d_l, 0.0);
        assert_eq!(eq.belief.b_l_given_l, 1.0);
    }

    #[test]
    fn b2_belief_ignores_theta() {
        let m = Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap());
        let params = GameParams::low_type(0.3, 5.0, 100.0).unwrap();
        for theta in [0.3, 0.31, 0.32] {
            let env = TrafficEnvironment::new(theta, 2400.0).unwrap();
            let eq = solve_pbe(&env, &m, &params).unwrap();
            assert_eq!(eq.regime, Regime::B2);
            assert_abs_diff_eq!(eq.belief.b_l_given_h, 0.05, epsilon = 1e-15);
        }
    }

    #[test]
    fn solve_b1_and_b3() {
        let (env, m) = etc();
        let b1 = solve_pbe(&env, &m, &GameParams::low_type(1.5, 5.0, 100.0).unwrap()).unwrap();
        assert_eq!(b1.regime, Regime::B1);
        assert_abs_diff_eq!(b1.solver_incentive(&env, &m), 1.5, epsilon = 1e-9);
        assert!(b1.sigma_l() < HAT);
        assert!(b1.diagnostics.passed);

        let b3 = solve_pbe(&env, &m, &GameParams::low_type(0.2, 0.01, 1.0).unwrap()).unwrap();
        assert_eq!(b3.regime, Regime::B3);
        assert_eq!(b3.sigma_d_h(), 1.0);
        assert_abs_diff_eq!(b3.solver_incentive(&env, &m), 1.2, epsilon = 1e-9);
        assert!(b3.diagnostics.passed, "{:?}", b3.diagnostics);
    }

    #[test]
    fn perturbed_solution_fails_check() {
        let (env, m) = etc();
        let params = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let eq = solve_pbe(&env, &m, &params).unwrap();
        let profile = StrategyProfile::reduced(eq.sigma_l() + 0.05, eq.sigma_d_h());
        let belief = bayes_update(&env, &profile.traveler);
        let r = check_pbe(&env, &m, &params, &profile, &belief, 1e-9);
        assert!(!r.passed);
        assert!(r.violated().any(|c| c == Condition::LowMisbehaves));
    }

    #[test]
    fn large_fine_empties_b3() {
        let (env, m) = etc();
        let solver = Solver::new(env, &m, SolverTolerances::default()).unwrap();
        for i in 1..40 {
            for j in 1..40 {
                let params = GameParams::low_type(i as f64 * 0.07, j as f64 * 2.0, 100.0).unwrap();
                assert_ne!(solver.classify(&params).unwrap().regime, Regime::B3);
            }
        }
    }

    #[test]
    fn assumption_violation_is_reported() {
        let env = TrafficEnvironment::new(0.3, 2400.0).unwrap();
        let m = Mm1Cost::new(Mm1CostParams::new(1700.0, 1600.0, 50.0).unwrap());
        let r = solve_pbe(&env, &m, &GameParams::low_type(0.5, 5.0, 100.0).unwrap());
        assert!(matches!(r, Err(SolveError::AssumptionViolation(_))));
    }

    impl Equilibrium {
        fn solver_incentive(&self, env: &TrafficEnvironment, m: &Mm1Cost) -> f64 {
            delta_c(env, m, self.sigma_l()).unwrap().as_f64()
        }
    }
}
