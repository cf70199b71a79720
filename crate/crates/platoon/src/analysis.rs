//! Certificate checkers for string configurations and traces.
//!
//! Each checker evaluates the hypotheses behind one structural guarantee of
//! the model (global existence of smooth solutions, asymptotic flocking,
//! finite-time collision of the two-agent construction, exponential formation
//! acquisition) on concrete data, and returns a [`ConditionReport`] whose
//! entries carry the numeric witnesses used to reach every verdict. Checkers
//! never decide anything silently: a boolean in a report always sits next to
//! the number that produced it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{energy, modified_energy};
use crate::integrator::{Termination, Trace};
use crate::kernels::phi_primitive_inverse;
use crate::model::{ModelError, ModelParams, State};

/// Relative tolerance for matching the blow-up construction's closing speed.
pub const SPEED_MATCH_REL_TOL: f64 = 1e-12;

/// Which structural guarantee a report speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Global existence on coherently ordered data with open gaps.
    ExistenceOrdered,
    /// Global existence on possibly unordered data with all gaps open.
    ExistenceUnordered,
    /// Finite-time collision of the critical two-agent configuration.
    BlowUp,
    /// Velocity consensus with uniformly bounded formation errors.
    Flocking,
    /// Exponential decay of the modified energy.
    ExponentialFormation,
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TheoremId::ExistenceOrdered => "existence_ordered",
            TheoremId::ExistenceUnordered => "existence_unordered",
            TheoremId::BlowUp => "blow_up",
            TheoremId::Flocking => "flocking",
            TheoremId::ExponentialFormation => "exponential_formation",
        };
        f.write_str(name)
    }
}

/// One hypothesis entry: the claim, its verdict, and the number behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    pub witness: f64,
}

/// One conclusion entry: a measured quantity judged against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConclusionCheck {
    pub name: String,
    pub holds: bool,
    pub measured: f64,
    pub tolerance: f64,
}

/// Machine-checkable certificate produced by every checker in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem_id: TheoremId,
    pub hypotheses: Vec<Hypothesis>,
    /// Empty when the checker ran on a bare initial condition.
    pub conclusion_checks: Vec<ConclusionCheck>,
    pub derived_constants: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn new(theorem_id: TheoremId) -> Self {
        ConditionReport {
            theorem_id,
            hypotheses: Vec::new(),
            conclusion_checks: Vec::new(),
            derived_constants: BTreeMap::new(),
        }
    }

    fn hypothesis_entry(&mut self, name: &str, holds: bool, witness: f64) {
        self.hypotheses.push(Hypothesis { name: name.to_owned(), holds, witness });
    }

    fn conclusion_entry(&mut self, name: &str, holds: bool, measured: f64, tolerance: f64) {
        self.conclusion_checks.push(ConclusionCheck {
            name: name.to_owned(),
            holds,
            measured,
            tolerance,
        });
    }

    /// True when every hypothesis entry holds.
    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|h| h.holds)
    }

    /// True when every conclusion entry holds (vacuously true when empty).
    pub fn conclusions_hold(&self) -> bool {
        self.conclusion_checks.iter().all(|c| c.holds)
    }

    /// Verdict of the hypothesis with this exact name, if present.
    pub fn hypothesis(&self, name: &str) -> Option<bool> {
        self.hypotheses.iter().find(|h| h.name == name).map(|h| h.holds)
    }

    /// Verdict of the conclusion check with this exact name, if present.
    pub fn check(&self, name: &str) -> Option<bool> {
        self.conclusion_checks.iter().find(|c| c.name == name).map(|c| c.holds)
    }

    /// Derived constant by name, if the checker computed it.
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.derived_constants.get(name).copied()
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate: {}", self.theorem_id)?;
        writeln!(f, "hypotheses:")?;
        for h in &self.hypotheses {
            let mark = if h.holds { "pass" } else { "FAIL" };
            writeln!(f, "  [{mark}] {:<58} witness {:.9e}", h.name, h.witness)?;
        }
        if !self.conclusion_checks.is_empty() {
            writeln!(f, "conclusions:")?;
            for c in &self.conclusion_checks {
                let mark = if c.holds { "pass" } else { "FAIL" };
                writeln!(
                    f,
                    "  [{mark}] {:<58} measured {:.9e} tolerance {:.3e}",
                    c.name, c.measured, c.tolerance
                )?;
            }
        }
        if !self.derived_constants.is_empty() {
            writeln!(f, "constants:")?;
            for (k, v) in &self.derived_constants {
                writeln!(f, "  {k} = {v:.17e}")?;
            }
        }
        Ok(())
    }
}

fn assert_matching_sizes(state: &State, params: &ModelParams) {
    assert_eq!(
        state.n_agents(),
        params.n_agents(),
        "state and parameters disagree on the number of agents"
    );
}

/// Decides which global-existence regime covers an initial condition.
///
/// Regime "ordered" needs `alpha >= 1` and all gaps open past their offsets
/// in one coherent direction (either ascending or descending positions).
/// Regime "unordered" needs `alpha >= 2` and every unordered gap slack
/// `|x[i] - x[i+1]| - delta[i]` positive. Both verdicts are reported; when
/// neither holds the dynamics carry no global guarantee.
pub fn check_existence_regime(initial: &State, params: &ModelParams) -> ConditionReport {
    assert_matching_sizes(initial, params);
    let n = initial.n_agents();
    let alpha = params.alpha;

    let mut min_ascending = f64::INFINITY;
    let mut min_descending = f64::INFINITY;
    let mut min_unordered = f64::INFINITY;
    for i in 0..n - 1 {
        let gap = initial.x[i + 1] - initial.x[i];
        let delta = params.delta[i];
        min_ascending = min_ascending.min(gap - delta);
        min_descending = min_descending.min(-gap - delta);
        min_unordered = min_unordered.min(gap.abs() - delta);
    }

    let ordered_clearance = min_ascending.max(min_descending);
    let ordered = ordered_clearance > 0.0;
    let alpha_ge_1 = alpha >= 1.0;
    let alpha_ge_2 = alpha >= 2.0;
    let gaps_open = min_unordered > 0.0;
    let regime_ordered = alpha_ge_1 && ordered;
    let regime_unordered = alpha_ge_2 && gaps_open;

    let theorem_id = if regime_ordered || !regime_unordered {
        TheoremId::ExistenceOrdered
    } else {
        TheoremId::ExistenceUnordered
    };
    let mut report = ConditionReport::new(theorem_id);
    report.hypothesis_entry("alignment exponent at least 1", alpha_ge_1, alpha);
    report.hypothesis_entry(
        "gaps coherently ordered with positive clearance",
        ordered,
        ordered_clearance,
    );
    report.hypothesis_entry("alignment exponent at least 2", alpha_ge_2, alpha);
    report.hypothesis_entry("all gap slacks positive", gaps_open, min_unordered);
    report.conclusion_entry("ordered regime applies", regime_ordered, ordered_clearance, 0.0);
    report.conclusion_entry("unordered regime applies", regime_unordered, min_unordered, 0.0);
    report.derived_constants.insert("alpha".to_owned(), alpha);
    report
        .derived_constants
        .insert("min_ordered_clearance".to_owned(), ordered_clearance);
    report
        .derived_constants
        .insert("min_gap_slack".to_owned(), min_unordered);
    let min_delta = params.delta.iter().copied().fold(f64::INFINITY, f64::min);
    report.derived_constants.insert("min_delta".to_owned(), min_delta);
    report
}

/// Gap functional guarding the unordered existence regime.
///
/// Returns the sum of `slack^-(alpha - 2)` over consecutive pairs for
/// `alpha > 2`, and the sum of `ln(slack)` exactly at `alpha = 2` (the
/// renormalized limit of the power form). Finite if and only if every gap
/// slack is strictly positive.
pub fn l_functional(state: &State, params: &ModelParams) -> Result<f64, ModelError> {
    assert_matching_sizes(state, params);
    let alpha = params.alpha;
    if !(alpha >= 2.0) {
        return Err(ModelError::KernelDomain {
            kernel: "l_functional",
            value: alpha,
            requirement: "alpha >= 2",
        });
    }
    let mut total = 0.0;
    for i in 0..state.n_agents() - 1 {
        let slack = (state.x[i] - state.x[i + 1]).abs() - params.delta[i];
        if slack <= 0.0 {
            return Err(ModelError::Collision { left: i, right: i + 1, slack });
        }
        total += if alpha == 2.0 { slack.ln() } else { slack.powf(-(alpha - 2.0)) };
    }
    Ok(total)
}

/// Evaluates the flocking admission condition on an initial state.
///
/// For `beta <= 1` the condition holds for free (the admissible energy budget
/// is unbounded). For `beta > 1` it demands the initial energy stay below
/// `1 / (2 (beta - 1))`. When the condition holds the report also carries
/// `rho = sqrt(phi_primitive_inverse(2 E))`, the uniform bound on formation
/// errors along the solution.
///
/// The energy here always includes the control potential, whether or not the
/// control force is enabled; the certificate is about the controlled system,
/// and a disabled control shows up as a failed hypothesis instead.
pub fn check_flocking_condition(initial: &State, params: &ModelParams) -> ConditionReport {
    assert_matching_sizes(initial, params);
    let mut controlled = params.clone();
    controlled.control_enabled = true;
    let e = energy(initial, &controlled).e_total;

    let beta = params.beta;
    let automatic = beta <= 1.0;
    let threshold = if automatic { f64::INFINITY } else { 0.5 / (beta - 1.0) };
    let satisfied = automatic || e < threshold;

    let mut report = ConditionReport::new(TheoremId::Flocking);
    report.hypothesis_entry(
        "control force enabled",
        params.control_enabled,
        if params.control_enabled { 1.0 } else { 0.0 },
    );
    report.hypothesis_entry("kernel exponent at most 1, condition automatic", automatic, beta);
    report.hypothesis_entry("initial energy below the admission threshold", satisfied, e);
    report.conclusion_entry("flocking condition satisfied", satisfied, e, threshold);
    report.derived_constants.insert("initial_energy".to_owned(), e);
    if threshold.is_finite() {
        report.derived_constants.insert("threshold".to_owned(), threshold);
    }
    if satisfied {
        if let Ok(s) = phi_primitive_inverse(2.0 * e, beta) {
            report.derived_constants.insert("rho".to_owned(), s.sqrt());
        }
    }
    report
}

/// Certifies the critical two-agent configuration that collides in finite time.
///
/// Checks `alpha` in (0, 1), a non-negative combined offset `delta_1 + z_1`,
/// an open initial gap, and a closing speed equal to the critical value
/// `2 / (1 - alpha) * slack^(1 - alpha)` to relative tolerance
/// [`SPEED_MATCH_REL_TOL`]. When all hold, the report carries the analytic
/// upper bound `t_star_bound = slack^alpha * (1 - alpha) / (2 alpha)` on the
/// collision time.
pub fn blow_up_certificate(
    initial: &State,
    params: &ModelParams,
) -> Result<ConditionReport, ModelError> {
    if params.n_agents() != 2 || initial.n_agents() != 2 {
        return Err(ModelError::InvalidParams(format!(
            "the blow-up certificate covers exactly 2 agents, got {}",
            initial.n_agents().max(params.n_agents())
        )));
    }
    let alpha = params.alpha;
    let delta1 = params.delta[0];
    let z1 = params.z[0];
    let slack0 = initial.x[1] - initial.x[0] - delta1;
    let closing_speed = initial.v[0] - initial.v[1];

    let alpha_ok = 0.0 < alpha && alpha < 1.0;
    let offset_ok = delta1 + z1 >= 0.0;
    let gap_ok = slack0 > 0.0;
    let (speed_ok, speed_residual, critical) = if alpha_ok && gap_ok {
        let critical = 2.0 / (1.0 - alpha) * slack0.powf(1.0 - alpha);
        let residual = (closing_speed - critical) / critical;
        (residual.abs() <= SPEED_MATCH_REL_TOL, residual, Some(critical))
    } else {
        (false, f64::NAN, None)
    };

    let mut report = ConditionReport::new(TheoremId::BlowUp);
    report.hypothesis_entry("alignment exponent strictly between 0 and 1", alpha_ok, alpha);
    report.hypothesis_entry("combined offset delta + z non-negative", offset_ok, delta1 + z1);
    report.hypothesis_entry("initial gap open past its offset", gap_ok, slack0);
    report.hypothesis_entry(
        "closing speed matches the critical value",
        speed_ok,
        speed_residual,
    );
    report.derived_constants.insert("initial_gap_slack".to_owned(), slack0);
    report.derived_constants.insert("closing_speed".to_owned(), closing_speed);
    if let Some(critical) = critical {
        report.derived_constants.insert("critical_speed".to_owned(), critical);
    }
    if alpha_ok && offset_ok && gap_ok && speed_ok {
        let bound = slack0.powf(alpha) * (1.0 - alpha) / (2.0 * alpha);
        report.derived_constants.insert("t_star_bound".to_owned(), bound);
    }
    Ok(report)
}

/// Checks the spacing targets against the collision offsets and the uniform
/// formation-error radius `rho`.
///
/// The weak per-edge condition `z[i] > delta[i]` keeps the target formation
/// itself collision-free; the strong condition `z[i] > rho + delta[i]` keeps
/// every configuration within `rho` of the formation collision-free, which is
/// what sustains the exponential decay of the modified energy.
pub fn check_formation_constraint(params: &ModelParams, rho: f64) -> ConditionReport {
    let mut report = ConditionReport::new(TheoremId::ExponentialFormation);
    let mut min_weak = f64::INFINITY;
    let mut min_strong = f64::INFINITY;
    for i in 0..params.delta.len() {
        let weak = params.z[i] - params.delta[i];
        let strong = params.z[i] - rho - params.delta[i];
        min_weak = min_weak.min(weak);
        min_strong = min_strong.min(strong);
        report.hypothesis_entry(
            &format!("offset exceeds clearance on edge {i}"),
            weak > 0.0,
            weak,
        );
        report.hypothesis_entry(
            &format!("offset exceeds clearance plus rho on edge {i}"),
            strong > 0.0,
            strong,
        );
    }
    report.conclusion_entry("every offset exceeds its clearance", min_weak > 0.0, min_weak, 0.0);
    report.conclusion_entry(
        "every offset exceeds clearance plus rho",
        min_strong > 0.0,
        min_strong,
        0.0,
    );
    report.derived_constants.insert("rho".to_owned(), rho);
    report
}

/// Tolerances for [`verify_trace_certificates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTolerances {
    /// Largest allowed drift of the sampled mean velocity from its initial value.
    pub v_mean_drift: f64,
    /// Allowed sample-to-sample energy rise, relative to the initial energy.
    pub energy_rise_rel: f64,
    /// Leading coefficient of the discrete balance tolerance
    /// `coeff * sample_dt^2 * horizon * max(dissipation)`.
    pub balance_coeff: f64,
    /// Final-time velocity diameter below this counts as consensus.
    pub velocity_consensus: f64,
    /// Final-time formation error below this counts as acquisition.
    pub formation_acquired: f64,
}

impl Default for TraceTolerances {
    fn default() -> Self {
        TraceTolerances {
            v_mean_drift: 1e-8,
            energy_rise_rel: 1e-7,
            balance_coeff: 10.0,
            velocity_consensus: 1e-3,
            formation_acquired: 1e-3,
        }
    }
}

/// Verifies the conservation and monotonicity certificates on a sampled trace.
///
/// Checks, in order: the mean velocity holds its initial value; the total
/// energy never rises between consecutive samples beyond the relative slack;
/// the discrete balance `|delta E + integral of D|` stays within a trapezoid
/// quadrature budget; every sampled gap slack is positive; and the final
/// velocity diameter and formation error sit below their thresholds. The
/// minimum observed slack is reported as a finite-horizon witness, not a
/// proof of a uniform lower bound.
pub fn verify_trace_certificates(
    trace: &Trace,
    params: &ModelParams,
    tol: &TraceTolerances,
) -> ConditionReport {
    let samples = &trace.samples;
    let first = trace.first();
    assert_matching_sizes(&first.state, params);
    let last = trace.last();

    let v_mean0 = first.energy.v_mean;
    let e0 = first.energy.e_total;
    let mut max_drift: f64 = 0.0;
    let mut max_rise: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    let mut max_dt: f64 = 0.0;
    let mut integral_d = 0.0;
    for (k, s) in samples.iter().enumerate() {
        max_drift = max_drift.max((s.energy.v_mean - v_mean0).abs());
        min_slack = min_slack.min(s.diag.min_gap_slack);
        let d = s.energy.dissipation.unwrap_or(f64::NAN);
        max_d = max_d.max(d);
        if k + 1 < samples.len() {
            let next = &samples[k + 1];
            let dt = next.state.t - s.state.t;
            max_dt = max_dt.max(dt);
            max_rise = max_rise.max(next.energy.e_total - s.energy.e_total);
            integral_d += 0.5 * dt * (d + next.energy.dissipation.unwrap_or(f64::NAN));
        }
    }

    let horizon = last.state.t - first.state.t;
    let rise_slack = tol.energy_rise_rel * e0;
    let residual = ((last.energy.e_total - e0) + integral_d).abs();
    let quadrature_roundoff =
        f64::EPSILON * samples.len() as f64 * (e0.abs() + max_d * horizon.abs());
    let balance_tol = tol.balance_coeff * max_dt * max_dt * horizon * max_d + quadrature_roundoff;
    let final_vdiam = last.diag.velocity_diameter;
    let final_form = last.diag.formation_error;

    let mut report = ConditionReport::new(TheoremId::Flocking);
    report.hypothesis_entry(
        "run reached its horizon",
        matches!(trace.termination, Termination::ReachedTEnd),
        last.state.t,
    );
    report.hypothesis_entry(
        "gap slack bounded below on the window (finite-horizon witness, not a proof)",
        min_slack > 0.0,
        min_slack,
    );
    report.conclusion_entry(
        "mean velocity conserved",
        max_drift <= tol.v_mean_drift,
        max_drift,
        tol.v_mean_drift,
    );
    report.conclusion_entry(
        "total energy non-increasing",
        max_rise <= rise_slack,
        max_rise,
        rise_slack,
    );
    report.conclusion_entry(
        "discrete energy balance",
        residual <= balance_tol,
        residual,
        balance_tol,
    );
    report.conclusion_entry("collision free at every sample", min_slack > 0.0, min_slack, 0.0);
    report.conclusion_entry(
        "velocity consensus at the horizon",
        final_vdiam < tol.velocity_consensus,
        final_vdiam,
        tol.velocity_consensus,
    );
    report.conclusion_entry(
        "formation acquired at the horizon",
        final_form < tol.formation_acquired,
        final_form,
        tol.formation_acquired,
    );
    report.derived_constants.insert("initial_energy".to_owned(), e0);
    report.derived_constants.insert("final_energy".to_owned(), last.energy.e_total);
    report.derived_constants.insert("max_dissipation".to_owned(), max_d);
    report.derived_constants.insert("balance_residual".to_owned(), residual);
    report.derived_constants.insert("balance_tolerance".to_owned(), balance_tol);
    report.derived_constants.insert("min_gap_slack_observed".to_owned(), min_slack);
    report.derived_constants.insert("max_v_mean_drift".to_owned(), max_drift);
    report.derived_constants.insert("final_velocity_diameter".to_owned(), final_vdiam);
    report.derived_constants.insert("final_formation_error".to_owned(), final_form);
    report.derived_constants.insert("horizon".to_owned(), horizon);
    report
}

/// Slope and goodness of a least-squares line through `ln e_gamma(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted decay rate; negative means exponential decay.
    pub rate: f64,
    /// Coefficient of determination of the log-linear fit, in [0, 1].
    pub r_squared: f64,
}

/// Window covering the second half of a trace, past the initial transient.
pub fn last_half_window(trace: &Trace) -> (f64, f64) {
    let t0 = trace.first().state.t;
    let t1 = trace.last().state.t;
    (0.5 * (t0 + t1), t1)
}

/// Fits `ln e_gamma(t)` over a time window by least squares.
///
/// The modified energy is recomputed from each sampled state with the given
/// `gamma`, so the fit never depends on what weight the trace was recorded
/// with. Fails if the window holds fewer than 3 samples or the modified
/// energy is not strictly positive throughout it.
pub fn fit_exponential_rate(
    trace: &Trace,
    params: &ModelParams,
    gamma: f64,
    window: (f64, f64),
) -> Result<RateFit, ModelError> {
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for s in &trace.samples {
        let t = s.state.t;
        if t < lo || t > hi {
            continue;
        }
        let eg = modified_energy(&s.state, params, gamma);
        if !(eg > 0.0) {
            return Err(ModelError::NonpositiveEnergy { t, value: eg });
        }
        ts.push(t);
        ys.push(eg.ln());
    }
    if ts.len() < 3 {
        return Err(ModelError::WindowTooSmall { count: ts.len() });
    }

    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut s_tt = 0.0;
    let mut s_ty = 0.0;
    let mut s_yy = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        let dt = t - t_mean;
        let dy = y - y_mean;
        s_tt += dt * dt;
        s_ty += dt * dy;
        s_yy += dy * dy;
    }
    if s_tt == 0.0 {
        return Err(ModelError::InvalidState(
            "fit window spans a single sample time".to_owned(),
        ));
    }
    let rate = s_ty / s_tt;
    let ss_res = (s_yy - s_ty * s_ty / s_tt).max(0.0);
    let r_squared = if s_yy == 0.0 { 1.0 } else { (1.0 - ss_res / s_yy).clamp(0.0, 1.0) };
    Ok(RateFit { rate, r_squared })
}
