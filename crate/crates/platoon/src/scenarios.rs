//! Ready-made experiment configurations with expected certificate outcomes.
//!
//! Each builder bundles model parameters, a deterministic initial condition,
//! an integrator configuration, and the list of certificates the run is
//! expected to produce. The initial data is constructed from frozen numeric
//! weights, so identical builder inputs yield bit-identical scenarios, and a
//! reproduction run can diff observed certificates against the recorded
//! expectations.
//!
//! Three families are bundled: a five-agent formation string converging to
//! evenly spaced slots (at rest and drifting), a ten-agent flocking string
//! probing both sides of the energy admission threshold, and the critical
//! two-agent pair whose gap closes in finite time.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    blow_up_certificate, check_existence_regime, check_flocking_condition,
    check_formation_constraint, verify_trace_certificates, ConditionReport, TraceTolerances,
};
use crate::integrator::{integrate, IntegratorConfig, Termination, Trace};
use crate::model::{ModelError, ModelParams, State};

/// Slack factor applied to the analytic collision-time bound when judging
/// whether a detected collision landed inside it.
pub const BOUND_SLACK_REL: f64 = 1e-6;

/// One expected certificate outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    /// Name of a certificate entry produced by [`evaluate_with_trace`].
    pub certificate: String,
    pub expected: bool,
}

/// A named, fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub initial: State,
    pub integrator_cfg: IntegratorConfig,
    pub expected: Vec<Expectation>,
}

/// Which variant of the five-agent formation experiment to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormationCase {
    /// Agents start displaced but motionless.
    AtRest,
    /// Agents start displaced with unequal velocities around the mean.
    Moving,
}

/// Slot positions of the five-agent formation: spacing 4 around the origin.
const FORMATION: [f64; 5] = [8.0, 4.0, 0.0, -4.0, -8.0];

/// Position offsets of the at-rest start, as weights of the open-chain
/// oscillation modes (slowest first).
const AT_REST_POSITION_WEIGHTS: [f64; 4] =
    [-0.005841430664062499, 0.14496386718749996, 0.2, 0.15];

/// Position mode weights of the moving start; the large last entry compresses
/// the central gaps to roughly a third of their slot spacing.
const MOVING_POSITION_WEIGHTS: [f64; 4] = [-0.16034459228515624, 0.15, 0.0, -0.65];

/// Velocity mode weights of the moving start, relative to the mean drift.
const MOVING_VELOCITY_WEIGHTS: [f64; 4] = [0.23890318603515626, 0.15, 0.12, 0.10];

/// Initial gaps of the ten-agent flocking string, front to back.
const FLOCKING_GAPS: [f64; 9] = [0.9, 0.6, 1.2, 0.7, 1.0, 0.8, 1.1, 0.65, 0.95];

/// Velocity jitter of the flocking string, added to a front-to-back ramp.
const FLOCKING_JITTER: [f64; 10] =
    [0.13, -0.21, 0.08, 0.17, -0.11, 0.05, -0.19, 0.23, -0.07, -0.08];

/// Kinetic spread energy the flocking string is normalized to.
const FLOCKING_E1: f64 = 0.4;

/// Oscillation mode `k` of an open chain of `n` agents, sampled at the agent
/// midpoints: entry `i` is `cos(k pi (2 i + 1) / (2 n))`.
fn chain_mode(n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            (k as f64 * std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64)).cos()
        })
        .collect()
}

fn mode_combination(base: &[f64], weights: &[f64; 4], modes: &[Vec<f64>]) -> Vec<f64> {
    (0..base.len())
        .map(|i| base[i] + weights.iter().enumerate().map(|(k, w)| w * modes[k][i]).sum::<f64>())
        .collect()
}

fn expect(pairs: &[(&str, bool)]) -> Vec<Expectation> {
    pairs
        .iter()
        .map(|(name, expected)| Expectation {
            certificate: (*name).to_owned(),
            expected: *expected,
        })
        .collect()
}

/// Five agents converging to evenly spaced slots, at rest or drifting.
///
/// Parameters: singular alignment exponent 2.1, bounded control exponent 0.8,
/// hard-core distance 2, target spacing 4, horizon 60. The initial offsets
/// are frozen mode combinations; `v_mean` rigidly shifts every velocity, so
/// any drift value yields the same relative dynamics.
pub fn formation_scenario(case: FormationCase, v_mean: f64) -> Scenario {
    let params = ModelParams::uniform(2.1, 0.8, 5, 2.0, 4.0)
        .expect("the formation parameters are valid by construction");
    let modes: Vec<Vec<f64>> = (1..=4).map(|k| chain_mode(5, k)).collect();

    let (x, v, sample_dt) = match case {
        FormationCase::AtRest => {
            let x = mode_combination(&FORMATION, &AT_REST_POSITION_WEIGHTS, &modes);
            (x, vec![v_mean; 5], 0.1)
        }
        FormationCase::Moving => {
            let x = mode_combination(&FORMATION, &MOVING_POSITION_WEIGHTS, &modes);
            let v = mode_combination(&[v_mean; 5], &MOVING_VELOCITY_WEIGHTS, &modes);
            (x, v, 0.005)
        }
    };
    let initial = State::new(0.0, x, v).expect("the frozen weights produce a finite state");

    let mut cfg = IntegratorConfig::new(60.0, &params);
    cfg.sample_dt = sample_dt;
    cfg.gamma = Some(10.0);

    let name = match (case, v_mean) {
        (FormationCase::AtRest, vm) if vm == 0.0 => "formation-at-rest".to_owned(),
        (FormationCase::AtRest, vm) => format!("formation-at-rest-v{vm}"),
        (FormationCase::Moving, vm) if vm == -0.2 => "formation-moving".to_owned(),
        (FormationCase::Moving, vm) if vm == 0.0 => "formation-moving-zero-mean".to_owned(),
        (FormationCase::Moving, vm) => format!("formation-moving-v{vm}"),
    };

    let strong_offset_margin = matches!(case, FormationCase::AtRest);
    let expected = expect(&[
        ("ordered regime applies", true),
        ("unordered regime applies", true),
        ("flocking condition satisfied", true),
        ("every offset exceeds its clearance", true),
        ("every offset exceeds clearance plus rho", strong_offset_margin),
        ("run reached its horizon", true),
        ("mean velocity conserved", true),
        ("total energy non-increasing", true),
        ("discrete energy balance", true),
        ("collision free at every sample", true),
        ("velocity consensus at the horizon", true),
        ("formation acquired at the horizon", true),
    ]);

    Scenario { name, params, initial, integrator_cfg: cfg, expected }
}

/// Ten agents with point cores probing the flocking admission threshold.
///
/// Parameters: alignment exponent 2.2, zero hard-core distance, target
/// spacing 0.5, horizon 100. The same frozen initial data serves every
/// `beta`: velocities are a front-to-back ramp plus jitter, centered and
/// scaled so the kinetic spread energy is exactly [`FLOCKING_E1`]. With
/// `control_enabled = false` the control force is zeroed and the string
/// merely aligns, acquiring no formation.
pub fn flocking_scenario(beta: f64, control_enabled: bool) -> Result<Scenario, ModelError> {
    if !(beta > 1.0) {
        return Err(ModelError::InvalidParams(format!(
            "the flocking scenario probes the admission threshold, which needs beta > 1, \
             got {beta}"
        )));
    }
    let n = 10;
    let z = 0.5;
    let mut params = ModelParams::uniform(2.2, beta, n, 0.0, z)
        .expect("the flocking parameters are valid by construction");
    params.control_enabled = control_enabled;

    let mut x = vec![0.0; n];
    for i in 1..n {
        x[i] = x[i - 1] - FLOCKING_GAPS[i - 1];
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 - 2.0 * i as f64 / (n - 1) as f64 + FLOCKING_JITTER[i])
        .collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    for vi in v.iter_mut() {
        *vi -= mean;
    }
    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..n {
            spread += (v[i] - v[j]).powi(2);
        }
    }
    let scale = (FLOCKING_E1 / (spread / (4.0 * n as f64))).sqrt();
    for vi in v.iter_mut() {
        *vi *= scale;
    }
    let initial = State::new(0.0, x, v).expect("the frozen gaps produce a finite state");

    let mut cfg = IntegratorConfig::new(100.0, &params);
    cfg.sample_dt = 0.1;
    cfg.gamma = Some(10.0);

    let name = if control_enabled {
        format!("flocking-beta-{beta}")
    } else {
        format!("flocking-uncontrolled-beta-{beta}")
    };

    let below_threshold = FLOCKING_E1 < 0.5 / (beta - 1.0);
    let expected = if !control_enabled {
        expect(&[
            ("ordered regime applies", true),
            ("unordered regime applies", true),
            ("run reached its horizon", true),
            ("mean velocity conserved", true),
            ("total energy non-increasing", true),
            ("discrete energy balance", true),
            ("collision free at every sample", true),
            ("velocity consensus at the horizon", false),
            ("formation acquired at the horizon", false),
        ])
    } else if below_threshold {
        expect(&[
            ("ordered regime applies", true),
            ("unordered regime applies", true),
            ("flocking condition satisfied", true),
            ("every offset exceeds its clearance", true),
            ("run reached its horizon", true),
            ("mean velocity conserved", true),
            ("total energy non-increasing", true),
            ("discrete energy balance", true),
            ("collision free at every sample", true),
            ("velocity consensus at the horizon", true),
            ("formation acquired at the horizon", true),
        ])
    } else {
        expect(&[
            ("ordered regime applies", true),
            ("unordered regime applies", true),
            ("flocking condition satisfied", false),
            ("run reached its horizon", true),
            ("mean velocity conserved", true),
            ("total energy non-increasing", true),
            ("discrete energy balance", true),
            ("collision free at every sample", true),
            ("velocity consensus at the horizon", false),
            ("formation acquired at the horizon", false),
        ])
    };

    Ok(Scenario { name, params, initial, integrator_cfg: cfg, expected })
}

/// The critical two-agent pair whose gap closes in finite time.
///
/// The pair starts `gap0` past its hard-core distance `delta1`, with the
/// target spacing set to `-delta1` (so the combined offset vanishes) and a
/// closing speed exactly at the critical value `2 / (1 - alpha) *
/// gap0^(1 - alpha)`, split symmetrically around a zero mean. The horizon
/// extends 20 percent past the analytic collision bound, which the run is
/// expected to undercut.
pub fn blow_up_scenario(alpha: f64, gap0: f64, delta1: f64) -> Result<Scenario, ModelError> {
    if !(alpha > 0.0 && alpha < 1.0) || !alpha.is_finite() {
        return Err(ModelError::InvalidParams(format!(
            "the blow-up pair needs alpha strictly between 0 and 1, got {alpha}"
        )));
    }
    if !(gap0 > 0.0) || !gap0.is_finite() {
        return Err(ModelError::InvalidParams(format!(
            "the blow-up pair needs a positive initial gap, got {gap0}"
        )));
    }
    if !(delta1 >= 0.0) || !delta1.is_finite() {
        return Err(ModelError::InvalidParams(format!(
            "the blow-up pair needs a non-negative hard-core distance, got {delta1}"
        )));
    }
    let params = ModelParams::new(alpha, 1.0, vec![delta1], vec![-delta1])
        .expect("validated above");
    let closing_speed = 2.0 / (1.0 - alpha) * gap0.powf(1.0 - alpha);
    let initial = State::new(
        0.0,
        vec![0.0, delta1 + gap0],
        vec![0.5 * closing_speed, -0.5 * closing_speed],
    )
    .expect("validated above");

    let bound = gap0.powf(alpha) * (1.0 - alpha) / (2.0 * alpha);
    let mut cfg = IntegratorConfig::new(1.2 * bound + 0.1, &params);
    cfg.sample_dt = cfg.t_end / 100.0;

    let name = if gap0 == 1.0 {
        format!("blowup-a{alpha}")
    } else {
        format!("blowup-a{alpha}-g{gap0}")
    };
    let expected = expect(&[
        ("blow-up hypotheses hold", true),
        ("run reached its horizon", false),
        ("collision before the analytic bound", true),
        ("mean velocity conserved", true),
    ]);

    Ok(Scenario { name, params, initial, integrator_cfg: cfg, expected })
}

/// Every bundled scenario, in reproduction order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        formation_scenario(FormationCase::AtRest, 0.0),
        formation_scenario(FormationCase::Moving, -0.2),
        formation_scenario(FormationCase::Moving, 0.0),
        flocking_scenario(4.1, true).expect("beta above 1"),
        flocking_scenario(1.025, true).expect("beta above 1"),
        flocking_scenario(1.025, false).expect("beta above 1"),
        blow_up_scenario(0.5, 1.0, 1.0).expect("valid blow-up inputs"),
        blow_up_scenario(0.9, 1.0, 1.0).expect("valid blow-up inputs"),
        blow_up_scenario(0.5, 4.0, 1.0).expect("valid blow-up inputs"),
    ]
}

/// Looks up a bundled scenario by its exact name.
pub fn scenario_by_name(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// One certificate outcome of a scenario run: what was expected and what the
/// run actually produced (`None` when the certificate was not evaluable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateOutcome {
    pub certificate: String,
    pub expected: bool,
    pub actual: Option<bool>,
}

impl CertificateOutcome {
    /// True when the run produced the expected verdict.
    pub fn met(&self) -> bool {
        self.actual == Some(self.expected)
    }
}

/// Everything a scenario run produced: the labeled certificate reports, the
/// expectation scoreboard, and the trace itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub reports: Vec<(String, ConditionReport)>,
    pub outcomes: Vec<CertificateOutcome>,
    pub trace: Trace,
}

impl ScenarioReport {
    /// True when every expectation was met.
    pub fn all_met(&self) -> bool {
        self.outcomes.iter().all(CertificateOutcome::met)
    }

    /// Outcomes whose actual verdict differs from the expected one.
    pub fn mismatches(&self) -> Vec<&CertificateOutcome> {
        self.outcomes.iter().filter(|o| !o.met()).collect()
    }
}

/// Runs a scenario and scores its certificates against the expectations.
pub fn evaluate_scenario(scenario: &Scenario) -> Result<ScenarioReport, ModelError> {
    let trace = integrate(&scenario.initial, &scenario.params, &scenario.integrator_cfg)?;
    Ok(evaluate_with_trace(scenario, trace))
}

/// Scores an existing trace of a scenario against its expectations.
///
/// The available certificate entries are: the two existence-regime
/// conclusions, the flocking-condition conclusion, the two formation-offset
/// conclusions (when the admission energy has a finite error radius), every
/// conclusion of the trace certificate plus its horizon hypothesis, and, for
/// two-agent scenarios, "blow-up hypotheses hold" and "collision before the
/// analytic bound".
pub fn evaluate_with_trace(scenario: &Scenario, trace: Trace) -> ScenarioReport {
    let mut reports: Vec<(String, ConditionReport)> = Vec::new();

    let existence = check_existence_regime(&scenario.initial, &scenario.params);
    reports.push(("existence".to_owned(), existence));

    let flocking = check_flocking_condition(&scenario.initial, &scenario.params);
    let rho = flocking.constant("rho");
    reports.push(("flocking".to_owned(), flocking));

    if let Some(rho) = rho {
        let constraint = check_formation_constraint(&scenario.params, rho);
        reports.push(("formation-constraint".to_owned(), constraint));
    }

    let trace_report =
        verify_trace_certificates(&trace, &scenario.params, &TraceTolerances::default());
    reports.push(("trace".to_owned(), trace_report));

    let mut blow_up_rows: Vec<(String, bool)> = Vec::new();
    if scenario.params.n_agents() == 2 {
        if let Ok(report) = blow_up_certificate(&scenario.initial, &scenario.params) {
            blow_up_rows.push(("blow-up hypotheses hold".to_owned(), report.hypotheses_hold()));
            if let Some(bound) = report.constant("t_star_bound") {
                let within = match trace.termination {
                    Termination::Collision { t_hi, .. } => {
                        t_hi <= bound * (1.0 + BOUND_SLACK_REL)
                    }
                    _ => false,
                };
                blow_up_rows.push(("collision before the analytic bound".to_owned(), within));
            }
            reports.push(("blow-up".to_owned(), report));
        }
    }

    let lookup = |name: &str| -> Option<bool> {
        for (_, report) in &reports {
            if let Some(holds) = report.check(name) {
                return Some(holds);
            }
        }
        for (row, holds) in &blow_up_rows {
            if row == name {
                return Some(*holds);
            }
        }
        // The horizon hypothesis of the trace report doubles as a certificate.
        if name == "run reached its horizon" {
            return reports
                .iter()
                .find(|(label, _)| label == "trace")
                .and_then(|(_, report)| report.hypothesis(name));
        }
        None
    };

    let outcomes = scenario
        .expected
        .iter()
        .map(|e| CertificateOutcome {
            certificate: e.certificate.clone(),
            expected: e.expected,
            actual: lookup(&e.certificate),
        })
        .collect();

    ScenarioReport { scenario: scenario.name.clone(), reports, outcomes, trace }
}
