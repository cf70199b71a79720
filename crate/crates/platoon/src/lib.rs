//! Collision-free platooning of agents on a line.
//!
//! A string of agents couples neighbor to neighbor through a velocity
//! alignment force whose kernel blows up as a gap closes on its hard-core
//! distance, plus a bounded decentralized control force steering each gap
//! toward a target spacing. The crate provides the model itself, a guarded
//! adaptive integrator with collision detection, analysis routines that
//! certify qualitative claims about trajectories (energy decay, flocking,
//! finite-time blow-up bounds, exponential convergence), and a registry of
//! named scenarios used by the command-line frontend.
//!
//! The module layout follows the data flow: [`model`] holds parameters and
//! state, [`kernels`] the interaction laws, [`dynamics`] assembles forces and
//! energies, [`integrator`] advances trajectories, [`analysis`] checks
//! hypotheses and certificates, and [`scenarios`] bundles ready-made
//! configurations.

pub mod analysis;
pub mod dynamics;
pub mod integrator;
pub mod kernels;
pub mod model;
pub mod scenarios;

pub use analysis::{
    blow_up_certificate, check_existence_regime, check_flocking_condition,
    check_formation_constraint, fit_exponential_rate, l_functional, last_half_window,
    verify_trace_certificates, ConclusionCheck, ConditionReport, Hypothesis, RateFit, TheoremId,
    TraceTolerances,
};
pub use dynamics::{diagnostics, energy, energy_with_gamma, modified_energy, rhs};
pub use integrator::{
    integrate, integrate_oracle, IntegratorConfig, StepStats, Termination, Trace, TraceSample,
};
pub use kernels::{phi, phi_primitive, phi_primitive_inverse, psi};
pub use model::{Diagnostics, EnergyReport, ModelError, ModelParams, State};
pub use scenarios::{
    blow_up_scenario, builtin_scenarios, evaluate_scenario, evaluate_with_trace,
    flocking_scenario, formation_scenario, scenario_by_name, CertificateOutcome, Expectation,
    FormationCase, Scenario, ScenarioReport, BOUND_SLACK_REL,
};
