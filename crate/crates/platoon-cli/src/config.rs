//! Scenario selection: built-in names, TOML config files, and `k=v`
//! parameter overrides.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use platoon::{
    builtin_scenarios, diagnostics, scenario_by_name, Expectation, IntegratorConfig, ModelParams,
    Scenario, State,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// A scenario ready to run, plus the pieces needed to re-derive its initial
/// data when a seed override arrives.
pub struct Selection {
    pub scenario: Scenario,
    /// Base state and amplitude of the jitter builder, when the config used one.
    jitter: Option<(State, f64)>,
    seed: u64,
}

/// Top-level layout of a scenario config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    name: Option<String>,
    params: ParamsConfig,
    initial: InitialConfig,
    integrator: Option<IntegratorSection>,
    #[serde(default)]
    expectations: Vec<Expectation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsConfig {
    alpha: f64,
    beta: f64,
    delta: Spread,
    z: Spread,
    control_enabled: Option<bool>,
}

/// A per-edge quantity given either as one shared value or one value per edge.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Spread {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

impl Spread {
    fn resolve(&self, edges: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Spread::Uniform(value) => Ok(vec![*value; edges]),
            Spread::PerEdge(values) => {
                if values.len() != edges {
                    bail!("{what} lists {} entries but the initial data has {edges} edges", values.len());
                }
                Ok(values.clone())
            }
        }
    }
}

/// Initial data: explicit vectors, or a built-in scenario's state with
/// optional seeded jitter.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialConfig {
    x: Option<Vec<f64>>,
    v: Option<Vec<f64>>,
    builtin: Option<String>,
    jitter: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorSection {
    t_end: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    h_init: Option<f64>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    sample_dt: Option<f64>,
    collision_slack: Option<f64>,
    gamma: Option<f64>,
}

/// Names of all built-in scenarios, for error messages and listings.
pub fn builtin_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Resolves a selection from `--scenario` or `--config`, then applies
/// `--override k=v` pairs and the `--seed` flag in that order.
pub fn select(
    scenario: Option<&str>,
    config: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Scenario> {
    let mut selection = match (scenario, config) {
        (Some(name), None) => from_builtin(name)?,
        (None, Some(path)) => from_config_file(path)?,
        (None, None) => bail!(
            "choose a scenario with --scenario <name> or --config <file>; built-ins:\n{}",
            describe_builtins()
        ),
        (Some(_), Some(_)) => bail!("--scenario and --config are mutually exclusive"),
    };
    for pair in overrides {
        apply_override(&mut selection, pair)?;
    }
    if let Some(seed) = seed {
        set_seed(&mut selection, seed)?;
    }
    validate(&selection.scenario)?;
    Ok(selection.scenario)
}

fn from_builtin(name: &str) -> Result<Selection> {
    let scenario = scenario_by_name(name).ok_or_else(|| {
        anyhow!(
            "no built-in scenario named {name:?}; available: {}",
            builtin_names().join(", ")
        )
    })?;
    Ok(Selection { scenario, jitter: None, seed: 0 })
}

fn from_config_file(path: &Path) -> Result<Selection> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let config: ScenarioConfig = toml::from_str(&text)
        .with_context(|| format!("parsing config file {}", path.display()))?;
    let name = config.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_owned())
    });
    build_selection(name, config)
}

fn build_selection(name: String, config: ScenarioConfig) -> Result<Selection> {
    let (base_state, jitter_amplitude) = match (&config.initial.x, &config.initial.builtin) {
        (Some(x), None) => {
            let v = config
                .initial
                .v
                .clone()
                .ok_or_else(|| anyhow!("[initial] gives x but no v"))?;
            let state = State::new(0.0, x.clone(), v).map_err(|e| anyhow!("[initial]: {e}"))?;
            (state, config.initial.jitter)
        }
        (None, Some(builtin)) => {
            let donor = scenario_by_name(builtin).ok_or_else(|| {
                anyhow!(
                    "[initial] builtin {builtin:?} is not a built-in scenario; available: {}",
                    builtin_names().join(", ")
                )
            })?;
            (donor.initial, config.initial.jitter)
        }
        (Some(_), Some(_)) => bail!("[initial] gives both explicit vectors and a builtin name"),
        (None, None) => bail!("[initial] needs either x and v vectors or a builtin name"),
    };
    if config.initial.x.is_none() && config.initial.v.is_some() {
        bail!("[initial] gives v but no x");
    }

    let edges = base_state.n_agents() - 1;
    let delta = config.params.delta.resolve(edges, "[params] delta")?;
    let z = config.params.z.resolve(edges, "[params] z")?;
    let mut params = ModelParams::new(config.params.alpha, config.params.beta, delta, z)
        .map_err(|e| anyhow!("[params]: {e}"))?;
    if let Some(enabled) = config.params.control_enabled {
        params.control_enabled = enabled;
    }

    let section = config.integrator.unwrap_or_default();
    let mut cfg = IntegratorConfig::new(section.t_end.unwrap_or(60.0), &params);
    if let Some(v) = section.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = section.abs_tol {
        cfg.abs_tol = v;
    }
    if let Some(v) = section.h_init {
        cfg.h_init = v;
    }
    if let Some(v) = section.h_min {
        cfg.h_min = v;
    }
    if let Some(v) = section.h_max {
        cfg.h_max = v;
    }
    if let Some(v) = section.sample_dt {
        cfg.sample_dt = v;
    }
    if let Some(v) = section.collision_slack {
        cfg.collision_slack = v;
    }
    if let Some(v) = section.gamma {
        cfg.gamma = Some(v);
    }

    let seed = config.initial.seed.unwrap_or(0);
    let jitter = jitter_amplitude.map(|a| (base_state.clone(), a));
    let initial = match &jitter {
        Some((base, amplitude)) => jittered_state(base, *amplitude, seed),
        None => base_state,
    };

    Ok(Selection {
        scenario: Scenario {
            name,
            params,
            initial,
            integrator_cfg: cfg,
            expected: config.expectations,
        },
        jitter,
        seed,
    })
}

/// Adds uniform jitter in `[-amplitude, amplitude]` to every position, then
/// every velocity, drawn in index order from a seeded stream.
fn jittered_state(base: &State, amplitude: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = base
        .x
        .iter()
        .map(|xi| xi + rng.gen_range(-amplitude..=amplitude))
        .collect();
    let v = base
        .v
        .iter()
        .map(|vi| vi + rng.gen_range(-amplitude..=amplitude))
        .collect();
    State::new(base.t, x, v).expect("jitter keeps coordinates finite")
}

fn set_seed(selection: &mut Selection, seed: u64) -> Result<()> {
    let Some((base, amplitude)) = &selection.jitter else {
        bail!("a seed override only applies to configs whose [initial] section sets a jitter amplitude");
    };
    selection.seed = seed;
    selection.scenario.initial = jittered_state(base, *amplitude, seed);
    Ok(())
}

/// Applies one `k=v` override. Accepted keys: alpha, beta, t_end, gamma,
/// control_enabled, seed.
fn apply_override(selection: &mut Selection, pair: &str) -> Result<()> {
    let (key, value) = pair
        .split_once('=')
        .ok_or_else(|| anyhow!("override {pair:?} is not of the form k=v"))?;
    let scenario = &mut selection.scenario;
    match key {
        "alpha" => scenario.params.alpha = parse_f64(key, value)?,
        "beta" => scenario.params.beta = parse_f64(key, value)?,
        "t_end" => scenario.integrator_cfg.t_end = parse_f64(key, value)?,
        "gamma" => scenario.integrator_cfg.gamma = Some(parse_f64(key, value)?),
        "control_enabled" => {
            scenario.params.control_enabled = value
                .parse::<bool>()
                .map_err(|_| anyhow!("override {key}={value:?}: expected true or false"))?
        }
        "seed" => {
            let seed = value
                .parse::<u64>()
                .map_err(|_| anyhow!("override {key}={value:?}: expected an unsigned integer"))?;
            set_seed(selection, seed)?;
        }
        other => bail!(
            "unknown override key {other:?}; accepted: alpha, beta, t_end, gamma, control_enabled, seed"
        ),
    }
    Ok(())
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| anyhow!("override {key}={value:?}: expected a number"))
}

/// Rechecks constructor invariants after overrides, and requires every
/// initial gap to clear its collision offset.
fn validate(scenario: &Scenario) -> Result<()> {
    let params = &scenario.params;
    ModelParams::new(params.alpha, params.beta, params.delta.clone(), params.z.clone())
        .map_err(|e| anyhow!("invalid parameters after overrides: {e}"))?;
    if scenario.initial.n_agents() != params.n_agents() {
        bail!(
            "initial data has {} agents but the parameters describe {}",
            scenario.initial.n_agents(),
            params.n_agents()
        );
    }
    let cfg = &scenario.integrator_cfg;
    if !cfg.t_end.is_finite() || cfg.t_end <= 0.0 {
        bail!("t_end must be positive and finite, got {}", cfg.t_end);
    }
    let slack = diagnostics(&scenario.initial, params).min_gap_slack;
    if slack <= 0.0 {
        bail!("initial data already violates a collision offset (min gap slack {slack})");
    }
    Ok(())
}

/// One line per built-in scenario: name, agent count, exponents, horizon.
pub fn describe_builtins() -> String {
    let mut out = String::new();
    for s in builtin_scenarios() {
        let _ = writeln!(
            out,
            "  {:32} n={:2}  alpha={:<4}  beta={:<5}  control={:5}  t_end={}",
            s.name,
            s.params.n_agents(),
            s.params.alpha,
            s.params.beta,
            s.params.control_enabled,
            s.integrator_cfg.t_end,
        );
    }
    out
}
