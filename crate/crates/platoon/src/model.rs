//! Parameters, state, and shared report types for a string of agents on the line.
//!
//! A string of `n` agents carries scalar positions `x` and velocities `v`.
//! Consecutive agents `i` and `i+1` interact through a singular alignment
//! kernel gated on the gap `|x[i+1] - x[i]|` staying above the collision
//! offset `delta[i]`, and through a bounded formation force that drives the
//! signed spacing `x[i] - x[i+1]` toward the target `z[i]`.

use serde::{Deserialize, Serialize};

/// Errors shared across the model, kernel, and integration layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("kernel domain: {kernel}({value}) requires {requirement}")]
    KernelDomain {
        kernel: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error(
        "kernel range: phi_primitive with beta = {beta} is bounded above by {sup}, \
         so {value} has no finite preimage"
    )]
    KernelRange { beta: f64, value: f64, sup: f64 },
    /// A gap has closed to (or below) its collision offset. Indices are
    /// zero-based positions into the state vectors.
    #[error("agents {left} and {right} are in contact (gap slack {slack:e})")]
    Collision {
        left: usize,
        right: usize,
        slack: f64,
    },
    #[error("fit window holds {count} samples, need at least 3")]
    WindowTooSmall { count: usize },
    #[error("modified energy must stay positive for a log-linear fit; at t = {t} it is {value:e}")]
    NonpositiveEnergy { t: f64, value: f64 },
}

/// Static parameters of the interacting string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Exponent of the singular alignment kernel `r^-alpha`.
    pub alpha: f64,
    /// Exponent of the bounded control kernel `(1 + r)^-beta`.
    pub beta: f64,
    /// Collision offsets per consecutive pair; length `n - 1`, entries `>= 0`.
    pub delta: Vec<f64>,
    /// Target signed spacings `x[i] - x[i+1]`; length `n - 1`.
    pub z: Vec<f64>,
    /// When false the formation force is dropped and only alignment acts.
    #[serde(default = "default_control_enabled")]
    pub control_enabled: bool,
}

fn default_control_enabled() -> bool {
    true
}

impl ModelParams {
    /// Validates and builds the parameter set for `delta.len() + 1` agents.
    pub fn new(alpha: f64, beta: f64, delta: Vec<f64>, z: Vec<f64>) -> Result<Self, ModelError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if delta.is_empty() {
            return Err(ModelError::InvalidParams(
                "need at least one consecutive pair (two agents)".to_string(),
            ));
        }
        if delta.len() != z.len() {
            return Err(ModelError::InvalidParams(format!(
                "delta and z must have equal length, got {} and {}",
                delta.len(),
                z.len()
            )));
        }
        for (i, &d) in delta.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "delta[{i}] must be finite and >= 0, got {d}"
                )));
            }
        }
        for (i, &zi) in z.iter().enumerate() {
            if !zi.is_finite() {
                return Err(ModelError::InvalidParams(format!(
                    "z[{i}] must be finite, got {zi}"
                )));
            }
        }
        Ok(ModelParams {
            alpha,
            beta,
            delta,
            z,
            control_enabled: true,
        })
    }

    /// Uniform offsets and spacings for `n` agents.
    pub fn uniform(alpha: f64, beta: f64, n: usize, delta: f64, z: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::InvalidParams(format!(
                "need at least two agents, got {n}"
            )));
        }
        ModelParams::new(alpha, beta, vec![delta; n - 1], vec![z; n - 1])
    }

    /// Number of agents this parameter set describes.
    pub fn n_agents(&self) -> usize {
        self.delta.len() + 1
    }

    /// Largest collision offset, used to scale collision detection bands.
    pub fn max_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(0.0, f64::max)
    }
}

/// Positions and velocities of the string at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    /// Validates finiteness and matching lengths (at least two agents).
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>) -> Result<Self, ModelError> {
        if !t.is_finite() {
            return Err(ModelError::InvalidState(format!("t must be finite, got {t}")));
        }
        if x.len() != v.len() {
            return Err(ModelError::InvalidState(format!(
                "x and v must have equal length, got {} and {}",
                x.len(),
                v.len()
            )));
        }
        if x.len() < 2 {
            return Err(ModelError::InvalidState(format!(
                "need at least two agents, got {}",
                x.len()
            )));
        }
        if let Some(bad) = x.iter().chain(v.iter()).find(|c| !c.is_finite()) {
            return Err(ModelError::InvalidState(format!(
                "state components must be finite, got {bad}"
            )));
        }
        Ok(State { t, x, v })
    }

    pub fn n_agents(&self) -> usize {
        self.x.len()
    }
}

/// Energy split, dissipation rate, and mean velocity of a state.
///
/// `dissipation` is `None` when some gap has closed to its offset, where the
/// singular kernel is undefined. `e_gamma` is filled only when a modified
/// energy weight was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e1: f64,
    pub e2: f64,
    pub e_total: f64,
    pub dissipation: Option<f64>,
    pub v_mean: f64,
    pub e_gamma: Option<f64>,
}

/// Scalar diagnostics tracked along every trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Smallest `|x[i+1] - x[i]| - delta[i]` over consecutive pairs.
    pub min_gap_slack: f64,
    /// Largest `|x[i] - x[i+1] - z[i]|` over consecutive pairs.
    pub formation_error: f64,
    /// Spread `max v - min v`.
    pub velocity_diameter: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_reject_bad_exponents() {
        assert!(ModelParams::uniform(0.0, 1.0, 3, 1.0, 2.0).is_err());
        assert!(ModelParams::uniform(-1.0, 1.0, 3, 1.0, 2.0).is_err());
        assert!(ModelParams::uniform(1.0, 0.0, 3, 1.0, 2.0).is_err());
        assert!(ModelParams::uniform(f64::NAN, 1.0, 3, 1.0, 2.0).is_err());
    }

    #[test]
    fn params_reject_mismatched_lengths() {
        let err = ModelParams::new(1.0, 1.0, vec![1.0, 1.0], vec![2.0]).unwrap_err();
        assert!(matches!(err, ModelError::InvalidParams(_)));
    }

    #[test]
    fn params_allow_zero_offsets() {
        let p = ModelParams::uniform(2.2, 4.1, 10, 0.0, 0.5).unwrap();
        assert_eq!(p.n_agents(), 10);
        assert_eq!(p.max_delta(), 0.0);
    }

    #[test]
    fn params_reject_negative_offsets() {
        assert!(ModelParams::new(1.0, 1.0, vec![-0.1], vec![2.0]).is_err());
    }

    #[test]
    fn params_reject_single_agent() {
        assert!(ModelParams::uniform(1.0, 1.0, 1, 1.0, 2.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, vec![], vec![]).is_err());
    }

    #[test]
    fn state_validates_shape_and_finiteness() {
        assert!(State::new(0.0, vec![0.0, 1.0], vec![0.0, 0.0]).is_ok());
        assert!(State::new(0.0, vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(State::new(0.0, vec![0.0], vec![0.0]).is_err());
        assert!(State::new(0.0, vec![0.0, f64::INFINITY], vec![0.0, 0.0]).is_err());
        assert!(State::new(f64::NAN, vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
