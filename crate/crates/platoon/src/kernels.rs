//! Interaction kernels and the control-kernel antiderivative.
//!
//! The alignment kernel `psi(r) = r^-alpha` is singular at zero gap slack and
//! is only defined for `r > 0`; callers must gate every evaluation on the gap
//! staying above the collision offset. The control kernel
//! `phi(r) = (1 + r)^-beta` is bounded and defined for `r >= 0`. Its
//! antiderivative `Phi(s) = integral of phi from 0 to s` appears in the
//! potential part of the energy, and its inverse recovers a squared spacing
//! error from an energy level.

use crate::model::ModelError;

/// Width of the band around `beta = 1` where the closed form of the
/// antiderivative switches to the logarithmic branch. Inside the band the two
/// branches differ by less than `5e-9 * ln(1+s)^2`, far below every tolerance
/// used here, and the switch keeps forward and inverse evaluations consistent.
pub const LOG_BRANCH_WIDTH: f64 = 1e-8;

/// Singular alignment kernel `r^-alpha`, defined for `r > 0`.
pub fn psi(r: f64, alpha: f64) -> Result<f64, ModelError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if !r.is_finite() || r <= 0.0 {
        return Err(ModelError::KernelDomain {
            kernel: "psi",
            value: r,
            requirement: "a strictly positive gap slack",
        });
    }
    Ok(r.powf(-alpha))
}

/// Bounded control kernel `(1 + r)^-beta`, defined for `r >= 0`.
pub fn phi(r: f64, beta: f64) -> Result<f64, ModelError> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(ModelError::KernelDomain {
            kernel: "phi",
            value: r,
            requirement: "a nonnegative argument",
        });
    }
    Ok((1.0 + r).powf(-beta))
}

/// Antiderivative `Phi(s)` of the control kernel on `[0, s]`.
///
/// Closed form `((1+s)^(1-beta) - 1) / (1-beta)`, evaluated through
/// `exp_m1`/`ln_1p` so no digits cancel, with the `ln(1+s)` branch taken for
/// `|beta - 1| < LOG_BRANCH_WIDTH`.
pub fn phi_primitive(s: f64, beta: f64) -> Result<f64, ModelError> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if !s.is_finite() || s < 0.0 {
        return Err(ModelError::KernelDomain {
            kernel: "phi_primitive",
            value: s,
            requirement: "a nonnegative argument",
        });
    }
    if (beta - 1.0).abs() < LOG_BRANCH_WIDTH {
        Ok(s.ln_1p())
    } else {
        let one_minus_beta = 1.0 - beta;
        Ok((one_minus_beta * s.ln_1p()).exp_m1() / one_minus_beta)
    }
}

/// Inverse of `phi_primitive` in its first argument.
///
/// For `beta > 1` the antiderivative is bounded above by `1/(beta-1)`;
/// values at or beyond that bound have no finite preimage and are rejected.
pub fn phi_primitive_inverse(y: f64, beta: f64) -> Result<f64, ModelError> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if !y.is_finite() || y < 0.0 {
        return Err(ModelError::KernelDomain {
            kernel: "phi_primitive_inverse",
            value: y,
            requirement: "a nonnegative argument",
        });
    }
    if (beta - 1.0).abs() < LOG_BRANCH_WIDTH {
        return Ok(y.exp_m1());
    }
    let one_minus_beta = 1.0 - beta;
    if beta > 1.0 {
        let sup = 1.0 / (beta - 1.0);
        if y >= sup {
            return Err(ModelError::KernelRange { beta, value: y, sup });
        }
    }
    Ok(((one_minus_beta * y).ln_1p() / one_minus_beta).exp_m1())
}
