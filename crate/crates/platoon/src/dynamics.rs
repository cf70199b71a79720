//! Right-hand side of the string dynamics, energies, and per-state diagnostics.
//!
//! Each agent obeys `dx/dt = v` and `dv/dt = I + u`, where `I` is the
//! nearest-neighbor alignment force through the singular kernel and `u` is the
//! decentralized formation force through the bounded kernel. Both forces are
//! assembled per consecutive pair with one kernel evaluation per edge, so the
//! contributions to the two endpoints cancel exactly and the velocity sum is
//! conserved to rounding.

use crate::kernels::phi_primitive;
use crate::model::{Diagnostics, EnergyReport, ModelError, ModelParams, State};

fn check_shapes(state: &State, params: &ModelParams) -> Result<(), ModelError> {
    if state.n_agents() != params.n_agents() {
        return Err(ModelError::InvalidState(format!(
            "state has {} agents but parameters describe {}",
            state.n_agents(),
            params.n_agents()
        )));
    }
    Ok(())
}

/// Time derivative `(dx, dv)` of a state.
///
/// Fails with the offending pair if any gap has closed to its collision
/// offset, where the alignment kernel is undefined.
pub fn rhs(state: &State, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    check_shapes(state, params)?;
    let n = state.n_agents();
    let mut dv = vec![0.0; n];
    rhs_into(&state.x, &state.v, params, &mut dv)?;
    Ok((state.v.clone(), dv))
}

/// Core force assembly over raw slices; `dv` must have length `n`.
///
/// Written against slices so the integrator can evaluate stage states without
/// building a `State` per call. One kernel evaluation per edge feeds both
/// endpoints with opposite signs.
pub(crate) fn rhs_into(
    x: &[f64],
    v: &[f64],
    params: &ModelParams,
    dv: &mut [f64],
) -> Result<(), ModelError> {
    let n = x.len();
    for a in dv.iter_mut() {
        *a = 0.0;
    }
    for i in 0..n - 1 {
        let slack = (x[i + 1] - x[i]).abs() - params.delta[i];
        if slack <= 0.0 {
            return Err(ModelError::Collision {
                left: i,
                right: i + 1,
                slack,
            });
        }
        let align = slack.powf(-params.alpha) * (v[i + 1] - v[i]);
        dv[i] += align;
        dv[i + 1] -= align;
        if params.control_enabled {
            let err = x[i] - x[i + 1] - params.z[i];
            let force = (1.0 + err * err).powf(-params.beta) * err;
            dv[i] -= force;
            dv[i + 1] += force;
        }
    }
    Ok(())
}

/// Kinetic spread, formation potential, dissipation rate, and mean velocity.
///
/// `e1` is the mean-square velocity spread `(1/4n) * sum_ij (v_i - v_j)^2`,
/// `e2` is half the summed antiderivative of the control kernel at the squared
/// spacing errors, and `e_total = e1 + e2`. With the control force disabled
/// `e2` is zero: the potential belongs to the control term, and only the
/// kinetic part is a Lyapunov function of the alignment-only dynamics. The
/// dissipation rate is reported as `None` when a gap has closed, since the
/// alignment kernel is undefined there; `e1` and `e2` are still returned.
pub fn energy(state: &State, params: &ModelParams) -> EnergyReport {
    debug_assert!(check_shapes(state, params).is_ok());
    let n = state.n_agents();
    let x = &state.x;
    let v = &state.v;

    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dvij = v[i] - v[j];
            spread += dvij * dvij;
        }
    }
    let e1 = spread / (4.0 * n as f64);

    let mut e2 = 0.0;
    if params.control_enabled {
        for i in 0..n - 1 {
            let err = x[i] - x[i + 1] - params.z[i];
            // err*err >= 0 and beta was validated, so the antiderivative is total here
            e2 += 0.5
                * phi_primitive(err * err, params.beta)
                    .expect("phi_primitive is defined on squared errors");
        }
    }

    let mut dissipation = Some(0.0);
    for i in 0..n - 1 {
        let slack = (x[i + 1] - x[i]).abs() - params.delta[i];
        if slack <= 0.0 {
            dissipation = None;
            break;
        }
        let dvi = v[i + 1] - v[i];
        if let Some(d) = dissipation.as_mut() {
            *d += slack.powf(-params.alpha) * dvi * dvi;
        }
    }

    let v_mean = v.iter().sum::<f64>() / n as f64;
    EnergyReport {
        e1,
        e2,
        e_total: e1 + e2,
        dissipation,
        v_mean,
        e_gamma: None,
    }
}

/// `energy` with the modified energy at weight `gamma` filled in.
pub fn energy_with_gamma(state: &State, params: &ModelParams, gamma: f64) -> EnergyReport {
    let mut report = energy(state, params);
    report.e_gamma = Some(gamma * report.e_total + cross_term(state, params));
    report
}

/// Modified energy `gamma * e_total + sum_i (x_i - x_{i+1} - z_i)(v_i - v_{i+1})`.
pub fn modified_energy(state: &State, params: &ModelParams, gamma: f64) -> f64 {
    let report = energy(state, params);
    gamma * report.e_total + cross_term(state, params)
}

fn cross_term(state: &State, params: &ModelParams) -> f64 {
    let x = &state.x;
    let v = &state.v;
    let mut cross = 0.0;
    for i in 0..state.n_agents() - 1 {
        cross += (x[i] - x[i + 1] - params.z[i]) * (v[i] - v[i + 1]);
    }
    cross
}

/// Gap slack minimum, worst spacing error, and velocity spread of a state.
pub fn diagnostics(state: &State, params: &ModelParams) -> Diagnostics {
    debug_assert!(check_shapes(state, params).is_ok());
    diagnostics_raw(&state.x, &state.v, params)
}

pub(crate) fn diagnostics_raw(x: &[f64], v: &[f64], params: &ModelParams) -> Diagnostics {
    let n = x.len();
    let mut min_gap_slack = f64::INFINITY;
    let mut formation_error = 0.0f64;
    for i in 0..n - 1 {
        let slack = (x[i + 1] - x[i]).abs() - params.delta[i];
        min_gap_slack = min_gap_slack.min(slack);
        formation_error = formation_error.max((x[i] - x[i + 1] - params.z[i]).abs());
    }
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for &vi in v {
        vmin = vmin.min(vi);
        vmax = vmax.max(vi);
    }
    Diagnostics {
        min_gap_slack,
        formation_error,
        velocity_diameter: vmax - vmin,
    }
}

/// Smallest gap slack of a flat `[x.., v..]` vector, with the tightest pair.
pub(crate) fn min_slack_flat(y: &[f64], params: &ModelParams) -> (f64, (usize, usize)) {
    let n = y.len() / 2;
    let x = &y[..n];
    let mut min_slack = f64::INFINITY;
    let mut pair = (0, 1);
    for i in 0..n - 1 {
        let slack = (x[i + 1] - x[i]).abs() - params.delta[i];
        if slack < min_slack {
            min_slack = slack;
            pair = (i, i + 1);
        }
    }
    (min_slack, pair)
}
