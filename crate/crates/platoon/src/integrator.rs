//! Adaptive embedded Runge-Kutta integration with collision guarding.
//!
//! The stepper is the Dormand-Prince 5(4) pair with PI step-size control and
//! first-same-as-last stage reuse. The singular alignment kernel makes the
//! right-hand side undefined at closed gaps, so steps are guarded twice:
//!
//! * any stage evaluation that touches a gap slack `<= 0` rejects the step
//!   outright and retries at half the size, down to `h_min`, so accepted
//!   states always keep every gap strictly open;
//! * a collision is declared when the minimum gap slack of an accepted step
//!   crosses `collision_slack`, and the crossing time is bracketed by
//!   bisection on the cubic Hermite interpolant of that step.
//!
//! Dense output between accepted steps uses the same cubic Hermite form, so
//! trace samples land on a uniform grid regardless of the step sequence.
//! `integrate_oracle` is a fixed-step classical Runge-Kutta integrator over
//! the identical right-hand side, kept deliberately plain so it can serve as
//! an independent cross-check of the adaptive machinery.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, min_slack_flat, rhs_into};
use crate::model::{Diagnostics, EnergyReport, ModelError, ModelParams, State};

/// Step-size and sampling policy for one integration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Relative tolerance of the embedded error estimate.
    pub rel_tol: f64,
    /// Absolute tolerance of the embedded error estimate.
    pub abs_tol: f64,
    /// First attempted step size.
    pub h_init: f64,
    /// Floor under the step size; controller demands below it end the run.
    pub h_min: f64,
    /// Cap on the step size.
    pub h_max: f64,
    /// Absolute end time of the run.
    pub t_end: f64,
    /// Spacing of the uniform sample grid recorded in the trace.
    pub sample_dt: f64,
    /// Gap-slack level that counts as a collision.
    pub collision_slack: f64,
    /// Weight for the modified energy recorded with each sample, if any.
    pub gamma: Option<f64>,
}

impl IntegratorConfig {
    /// Defaults tuned for the bundled scenarios: tolerances `1e-9`/`1e-12`
    /// and a collision band of `1e-9 * (1 + max delta)`.
    pub fn new(t_end: f64, params: &ModelParams) -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-13,
            h_max: 1.0,
            t_end,
            sample_dt: t_end / 500.0,
            collision_slack: 1e-9 * (1.0 + params.max_delta()),
            gamma: None,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("h_init", self.h_init),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("t_end", self.t_end),
            ("sample_dt", self.sample_dt),
            ("collision_slack", self.collision_slack),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "integrator config: {name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(ModelError::InvalidParams(format!(
                "integrator config: need h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() {
                return Err(ModelError::InvalidParams(format!(
                    "integrator config: gamma must be finite, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub state: State,
    pub energy: EnergyReport,
    pub diag: Diagnostics,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// The horizon was reached with every gap open.
    ReachedTEnd,
    /// A gap slack crossed the collision band; the crossing time lies in
    /// `[t_lo, t_hi]`. Indices are zero-based agent positions.
    Collision {
        left: usize,
        right: usize,
        t_lo: f64,
        t_hi: f64,
    },
    /// The controller demanded a step below `h_min` away from any collision.
    StepUnderflow { t: f64 },
}

/// Work counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub rhs_evals: u64,
}

/// Sampled trajectory with its termination cause and work counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl Trace {
    pub fn first(&self) -> &TraceSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TraceSample {
        self.samples.last().expect("a trace always holds its initial sample")
    }

    /// Midpoint of the collision bracket, if the run ended in one.
    pub fn collision_time(&self) -> Option<f64> {
        match self.termination {
            Termination::Collision { t_lo, t_hi, .. } => Some(0.5 * (t_lo + t_hi)),
            _ => None,
        }
    }
}

// Dormand-Prince 5(4) tableau. The dynamics are autonomous, so the stage
// times never enter and only the coupling coefficients appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// Fifth-order weights; the seventh stage sits at the step end (FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller, exponents matched to the order-4 error estimate.
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;

enum StepOutcome {
    /// Step computed; `err` is the scaled error norm (accept at `<= 1`).
    Evaluated { err: f64 },
    /// A stage evaluation touched a closed gap.
    StageCollision { left: usize, right: usize },
}

struct Stepper<'a> {
    params: &'a ModelParams,
    dim: usize,
    k: [Vec<f64>; 7],
    w: Vec<f64>,
    y_new: Vec<f64>,
    rhs_evals: u64,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, dim: usize) -> Self {
        Stepper {
            params,
            dim,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            w: vec![0.0; dim],
            y_new: vec![0.0; dim],
            rhs_evals: 0,
        }
    }

    fn eval(&mut self, y: &[f64], slot: usize) -> Result<(), ModelError> {
        let n = self.dim / 2;
        let k = &mut self.k[slot];
        k[..n].copy_from_slice(&y[n..]);
        rhs_into(&y[..n], &y[n..], self.params, &mut k[n..])?;
        self.rhs_evals += 1;
        Ok(())
    }

    /// One trial step from `y` with derivative `k[0]` already holding `f(y)`.
    ///
    /// On `Evaluated`, `y_new` holds the fifth-order solution and `k[6]` its
    /// derivative, ready for first-same-as-last reuse.
    fn attempt(&mut self, y: &[f64], h: f64, rel_tol: f64, abs_tol: f64) -> StepOutcome {
        macro_rules! stage {
            ($slot:expr, $($coef:expr => $src:expr),+) => {{
                for i in 0..self.dim {
                    self.w[i] = y[i] + h * ($($coef * self.k[$src][i] +)+ 0.0);
                }
                let w = std::mem::take(&mut self.w);
                let r = self.eval(&w, $slot);
                self.w = w;
                if let Err(ModelError::Collision { left, right, .. }) = r {
                    return StepOutcome::StageCollision { left, right };
                }
            }};
        }

        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);

        for i in 0..self.dim {
            self.y_new[i] = y[i]
                + h * (B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i]);
        }
        // FSAL stage at the step end also gates the end state's gaps
        let y_new = std::mem::take(&mut self.y_new);
        let r = self.eval(&y_new, 6);
        self.y_new = y_new;
        if let Err(ModelError::Collision { left, right, .. }) = r {
            return StepOutcome::StageCollision { left, right };
        }

        let mut acc = 0.0;
        for i in 0..self.dim {
            let est = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let scale = abs_tol + rel_tol * y[i].abs().max(self.y_new[i].abs());
            let r = est / scale;
            acc += r * r;
        }
        let mut err = (acc / self.dim as f64).sqrt();
        if err.is_nan() {
            err = f64::INFINITY;
        }
        StepOutcome::Evaluated { err }
    }
}

/// Cubic Hermite value at fraction `theta` of a step of width `h`.
fn hermite(
    theta: f64,
    h: f64,
    y0: &[f64],
    f0: &[f64],
    y1: &[f64],
    f1: &[f64],
    out: &mut [f64],
) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

struct TraceBuilder<'a> {
    params: &'a ModelParams,
    gamma: Option<f64>,
    samples: Vec<TraceSample>,
}

impl<'a> TraceBuilder<'a> {
    fn push(&mut self, t: f64, y: &[f64]) {
        let n = y.len() / 2;
        let state = State {
            t,
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        };
        let energy = match self.gamma {
            Some(g) => dynamics::energy_with_gamma(&state, self.params, g),
            None => dynamics::energy(&state, self.params),
        };
        let diag = dynamics::diagnostics(&state, self.params);
        self.samples.push(TraceSample { state, energy, diag });
    }

    fn last_t(&self) -> f64 {
        self.samples.last().map(|s| s.state.t).unwrap_or(f64::NEG_INFINITY)
    }
}

fn flat_state(state: &State) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * state.n_agents());
    y.extend_from_slice(&state.x);
    y.extend_from_slice(&state.v);
    y
}

fn check_run_preconditions(
    initial: &State,
    params: &ModelParams,
    collision_slack: f64,
) -> Result<(), ModelError> {
    if initial.n_agents() != params.n_agents() {
        return Err(ModelError::InvalidState(format!(
            "state has {} agents but parameters describe {}",
            initial.n_agents(),
            params.n_agents()
        )));
    }
    let mut min_slack = f64::INFINITY;
    for i in 0..initial.n_agents() - 1 {
        let slack = (initial.x[i + 1] - initial.x[i]).abs() - params.delta[i];
        min_slack = min_slack.min(slack);
        if slack <= collision_slack {
            return Err(ModelError::InvalidState(format!(
                "initial gap between agents {i} and {} has slack {slack:e}, \
                 inside the collision band {collision_slack:e}",
                i + 1
            )));
        }
    }
    if collision_slack > 0.5 * min_slack {
        return Err(ModelError::InvalidParams(format!(
            "collision_slack {collision_slack:e} exceeds half the smallest \
             initial slack {min_slack:e}"
        )));
    }
    Ok(())
}

/// Integrates the string dynamics from `initial` to `cfg.t_end`.
///
/// The trace is sampled on the uniform `sample_dt` grid (first sample at the
/// initial time) through the dense output of accepted steps. The run ends at
/// the horizon, at a collision (with the crossing time bracketed), or with a
/// step underflow if the controller demands a step below `h_min` while every
/// gap is still comfortably open.
pub fn integrate(
    initial: &State,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trace, ModelError> {
    cfg.validate()?;
    check_run_preconditions(initial, params, cfg.collision_slack)?;
    let t0 = initial.t;
    if cfg.t_end <= t0 {
        return Err(ModelError::InvalidParams(format!(
            "t_end = {} does not lie after of the initial time {}",
            cfg.t_end, t0
        )));
    }

    let dim = 2 * initial.n_agents();
    let mut stepper = Stepper::new(params, dim);
    let mut builder = TraceBuilder {
        params,
        gamma: cfg.gamma,
        samples: Vec::new(),
    };
    let mut stats = StepStats::default();

    let mut y = flat_state(initial);
    let mut t = t0;
    // The initial state passed the precondition check, so this cannot collide.
    let y0 = std::mem::take(&mut y);
    stepper.eval(&y0, 0)?;
    y = y0;
    builder.push(t, &y);

    let mut next_sample = t0 + cfg.sample_dt;
    let mut h = cfg.h_init.clamp(cfg.h_min, cfg.h_max);
    let mut err_prev: f64 = 1e-4;
    let mut rejected_since_accept = false;
    // Interpolation workspace reused across steps.
    let mut w = vec![0.0; dim];

    let time_eps = 1e-9 * cfg.sample_dt;
    let bracket_width = (1e-10 * (cfg.t_end - t0)).max(4.0 * f64::EPSILON * cfg.t_end.abs());

    loop {
        if t >= cfg.t_end - time_eps {
            if builder.last_t() < cfg.t_end - time_eps {
                builder.push(cfg.t_end, &y);
            }
            stats.rhs_evals = stepper.rhs_evals;
            return Ok(Trace {
                samples: builder.samples,
                termination: Termination::ReachedTEnd,
                stats,
            });
        }
        let h_step = h.min(cfg.t_end - t);

        match stepper.attempt(&y, h_step, cfg.rel_tol, cfg.abs_tol) {
            StepOutcome::StageCollision { left, right } => {
                stats.rejected_steps += 1;
                let h_next = 0.5 * h_step;
                if h_next < cfg.h_min {
                    // Adjacent to the singular set: the state cannot advance
                    // even by h_min without closing a gap.
                    if builder.last_t() < t - time_eps {
                        builder.push(t, &y);
                    }
                    stats.rhs_evals = stepper.rhs_evals;
                    return Ok(Trace {
                        samples: builder.samples,
                        termination: Termination::Collision {
                            left,
                            right,
                            t_lo: t,
                            t_hi: t + h_step,
                        },
                        stats,
                    });
                }
                h = h_next;
                rejected_since_accept = true;
                continue;
            }
            StepOutcome::Evaluated { err } => {
                if err > 1.0 {
                    stats.rejected_steps += 1;
                    let factor = (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
                    let h_next = h_step * factor;
                    if h_next < cfg.h_min {
                        let (slack, pair) = min_slack_flat(&y, params);
                        stats.rhs_evals = stepper.rhs_evals;
                        let termination = if slack <= 2.0 * cfg.collision_slack {
                            if builder.last_t() < t - time_eps {
                                builder.push(t, &y);
                            }
                            Termination::Collision {
                                left: pair.0,
                                right: pair.1,
                                t_lo: t,
                                t_hi: t + cfg.h_min,
                            }
                        } else {
                            Termination::StepUnderflow { t }
                        };
                        return Ok(Trace {
                            samples: builder.samples,
                            termination,
                            stats,
                        });
                    }
                    h = h_next;
                    rejected_since_accept = true;
                    continue;
                }

                // Accepted. Scan the sample grid inside the step and the step
                // end for a collision-band crossing before committing.
                stats.accepted_steps += 1;
                let t_new = t + h_step;
                let mut crossing: Option<(f64, f64)> = None;
                let mut theta_ok = 0.0;

                'scan: {
                    while next_sample <= t_new + time_eps {
                        let g = next_sample;
                        let theta = ((g - t) / h_step).clamp(0.0, 1.0);
                        let at_end = g >= t_new - time_eps;
                        let point: &[f64] = if at_end {
                            &stepper.y_new
                        } else {
                            hermite(
                                theta,
                                h_step,
                                &y,
                                &stepper.k[0],
                                &stepper.y_new,
                                &stepper.k[6],
                                &mut w,
                            );
                            &w
                        };
                        let (slack, _) = min_slack_flat(point, params);
                        if slack <= cfg.collision_slack {
                            crossing = Some((theta_ok, theta));
                            break 'scan;
                        }
                        builder.push(g, point);
                        theta_ok = theta;
                        next_sample += cfg.sample_dt;
                    }
                    let (slack_end, _) = min_slack_flat(&stepper.y_new, params);
                    if slack_end <= cfg.collision_slack {
                        crossing = Some((theta_ok, 1.0));
                    }
                }

                if let Some((mut lo, mut hi)) = crossing {
                    // The slack is above the band at `lo` and inside it at
                    // `hi`; bisect the interpolant down to the bracket width.
                    while h_step * (hi - lo) > bracket_width {
                        let mid = 0.5 * (lo + hi);
                        hermite(
                            mid,
                            h_step,
                            &y,
                            &stepper.k[0],
                            &stepper.y_new,
                            &stepper.k[6],
                            &mut w,
                        );
                        let (slack, _) = min_slack_flat(&w, params);
                        if slack <= cfg.collision_slack {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hermite(
                        hi,
                        h_step,
                        &y,
                        &stepper.k[0],
                        &stepper.y_new,
                        &stepper.k[6],
                        &mut w,
                    );
                    let (_, pair) = min_slack_flat(&w, params);
                    let t_c = t + hi * h_step;
                    if t_c > builder.last_t() + time_eps {
                        builder.push(t_c, &w);
                    }
                    stats.rhs_evals = stepper.rhs_evals;
                    return Ok(Trace {
                        samples: builder.samples,
                        termination: Termination::Collision {
                            left: pair.0,
                            right: pair.1,
                            t_lo: t + lo * h_step,
                            t_hi: t_c,
                        },
                        stats,
                    });
                }

                // Commit the step: FSAL hands the end derivative to slot 0.
                t = t_new;
                std::mem::swap(&mut y, &mut stepper.y_new);
                stepper.k.swap(0, 6);

                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA))
                        .clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if rejected_since_accept {
                    factor = factor.min(1.0);
                }
                h = (h_step * factor).min(cfg.h_max);
                err_prev = err.max(1e-4);
                rejected_since_accept = false;
            }
        }
    }
}

/// Fixed-step classical Runge-Kutta integration of the same dynamics.
///
/// Kept independent of the adaptive machinery: uniform steps of width `h`,
/// no error control, no interpolation. The run halts with a collision
/// bracketed to one step as soon as a stage or an end state closes a gap.
/// Samples land roughly every thousandth of the horizon.
pub fn integrate_oracle(
    initial: &State,
    params: &ModelParams,
    h: f64,
    t_end: f64,
) -> Result<Trace, ModelError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "oracle step size must be positive and finite, got {h}"
        )));
    }
    check_run_preconditions(initial, params, 0.0)?;
    let t0 = initial.t;
    if t_end <= t0 {
        return Err(ModelError::InvalidParams(format!(
            "t_end = {t_end} does not lie after the initial time {t0}"
        )));
    }

    let dim = 2 * initial.n_agents();
    let n = initial.n_agents();
    let mut builder = TraceBuilder {
        params,
        gamma: None,
        samples: Vec::new(),
    };
    let mut stats = StepStats::default();

    let mut y = flat_state(initial);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    let total_steps = ((t_end - t0) / h).ceil() as u64;
    let stride = (total_steps / 1000).max(1);

    builder.push(t0, &y);

    let eval = |y: &[f64], out: &mut [f64], evals: &mut u64| -> Result<(), ModelError> {
        out[..n].copy_from_slice(&y[n..]);
        rhs_into(&y[..n], &y[n..], params, &mut out[n..])?;
        *evals += 1;
        Ok(())
    };

    let mut step_index: u64 = 0;
    loop {
        let t = t0 + step_index as f64 * h;
        if t >= t_end - 1e-12 * h {
            if builder.last_t() < t_end - 1e-9 * h {
                builder.push(t_end, &y);
            }
            return Ok(Trace {
                samples: builder.samples,
                termination: Termination::ReachedTEnd,
                stats,
            });
        }
        let h_step = h.min(t_end - t);

        let attempt = (|| -> Result<(), ModelError> {
            eval(&y, &mut k1, &mut stats.rhs_evals)?;
            for i in 0..dim {
                w[i] = y[i] + 0.5 * h_step * k1[i];
            }
            eval(&w, &mut k2, &mut stats.rhs_evals)?;
            for i in 0..dim {
                w[i] = y[i] + 0.5 * h_step * k2[i];
            }
            eval(&w, &mut k3, &mut stats.rhs_evals)?;
            for i in 0..dim {
                w[i] = y[i] + h_step * k3[i];
            }
            eval(&w, &mut k4, &mut stats.rhs_evals)?;
            for i in 0..dim {
                y_new[i] = y[i] + h_step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            Ok(())
        })();

        let collided_pair = match attempt {
            Err(ModelError::Collision { left, right, .. }) => Some((left, right)),
            Err(other) => return Err(other),
            Ok(()) => {
                let (slack, pair) = min_slack_flat(&y_new, params);
                if slack <= 0.0 {
                    Some(pair)
                } else {
                    None
                }
            }
        };

        if let Some((left, right)) = collided_pair {
            if builder.last_t() < t - 1e-9 * h {
                builder.push(t, &y);
            }
            return Ok(Trace {
                samples: builder.samples,
                termination: Termination::Collision {
                    left,
                    right,
                    t_lo: t,
                    t_hi: t + h_step,
                },
                stats,
            });
        }

        std::mem::swap(&mut y, &mut y_new);
        stats.accepted_steps += 1;
        step_index += 1;
        if step_index % stride == 0 {
            // t + h_step, not step_index * h: the final step may be clamped
            builder.push(t + h_step, &y);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn formation_pair() -> (State, ModelParams) {
        let params = ModelParams::new(2.1, 0.8, vec![2.0], vec![4.0]).unwrap();
        let state = State::new(0.0, vec![4.0, 0.0], vec![0.0, 0.0]).unwrap();
        (state, params)
    }

    fn moving_five() -> (State, ModelParams) {
        let params = ModelParams::uniform(2.1, 0.8, 5, 2.0, 4.0).unwrap();
        let state = State::new(
            0.0,
            vec![10.4, 7.9, 5.3, 2.6, 0.0],
            vec![0.2, -0.1, 0.15, -0.2, -0.05],
        )
        .unwrap();
        (state, params)
    }

    #[test]
    fn equilibrium_trace_is_constant() {
        let (state, params) = formation_pair();
        let mut cfg = IntegratorConfig::new(50.0, &params);
        cfg.sample_dt = 0.1;
        let trace = integrate(&state, &params, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::ReachedTEnd);
        assert_eq!(trace.first().state.t, 0.0, "first sample must sit at t = 0");
        let drift = trace
            .samples
            .iter()
            .map(|s| {
                (s.state.x[0] - 4.0)
                    .abs()
                    .max((s.state.x[1]).abs())
                    .max(s.state.v[0].abs())
                    .max(s.state.v[1].abs())
            })
            .fold(0.0f64, f64::max);
        assert!(drift < 1e-12, "equilibrium drifted by {drift:e}");
    }

    #[test]
    fn sample_grid_is_uniform_and_strictly_increasing() {
        let (state, params) = moving_five();
        let mut cfg = IntegratorConfig::new(2.0, &params);
        cfg.sample_dt = 0.05;
        let trace = integrate(&state, &params, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::ReachedTEnd);
        assert_eq!(trace.samples.len(), 41, "expected 40 grid intervals plus t = 0");
        for (k, s) in trace.samples.iter().enumerate() {
            assert!(
                (s.state.t - 0.05 * k as f64).abs() < 1e-9,
                "sample {k} sits at t = {}",
                s.state.t
            );
        }
        for pair in trace.samples.windows(2) {
            assert!(pair[1].state.t > pair[0].state.t);
        }
    }

    #[test]
    fn adaptive_matches_the_fixed_step_oracle() {
        let (state, params) = moving_five();
        let mut cfg = IntegratorConfig::new(2.0, &params);
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-13;
        let adaptive = integrate(&state, &params, &cfg).unwrap();
        let oracle = integrate_oracle(&state, &params, 1e-4, 2.0).unwrap();
        let a = &adaptive.last().state;
        let b = &oracle.last().state;
        for i in 0..a.x.len() {
            assert!(
                (a.x[i] - b.x[i]).abs() < 1e-8,
                "x[{i}] differs: {} vs {}",
                a.x[i],
                b.x[i]
            );
            assert!((a.v[i] - b.v[i]).abs() < 1e-8, "v[{i}] differs");
        }
    }

    /// Two agents closing fast enough that the pair provably collides before
    /// `slack0^alpha (1-alpha) / (2 alpha)`; the spacing target `-delta`
    /// keeps the control force from opposing the approach.
    fn closing_pair(alpha: f64, slack0: f64, delta: f64) -> (State, ModelParams) {
        let params = ModelParams::new(alpha, 1.0, vec![delta], vec![-delta]).unwrap();
        let d = 2.0 / (1.0 - alpha) * slack0.powf(1.0 - alpha);
        let state =
            State::new(0.0, vec![0.0, delta + slack0], vec![d / 2.0, -d / 2.0]).unwrap();
        (state, params)
    }

    #[test]
    fn head_on_pair_terminates_in_a_tight_collision_bracket() {
        let (state, params) = closing_pair(0.5, 1.0, 1.0);
        let mut cfg = IntegratorConfig::new(0.7, &params);
        cfg.sample_dt = 0.005;
        let trace = integrate(&state, &params, &cfg).unwrap();
        match trace.termination {
            Termination::Collision { left, right, t_lo, t_hi } => {
                assert_eq!((left, right), (0, 1));
                assert!(t_hi - t_lo <= 1e-10 * 0.7 + 1e-15, "bracket width {:e}", t_hi - t_lo);
                assert!(t_hi < 0.5 * (1.0 + 1e-6), "collision after the analytic bound: {t_hi}");
                let last = trace.last();
                assert!(
                    last.diag.min_gap_slack <= 2.0 * cfg.collision_slack,
                    "final sample slack {:e} is outside the collision band",
                    last.diag.min_gap_slack
                );
            }
            other => panic!("expected a collision, got {other:?}"),
        }
    }

    #[test]
    fn oracle_brackets_the_same_collision() {
        let (state, params) = closing_pair(0.5, 1.0, 1.0);
        let mut cfg = IntegratorConfig::new(0.7, &params);
        cfg.sample_dt = 0.005;
        let adaptive = integrate(&state, &params, &cfg).unwrap();
        let oracle = integrate_oracle(&state, &params, 1e-5, 0.7).unwrap();
        let ta = adaptive.collision_time().expect("adaptive run must collide");
        let tb = oracle.collision_time().expect("oracle run must collide");
        assert!(
            (ta - tb).abs() < 1e-4,
            "collision times diverge: adaptive {ta} vs oracle {tb}"
        );
    }

    #[test]
    fn initial_contact_is_a_precondition_error() {
        let params = ModelParams::new(2.0, 1.0, vec![2.0], vec![4.0]).unwrap();
        let state = State::new(0.0, vec![0.0, 1.5], vec![0.0, 0.0]).unwrap();
        let cfg = IntegratorConfig::new(1.0, &params);
        assert!(matches!(
            integrate(&state, &params, &cfg),
            Err(ModelError::InvalidState(_))
        ));
        assert!(integrate_oracle(&state, &params, 1e-3, 1.0).is_err());
    }

    #[test]
    fn config_validation_rejects_inconsistent_steps() {
        let (state, params) = formation_pair();
        let mut cfg = IntegratorConfig::new(1.0, &params);
        cfg.h_min = 1.0;
        cfg.h_init = 1e-3;
        assert!(matches!(
            integrate(&state, &params, &cfg),
            Err(ModelError::InvalidParams(_))
        ));
        let mut cfg = IntegratorConfig::new(1.0, &params);
        cfg.rel_tol = 0.0;
        assert!(integrate(&state, &params, &cfg).is_err());
        let mut cfg = IntegratorConfig::new(1.0, &params);
        cfg.t_end = -1.0;
        assert!(integrate(&state, &params, &cfg).is_err());
    }

    #[test]
    fn oversized_collision_band_is_rejected() {
        let (state, params) = formation_pair();
        let mut cfg = IntegratorConfig::new(1.0, &params);
        cfg.collision_slack = 1.5; // initial slack is 2
        assert!(matches!(
            integrate(&state, &params, &cfg),
            Err(ModelError::InvalidParams(_))
        ));
    }

    #[test]
    fn controller_underflow_away_from_contact_reports_failure() {
        // wide gaps keep every trial stage clear of contact, so the failure
        // can only come from the error controller
        let params = ModelParams::uniform(2.1, 0.8, 5, 2.0, 4.0).unwrap();
        let state = State::new(
            0.0,
            vec![16.4, 12.2, 8.1, 4.05, 0.0],
            vec![0.05, -0.04, 0.03, -0.02, 0.01],
        )
        .unwrap();
        let mut cfg = IntegratorConfig::new(1.0, &params);
        // an immovable step floor with an unreachable tolerance forces the
        // controller to give up on the very first step
        cfg.h_min = 0.5;
        cfg.h_init = 0.5;
        cfg.h_max = 0.5;
        cfg.rel_tol = 1e-14;
        cfg.abs_tol = 1e-16;
        let trace = integrate(&state, &params, &cfg).unwrap();
        match trace.termination {
            Termination::StepUnderflow { t } => assert_eq!(t, 0.0),
            other => panic!("expected a step underflow, got {other:?}"),
        }
        assert_eq!(trace.samples.len(), 1, "only the initial sample is recorded");
    }

    #[test]
    fn oracle_keeps_a_partial_final_step() {
        let (state, params) = formation_pair();
        let trace = integrate_oracle(&state, &params, 0.3, 1.0).unwrap();
        assert_eq!(trace.termination, Termination::ReachedTEnd);
        let last = trace.last();
        assert!((last.state.t - 1.0).abs() < 1e-12, "t = {}", last.state.t);
    }
}
