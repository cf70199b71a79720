//! The five subcommands: run, check, sweep, blowup, reproduce.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Args, ValueEnum};
use platoon::{
    blow_up_certificate, builtin_scenarios, check_existence_regime, check_flocking_condition,
    check_formation_constraint, evaluate_scenario, evaluate_with_trace, fit_exponential_rate,
    integrate, integrate_oracle, last_half_window, ConditionReport, Scenario, ScenarioReport,
    Termination, BOUND_SLACK_REL,
};
use rayon::prelude::*;

use crate::config;
use crate::output::{
    certificates_text, decimal, outcome_line, termination_label, write_certificates_json,
    write_plot_data, write_summary_csv, write_text, write_trace_csv, write_trace_json,
};

/// Output families a command may emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// trace.csv, plot-data files, and plain-text certificates.
    Csv,
    /// JSON mirrors with explicit field names.
    StructuredJson,
}

/// Scenario selection and output placement, shared by run and check.
#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Built-in scenario name.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario config file (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Output formats (comma-separated subset of csv, structured-json).
    #[arg(long, value_delimiter = ',', default_value = "csv,structured-json")]
    pub formats: Vec<Format>,
    /// Parameter override k=v, repeatable: alpha, beta, t_end, gamma,
    /// control_enabled, seed.
    #[arg(long = "override", value_name = "K=V")]
    pub overrides: Vec<String>,
    /// Seed for configs whose initial data uses a jitter builder.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SelectArgs {
    fn scenario(&self) -> Result<Scenario> {
        config::select(
            self.scenario.as_deref(),
            self.config.as_deref(),
            &self.overrides,
            self.seed,
        )
    }

    fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub select: SelectArgs,
    /// Parameter to sweep: alpha, beta, gamma, or v-scale.
    #[arg(long)]
    pub param: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BlowupArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Output formats (comma-separated subset of csv, structured-json).
    #[arg(long, value_delimiter = ',', default_value = "csv,structured-json")]
    pub formats: Vec<Format>,
    /// Fixed oracle step size; when set, collision times are cross-checked
    /// against a fixed-step run.
    #[arg(long)]
    pub oracle_h: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Output formats (comma-separated subset of csv, structured-json).
    #[arg(long, value_delimiter = ',', default_value = "csv,structured-json")]
    pub formats: Vec<Format>,
    /// Deliberately flip one expectation; a negative control for the
    /// reproduction harness itself.
    #[arg(long, hide = true)]
    pub inject_mismatch: bool,
}

/// Integrates one scenario and writes its trace, certificates, and plot data.
///
/// Exit 0 on a completed horizon, 2 when the run ends at a collision
/// (informative, not a failure), 1 when the integrator gives up.
pub fn cmd_run(args: &SelectArgs) -> Result<u8> {
    let scenario = args.scenario()?;
    fs::create_dir_all(&args.out)?;
    let trace = integrate(&scenario.initial, &scenario.params, &scenario.integrator_cfg)
        .map_err(|e| anyhow!("integration failed: {e}"))?;
    let report = evaluate_with_trace(&scenario, trace);
    let trace = &report.trace;

    if args.wants(Format::Csv) {
        write_trace_csv(&args.out.join("trace.csv"), trace)?;
        write_plot_data(&args.out, trace)?;
        write_text(
            &args.out.join("certificates.txt"),
            &certificates_text(&report.scenario, &report.reports, &report.outcomes),
        )?;
    }
    if args.wants(Format::StructuredJson) {
        write_trace_json(&args.out.join("trace.json"), &report.scenario, trace)?;
        write_certificates_json(
            &args.out.join("certificates.json"),
            &report.scenario,
            &report.reports,
            &report.outcomes,
        )?;
    }

    let last = trace.last();
    println!(
        "scenario {}: {} at t={:.6}",
        report.scenario,
        termination_label(&trace.termination),
        last.state.t,
    );
    println!(
        "final: formation_error={:.6e} velocity_diameter={:.6e} min_gap_slack={:.6e} e_total={:.6e}",
        last.diag.formation_error,
        last.diag.velocity_diameter,
        last.diag.min_gap_slack,
        last.energy.e_total,
    );
    for outcome in &report.outcomes {
        println!("{}", outcome_line(outcome));
    }

    match trace.termination {
        Termination::ReachedTEnd => Ok(0),
        Termination::Collision { left, right, t_lo, t_hi } => {
            println!(
                "collision: agents {} and {} close their gap inside [{:.9}, {:.9}]",
                left + 1,
                right + 1,
                t_lo,
                t_hi,
            );
            Ok(2)
        }
        Termination::StepUnderflow { t } => {
            eprintln!("integrator failure: step size underflow at t={t:.9}");
            Ok(1)
        }
    }
}

/// Certificates that need no trace: existence regime, the flocking
/// admission condition, spacing-offset margins, and for two agents the
/// finite-time collision construction.
fn initial_certificates(scenario: &Scenario) -> Vec<(String, ConditionReport)> {
    let mut labeled = Vec::new();
    labeled.push((
        "existence".to_owned(),
        check_existence_regime(&scenario.initial, &scenario.params),
    ));
    let flocking = check_flocking_condition(&scenario.initial, &scenario.params);
    let rho = flocking.constant("rho");
    labeled.push(("flocking".to_owned(), flocking));
    if let Some(rho) = rho {
        labeled.push((
            "formation-constraint".to_owned(),
            check_formation_constraint(&scenario.params, rho),
        ));
    }
    if scenario.params.n_agents() == 2 {
        if let Ok(report) = blow_up_certificate(&scenario.initial, &scenario.params) {
            labeled.push(("blow-up".to_owned(), report));
        }
    }
    labeled
}

/// Prints and writes the initial-data certificates without integrating.
pub fn cmd_check(args: &SelectArgs) -> Result<u8> {
    let scenario = args.scenario()?;
    let labeled = initial_certificates(&scenario);
    let text = certificates_text(&scenario.name, &labeled, &[]);
    print!("{text}");
    fs::create_dir_all(&args.out)?;
    if args.wants(Format::Csv) {
        write_text(&args.out.join("certificates.txt"), &text)?;
    }
    if args.wants(Format::StructuredJson) {
        write_certificates_json(&args.out.join("certificates.json"), &scenario.name, &labeled, &[])?;
    }
    Ok(0)
}

/// One row of a sweep summary.
struct SweepRow {
    value: f64,
    threshold: f64,
    flocking: bool,
    termination: String,
    final_formation_error: f64,
    final_velocity_diameter: f64,
    min_gap_slack: f64,
    fitted_rate: f64,
    r_squared: f64,
}

fn sweep_variant(base: &Scenario, param: &str, value: f64) -> Result<Scenario> {
    let mut scenario = base.clone();
    scenario.name = format!("{}[{param}={value}]", base.name);
    match param {
        "alpha" => scenario.params.alpha = value,
        "beta" => scenario.params.beta = value,
        "gamma" => scenario.integrator_cfg.gamma = Some(value),
        "v-scale" => {
            let n = scenario.initial.n_agents() as f64;
            let mean = scenario.initial.v.iter().sum::<f64>() / n;
            for v in &mut scenario.initial.v {
                *v = mean + value * (*v - mean);
            }
        }
        other => bail!("unknown sweep parameter {other:?}; accepted: alpha, beta, gamma, v-scale"),
    }
    if matches!(param, "alpha" | "beta") && !(value.is_finite() && value > 0.0) {
        bail!("{param} must be positive and finite, got {value}");
    }
    Ok(scenario)
}

fn sweep_run(scenario: &Scenario) -> Result<SweepRow> {
    let flocking = check_flocking_condition(&scenario.initial, &scenario.params);
    let threshold = flocking.constant("threshold").unwrap_or(f64::INFINITY);
    let verdict = flocking
        .check("flocking condition satisfied")
        .expect("the admission check is always reported");

    let trace = integrate(&scenario.initial, &scenario.params, &scenario.integrator_cfg)
        .map_err(|e| anyhow!("{}: integration failed: {e}", scenario.name))?;
    let min_gap_slack = trace
        .samples
        .iter()
        .fold(f64::INFINITY, |m, s| m.min(s.diag.min_gap_slack));
    let gamma = scenario.integrator_cfg.gamma.unwrap_or(10.0);
    let window = last_half_window(&trace);
    let (fitted_rate, r_squared) = match fit_exponential_rate(&trace, &scenario.params, gamma, window)
    {
        Ok(fit) => (fit.rate, fit.r_squared),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let last = trace.last();
    Ok(SweepRow {
        value: f64::NAN,
        threshold,
        flocking: verdict,
        termination: termination_label(&trace.termination),
        final_formation_error: last.diag.formation_error,
        final_velocity_diameter: last.diag.velocity_diameter,
        min_gap_slack,
        fitted_rate,
        r_squared,
    })
}

/// Runs the base scenario once per value, in parallel, and tabulates one
/// summary row per value in the given order.
pub fn cmd_sweep(args: &SweepArgs) -> Result<u8> {
    if !matches!(args.param.as_str(), "alpha" | "beta" | "gamma" | "v-scale") {
        bail!(
            "unknown sweep parameter {:?}; accepted: alpha, beta, gamma, v-scale",
            args.param
        );
    }
    let base = args.select.scenario()?;
    let variants: Vec<Scenario> = args
        .values
        .iter()
        .map(|&value| sweep_variant(&base, &args.param, value))
        .collect::<Result<_>>()?;

    let mut rows: Vec<SweepRow> = variants
        .par_iter()
        .map(sweep_run)
        .collect::<Result<_>>()?;
    for (row, &value) in rows.iter_mut().zip(&args.values) {
        row.value = value;
    }

    fs::create_dir_all(&args.select.out)?;
    let header = format!(
        "{},threshold,flocking_condition,termination,final_formation_error,final_velocity_diameter,min_gap_slack,fitted_rate,r_squared",
        args.param
    );
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                decimal(r.value),
                decimal(r.threshold),
                r.flocking,
                r.termination,
                decimal(r.final_formation_error),
                decimal(r.final_velocity_diameter),
                decimal(r.min_gap_slack),
                decimal(r.fitted_rate),
                decimal(r.r_squared),
            )
        })
        .collect();
    if args.select.wants(Format::Csv) {
        write_summary_csv(&args.select.out.join("summary.csv"), &header, &csv_rows)?;
    }
    if args.select.wants(Format::StructuredJson) {
        write_sweep_json(args, &rows)?;
    }

    println!(
        "sweep of {} over {} values (base {})",
        args.param,
        args.values.len(),
        base.name
    );
    println!(
        "{:>12}  {:>10}  {:8}  {:24}  {:>14}  {:>14}  {:>12}  {:>12}  {:>8}",
        args.param,
        "threshold",
        "flocking",
        "termination",
        "form_err",
        "v_diam",
        "min_slack",
        "rate",
        "r^2",
    );
    for row in &rows {
        println!(
            "{:>12.6}  {:>10.4}  {:8}  {:24}  {:>14.6e}  {:>14.6e}  {:>12.4e}  {:>12.4e}  {:>8.4}",
            row.value,
            row.threshold,
            row.flocking,
            row.termination,
            row.final_formation_error,
            row.final_velocity_diameter,
            row.min_gap_slack,
            row.fitted_rate,
            row.r_squared,
        );
    }
    Ok(0)
}

fn write_sweep_json(args: &SweepArgs, rows: &[SweepRow]) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row<'a> {
        value: f64,
        threshold: f64,
        flocking_condition: bool,
        termination: &'a str,
        final_formation_error: f64,
        final_velocity_diameter: f64,
        min_gap_slack: f64,
        fitted_rate: f64,
        r_squared: f64,
    }
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        param: &'a str,
        rows: Vec<Row<'a>>,
    }
    let doc = Doc {
        param: &args.param,
        rows: rows
            .iter()
            .map(|r| Row {
                value: r.value,
                threshold: r.threshold,
                flocking_condition: r.flocking,
                termination: &r.termination,
                final_formation_error: r.final_formation_error,
                final_velocity_diameter: r.final_velocity_diameter,
                min_gap_slack: r.min_gap_slack,
                fitted_rate: r.fitted_rate,
                r_squared: r.r_squared,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    write_text(&args.select.out.join("summary.json"), &format!("{text}\n"))
}

/// One row of the blow-up suite summary.
struct BlowupRow {
    scenario: String,
    alpha: f64,
    initial_gap_slack: f64,
    t_star_bound: f64,
    t_collision: f64,
    bracket_hi: f64,
    within_bound: bool,
    oracle_t: f64,
    oracle_gap: f64,
}

/// Runs every built-in finite-time collision scenario and compares the
/// detected collision times against their analytic bounds.
pub fn cmd_blowup(args: &BlowupArgs) -> Result<u8> {
    let suite: Vec<Scenario> = builtin_scenarios()
        .into_iter()
        .filter(|s| s.name.starts_with("blowup"))
        .collect();
    let oracle_h = args.oracle_h;
    let rows: Vec<BlowupRow> = suite
        .par_iter()
        .map(|scenario| -> Result<BlowupRow> {
            let certificate = blow_up_certificate(&scenario.initial, &scenario.params)
                .map_err(|e| anyhow!("{}: {e}", scenario.name))?;
            let bound = certificate
                .constant("t_star_bound")
                .ok_or_else(|| anyhow!("{}: certificate hypotheses do not hold", scenario.name))?;
            let trace = integrate(&scenario.initial, &scenario.params, &scenario.integrator_cfg)
                .map_err(|e| anyhow!("{}: integration failed: {e}", scenario.name))?;
            let (t_collision, bracket_hi) = match trace.termination {
                Termination::Collision { t_lo, t_hi, .. } => (0.5 * (t_lo + t_hi), t_hi),
                ref other => bail!(
                    "{}: expected a collision before t={}, got {}",
                    scenario.name,
                    scenario.integrator_cfg.t_end,
                    termination_label(other),
                ),
            };
            let (oracle_t, oracle_gap) = match oracle_h {
                Some(h) => {
                    let oracle = integrate_oracle(
                        &scenario.initial,
                        &scenario.params,
                        h,
                        scenario.integrator_cfg.t_end,
                    )
                    .map_err(|e| anyhow!("{}: oracle failed: {e}", scenario.name))?;
                    let t = oracle.collision_time().ok_or_else(|| {
                        anyhow!("{}: the oracle run did not collide", scenario.name)
                    })?;
                    (t, (t - t_collision).abs())
                }
                None => (f64::NAN, f64::NAN),
            };
            Ok(BlowupRow {
                scenario: scenario.name.clone(),
                alpha: scenario.params.alpha,
                initial_gap_slack: certificate
                    .constant("initial_gap_slack")
                    .expect("the certificate always reports the initial slack"),
                t_star_bound: bound,
                t_collision,
                bracket_hi,
                within_bound: bracket_hi <= bound * (1.0 + BOUND_SLACK_REL),
                oracle_t,
                oracle_gap,
            })
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(&args.out)?;
    let header = "scenario,alpha,initial_gap_slack,t_star_bound,t_collision,bracket_hi,within_bound,oracle_t,oracle_gap";
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                decimal(r.alpha),
                decimal(r.initial_gap_slack),
                decimal(r.t_star_bound),
                decimal(r.t_collision),
                decimal(r.bracket_hi),
                r.within_bound,
                decimal(r.oracle_t),
                decimal(r.oracle_gap),
            )
        })
        .collect();
    if args.formats.contains(&Format::Csv) {
        write_summary_csv(&args.out.join("summary.csv"), header, &csv_rows)?;
    }

    println!(
        "{:20}  {:>6}  {:>10}  {:>12}  {:>12}  {:>6}",
        "scenario", "alpha", "bound", "t_collision", "oracle_t", "within"
    );
    for row in &rows {
        println!(
            "{:20}  {:>6.2}  {:>10.6}  {:>12.8}  {:>12.8}  {:>6}",
            row.scenario, row.alpha, row.t_star_bound, row.t_collision, row.oracle_t, row.within_bound,
        );
    }
    let all_within = rows.iter().all(|r| r.within_bound);
    if !all_within {
        println!("some collision times land past their analytic bounds");
        return Ok(3);
    }
    Ok(0)
}

/// Runs every built-in scenario in parallel and scores certificate outcomes
/// against expectations. Exit 0 iff every expectation is met, 3 otherwise.
pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<u8> {
    let mut scenarios = builtin_scenarios();
    if args.inject_mismatch {
        let target = scenarios
            .first_mut()
            .and_then(|s| s.expected.first_mut())
            .expect("the registry is never empty");
        target.expected = !target.expected;
        println!("negative control: flipped one expectation on purpose");
    }

    let reports: Vec<ScenarioReport> = scenarios
        .par_iter()
        .map(|scenario| {
            evaluate_scenario(scenario).map_err(|e| anyhow!("{}: {e}", scenario.name))
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(&args.out)?;
    let summary_header =
        "scenario,expectations,met,all_met,termination,collision_time,final_formation_error,final_velocity_diameter";
    let mut summary_rows = Vec::with_capacity(reports.len());
    let mut outcome_rows = Vec::new();
    for report in &reports {
        let met = report.outcomes.iter().filter(|o| o.met()).count();
        let last = report.trace.last();
        summary_rows.push(format!(
            "{},{},{},{},{},{},{},{}",
            report.scenario,
            report.outcomes.len(),
            met,
            report.all_met(),
            termination_label(&report.trace.termination),
            decimal(report.trace.collision_time().unwrap_or(f64::NAN)),
            decimal(last.diag.formation_error),
            decimal(last.diag.velocity_diameter),
        ));
        for outcome in &report.outcomes {
            outcome_rows.push(format!(
                "{},{},{},{},{}",
                report.scenario,
                outcome.certificate,
                outcome.expected,
                outcome.actual.map(|b| b.to_string()).unwrap_or_else(|| "none".to_owned()),
                outcome.met(),
            ));
        }
    }
    if args.formats.contains(&Format::Csv) {
        write_summary_csv(&args.out.join("summary.csv"), summary_header, &summary_rows)?;
        write_summary_csv(
            &args.out.join("outcomes.csv"),
            "scenario,certificate,expected,actual,met",
            &outcome_rows,
        )?;
    }
    if args.formats.contains(&Format::StructuredJson) {
        write_reproduce_json(args, &reports)?;
    }

    println!(
        "{:32}  {:>5}  {:>5}  {:7}  {}",
        "scenario", "want", "met", "all_met", "termination"
    );
    for report in &reports {
        let met = report.outcomes.iter().filter(|o| o.met()).count();
        println!(
            "{:32}  {:>5}  {:>5}  {:7}  {}",
            report.scenario,
            report.outcomes.len(),
            met,
            report.all_met(),
            termination_label(&report.trace.termination),
        );
    }

    let mismatched: Vec<&ScenarioReport> = reports.iter().filter(|r| !r.all_met()).collect();
    if mismatched.is_empty() {
        println!("all expectations met across {} scenarios", reports.len());
        Ok(0)
    } else {
        println!("mismatches:");
        for report in mismatched {
            for outcome in report.mismatches() {
                println!("  {}: {}", report.scenario, outcome_line(outcome));
            }
        }
        Ok(3)
    }
}

fn write_reproduce_json(args: &ReproduceArgs, reports: &[ScenarioReport]) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row<'a> {
        scenario: &'a str,
        all_met: bool,
        termination: &'a Termination,
        outcomes: &'a [platoon::CertificateOutcome],
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| Row {
            scenario: &r.scenario,
            all_met: r.all_met(),
            termination: &r.trace.termination,
            outcomes: &r.outcomes,
        })
        .collect();
    let text = serde_json::to_string_pretty(&rows)?;
    write_text(&args.out.join("summary.json"), &format!("{text}\n"))
}
