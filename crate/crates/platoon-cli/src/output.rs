//! Trace, certificate, and summary serialization.
//!
//! CSV is the canonical trace format: fixed column order and decimal values
//! with 17 significant digits, so every f64 survives a write/read round trip
//! bit-exactly. The structured JSON mirror carries the same data with field
//! names instead of column positions.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use anyhow::{Context, Result};
use platoon::{CertificateOutcome, ConditionReport, Termination, Trace};
use serde::Serialize;

/// Formats one value with 17 significant decimal digits.
pub fn decimal(value: f64) -> String {
    format!("{value:.16e}")
}

/// Header of the canonical trace CSV for `n` agents.
pub fn trace_header(n: usize) -> String {
    let mut cols: Vec<String> = vec!["t".to_owned()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=n).map(|i| format!("v_{i}")));
    for fixed in [
        "e1",
        "e2",
        "e_total",
        "dissipation",
        "e_gamma",
        "min_gap_slack",
        "formation_error",
        "velocity_diameter",
    ] {
        cols.push(fixed.to_owned());
    }
    cols.join(",")
}

/// Writes the full trace in the canonical column order.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let n = trace.first().state.n_agents();
    writeln!(out, "{}", trace_header(n))?;
    for sample in &trace.samples {
        let mut row = String::with_capacity(32 * (2 * n + 9));
        row.push_str(&decimal(sample.state.t));
        for x in &sample.state.x {
            row.push(',');
            row.push_str(&decimal(*x));
        }
        for v in &sample.state.v {
            row.push(',');
            row.push_str(&decimal(*v));
        }
        let e = &sample.energy;
        for value in [
            e.e1,
            e.e2,
            e.e_total,
            e.dissipation.unwrap_or(f64::NAN),
            e.e_gamma.unwrap_or(f64::NAN),
            sample.diag.min_gap_slack,
            sample.diag.formation_error,
            sample.diag.velocity_diameter,
        ] {
            row.push(',');
            row.push_str(&decimal(value));
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Column subsets for external plotting: one file per figure family.
pub fn write_plot_data(dir: &Path, trace: &Trace) -> Result<()> {
    let n = trace.first().state.n_agents();

    let mut positions = String::new();
    positions.push_str("t");
    for i in 1..=n {
        let _ = write!(positions, ",x_{i}");
    }
    positions.push('\n');

    let mut energy = String::from("t,e1,e2,e_total,dissipation,e_gamma\n");
    let mut errors = String::from("t,min_gap_slack,formation_error,velocity_diameter\n");

    for sample in &trace.samples {
        let t = decimal(sample.state.t);
        positions.push_str(&t);
        for x in &sample.state.x {
            positions.push(',');
            positions.push_str(&decimal(*x));
        }
        positions.push('\n');

        let e = &sample.energy;
        let _ = writeln!(
            energy,
            "{t},{},{},{},{},{}",
            decimal(e.e1),
            decimal(e.e2),
            decimal(e.e_total),
            decimal(e.dissipation.unwrap_or(f64::NAN)),
            decimal(e.e_gamma.unwrap_or(f64::NAN)),
        );
        let _ = writeln!(
            errors,
            "{t},{},{},{}",
            decimal(sample.diag.min_gap_slack),
            decimal(sample.diag.formation_error),
            decimal(sample.diag.velocity_diameter),
        );
    }

    write_text(&dir.join("positions.csv"), &positions)?;
    write_text(&dir.join("energy.csv"), &energy)?;
    write_text(&dir.join("errors.csv"), &errors)?;
    Ok(())
}

/// JSON mirror of the trace: named fields, samples in order.
pub fn write_trace_json(path: &Path, scenario: &str, trace: &Trace) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        scenario: &'a str,
        termination: &'a Termination,
        samples: &'a [platoon::TraceSample],
    }
    let doc = Doc { scenario, termination: &trace.termination, samples: &trace.samples };
    write_json(path, &doc)
}

/// Renders labeled certificates, then the outcome table when one exists.
pub fn certificates_text(
    scenario: &str,
    labeled: &[(String, ConditionReport)],
    outcomes: &[CertificateOutcome],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {scenario}");
    for (label, certificate) in labeled {
        let _ = writeln!(out, "\n== {label} ==");
        let _ = writeln!(out, "{certificate}");
    }
    if !outcomes.is_empty() {
        let _ = writeln!(out, "\n== expectations ==");
        for outcome in outcomes {
            let _ = writeln!(out, "{}", outcome_line(outcome));
        }
    }
    out
}

/// One `[ok]`/`[MISS]` line for an expectation outcome.
pub fn outcome_line(outcome: &CertificateOutcome) -> String {
    let actual = match outcome.actual {
        Some(b) => b.to_string(),
        None => "not evaluated".to_owned(),
    };
    format!(
        "{} {}: expected {}, got {}",
        if outcome.met() { "[ok]  " } else { "[MISS]" },
        outcome.certificate,
        outcome.expected,
        actual,
    )
}

/// JSON mirror of the certificates and outcomes, without the trace body.
pub fn write_certificates_json(
    path: &Path,
    scenario: &str,
    labeled: &[(String, ConditionReport)],
    outcomes: &[CertificateOutcome],
) -> Result<()> {
    #[derive(Serialize)]
    struct Entry<'a> {
        label: &'a str,
        certificate: &'a ConditionReport,
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        scenario: &'a str,
        certificates: Vec<Entry<'a>>,
        outcomes: &'a [CertificateOutcome],
    }
    let doc = Doc {
        scenario,
        certificates: labeled
            .iter()
            .map(|(label, certificate)| Entry { label, certificate })
            .collect(),
        outcomes,
    };
    write_json(path, &doc)
}

/// One CSV from a header row and pre-formatted body rows.
pub fn write_summary_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)
        .with_context(|| format!("serializing {}", path.display()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Short human-readable form of a termination for tables.
pub fn termination_label(termination: &Termination) -> String {
    match termination {
        Termination::ReachedTEnd => "reached-t-end".to_owned(),
        Termination::Collision { left, right, t_lo, t_hi } => {
            format!("collision({left},{right})@[{t_lo:.6},{t_hi:.6}]")
        }
        Termination::StepUnderflow { t } => format!("step-underflow@{t:.6}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trips_exactly() {
        let values = [
            0.0,
            -0.0,
            1.0,
            -0.2,
            std::f64::consts::PI,
            1e-308,
            2.2250738585072014e-308,
            1.7976931348623157e308,
            0.1 + 0.2,
            f64::NAN,
        ];
        for v in values {
            let text = decimal(v);
            let back: f64 = text.parse().expect("decimal form parses");
            if v.is_nan() {
                assert!(back.is_nan(), "NaN survives as NaN");
            } else {
                assert_eq!(back.to_bits(), v.to_bits(), "{v} must round trip via {text}");
            }
        }
    }

    #[test]
    fn trace_header_counts_columns() {
        let header = trace_header(5);
        assert_eq!(header.split(',').count(), 1 + 10 + 8, "t, coordinates, then 8 observables");
        assert!(header.starts_with("t,x_1,"), "time leads, positions follow");
        assert!(header.ends_with("velocity_diameter"), "diagnostics close the row");
    }
}
