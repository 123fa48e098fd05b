//! Human- and machine-readable rendering of solve and sweep results.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use asr_core::config::ConfigDocument;
use asr_core::optimizer::{Assignment, SweepReport};
use asr_core::posy::ConstraintFamily;

pub fn print_assignment(doc: &ConfigDocument, assignment: &Assignment, used_exact: bool) {
    println!(
        "objective = {} ({} solver)",
        assignment.objective,
        if used_exact { "exact" } else { "greedy" }
    );
    for (user, choice) in &assignment.choices {
        println!(
            "user {user}: {}  server={}  term={:.6}  (delay {:.3} ms, bandwidth {:.3} Mb/s, energy {:.3}, load {:.4})",
            doc.graph.format_path(&choice.path),
            doc.graph.node_name(choice.server),
            choice.objective_term,
            choice.metrics.delay,
            choice.metrics.bandwidth,
            choice.metrics.energy,
            choice.metrics.server_load,
        );
    }
    println!("constraints:");
    for check in &assignment.report.checks {
        println!(
            "  [{}] {:<18} {:>10.4} {} {:<10.4}",
            if check.pass { "ok  " } else { "FAIL" },
            check.label,
            check.lhs,
            if check.strict { "< " } else { "<=" },
            check.bound,
        );
    }
    println!(
        "feasible: {}",
        if assignment.report.feasible { "yes" } else { "no" }
    );
}

/// Per-user assignment rows; `objective_total` repeats the run-level value
/// so each row is self-contained.
pub fn write_assignment_csv(
    path: &Path,
    doc: &ConfigDocument,
    assignment: &Assignment,
) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "user",
        "path",
        "server",
        "delay_ms",
        "bandwidth_mbps",
        "energy",
        "server_load",
        "objective_term",
        "objective_total",
    ])?;
    for (user, choice) in &assignment.choices {
        writer.write_record([
            user.to_string(),
            doc.graph.format_path(&choice.path),
            doc.graph.node_name(choice.server).to_string(),
            choice.metrics.delay.to_string(),
            choice.metrics.bandwidth.to_string(),
            choice.metrics.energy.to_string(),
            choice.metrics.server_load.to_string(),
            choice.objective_term.to_string(),
            assignment.objective.to_string(),
        ])?;
    }
    writer.flush()
}

/// One CSV row per sweep grid row: the per-family factors, the outcome,
/// and the per-server selection fractions plus per-router energies of the
/// solved assignment.
pub fn write_sweep_csv<W: Write>(
    out: W,
    doc: &ConfigDocument,
    factors: &[BTreeMap<ConstraintFamily, f64>],
    report: &SweepReport,
) -> std::io::Result<()> {
    let servers: Vec<String> = doc.instance.params.servers.iter().map(|s| s.name.clone()).collect();
    let routers: Vec<String> = doc
        .graph
        .routers()
        .map(|r| doc.graph.node_name(r).to_string())
        .collect();

    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string()];
    for family in ConstraintFamily::ALL {
        header.push(format!("u_{family}"));
    }
    header.push("feasible".to_string());
    header.push("solver".to_string());
    header.push("objective".to_string());
    for s in &servers {
        header.push(format!("frac_{s}"));
    }
    for r in &routers {
        header.push(format!("energy_{r}"));
    }
    header.push("error".to_string());
    writer.write_record(&header)?;

    for (i, (row_factors, row)) in factors.iter().zip(&report.rows).enumerate() {
        let mut record = vec![i.to_string()];
        for family in ConstraintFamily::ALL {
            record.push(row_factors.get(&family).copied().unwrap_or(1.0).to_string());
        }
        match &row.outcome {
            Ok(outcome) => {
                record.push("true".to_string());
                record.push(if outcome.used_exact { "exact" } else { "greedy" }.to_string());
                record.push(outcome.objective.to_string());
                for s in &servers {
                    record.push(
                        outcome
                            .selection_fractions
                            .get(s)
                            .copied()
                            .unwrap_or(0.0)
                            .to_string(),
                    );
                }
                for r in &routers {
                    record.push(outcome.energy.energy(r).to_string());
                }
                record.push(String::new());
            }
            Err(e) => {
                record.push("false".to_string());
                record.push(String::new());
                record.push(String::new());
                for _ in &servers {
                    record.push(String::new());
                }
                for _ in &routers {
                    record.push(String::new());
                }
                record.push(e.to_string());
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()
}
