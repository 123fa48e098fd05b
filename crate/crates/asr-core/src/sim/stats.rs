//! Simulation statistics, summary tables and CSV export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use crate::telemetry::EnergyLedger;

/// Final long-term/current snapshot of a delay estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelaySnapshot {
    pub long_term: f64,
    pub current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub expedited: u64,
    pub deferred: u64,
    pub normal: u64,
}

/// Everything a run accumulates. Time series have one entry per tick;
/// maps are keyed by node name (or `SRC->DST` for links) so exports are
/// deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimStats {
    pub ticks: usize,
    pub tick: f64,
    pub total_requests: u64,
    pub served_requests: u64,
    pub dropped_requests: u64,
    pub epochs: u64,
    pub infeasible_epochs: u64,
    pub selection_counts: BTreeMap<String, u64>,
    pub energy: EnergyLedger,
    pub server_load_series: BTreeMap<String, Vec<f64>>,
    pub link_delay_series: BTreeMap<String, Vec<f64>>,
    /// Active assignment's objective per tick; `None` while infeasible.
    pub objective_series: Vec<Option<f64>>,
    pub class_counts: ClassCounts,
    pub delay_estimates: BTreeMap<String, DelaySnapshot>,
    /// Router and server names in graph declaration order, for reporting.
    pub router_names: Vec<String>,
    pub server_names: Vec<String>,
}

impl SimStats {
    /// Share of served requests per server; sums to 1 when anything was
    /// served.
    pub fn selection_fractions(&self) -> BTreeMap<String, f64> {
        let total: u64 = self.selection_counts.values().sum();
        self.selection_counts
            .iter()
            .map(|(k, &v)| {
                let f = if total > 0 {
                    v as f64 / total as f64
                } else {
                    0.0
                };
                (k.clone(), f)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadSummary {
    pub mean: f64,
    pub max: f64,
    pub last: f64,
}

/// Rendered views of [`SimStats`] mirroring the experiment reports:
/// per-router energy, per-server selection, load distribution, and the
/// delay estimator snapshot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTables {
    pub energy_rows: Vec<(String, f64)>,
    pub selection_rows: Vec<(String, u64, f64)>,
    pub load_rows: Vec<(String, LoadSummary)>,
    pub delay_rows: Vec<(String, DelaySnapshot)>,
    pub class_counts: ClassCounts,
    pub total_requests: u64,
    pub dropped_requests: u64,
    pub infeasible_epochs: u64,
    pub epochs: u64,
}

/// Builds the report tables from a completed run. Routers appear in
/// declaration order; empty stats produce empty tables.
pub fn summarize(stats: &SimStats) -> ReportTables {
    let energy_rows = stats
        .router_names
        .iter()
        .map(|r| (r.clone(), stats.energy.energy(r)))
        .collect();
    let fractions = stats.selection_fractions();
    let selection_rows = stats
        .server_names
        .iter()
        .map(|s| {
            (
                s.clone(),
                stats.selection_counts.get(s).copied().unwrap_or(0),
                fractions.get(s).copied().unwrap_or(0.0),
            )
        })
        .collect();
    let load_rows = stats
        .server_names
        .iter()
        .map(|s| {
            let series = stats
                .server_load_series
                .get(s)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let summary = if series.is_empty() {
                LoadSummary::default()
            } else {
                LoadSummary {
                    mean: series.iter().sum::<f64>() / series.len() as f64,
                    max: series.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    last: *series.last().expect("non-empty"),
                }
            };
            (s.clone(), summary)
        })
        .collect();
    let delay_rows = stats
        .delay_estimates
        .iter()
        .map(|(k, &v)| (k.clone(), v))
        .collect();
    ReportTables {
        energy_rows,
        selection_rows,
        load_rows,
        delay_rows,
        class_counts: stats.class_counts,
        total_requests: stats.total_requests,
        dropped_requests: stats.dropped_requests,
        infeasible_epochs: stats.infeasible_epochs,
        epochs: stats.epochs,
    }
}

impl fmt::Display for ReportTables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Total Energy Consumed (in units)")?;
        writeln!(f, "  {:<12} {:>12}", "Router", "Energy")?;
        for (router, energy) in &self.energy_rows {
            writeln!(f, "  {router:<12} {energy:>12.3}")?;
        }
        writeln!(f)?;
        writeln!(f, "Server Selection")?;
        writeln!(f, "  {:<12} {:>10} {:>10}", "Server", "Requests", "Fraction")?;
        for (server, count, fraction) in &self.selection_rows {
            writeln!(f, "  {server:<12} {count:>10} {fraction:>10.4}")?;
        }
        writeln!(f)?;
        writeln!(f, "Server Load Distribution")?;
        writeln!(
            f,
            "  {:<12} {:>10} {:>10} {:>10}",
            "Server", "Mean", "Max", "Last"
        )?;
        for (server, load) in &self.load_rows {
            writeln!(
                f,
                "  {server:<12} {:>10.4} {:>10.4} {:>10.4}",
                load.mean, load.max, load.last
            )?;
        }
        writeln!(f)?;
        writeln!(f, "Delay Estimates (ms)")?;
        writeln!(f, "  {:<12} {:>12} {:>12}", "Link", "Long-term", "Current")?;
        for (link, snap) in &self.delay_rows {
            writeln!(
                f,
                "  {link:<12} {:>12.4} {:>12.4}",
                snap.long_term, snap.current
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Requests: {} total, {} dropped; queue classes: {} expedited, {} deferred, {} normal",
            self.total_requests,
            self.dropped_requests,
            self.class_counts.expedited,
            self.class_counts.deferred,
            self.class_counts.normal
        )?;
        writeln!(
            f,
            "Epochs: {} total, {} infeasible",
            self.epochs, self.infeasible_epochs
        )
    }
}

/// Writes the stats as CSV files plus a plain-text summary into `dir`:
/// `selection.csv`, `energy.csv`, `server_load.csv`, `link_delay.csv`,
/// `objective.csv`, `queue_classes.csv` and `summary.txt`. Output is
/// byte-deterministic for identical stats.
pub fn export_csv(stats: &SimStats, dir: &FsPath) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut selection = csv::Writer::from_path(dir.join("selection.csv"))?;
    selection.write_record(["server", "requests", "fraction"])?;
    let fractions = stats.selection_fractions();
    for (server, count) in &stats.selection_counts {
        selection.write_record([
            server.as_str(),
            &count.to_string(),
            &fractions[server].to_string(),
        ])?;
    }
    selection.flush()?;

    let mut energy = csv::Writer::from_path(dir.join("energy.csv"))?;
    energy.write_record(["node", "energy"])?;
    for (node, value) in stats.energy.entries() {
        energy.write_record([node, &value.to_string()])?;
    }
    energy.flush()?;

    write_series(
        &dir.join("server_load.csv"),
        stats,
        &stats.server_load_series,
    )?;
    write_series(&dir.join("link_delay.csv"), stats, &stats.link_delay_series)?;

    let mut objective = csv::Writer::from_path(dir.join("objective.csv"))?;
    objective.write_record(["tick", "time_ms", "objective"])?;
    for (i, value) in stats.objective_series.iter().enumerate() {
        objective.write_record([
            i.to_string(),
            (i as f64 * stats.tick).to_string(),
            value.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    objective.flush()?;

    let mut classes = csv::Writer::from_path(dir.join("queue_classes.csv"))?;
    classes.write_record(["class", "count"])?;
    classes.write_record(["expedited", &stats.class_counts.expedited.to_string()])?;
    classes.write_record(["deferred", &stats.class_counts.deferred.to_string()])?;
    classes.write_record(["normal", &stats.class_counts.normal.to_string()])?;
    classes.flush()?;

    let mut summary = fs::File::create(dir.join("summary.txt"))?;
    write!(summary, "{}", summarize(stats))?;
    Ok(())
}

fn write_series(
    path: &FsPath,
    stats: &SimStats,
    series: &BTreeMap<String, Vec<f64>>,
) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["tick".to_string(), "time_ms".to_string()];
    header.extend(series.keys().cloned());
    writer.write_record(&header)?;
    for i in 0..stats.ticks {
        let mut row = vec![i.to_string(), (i as f64 * stats.tick).to_string()];
        for values in series.values() {
            row.push(values.get(i).map(|v| v.to_string()).unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
