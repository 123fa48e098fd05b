//! Tick-based simulation harness.
//!
//! Time advances in fixed ticks. Each tick applies due trace events (or,
//! for targets without trace coverage, generator-driven random walks) to
//! link delays and server processing delays, feeds the per-link delay
//! estimators, re-solves the assignment every reoptimization period
//! against the measured server loads, and serves the requests that arrive
//! during the tick: each request records its server selection, charges
//! energy along its path, occupies its server, and is classified as
//! expedited, deferred or normal from the path's delay estimates.
//!
//! Runs are deterministic functions of (config, seed, traces): two runs
//! with identical inputs produce identical statistics byte for byte.

mod stats;
mod trace;
mod walk;

pub use stats::{
    export_csv, summarize, ClassCounts, DelaySnapshot, LoadSummary, ReportTables, SimStats,
};
pub use trace::{parse_trace_csv, resolve_target, ResolvedTarget, TraceEvent, TraceField};
pub use walk::{generate_delay_walk, WalkParams};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::netmodel::{NetError, NetworkGraph, NodeId};
use crate::optimizer::{solve_exact, solve_greedy, Assignment, SolveError, UserDemand};
use crate::posy::GpInstance;
use crate::telemetry::{
    classify, DelayEstimator, EnergyLedger, QueueClass, ServerLoadModel, TelemetryError,
    DEFAULT_BETA, DEFAULT_LOAD_WINDOW,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid walk bounds: min {min}, max {max}, step {step}")]
    InvalidBounds { min: f64, max: f64, step: f64 },
    #[error("trace line {line}: {message}")]
    TraceParse { line: u64, message: String },
    #[error("trace target `{target}`: {message}")]
    BadTarget { target: String, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Run parameters. All times in ms.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub tick: f64,
    /// Time between request arrivals; requests fire at k * interarrival.
    pub interarrival: f64,
    /// How often the assignment is recomputed; must be a whole number of
    /// ticks.
    pub reoptimize_period: f64,
    pub seed: u64,
    /// Random walk applied to every link delay without trace coverage.
    pub delay_walk: Option<WalkParams>,
    /// Random walk applied to every server processing delay without trace
    /// coverage.
    pub processing_walk: Option<WalkParams>,
    /// Default estimator smoothing factor.
    pub beta: f64,
    /// Per-link smoothing overrides, keyed `SRC->DST`.
    pub link_beta: BTreeMap<String, f64>,
    /// Trailing window for server load measurement.
    pub load_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 60_000.0,
            tick: 10.0,
            interarrival: 10.0,
            reoptimize_period: 100.0,
            seed: 42,
            delay_walk: None,
            processing_walk: None,
            beta: DEFAULT_BETA,
            link_beta: BTreeMap::new(),
            load_window: DEFAULT_LOAD_WINDOW,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return bad(format!("tick must be positive, got {}", self.tick));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be non-negative, got {}", self.duration));
        }
        if self.duration > 0.0 && self.duration < self.tick {
            return bad(format!(
                "duration {} is shorter than one tick {}",
                self.duration, self.tick
            ));
        }
        if !(self.interarrival > 0.0 && self.interarrival.is_finite()) {
            return bad(format!(
                "request interarrival must be positive, got {}",
                self.interarrival
            ));
        }
        let ratio = self.reoptimize_period / self.tick;
        if !(ratio.is_finite() && ratio >= 1.0 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return bad(format!(
                "reoptimize period {} must be a whole positive number of ticks (tick {})",
                self.reoptimize_period, self.tick
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        for (_, &beta) in &self.link_beta {
            if !(beta > 0.0 && beta <= 1.0) {
                return bad(format!("per-link beta must lie in (0, 1], got {beta}"));
            }
        }
        if !(self.load_window > 0.0 && self.load_window.is_finite()) {
            return bad(format!(
                "load window must be positive, got {}",
                self.load_window
            ));
        }
        if let Some(walk) = &self.delay_walk {
            walk.validate()?;
        }
        if let Some(walk) = &self.processing_walk {
            walk.validate()?;
        }
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.tick + 1e-9).floor() as usize
    }

    pub fn reoptimize_ticks(&self) -> u64 {
        (self.reoptimize_period / self.tick).round() as u64
    }
}

/// Stable per-entity stream seeds derived from the run seed.
fn mix_seed(seed: u64, kind: u64, ordinal: u64) -> u64 {
    let mut z = seed
        ^ kind.rotate_left(32)
        ^ ordinal.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the simulation. Trace events override generators per target; the
/// assignment is recomputed each reoptimization epoch against measured
/// server loads (exact solver within budget, greedy past it); an
/// infeasible epoch drops its requests and is counted, never fatal.
pub fn run(
    graph: &NetworkGraph,
    g: &GpInstance,
    users: &[UserDemand],
    config: &SimConfig,
    traces: &[TraceEvent],
) -> Result<SimStats, SimError> {
    config.validate()?;

    let mut resolved = Vec::with_capacity(traces.len());
    let mut last_time = f64::NEG_INFINITY;
    for event in traces {
        if event.time < last_time {
            return Err(SimError::TraceParse {
                line: 0,
                message: format!(
                    "event at {} arrives after one at {last_time}; traces must be time-sorted",
                    event.time
                ),
            });
        }
        last_time = event.time;
        resolved.push((event.clone(), resolve_target(graph, event)?));
    }

    let n_ticks = config.ticks();
    let reopt_ticks = config.reoptimize_ticks();

    let link_keys: Vec<(NodeId, NodeId)> = graph.links().map(|(s, d, _)| (s, d)).collect();
    let link_name = |&(s, d): &(NodeId, NodeId)| {
        format!("{}->{}", graph.node_name(s), graph.node_name(d))
    };
    let servers: Vec<NodeId> = graph.servers().collect();

    // Targets with any trace coverage are trace-driven; generators fill in
    // the rest.
    let mut traced_delays: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut traced_processing: BTreeSet<NodeId> = BTreeSet::new();
    for (event, target) in &resolved {
        match (target, event.field) {
            (ResolvedTarget::Link(s, d), TraceField::Delay) => {
                traced_delays.insert((*s, *d));
            }
            (ResolvedTarget::Server(id), TraceField::ProcessingDelay) => {
                traced_processing.insert(*id);
            }
            _ => {}
        }
    }

    let mut delay_walks: BTreeMap<(NodeId, NodeId), Vec<f64>> = BTreeMap::new();
    if let Some(params) = &config.delay_walk {
        for (ordinal, key) in link_keys.iter().enumerate() {
            if !traced_delays.contains(key) {
                delay_walks.insert(
                    *key,
                    generate_delay_walk(mix_seed(config.seed, 1, ordinal as u64), params, n_ticks)?,
                );
            }
        }
    }
    let mut processing_walks: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    if let Some(params) = &config.processing_walk {
        for (ordinal, id) in servers.iter().enumerate() {
            if !traced_processing.contains(id) {
                processing_walks.insert(
                    *id,
                    generate_delay_walk(mix_seed(config.seed, 2, ordinal as u64), params, n_ticks)?,
                );
            }
        }
    }

    // (delay, bandwidth) per link, seeded from the static graph values.
    let mut link_state: BTreeMap<(NodeId, NodeId), (f64, f64)> = graph
        .links()
        .map(|(s, d, l)| ((s, d), (l.delay, l.bandwidth)))
        .collect();
    let mut estimators: BTreeMap<(NodeId, NodeId), DelayEstimator> = link_keys
        .iter()
        .map(|key| {
            let beta = config
                .link_beta
                .get(&link_name(key))
                .copied()
                .unwrap_or(config.beta);
            (*key, DelayEstimator::new(beta))
        })
        .collect();
    let mut load_models: BTreeMap<NodeId, ServerLoadModel> = servers
        .iter()
        .map(|&id| Ok((id, ServerLoadModel::new(config.load_window, 0.0)?)))
        .collect::<Result<_, TelemetryError>>()?;

    let mut users_sorted = users.to_vec();
    users_sorted.sort_by_key(|u| u.id);

    let mut stats = SimStats {
        ticks: n_ticks,
        tick: config.tick,
        energy: EnergyLedger::with_nodes(graph.nodes().map(|(_, n)| n.name.clone())),
        selection_counts: servers
            .iter()
            .map(|&s| (graph.node_name(s).to_string(), 0))
            .collect(),
        server_load_series: servers
            .iter()
            .map(|&s| (graph.node_name(s).to_string(), Vec::with_capacity(n_ticks)))
            .collect(),
        link_delay_series: link_keys
            .iter()
            .map(|key| (link_name(key), Vec::with_capacity(n_ticks)))
            .collect(),
        objective_series: Vec::with_capacity(n_ticks),
        router_names: graph
            .routers()
            .map(|r| graph.node_name(r).to_string())
            .collect(),
        server_names: servers
            .iter()
            .map(|&s| graph.node_name(s).to_string())
            .collect(),
        ..Default::default()
    };

    let mut current: Option<Assignment> = None;
    let mut cursor = 0usize;
    let mut request_counter: u64 = 0;
    let mut next_request = 0.0f64;

    for tick_idx in 0..n_ticks {
        let t = tick_idx as f64 * config.tick;
        let t_end = t + config.tick;

        // 1. due trace events take effect at the tick boundary
        while cursor < resolved.len() && resolved[cursor].0.time <= t {
            let (event, target) = &resolved[cursor];
            match (target, event.field) {
                (ResolvedTarget::Link(s, d), TraceField::Delay) => {
                    link_state.get_mut(&(*s, *d)).expect("resolved link").0 = event.value;
                }
                (ResolvedTarget::Link(s, d), TraceField::Bandwidth) => {
                    link_state.get_mut(&(*s, *d)).expect("resolved link").1 = event.value;
                }
                (ResolvedTarget::Server(id), TraceField::ProcessingDelay) => {
                    load_models
                        .get_mut(id)
                        .expect("resolved server")
                        .set_processing_delay(event.value);
                }
                _ => unreachable!("resolve_target pairs fields with targets"),
            }
            cursor += 1;
        }

        // 2. generator-driven values for untraced targets
        for (key, series) in &delay_walks {
            link_state.get_mut(key).expect("walked link").0 = series[tick_idx];
        }
        for (id, series) in &processing_walks {
            load_models
                .get_mut(id)
                .expect("walked server")
                .set_processing_delay(series[tick_idx]);
        }

        // 3. delay estimators see this tick's link delays
        for (key, est) in estimators.iter_mut() {
            est.update(link_state[key].0)?;
        }

        // 4. reoptimize on epoch boundaries against measured loads
        if tick_idx as u64 % reopt_ticks == 0 {
            stats.epochs += 1;
            let measured: BTreeMap<String, f64> = servers
                .iter()
                .map(|&s| (graph.node_name(s).to_string(), load_models[&s].sample(t)))
                .collect();
            let epoch_graph = graph.with_link_state(&link_state);
            let epoch_program = g.with_base_loads(&measured);
            current = match solve_exact(&epoch_program, &epoch_graph, &users_sorted) {
                Ok(a) => Some(a),
                Err(SolveError::BudgetExceeded { .. }) => {
                    log::info!("epoch at {t} ms past budget; falling back to greedy");
                    match solve_greedy(&epoch_program, &epoch_graph, &users_sorted) {
                        Ok(a) => Some(a),
                        Err(SolveError::Infeasible { .. }) => None,
                        Err(e) => return Err(e.into()),
                    }
                }
                Err(SolveError::Infeasible { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            if current.is_none() {
                stats.infeasible_epochs += 1;
                log::debug!("epoch at {t} ms is infeasible; dropping its requests");
            }
        }

        // 5. requests arriving within this tick
        if !users_sorted.is_empty() {
            while next_request < t_end {
                let user = &users_sorted[(request_counter % users_sorted.len() as u64) as usize];
                stats.total_requests += 1;
                match &current {
                    Some(assignment) => {
                        let choice = &assignment.choices[&user.id];
                        let server_name = graph.node_name(choice.server).to_string();
                        *stats.selection_counts.entry(server_name).or_insert(0) += 1;
                        stats.energy.record_traversal(&choice.path, graph)?;
                        load_models
                            .get_mut(&choice.server)
                            .expect("assignment server")
                            .serve(next_request);
                        let (long, cur) = choice.path.hops_iter().fold((0.0, 0.0), |acc, hop| {
                            let est = &estimators[&hop];
                            (acc.0 + est.long_term(), acc.1 + est.current())
                        });
                        match classify(long, cur) {
                            QueueClass::Expedited => stats.class_counts.expedited += 1,
                            QueueClass::Deferred => stats.class_counts.deferred += 1,
                            QueueClass::Normal => stats.class_counts.normal += 1,
                        }
                        stats.served_requests += 1;
                    }
                    None => stats.dropped_requests += 1,
                }
                request_counter += 1;
                next_request = request_counter as f64 * config.interarrival;
            }
        }

        // 6. per-tick series, sampled at the end of the tick
        for &s in &servers {
            stats
                .server_load_series
                .get_mut(graph.node_name(s))
                .expect("server series")
                .push(load_models[&s].sample(t_end));
        }
        for key in &link_keys {
            stats
                .link_delay_series
                .get_mut(&link_name(key))
                .expect("link series")
                .push(link_state[key].0);
        }
        stats
            .objective_series
            .push(current.as_ref().map(|a| a.objective));
    }

    stats.delay_estimates = estimators
        .iter()
        .map(|(key, est)| {
            (
                link_name(key),
                DelaySnapshot {
                    long_term: est.long_term(),
                    current: est.current(),
                },
            )
        })
        .collect();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::canonical_graph;
    use crate::posy::{GpParams, ServerSpec, DEFAULT_BUDGET};

    fn canonical_users(n: u32) -> Vec<UserDemand> {
        (1..=n)
            .map(|id| UserDemand {
                id,
                d_max: 10.0,
                b_min: 1.0,
                b_max: 100.0,
                weight: 1.0,
                client: None,
            })
            .collect()
    }

    fn canonical_instance(users: &[UserDemand]) -> GpInstance {
        GpInstance::build(
            users.to_vec(),
            GpParams {
                alpha: 1.0,
                c_total: 100.0,
                epsilon: 0.0,
                budget: DEFAULT_BUDGET,
                servers: vec![
                    ServerSpec {
                        name: "S_A".to_string(),
                        capacity: 4.0,
                        base_load: 0.0,
                    },
                    ServerSpec {
                        name: "S_B".to_string(),
                        capacity: 4.0,
                        base_load: 0.0,
                    },
                ],
            },
        )
    }

    #[test]
    fn zero_duration_run_is_empty() {
        let graph = canonical_graph();
        let users = canonical_users(1);
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 0.0,
            ..Default::default()
        };
        let stats = run(&graph, &g, &users, &config, &[]).unwrap();
        assert_eq!(stats.ticks, 0);
        assert_eq!(stats.total_requests, 0);
        assert_eq!(stats.epochs, 0);
        assert!(stats.objective_series.is_empty());
        assert_eq!(stats.energy.total(), 0.0);
    }

    #[test]
    fn identical_inputs_give_identical_stats() {
        let graph = canonical_graph();
        let users = canonical_users(2);
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 2_000.0,
            delay_walk: Some(WalkParams {
                step: 0.05,
                min: 0.9,
                max: 1.1,
            }),
            processing_walk: Some(WalkParams {
                step: 0.1,
                min: 0.3,
                max: 0.7,
            }),
            ..Default::default()
        };
        let a = run(&graph, &g, &users, &config, &[]).unwrap();
        let b = run(&graph, &g, &users, &config, &[]).unwrap();
        assert_eq!(a, b);
        let different_seed = SimConfig {
            seed: 43,
            ..config
        };
        let c = run(&graph, &g, &users, &different_seed, &[]).unwrap();
        assert_ne!(a.link_delay_series, c.link_delay_series);
    }

    #[test]
    fn static_symmetric_traces_split_load_evenly() {
        // With two equal users and load-coupled costs, the exact solver
        // parks one user on each server every epoch.
        let graph = canonical_graph();
        let users = canonical_users(2);
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 2_000.0,
            ..Default::default()
        };
        let stats = run(&graph, &g, &users, &config, &[]).unwrap();
        assert!(stats.served_requests >= 190);
        let fractions = stats.selection_fractions();
        assert!((fractions["S_A"] - 0.5).abs() <= 0.01, "{fractions:?}");
        assert!((fractions["S_B"] - 0.5).abs() <= 0.01, "{fractions:?}");
        let total: f64 = fractions.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn energy_ledger_matches_served_paths() {
        let graph = canonical_graph();
        let users = canonical_users(2);
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 1_000.0,
            ..Default::default()
        };
        let stats = run(&graph, &g, &users, &config, &[]).unwrap();
        // canonical route energies: 4 units via S_A, 3 units via S_B
        let expected = stats.selection_counts["S_A"] as f64 * 4.0
            + stats.selection_counts["S_B"] as f64 * 3.0;
        assert!((stats.energy.total() - expected).abs() < 1e-9);
    }

    #[test]
    fn infeasible_epochs_drop_requests() {
        let graph = canonical_graph();
        let mut users = canonical_users(1);
        users[0].d_max = 0.5; // both routes are slower than this
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 500.0,
            ..Default::default()
        };
        let stats = run(&graph, &g, &users, &config, &[]).unwrap();
        assert_eq!(stats.served_requests, 0);
        assert_eq!(stats.dropped_requests, stats.total_requests);
        assert_eq!(stats.infeasible_epochs, stats.epochs);
        assert!(stats.total_requests > 0);
    }

    #[test]
    fn trace_events_override_generators() {
        let graph = canonical_graph();
        let users = canonical_users(1);
        let g = canonical_instance(&users);
        let config = SimConfig {
            duration: 100.0,
            delay_walk: Some(WalkParams {
                step: 0.2,
                min: 0.5,
                max: 1.5,
            }),
            ..Default::default()
        };
        // Pin one link's delay by trace; the walk must leave it alone.
        let traces = vec![TraceEvent {
            time: 0.0,
            target: "C->R1".to_string(),
            field: TraceField::Delay,
            value: 7.5,
        }];
        let stats = run(&graph, &g, &users, &config, &traces).unwrap();
        let series = &stats.link_delay_series["C->R1"];
        assert!(series.iter().all(|&v| v == 7.5), "{series:?}");
        // an untraced link still walks
        let walked = &stats.link_delay_series["R1->R4"];
        assert!(walked.iter().any(|&v| v != walked[0]));
    }

    #[test]
    fn unsorted_traces_are_rejected() {
        let graph = canonical_graph();
        let users = canonical_users(1);
        let g = canonical_instance(&users);
        let traces = vec![
            TraceEvent {
                time: 10.0,
                target: "C->R1".to_string(),
                field: TraceField::Delay,
                value: 1.0,
            },
            TraceEvent {
                time: 5.0,
                target: "C->R1".to_string(),
                field: TraceField::Delay,
                value: 2.0,
            },
        ];
        let err = run(&graph, &g, &users, &SimConfig::default(), &traces).unwrap_err();
        assert!(matches!(err, SimError::TraceParse { .. }));
    }

    #[test]
    fn config_validation_catches_bad_periods() {
        let config = SimConfig {
            reoptimize_period: 15.0,
            tick: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            config.validate(),
            Err(SimError::InvalidConfig(_))
        ));
        let config = SimConfig {
            duration: 5.0,
            tick: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            config.validate(),
            Err(SimError::InvalidConfig(_))
        ));
    }
}
