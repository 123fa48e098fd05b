//! Experiment configuration: a sectioned plain-text (TOML) document
//! declaring the network, the users, the problem parameters, named
//! perturbation vectors, and the simulation settings.
//!
//! See the repository README for the full grammar. Parse failures carry
//! line numbers; semantic problems (dangling references, sign violations,
//! non-standard-form programs) are collected into a validation error that
//! lists every finding.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path as FsPath;

use serde::Deserialize;
use thiserror::Error;

use crate::netmodel::{Link, NetworkGraph, NodeRole};
use crate::optimizer::UserDemand;
use crate::posy::{
    validate_standard_form, ConstraintFamily, GpInstance, GpParams, ServerSpec, DEFAULT_BUDGET,
};
use crate::sim::{SimConfig, WalkParams};
use crate::telemetry::{DEFAULT_BETA, DEFAULT_LOAD_WINDOW};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid configuration:\n{}", findings.iter().map(|f| format!("  - {f}")).collect::<Vec<_>>().join("\n"))]
    Invalid { findings: Vec<String> },
}

/// A fully resolved experiment: the graph, the demands, the built program,
/// the named perturbations, and the simulator settings.
#[derive(Debug, Clone)]
pub struct ConfigDocument {
    pub graph: NetworkGraph,
    pub users: Vec<UserDemand>,
    pub instance: GpInstance,
    pub perturbations: BTreeMap<String, BTreeMap<ConstraintFamily, f64>>,
    pub sim: SimConfig,
}

impl ConfigDocument {
    /// Expands a named perturbation into a full per-constraint vector.
    pub fn perturbation_vector(&self, name: &str) -> Option<Vec<f64>> {
        self.perturbations
            .get(name)
            .map(|factors| self.instance.family_perturbation(factors))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    network: RawNetwork,
    #[serde(default)]
    users: Vec<RawUser>,
    problem: RawProblem,
    #[serde(default)]
    perturbation: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    sim: RawSim,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    nodes: Vec<RawNode>,
    links: Vec<RawLink>,
    max_hops: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    role: NodeRole,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    src: String,
    dst: String,
    bandwidth: f64,
    delay: f64,
    #[serde(default = "default_energy")]
    energy: f64,
    /// Estimator smoothing override for this link.
    beta: Option<f64>,
}

fn default_energy() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    id: u32,
    d_max: f64,
    b_min: f64,
    b_max: f64,
    #[serde(default = "default_weight")]
    weight: f64,
    client: Option<String>,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default = "default_alpha")]
    alpha: f64,
    c_total: f64,
    #[serde(default)]
    epsilon: f64,
    #[serde(default = "default_budget")]
    budget: u64,
    server_capacity: BTreeMap<String, f64>,
    #[serde(default)]
    base_load: BTreeMap<String, f64>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default = "default_duration")]
    duration_ms: f64,
    #[serde(default = "default_tick")]
    tick_ms: f64,
    #[serde(default = "default_interarrival")]
    interarrival_ms: f64,
    #[serde(default = "default_reopt")]
    reoptimize_period_ms: f64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_window")]
    load_window_ms: f64,
    delay_walk: Option<RawWalk>,
    processing_walk: Option<RawWalk>,
}

impl Default for RawSim {
    fn default() -> Self {
        RawSim {
            duration_ms: default_duration(),
            tick_ms: default_tick(),
            interarrival_ms: default_interarrival(),
            reoptimize_period_ms: default_reopt(),
            seed: default_seed(),
            beta: default_beta(),
            load_window_ms: default_window(),
            delay_walk: None,
            processing_walk: None,
        }
    }
}

fn default_duration() -> f64 {
    60_000.0
}
fn default_tick() -> f64 {
    10.0
}
fn default_interarrival() -> f64 {
    10.0
}
fn default_reopt() -> f64 {
    100.0
}
fn default_seed() -> u64 {
    42
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_window() -> f64 {
    DEFAULT_LOAD_WINDOW
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWalk {
    step: f64,
    min: f64,
    max: f64,
}

impl From<&RawWalk> for WalkParams {
    fn from(raw: &RawWalk) -> Self {
        WalkParams {
            step: raw.step,
            min: raw.min,
            max: raw.max,
        }
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: &FsPath) -> Result<ConfigDocument, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ConfigDocument, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e
            .span()
            .map(|span| text[..span.start.min(text.len())].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ConfigDocument, ConfigError> {
    let mut findings = Vec::new();

    let nodes: Vec<(String, NodeRole)> = raw
        .network
        .nodes
        .iter()
        .map(|n| (n.name.clone(), n.role))
        .collect();
    let links: Vec<(String, String, Link)> = raw
        .network
        .links
        .iter()
        .map(|l| {
            (
                l.src.clone(),
                l.dst.clone(),
                Link::new(l.bandwidth, l.delay, l.energy),
            )
        })
        .collect();
    let graph = match NetworkGraph::build(nodes, links) {
        Ok(g) => match raw.network.max_hops {
            Some(h) if h == 0 => {
                findings.push("network.max_hops must be at least 1".to_string());
                g
            }
            Some(h) => g.with_max_hops(h),
            None => g,
        },
        Err(e) => {
            findings.push(e.to_string());
            return Err(ConfigError::Invalid { findings });
        }
    };

    let mut users = Vec::with_capacity(raw.users.len());
    for u in &raw.users {
        if let Some(client) = &u.client {
            match graph.lookup(client) {
                Ok(id) if graph.role(id) == NodeRole::Client => {}
                Ok(_) => findings.push(format!("user {} client `{client}` is not a client", u.id)),
                Err(e) => findings.push(format!("user {}: {e}", u.id)),
            }
        }
        users.push(UserDemand {
            id: u.id,
            d_max: u.d_max,
            b_min: u.b_min,
            b_max: u.b_max,
            weight: u.weight,
            client: u.client.clone(),
        });
    }
    let mut ids: Vec<u32> = users.iter().map(|u| u.id).collect();
    ids.sort_unstable();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] {
            findings.push(format!("duplicate user id {}", pair[0]));
        }
    }

    // Every server needs a capacity; capacities for unknown servers are
    // misconfigurations too.
    let server_names: Vec<String> = graph
        .servers()
        .map(|s| graph.node_name(s).to_string())
        .collect();
    for name in &server_names {
        if !raw.problem.server_capacity.contains_key(name) {
            findings.push(format!("server `{name}` has no capacity in [problem.server_capacity]"));
        }
    }
    for name in raw.problem.server_capacity.keys() {
        if !server_names.contains(name) {
            findings.push(format!("capacity given for unknown server `{name}`"));
        }
    }
    for name in raw.problem.base_load.keys() {
        if !server_names.contains(name) {
            findings.push(format!("base load given for unknown server `{name}`"));
        }
    }

    let servers: Vec<ServerSpec> = server_names
        .iter()
        .map(|name| ServerSpec {
            name: name.clone(),
            capacity: raw
                .problem
                .server_capacity
                .get(name)
                .copied()
                .unwrap_or(1.0),
            base_load: raw.problem.base_load.get(name).copied().unwrap_or(0.0),
        })
        .collect();

    let params = GpParams {
        alpha: raw.problem.alpha,
        c_total: raw.problem.c_total,
        epsilon: raw.problem.epsilon,
        budget: raw.problem.budget,
        servers,
    };
    let instance = GpInstance::build(users.clone(), params);
    let report = validate_standard_form(&instance);
    findings.extend(report.violations.iter().cloned());

    let mut perturbations = BTreeMap::new();
    for (name, families) in &raw.perturbation {
        let mut resolved = BTreeMap::new();
        for (family, &factor) in families {
            match ConstraintFamily::parse(family) {
                Some(f) => {
                    if factor <= 0.0 || !factor.is_finite() {
                        findings.push(format!(
                            "perturbation `{name}` sets {family} to {factor}; factors must be positive"
                        ));
                    }
                    resolved.insert(f, factor);
                }
                None => findings.push(format!(
                    "perturbation `{name}` names unknown family `{family}` \
                     (expected load, energy, delay, bandwidth_min or bandwidth_max)"
                )),
            }
        }
        perturbations.insert(name.clone(), resolved);
    }

    let link_beta: BTreeMap<String, f64> = raw
        .network
        .links
        .iter()
        .filter_map(|l| l.beta.map(|b| (format!("{}->{}", l.src, l.dst), b)))
        .collect();
    let sim = SimConfig {
        duration: raw.sim.duration_ms,
        tick: raw.sim.tick_ms,
        interarrival: raw.sim.interarrival_ms,
        reoptimize_period: raw.sim.reoptimize_period_ms,
        seed: raw.sim.seed,
        delay_walk: raw.sim.delay_walk.as_ref().map(WalkParams::from),
        processing_walk: raw.sim.processing_walk.as_ref().map(WalkParams::from),
        beta: raw.sim.beta,
        link_beta,
        load_window: raw.sim.load_window_ms,
    };
    if let Err(e) = sim.validate() {
        findings.push(e.to_string());
    }

    if findings.is_empty() {
        Ok(ConfigDocument {
            graph,
            users,
            instance,
            perturbations,
            sim,
        })
    } else {
        Err(ConfigError::Invalid { findings })
    }
}

impl fmt::Display for ConfigDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "network: {} nodes, {} links; {} users; {} servers; {} named perturbations",
            self.graph.node_count(),
            self.graph.links().count(),
            self.users.len(),
            self.instance.params.servers.len(),
            self.perturbations.len()
        )
    }
}
