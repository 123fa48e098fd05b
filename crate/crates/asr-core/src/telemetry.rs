//! Time-varying measurement models: smoothed delay estimation,
//! expedited/deferred packet classification, windowed server-load
//! measurement, and per-node energy accounting.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::netmodel::{NetError, NetworkGraph, Path};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("delay sample must be non-negative, got {0}")]
    NegativeSample(f64),
    #[error("estimator has not seen a sample yet")]
    Uninitialized,
    #[error("load window must be positive, got {0}")]
    NonPositiveWindow(f64),
}

/// Two views of a path's delay: a smoothed long-term estimate and the most
/// recent sample. `beta` is the memory of the smoothing:
/// `long_term' = beta * long_term + (1 - beta) * sample`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimator {
    long_term: f64,
    current: f64,
    beta: f64,
    samples: u64,
}

pub const DEFAULT_BETA: f64 = 0.9;

impl DelayEstimator {
    /// `beta` must lie in (0, 1]; values outside are clamped into it.
    pub fn new(beta: f64) -> Self {
        DelayEstimator {
            long_term: 0.0,
            current: 0.0,
            beta: beta.clamp(f64::MIN_POSITIVE, 1.0),
            samples: 0,
        }
    }

    pub fn long_term(&self) -> f64 {
        self.long_term
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Folds one sample in. The first sample seeds the long-term estimate
    /// directly so that it is always a convex combination of observed
    /// samples; afterwards it decays geometrically with factor `beta`.
    pub fn update(&mut self, sample: f64) -> Result<(), TelemetryError> {
        if sample < 0.0 || !sample.is_finite() {
            return Err(TelemetryError::NegativeSample(sample));
        }
        if self.samples == 0 {
            self.long_term = sample;
        } else {
            self.long_term = self.beta * self.long_term + (1.0 - self.beta) * sample;
        }
        self.current = sample;
        self.samples += 1;
        Ok(())
    }
}

/// Forwarding treatment for a packet given the delay picture of its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QueueClass {
    /// Path looks better than usual: long-term estimate above the current
    /// sample, safe to push through immediately.
    Expedited,
    /// Path looks worse than usual: hold in a deferred queue until the
    /// metric improves.
    Deferred,
    /// No signal either way.
    Normal,
}

impl fmt::Display for QueueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueueClass::Expedited => write!(f, "expedited"),
            QueueClass::Deferred => write!(f, "deferred"),
            QueueClass::Normal => write!(f, "normal"),
        }
    }
}

/// Classification on raw (long-term, current) delay values.
pub fn classify(long_term: f64, current: f64) -> QueueClass {
    if long_term > current {
        QueueClass::Expedited
    } else if current > long_term {
        QueueClass::Deferred
    } else {
        QueueClass::Normal
    }
}

/// Classifies a packet from an estimator that has seen at least one sample.
pub fn classify_packet(est: &DelayEstimator) -> Result<QueueClass, TelemetryError> {
    if est.samples == 0 {
        return Err(TelemetryError::Uninitialized);
    }
    Ok(classify(est.long_term, est.current))
}

/// Server load emulated through request processing time: utilization is
/// the busy time inside a trailing window divided by the window length.
/// Overlapping requests can push it past 1.
#[derive(Debug, Clone)]
pub struct ServerLoadModel {
    window: f64,
    /// Current per-request processing delay in ms; trace- or
    /// generator-driven over time.
    processing_delay: f64,
    /// Completed busy intervals as (start, end) pairs, oldest first.
    busy: VecDeque<(f64, f64)>,
}

pub const DEFAULT_LOAD_WINDOW: f64 = 100.0;

impl ServerLoadModel {
    pub fn new(window: f64, processing_delay: f64) -> Result<Self, TelemetryError> {
        if window <= 0.0 || !window.is_finite() {
            return Err(TelemetryError::NonPositiveWindow(window));
        }
        Ok(ServerLoadModel {
            window,
            processing_delay,
            busy: VecDeque::new(),
        })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn processing_delay(&self) -> f64 {
        self.processing_delay
    }

    pub fn set_processing_delay(&mut self, delay: f64) {
        self.processing_delay = delay.max(0.0);
    }

    /// Serves one request arriving at `now`, occupying the server for the
    /// current processing delay. Intervals that can no longer intersect a
    /// trailing window are dropped.
    pub fn serve(&mut self, now: f64) {
        self.busy.push_back((now, now + self.processing_delay));
        while let Some(&(_, end)) = self.busy.front() {
            if end < now - self.window {
                self.busy.pop_front();
            } else {
                break;
            }
        }
    }

    /// Busy time inside `[now - window, now]` over the window length.
    pub fn sample(&self, now: f64) -> f64 {
        let from = now - self.window;
        let mut busy = 0.0;
        for &(start, end) in &self.busy {
            let lo = start.max(from);
            let hi = end.min(now);
            if hi > lo {
                busy += hi - lo;
            }
        }
        (busy / self.window).max(0.0)
    }
}

/// Accumulated sending energy per node. Every hop charges the hop's source
/// node with the traversed link's energy, so the ledger total over all
/// nodes equals the sum of path energies recorded into it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    accumulated: BTreeMap<String, f64>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        EnergyLedger::default()
    }

    /// Pre-seeds entries at zero so reports list every node of interest
    /// even before any traffic flows.
    pub fn with_nodes<I: IntoIterator<Item = String>>(nodes: I) -> Self {
        EnergyLedger {
            accumulated: nodes.into_iter().map(|n| (n, 0.0)).collect(),
        }
    }

    /// Adds energy to one node's account directly.
    pub fn charge(&mut self, node: &str, energy: f64) {
        *self.accumulated.entry(node.to_string()).or_insert(0.0) += energy;
    }

    /// Charges each hop's source node with that link's energy.
    pub fn record_traversal(&mut self, path: &Path, graph: &NetworkGraph) -> Result<(), NetError> {
        if path.nodes().len() < 2 {
            return Err(NetError::EmptyPath);
        }
        // Validate the whole path before mutating anything.
        let mut increments = Vec::with_capacity(path.hops());
        for (src, dst) in path.hops_iter() {
            let link = graph.link(src, dst).ok_or_else(|| NetError::UnknownLink {
                src: graph.node_name(src).to_string(),
                dst: graph.node_name(dst).to_string(),
            })?;
            increments.push((graph.node_name(src).to_string(), link.energy));
        }
        for (node, energy) in increments {
            *self.accumulated.entry(node).or_insert(0.0) += energy;
        }
        Ok(())
    }

    pub fn energy(&self, node: &str) -> f64 {
        self.accumulated.get(node).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.accumulated.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.accumulated.iter().map(|(k, &v)| (k.as_str(), v))
    }
}
