//! Joint per-user path and server assignment.
//!
//! Every user picks one candidate path (which fixes its server); the
//! objective is the sum of per-user monomials `alpha * d * c * s / b`
//! where `s` is the projected utilization of the chosen server under the
//! whole candidate assignment, so users are coupled through load. The
//! exact solver enumerates the cross-product of per-user candidates up to
//! a budget; the greedy solver assigns users in id order and scales past
//! the budget at the cost of optimality.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::netmodel::{
    enumerate_paths, NetError, NetworkGraph, NodeId, NodeRole, Path, PathMetrics,
};
use crate::posy::{ConstraintFamily, GpInstance, PosyError};
use crate::telemetry::EnergyLedger;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no feasible assignment; binding constraints: {}", binding.join(", "))]
    Infeasible { binding: Vec<String> },
    #[error("{required} candidate assignments exceed the enumeration budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("assignment is missing user {user}")]
    IncompleteAssignment { user: u32 },
    #[error("user {user} path ends at `{found}` but is assigned to `{assigned}`")]
    PathServerMismatch {
        user: u32,
        found: String,
        assigned: String,
    },
    #[error("{what} must be positive, got {value}")]
    NonPositiveMetric { what: String, value: f64 },
    #[error("server `{0}` has no capacity entry")]
    UnknownServer(String),
    #[error("user {user} has no client set and the graph has {clients} clients")]
    AmbiguousClient { user: u32, clients: usize },
    #[error("duplicate user id {0}")]
    DuplicateUser(u32),
    #[error("the users passed to the solver differ from the ones the program was built for")]
    UserSetMismatch,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Posy(#[from] PosyError),
}

/// A user's service demand and constraint bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDemand {
    pub id: u32,
    /// Delay ceiling in ms (strict).
    pub d_max: f64,
    /// Bandwidth floor in Mb/s.
    pub b_min: f64,
    /// Bandwidth ceiling in Mb/s.
    pub b_max: f64,
    /// Contribution to the chosen server's utilization, relative to the
    /// server's capacity.
    pub weight: f64,
    /// Originating client node; may be omitted when the graph has exactly
    /// one client.
    pub client: Option<String>,
}

/// One enumerated path option for a user, with its load-independent
/// metrics precomputed.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub path: Path,
    pub server: NodeId,
    /// Index of the server in `GpParams::servers`.
    pub server_slot: usize,
    pub delay: f64,
    pub bandwidth: f64,
    pub energy: f64,
}

/// A user's resolved choice inside an [`Assignment`].
#[derive(Debug, Clone)]
pub struct Choice {
    pub candidate_index: usize,
    pub path: Path,
    pub server: NodeId,
    /// Metrics at solve time, including the projected server load.
    pub metrics: PathMetrics,
    pub objective_term: f64,
}

/// The solved per-user mapping with its objective and feasibility record.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub choices: BTreeMap<u32, Choice>,
    pub objective: f64,
    pub report: ConstraintReport,
}

impl Assignment {
    /// Fraction of users assigned to each server (by node name).
    pub fn selection_fractions(&self, graph: &NetworkGraph) -> BTreeMap<String, f64> {
        let mut counts: BTreeMap<String, f64> = graph
            .servers()
            .map(|s| (graph.node_name(s).to_string(), 0.0))
            .collect();
        for choice in self.choices.values() {
            *counts
                .entry(graph.node_name(choice.server).to_string())
                .or_insert(0.0) += 1.0;
        }
        let n = self.choices.len() as f64;
        if n > 0.0 {
            for v in counts.values_mut() {
                *v /= n;
            }
        }
        counts
    }

    /// Energy charged per node if every user's path were traversed once.
    pub fn energy_ledger(&self, graph: &NetworkGraph) -> Result<EnergyLedger, NetError> {
        let mut ledger =
            EnergyLedger::with_nodes(graph.nodes().map(|(_, n)| n.name.clone()));
        for choice in self.choices.values() {
            ledger.record_traversal(&choice.path, graph)?;
        }
        Ok(ledger)
    }
}

/// One evaluated constraint row: left-hand value against its perturbed
/// bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub label: String,
    pub family: ConstraintFamily,
    pub user: Option<u32>,
    pub lhs: f64,
    pub bound: f64,
    pub strict: bool,
    pub pass: bool,
}

/// Feasibility record for one assignment: every constraint row in program
/// order, plus the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    pub feasible: bool,
}

impl ConstraintReport {
    pub fn binding(&self) -> Vec<&ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn family_pass(&self, family: ConstraintFamily) -> bool {
        self.checks
            .iter()
            .filter(|c| c.family == family)
            .all(|c| c.pass)
    }
}

/// The objective contribution of one user: `alpha * d * c * s / b`.
pub fn user_objective_term(metrics: &PathMetrics, alpha: f64) -> Result<f64, SolveError> {
    let fields = [
        ("alpha", alpha),
        ("delay", metrics.delay),
        ("energy", metrics.energy),
        ("server load", metrics.server_load),
        ("bandwidth", metrics.bandwidth),
    ];
    for (what, value) in fields {
        if value <= 0.0 || !value.is_finite() {
            return Err(SolveError::NonPositiveMetric {
                what: what.to_string(),
                value,
            });
        }
    }
    Ok(alpha * metrics.delay * metrics.energy * metrics.server_load / metrics.bandwidth)
}

/// Enumerates and scores the candidate paths of every user, in the same
/// id-sorted order as `users`.
pub fn candidate_paths(
    graph: &NetworkGraph,
    users: &[UserDemand],
    g: &GpInstance,
) -> Result<Vec<Vec<Candidate>>, SolveError> {
    let clients: Vec<NodeId> = graph.clients().collect();
    let mut all = Vec::with_capacity(users.len());
    for user in users {
        let client = match &user.client {
            Some(name) => {
                let id = graph.lookup(name)?;
                if graph.role(id) != NodeRole::Client {
                    return Err(NetError::NotAClient(name.clone()).into());
                }
                id
            }
            None if clients.len() == 1 => clients[0],
            None => {
                return Err(SolveError::AmbiguousClient {
                    user: user.id,
                    clients: clients.len(),
                })
            }
        };
        let paths = enumerate_paths(graph, client)?;
        let mut candidates = Vec::with_capacity(paths.len());
        for path in paths {
            let server = path.last().expect("enumerated paths are non-empty");
            let server_name = graph.node_name(server);
            let server_slot = g
                .params
                .servers
                .iter()
                .position(|s| s.name == server_name)
                .ok_or_else(|| SolveError::UnknownServer(server_name.to_string()))?;
            candidates.push(Candidate {
                delay: graph.path_delay(&path)?,
                bandwidth: graph.path_bandwidth(&path)?,
                energy: graph.path_energy(&path)?,
                path,
                server,
                server_slot,
            });
        }
        all.push(candidates);
    }
    Ok(all)
}

/// Projected utilization per server slot: measured base load plus the
/// assigned demand weight over capacity.
fn projected_loads(g: &GpInstance, users: &[UserDemand], picks: &[&Candidate]) -> Vec<f64> {
    let mut loads: Vec<f64> = g.params.servers.iter().map(|s| s.base_load).collect();
    for (user, cand) in users.iter().zip(picks) {
        loads[cand.server_slot] += user.weight / g.params.servers[cand.server_slot].capacity;
    }
    loads
}

/// Evaluates the five constraint families for given per-user metrics and
/// server loads, in the program's constraint order.
fn build_report(
    g: &GpInstance,
    per_user: &BTreeMap<u32, (f64, f64, f64)>, // id -> (delay, bandwidth, energy)
    loads: &[f64],
) -> ConstraintReport {
    let epsilon = g.params.epsilon;
    let r = g.params.servers.len() as f64;
    let total_energy: f64 = per_user.values().map(|&(_, _, c)| c).sum();
    let mut checks = Vec::with_capacity(g.constraints.len());
    for (i, c) in g.constraints.iter().enumerate() {
        let lhs = match (c.family, c.user) {
            (ConstraintFamily::Load, _) => loads.iter().sum::<f64>() / r,
            (ConstraintFamily::Energy, _) => total_energy / g.params.c_total,
            (family, Some(id)) => {
                let &(delay, bandwidth, _) = &per_user[&id];
                let user = g
                    .users
                    .iter()
                    .find(|u| u.id == id)
                    .expect("constraint references a known user");
                match family {
                    ConstraintFamily::Delay => delay / user.d_max,
                    ConstraintFamily::BandwidthMin => user.b_min / bandwidth,
                    ConstraintFamily::BandwidthMax => bandwidth / user.b_max,
                    _ => unreachable!("global families carry no user"),
                }
            }
            (family, None) => unreachable!("{family} constraint without a user"),
        };
        let bound = g.perturbation[i];
        let strict = c.family.is_strict();
        let pass = if strict {
            lhs < bound - epsilon
        } else {
            lhs <= bound
        };
        checks.push(ConstraintCheck {
            label: c.label.clone(),
            family: c.family,
            user: c.user,
            lhs,
            bound,
            strict,
            pass,
        });
    }
    let feasible = checks.iter().all(|c| c.pass);
    ConstraintReport { checks, feasible }
}

struct Evaluated {
    objective: f64,
    terms: Vec<f64>,
    loads: Vec<f64>,
    report: ConstraintReport,
}

/// Scores one full candidate selection. `Ok(None)` means the selection is
/// outside the objective's domain (a non-positive metric) and can never be
/// returned, which the solvers treat like infeasibility.
fn evaluate(
    g: &GpInstance,
    users: &[UserDemand],
    picks: &[&Candidate],
) -> Option<Evaluated> {
    let loads = projected_loads(g, users, picks);
    let mut terms = Vec::with_capacity(users.len());
    let mut per_user = BTreeMap::new();
    let mut objective = 0.0;
    for (user, cand) in users.iter().zip(picks) {
        let metrics = PathMetrics {
            delay: cand.delay,
            bandwidth: cand.bandwidth,
            energy: cand.energy,
            server_load: loads[cand.server_slot],
        };
        let term = user_objective_term(&metrics, g.params.alpha).ok()?;
        objective += term;
        terms.push(term);
        per_user.insert(user.id, (cand.delay, cand.bandwidth, cand.energy));
    }
    let report = build_report(g, &per_user, &loads);
    Some(Evaluated {
        objective,
        terms,
        loads,
        report,
    })
}

/// Sorts by id, rejects duplicates, and insists the list matches the
/// demands the program was built from, so the constraint coefficients and
/// the solver's arithmetic cannot drift apart.
fn sorted_users(users: &[UserDemand], g: &GpInstance) -> Result<Vec<UserDemand>, SolveError> {
    let mut sorted = users.to_vec();
    sorted.sort_by_key(|u| u.id);
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(SolveError::DuplicateUser(pair[0].id));
        }
    }
    if sorted != g.users {
        return Err(SolveError::UserSetMismatch);
    }
    Ok(sorted)
}

fn assemble(
    users: &[UserDemand],
    cands: &[Vec<Candidate>],
    selection: &[usize],
    eval: Evaluated,
) -> Assignment {
    let mut choices = BTreeMap::new();
    for (i, (user, &idx)) in users.iter().zip(selection).enumerate() {
        let cand = &cands[i][idx];
        choices.insert(
            user.id,
            Choice {
                candidate_index: idx,
                path: cand.path.clone(),
                server: cand.server,
                metrics: PathMetrics {
                    delay: cand.delay,
                    bandwidth: cand.bandwidth,
                    energy: cand.energy,
                    server_load: eval.loads[cand.server_slot],
                },
                objective_term: eval.terms[i],
            },
        );
    }
    Assignment {
        choices,
        objective: eval.objective,
        report: eval.report,
    }
}

/// Exhaustive minimization over the cross-product of per-user candidates.
///
/// Iterates selections in lexicographic order of the candidate-index
/// vector and keeps the first strict minimum, so ties resolve to the
/// lexicographically smallest vector. Errors with `BudgetExceeded` when
/// the cross-product outgrows `params.budget`, and `Infeasible` (carrying
/// the closest-to-feasible constraint labels) when no selection passes.
pub fn solve_exact(
    g: &GpInstance,
    graph: &NetworkGraph,
    users: &[UserDemand],
) -> Result<Assignment, SolveError> {
    let users = sorted_users(users, g)?;
    let cands = candidate_paths(graph, &users, g)?;
    let mut required: u128 = 1;
    for c in &cands {
        required = required.saturating_mul(c.len().max(1) as u128);
    }
    if required > g.params.budget as u128 {
        return Err(SolveError::BudgetExceeded {
            required,
            budget: g.params.budget,
        });
    }

    let n = users.len();
    let mut selection = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>, Evaluated)> = None;
    // Track the least-violating selection for the infeasibility report.
    let mut closest: Option<(usize, Vec<String>)> = None;
    loop {
        let picks: Vec<&Candidate> = selection
            .iter()
            .enumerate()
            .map(|(i, &idx)| &cands[i][idx])
            .collect();
        if let Some(eval) = evaluate(g, &users, &picks) {
            if eval.report.feasible {
                if best.as_ref().is_none_or(|(obj, _, _)| eval.objective < *obj) {
                    best = Some((eval.objective, selection.clone(), eval));
                }
            } else {
                let failing: Vec<String> = eval
                    .report
                    .binding()
                    .iter()
                    .map(|c| c.label.clone())
                    .collect();
                if closest.as_ref().is_none_or(|(count, _)| failing.len() < *count) {
                    closest = Some((failing.len(), failing));
                }
            }
        }
        // Advance the odometer; the last user is least significant.
        let mut pos = n;
        loop {
            if pos == 0 {
                // carried past the most significant digit: done
                match best {
                    Some((_, sel, eval)) => return Ok(assemble(&users, &cands, &sel, eval)),
                    None => {
                        return Err(SolveError::Infeasible {
                            binding: closest.map(|(_, labels)| labels).unwrap_or_default(),
                        })
                    }
                }
            }
            pos -= 1;
            selection[pos] += 1;
            if selection[pos] < cands[pos].len() {
                break;
            }
            selection[pos] = 0;
        }
    }
}

/// Sequential assignment in user-id order: each user takes the feasible
/// candidate with the smallest marginal objective term given the loads
/// induced by earlier picks. Never better than [`solve_exact`], but runs
/// without an enumeration budget.
pub fn solve_greedy(
    g: &GpInstance,
    graph: &NetworkGraph,
    users: &[UserDemand],
) -> Result<Assignment, SolveError> {
    let users = sorted_users(users, g)?;
    let cands = candidate_paths(graph, &users, g)?;
    let epsilon = g.params.epsilon;
    let r = g.params.servers.len() as f64;

    let constraint_bound = |family: ConstraintFamily, user: Option<u32>| -> f64 {
        g.constraints
            .iter()
            .zip(&g.perturbation)
            .find(|(c, _)| c.family == family && c.user == user)
            .map(|(_, &u)| u)
            .unwrap_or(f64::INFINITY)
    };

    let mut loads: Vec<f64> = g.params.servers.iter().map(|s| s.base_load).collect();
    let mut energy_so_far = 0.0;
    let mut selection = Vec::with_capacity(users.len());
    for (i, user) in users.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (idx, cand) in cands[i].iter().enumerate() {
            let delay_ok = cand.delay / user.d_max
                < constraint_bound(ConstraintFamily::Delay, Some(user.id)) - epsilon;
            let bmin_ok = user.b_min / cand.bandwidth
                <= constraint_bound(ConstraintFamily::BandwidthMin, Some(user.id));
            let bmax_ok = cand.bandwidth / user.b_max
                <= constraint_bound(ConstraintFamily::BandwidthMax, Some(user.id));
            if !(delay_ok && bmin_ok && bmax_ok) {
                continue;
            }
            let projected = loads[cand.server_slot]
                + user.weight / g.params.servers[cand.server_slot].capacity;
            // Loads only grow as later users commit, so a prefix violation
            // can never recover.
            let avg_load = (loads.iter().sum::<f64>() - loads[cand.server_slot] + projected) / r;
            if avg_load >= constraint_bound(ConstraintFamily::Load, None) - epsilon {
                continue;
            }
            let energy_ratio = (energy_so_far + cand.energy) / g.params.c_total;
            if energy_ratio > constraint_bound(ConstraintFamily::Energy, None) {
                continue;
            }
            let metrics = PathMetrics {
                delay: cand.delay,
                bandwidth: cand.bandwidth,
                energy: cand.energy,
                server_load: projected,
            };
            let Ok(term) = user_objective_term(&metrics, g.params.alpha) else {
                continue;
            };
            if best.is_none_or(|(t, _)| term < t) {
                best = Some((term, idx));
            }
        }
        let Some((_, idx)) = best else {
            return Err(SolveError::Infeasible {
                binding: vec![format!("no feasible candidate for user {}", user.id)],
            });
        };
        let cand = &cands[i][idx];
        loads[cand.server_slot] += user.weight / g.params.servers[cand.server_slot].capacity;
        energy_so_far += cand.energy;
        selection.push(idx);
    }

    // Re-score under the final coupled loads so the objective is
    // comparable with the exact solver's.
    let picks: Vec<&Candidate> = selection
        .iter()
        .enumerate()
        .map(|(i, &idx)| &cands[i][idx])
        .collect();
    let eval = evaluate(g, &users, &picks).ok_or_else(|| SolveError::Infeasible {
        binding: vec!["objective undefined under final loads".to_string()],
    })?;
    if !eval.report.feasible {
        return Err(SolveError::Infeasible {
            binding: eval
                .report
                .binding()
                .iter()
                .map(|c| c.label.clone())
                .collect(),
        });
    }
    Ok(assemble(&users, &cands, &selection, eval))
}

/// Re-verifies an assignment against the program: recomputes path metrics
/// from the graph, projects server loads from the assignment itself, and
/// evaluates every constraint family against its perturbed bound.
pub fn check_feasible(
    a: &Assignment,
    g: &GpInstance,
    graph: &NetworkGraph,
) -> Result<ConstraintReport, SolveError> {
    let mut per_user = BTreeMap::new();
    let mut loads: Vec<f64> = g.params.servers.iter().map(|s| s.base_load).collect();
    for user in &g.users {
        let choice = a
            .choices
            .get(&user.id)
            .ok_or(SolveError::IncompleteAssignment { user: user.id })?;
        let end = choice.path.last().ok_or(NetError::EmptyPath)?;
        if end != choice.server {
            return Err(SolveError::PathServerMismatch {
                user: user.id,
                found: graph.node_name(end).to_string(),
                assigned: graph.node_name(choice.server).to_string(),
            });
        }
        let server_name = graph.node_name(choice.server);
        let slot = g
            .params
            .servers
            .iter()
            .position(|s| s.name == server_name)
            .ok_or_else(|| SolveError::UnknownServer(server_name.to_string()))?;
        loads[slot] += user.weight / g.params.servers[slot].capacity;
        per_user.insert(
            user.id,
            (
                graph.path_delay(&choice.path)?,
                graph.path_bandwidth(&choice.path)?,
                graph.path_energy(&choice.path)?,
            ),
        );
    }
    Ok(build_report(g, &per_user, &loads))
}

/// One row of a sensitivity sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub perturbation: Vec<f64>,
    pub outcome: Result<RowOutcome, SolveError>,
}

/// What a feasible sweep row records about its solution.
#[derive(Debug, Clone)]
pub struct RowOutcome {
    pub assignment: Assignment,
    pub objective: f64,
    pub selection_fractions: BTreeMap<String, f64>,
    pub energy: EnergyLedger,
    pub used_exact: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Solves the program once per perturbation vector (exact when within
/// budget, greedy past it) and records per-row outcomes in grid order.
/// Row failures (infeasible, bad perturbation) are recorded, not thrown.
pub fn sensitivity_sweep(
    g: &GpInstance,
    graph: &NetworkGraph,
    users: &[UserDemand],
    u_grid: &[Vec<f64>],
) -> SweepReport {
    let mut rows = Vec::with_capacity(u_grid.len());
    for u in u_grid {
        let outcome = sweep_row(g, graph, users, u);
        rows.push(SweepRow {
            perturbation: u.clone(),
            outcome,
        });
    }
    SweepReport { rows }
}

fn sweep_row(
    g: &GpInstance,
    graph: &NetworkGraph,
    users: &[UserDemand],
    u: &[f64],
) -> Result<RowOutcome, SolveError> {
    let perturbed = crate::posy::perturb(g, u)?;
    let (assignment, used_exact) = match solve_exact(&perturbed, graph, users) {
        Ok(a) => (a, true),
        Err(SolveError::BudgetExceeded { .. }) => (solve_greedy(&perturbed, graph, users)?, false),
        Err(e) => return Err(e),
    };
    let selection_fractions = assignment.selection_fractions(graph);
    let energy = assignment.energy_ledger(graph)?;
    Ok(RowOutcome {
        objective: assignment.objective,
        assignment,
        selection_fractions,
        energy,
        used_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Link, NetworkGraph, NodeRole};
    use crate::posy::{GpParams, ServerSpec, DEFAULT_BUDGET};

    fn user(id: u32) -> UserDemand {
        UserDemand {
            id,
            d_max: 100.0,
            b_min: 1.0,
            b_max: 100.0,
            weight: 1.0,
            client: None,
        }
    }

    fn params_for(graph: &NetworkGraph, capacity: f64) -> GpParams {
        GpParams {
            alpha: 1.0,
            c_total: 1000.0,
            epsilon: 0.0,
            budget: DEFAULT_BUDGET,
            servers: graph
                .servers()
                .map(|s| ServerSpec {
                    name: graph.node_name(s).to_string(),
                    capacity,
                    base_load: 0.0,
                })
                .collect(),
        }
    }

    /// Two disjoint routes with the delays/energies from the route-choice
    /// example: route A (d=6, c=4) and route B (d=4, c=3), both bw 10.
    fn two_route_graph() -> NetworkGraph {
        let nodes = vec![
            ("C".to_string(), NodeRole::Client),
            ("Ra1".to_string(), NodeRole::Router),
            ("Ra2".to_string(), NodeRole::Router),
            ("Ra3".to_string(), NodeRole::Router),
            ("Rb1".to_string(), NodeRole::Router),
            ("Rb2".to_string(), NodeRole::Router),
            ("SA".to_string(), NodeRole::Server),
            ("SB".to_string(), NodeRole::Server),
        ];
        let links = vec![
            ("C", "Ra1", Link::new(10.0, 1.5, 1.0)),
            ("Ra1", "Ra2", Link::new(10.0, 1.5, 1.0)),
            ("Ra2", "Ra3", Link::new(10.0, 1.5, 1.0)),
            ("Ra3", "SA", Link::new(10.0, 1.5, 1.0)),
            ("C", "Rb1", Link::new(10.0, 4.0 / 3.0, 1.0)),
            ("Rb1", "Rb2", Link::new(10.0, 4.0 / 3.0, 1.0)),
            ("Rb2", "SB", Link::new(10.0, 4.0 / 3.0, 1.0)),
        ];
        NetworkGraph::build(
            nodes,
            links
                .into_iter()
                .map(|(a, b, l)| (a.to_string(), b.to_string(), l))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn objective_term_arithmetic() {
        let m = PathMetrics {
            delay: 10.0,
            bandwidth: 5.0,
            energy: 3.0,
            server_load: 0.5,
        };
        assert_eq!(user_objective_term(&m, 1.0).unwrap(), 3.0);
        assert_eq!(user_objective_term(&m, 2.0).unwrap(), 6.0);
    }

    #[test]
    fn objective_term_rejects_zero_bandwidth() {
        let m = PathMetrics {
            delay: 10.0,
            bandwidth: 0.0,
            energy: 3.0,
            server_load: 0.5,
        };
        assert!(matches!(
            user_objective_term(&m, 1.0),
            Err(SolveError::NonPositiveMetric { .. })
        ));
    }

    #[test]
    fn exact_prefers_cheaper_route() {
        // route A term: 6*4*0.5/10 = 1.2, route B term: 4*3*0.5/10 = 0.6
        let graph = two_route_graph();
        let users = vec![user(1)];
        let g = GpInstance::build(users.clone(), params_for(&graph, 2.0));
        let a = solve_exact(&g, &graph, &users).unwrap();
        let choice = &a.choices[&1];
        assert_eq!(graph.node_name(choice.server), "SB");
        assert!((a.objective - 0.6).abs() < 1e-12, "objective {}", a.objective);
        assert!(a.report.feasible);
    }

    #[test]
    fn exact_tie_breaks_to_lower_path_index() {
        // Two routes with identical metrics: the lower path index wins.
        let nodes = vec![
            ("C".to_string(), NodeRole::Client),
            ("R1".to_string(), NodeRole::Router),
            ("R2".to_string(), NodeRole::Router),
            ("SA".to_string(), NodeRole::Server),
            ("SB".to_string(), NodeRole::Server),
        ];
        let l = Link::unit_energy(10.0, 1.0);
        let links = vec![
            ("C".to_string(), "R1".to_string(), l),
            ("R1".to_string(), "SA".to_string(), l),
            ("C".to_string(), "R2".to_string(), l),
            ("R2".to_string(), "SB".to_string(), l),
        ];
        let tie_graph = NetworkGraph::build(nodes, links).unwrap();
        let users = vec![user(1)];
        let g = GpInstance::build(users.clone(), params_for(&tie_graph, 2.0));
        let a = solve_exact(&g, &tie_graph, &users).unwrap();
        assert_eq!(a.choices[&1].candidate_index, 0);
        assert_eq!(tie_graph.node_name(a.choices[&1].server), "SA");
    }

    #[test]
    fn exact_reports_infeasible_when_delay_unreachable() {
        let graph = two_route_graph();
        let mut u = user(1);
        u.d_max = 2.0; // both routes have delay >= 4
        let users = vec![u];
        let g = GpInstance::build(users.clone(), params_for(&graph, 2.0));
        let err = solve_exact(&g, &graph, &users).unwrap_err();
        match err {
            SolveError::Infeasible { binding } => {
                assert!(binding.iter().any(|l| l.contains("delay")), "{binding:?}");
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn exact_respects_budget() {
        let graph = two_route_graph();
        let users: Vec<UserDemand> = (1..=4).map(user).collect();
        let mut params = params_for(&graph, 10.0);
        params.budget = 8; // 2^4 = 16 > 8
        let g = GpInstance::build(users.clone(), params);
        assert!(matches!(
            solve_exact(&g, &graph, &users),
            Err(SolveError::BudgetExceeded {
                required: 16,
                budget: 8
            })
        ));
    }

    #[test]
    fn greedy_matches_exact_for_single_user() {
        let graph = two_route_graph();
        let users = vec![user(7)];
        let g = GpInstance::build(users.clone(), params_for(&graph, 2.0));
        let exact = solve_exact(&g, &graph, &users).unwrap();
        let greedy = solve_greedy(&g, &graph, &users).unwrap();
        assert_eq!(
            exact.choices[&7].candidate_index,
            greedy.choices[&7].candidate_index
        );
        assert_eq!(exact.objective, greedy.objective);
    }

    #[test]
    fn greedy_never_beats_exact() {
        let graph = two_route_graph();
        let users: Vec<UserDemand> = (1..=3).map(user).collect();
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let exact = solve_exact(&g, &graph, &users).unwrap();
        let greedy = solve_greedy(&g, &graph, &users).unwrap();
        assert!(
            greedy.objective >= exact.objective - 1e-12 * exact.objective.abs(),
            "greedy {} < exact {}",
            greedy.objective,
            exact.objective
        );
    }

    #[test]
    fn greedy_returned_assignments_reverify_under_any_order() {
        let graph = two_route_graph();
        let mut users: Vec<UserDemand> = (1..=3).map(user).collect();
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let forward = solve_greedy(&g, &graph, &users).unwrap();
        users.reverse();
        let backward = solve_greedy(&g, &graph, &users).unwrap();
        for a in [&forward, &backward] {
            let report = check_feasible(a, &g, &graph).unwrap();
            assert!(report.feasible);
        }
    }

    #[test]
    fn check_feasible_delay_ratio() {
        let graph = two_route_graph();
        let mut u = user(1);
        u.d_max = 8.0; // route B delay 4 -> ratio 0.5
        let users = vec![u];
        let g = GpInstance::build(users.clone(), params_for(&graph, 2.0));
        let a = solve_exact(&g, &graph, &users).unwrap();
        let report = check_feasible(&a, &g, &graph).unwrap();
        let delay = report
            .checks
            .iter()
            .find(|c| c.family == ConstraintFamily::Delay)
            .unwrap();
        assert!((delay.lhs - 0.5).abs() < 1e-12);
        assert!(delay.pass);
    }

    #[test]
    fn check_feasible_boundary_semantics() {
        // Average load exactly 1 fails the strict family; energy exactly
        // at budget passes the non-strict one.
        let graph = two_route_graph();
        let mut params = params_for(&graph, 2.0);
        for s in &mut params.servers {
            s.base_load = 1.0;
        }
        params.c_total = 3.0; // route B energy is exactly 3
        let mut u = user(1);
        u.weight = 0.0; // keep projected loads at exactly 1.0
        let users = vec![u];
        let g = GpInstance::build(users.clone(), params);
        // solve would refuse (infeasible); build the assignment by hand
        let cands = candidate_paths(&graph, &users, &g).unwrap();
        let b = cands[0]
            .iter()
            .find(|c| graph.node_name(c.server) == "SB")
            .unwrap();
        let a = Assignment {
            choices: [(
                1,
                Choice {
                    candidate_index: 1,
                    path: b.path.clone(),
                    server: b.server,
                    metrics: PathMetrics {
                        delay: b.delay,
                        bandwidth: b.bandwidth,
                        energy: b.energy,
                        server_load: 1.0,
                    },
                    objective_term: 0.0,
                },
            )]
            .into_iter()
            .collect(),
            objective: 0.0,
            report: ConstraintReport {
                checks: vec![],
                feasible: false,
            },
        };
        let report = check_feasible(&a, &g, &graph).unwrap();
        let load = report
            .checks
            .iter()
            .find(|c| c.family == ConstraintFamily::Load)
            .unwrap();
        assert!((load.lhs - 1.0).abs() < 1e-12);
        assert!(!load.pass, "strict load bound must fail at exactly 1.0");
        let energy = report
            .checks
            .iter()
            .find(|c| c.family == ConstraintFamily::Energy)
            .unwrap();
        assert!((energy.lhs - 1.0).abs() < 1e-12);
        assert!(energy.pass, "non-strict energy bound passes at exactly 1.0");
    }

    #[test]
    fn check_feasible_requires_all_users() {
        let graph = two_route_graph();
        let users = vec![user(1), user(2)];
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let a = solve_exact(&g, &graph, &users).unwrap();
        let mut partial = a.clone();
        partial.choices.remove(&2);
        assert_eq!(
            check_feasible(&partial, &g, &graph).unwrap_err(),
            SolveError::IncompleteAssignment { user: 2 }
        );
    }

    #[test]
    fn sweep_identity_row_reproduces_baseline() {
        let graph = two_route_graph();
        let users = vec![user(1), user(2)];
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let baseline = solve_exact(&g, &graph, &users).unwrap();
        let ones = vec![1.0; g.constraints.len()];
        let sweep = sensitivity_sweep(&g, &graph, &users, &[ones]);
        let row = sweep.rows[0].outcome.as_ref().unwrap();
        assert_eq!(row.objective, baseline.objective);
        for (id, choice) in &baseline.choices {
            assert_eq!(
                row.assignment.choices[id].candidate_index,
                choice.candidate_index
            );
        }
    }

    #[test]
    fn sweep_tightening_skews_selection() {
        // Tight delay bound knocks out the longer route; all users land on
        // one server and the max selection fraction grows.
        let graph = two_route_graph();
        let mut users = vec![user(1), user(2)];
        for u in &mut users {
            u.d_max = 6.5; // route A delay 6 -> ratio 0.923: ok at 1, dead at 0.9
        }
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let ones = vec![1.0; g.constraints.len()];
        let tight = g.family_perturbation(
            &[
                (ConstraintFamily::Load, 0.9),
                (ConstraintFamily::Delay, 0.9),
            ]
            .into_iter()
            .collect(),
        );
        let sweep = sensitivity_sweep(&g, &graph, &users, &[ones, tight]);
        let base = sweep.rows[0].outcome.as_ref().unwrap();
        let tightened = sweep.rows[1].outcome.as_ref().unwrap();
        let max_of = |fractions: &BTreeMap<String, f64>| {
            fractions.values().cloned().fold(0.0, f64::max)
        };
        assert!(max_of(&tightened.selection_fractions) > max_of(&base.selection_fractions));
    }

    #[test]
    fn sweep_loosening_preserves_feasibility() {
        let graph = two_route_graph();
        let users = vec![user(1), user(2)];
        let g = GpInstance::build(users.clone(), params_for(&graph, 4.0));
        let loose = vec![1.5; g.constraints.len()];
        let sweep = sensitivity_sweep(&g, &graph, &users, &[loose]);
        assert!(sweep.rows[0].outcome.is_ok());
    }

    #[test]
    fn empty_user_list_solves_trivially() {
        let graph = two_route_graph();
        let g = GpInstance::build(vec![], params_for(&graph, 2.0));
        let a = solve_exact(&g, &graph, &[]).unwrap();
        assert_eq!(a.objective, 0.0);
        assert!(a.choices.is_empty());
        assert!(a.report.feasible);
    }
}
