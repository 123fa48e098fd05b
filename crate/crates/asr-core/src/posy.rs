//! Monomials, posynomials, and the constraint program they form.
//!
//! The joint routing objective is a sum of per-user monomials
//! `alpha * d * c * s / b` over the four path metrics, subject to five
//! posynomial constraint families (average server load, total energy,
//! per-user delay, and per-user bandwidth floor/ceiling), each bounded by
//! a perturbable right-hand side `u_i`. Multiplying all `u_i` by one
//! recovers the base program; `u_i > 1` loosens constraint `i`, `u_i < 1`
//! tightens it.
//!
//! Decision variables are discrete path choices, so there is no continuous
//! solver here: this module supplies evaluation, validation and
//! perturbation, and [`crate::optimizer`] enumerates.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::optimizer::UserDemand;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosyError {
    #[error("no value supplied for variable `{0}`")]
    MissingVariable(String),
    #[error("variable `{variable}` must be positive, got {value}")]
    NonPositiveValue { variable: String, value: f64 },
    #[error("posynomial has no terms")]
    EmptyPosynomial,
    #[error("perturbation has {got} entries, instance has {expected} constraints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("perturbation entry {index} must be positive, got {value}")]
    NonPositivePerturbation { index: usize, value: f64 },
}

/// Variable assignment for evaluation; all values must be positive.
pub type VarMap = BTreeMap<String, f64>;

/// A single term `coefficient * prod(var_i ^ exp_i)`.
///
/// Standard form requires a positive coefficient; construction does not
/// enforce this so that malformed programs can be represented and then
/// flagged by [`validate_standard_form`].
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: BTreeMap<String, f64>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: impl IntoIterator<Item = (String, f64)>) -> Self {
        Monomial {
            coefficient,
            exponents: exponents.into_iter().collect(),
        }
    }

    /// A bare constant term.
    pub fn constant(coefficient: f64) -> Self {
        Monomial::new(coefficient, [])
    }

    /// Evaluates at positive variable values: `coefficient * prod(v^e)`.
    pub fn eval(&self, values: &VarMap) -> Result<f64, PosyError> {
        let mut acc = self.coefficient;
        for (var, &exp) in &self.exponents {
            let &value = values
                .get(var)
                .ok_or_else(|| PosyError::MissingVariable(var.clone()))?;
            if value <= 0.0 || !value.is_finite() {
                return Err(PosyError::NonPositiveValue {
                    variable: var.clone(),
                    value,
                });
            }
            if exp != 0.0 {
                acc *= value.powf(exp);
            }
        }
        Ok(acc)
    }

    /// Log of the term value given log-domain variables `y = ln x`:
    /// `ln c + sum(e_i * y_i)`.
    pub fn log_eval(&self, log_values: &VarMap) -> Result<f64, PosyError> {
        let mut acc = self.coefficient.ln();
        for (var, &exp) in &self.exponents {
            let &y = log_values
                .get(var)
                .ok_or_else(|| PosyError::MissingVariable(var.clone()))?;
            acc += exp * y;
        }
        Ok(acc)
    }
}

/// Sum of monomials. Positive on the positive orthant when every
/// coefficient is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Posynomial { terms }
    }

    pub fn eval(&self, values: &VarMap) -> Result<f64, PosyError> {
        if self.terms.is_empty() {
            return Err(PosyError::EmptyPosynomial);
        }
        let mut sum = 0.0;
        for term in &self.terms {
            sum += term.eval(values)?;
        }
        Ok(sum)
    }

    /// `ln f(exp(y))` computed with log-sum-exp over the terms, avoiding
    /// overflow for large exponents. Agrees with `eval(...).ln()` on the
    /// common domain.
    pub fn log_eval(&self, log_values: &VarMap) -> Result<f64, PosyError> {
        if self.terms.is_empty() {
            return Err(PosyError::EmptyPosynomial);
        }
        let mut logs = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            logs.push(term.log_eval(log_values)?);
        }
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let sum: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        Ok(m + sum.ln())
    }

    /// Variables referenced by any term.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms
            .iter()
            .flat_map(|t| t.exponents.keys().map(String::as_str))
    }
}

/// The five constraint families of the joint program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintFamily {
    /// Average server utilization, strict bound.
    Load,
    /// Total energy over the energy budget.
    Energy,
    /// Per-user delay over its ceiling, strict bound.
    Delay,
    /// Per-user bandwidth floor: `b_min / b <= u`.
    BandwidthMin,
    /// Per-user bandwidth ceiling: `b / b_max <= u`.
    BandwidthMax,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 5] = [
        ConstraintFamily::Load,
        ConstraintFamily::Energy,
        ConstraintFamily::Delay,
        ConstraintFamily::BandwidthMin,
        ConstraintFamily::BandwidthMax,
    ];

    /// Families written with a strict `<` keep it; the rest use `<=`.
    pub fn is_strict(self) -> bool {
        matches!(self, ConstraintFamily::Load | ConstraintFamily::Delay)
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::Load => "load",
            ConstraintFamily::Energy => "energy",
            ConstraintFamily::Delay => "delay",
            ConstraintFamily::BandwidthMin => "bandwidth_min",
            ConstraintFamily::BandwidthMax => "bandwidth_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "load" => Some(ConstraintFamily::Load),
            "energy" => Some(ConstraintFamily::Energy),
            "delay" => Some(ConstraintFamily::Delay),
            "bandwidth_min" | "bmin" => Some(ConstraintFamily::BandwidthMin),
            "bandwidth_max" | "bmax" => Some(ConstraintFamily::BandwidthMax),
            _ => None,
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One labelled constraint `body(x) <= u` (or `< u` for strict families).
#[derive(Debug, Clone)]
pub struct GpConstraint {
    pub label: String,
    pub family: ConstraintFamily,
    /// Owning user for the per-user families.
    pub user: Option<u32>,
    pub body: Posynomial,
}

/// A server participating in the load constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerSpec {
    pub name: String,
    /// Demand-weight capacity; projected utilization is
    /// `base_load + assigned_weight / capacity`.
    pub capacity: f64,
    /// Utilization measured before the assignment under evaluation.
    pub base_load: f64,
}

/// Scalar parameters of the program.
#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    /// Objective tuning weight. Scales every term, so it never changes the
    /// discrete argmin; kept configurable for normalized reporting.
    pub alpha: f64,
    /// Total energy budget for the energy constraint.
    pub c_total: f64,
    /// Strictness margin: strict families require `lhs < u - epsilon`.
    pub epsilon: f64,
    /// Exact-solver enumeration budget (total candidate assignments).
    pub budget: u64,
    pub servers: Vec<ServerSpec>,
}

impl GpParams {
    pub fn server(&self, name: &str) -> Option<&ServerSpec> {
        self.servers.iter().find(|s| s.name == name)
    }
}

pub const DEFAULT_BUDGET: u64 = 4096;

/// The whole program: objective, labelled constraints, the perturbation
/// vector (one entry per constraint, all ones for the base problem), the
/// scalar parameters, and the per-user demands the constraints were built
/// from.
#[derive(Debug, Clone)]
pub struct GpInstance {
    pub objective: Posynomial,
    pub constraints: Vec<GpConstraint>,
    pub perturbation: Vec<f64>,
    pub params: GpParams,
    pub users: Vec<UserDemand>,
}

pub fn var_delay(user: u32) -> String {
    format!("d_u{user}")
}
pub fn var_energy(user: u32) -> String {
    format!("c_u{user}")
}
pub fn var_bandwidth(user: u32) -> String {
    format!("b_u{user}")
}
pub fn var_user_load(user: u32) -> String {
    format!("s_u{user}")
}
pub fn var_server_load(server: &str) -> String {
    format!("s_srv_{server}")
}

impl GpInstance {
    /// Builds the joint program for `users` over the servers in `params`:
    /// objective `sum alpha * d * c * s / b`, one average-load constraint,
    /// one energy-budget constraint, and a delay / bandwidth-floor /
    /// bandwidth-ceiling constraint per user. Users are ordered by id.
    pub fn build(mut users: Vec<UserDemand>, params: GpParams) -> Self {
        users.sort_by_key(|u| u.id);
        let objective = Posynomial::new(
            users
                .iter()
                .map(|u| {
                    Monomial::new(
                        params.alpha,
                        [
                            (var_delay(u.id), 1.0),
                            (var_energy(u.id), 1.0),
                            (var_user_load(u.id), 1.0),
                            (var_bandwidth(u.id), -1.0),
                        ],
                    )
                })
                .collect(),
        );

        let mut constraints = Vec::new();
        let r = params.servers.len() as f64;
        constraints.push(GpConstraint {
            label: "load".to_string(),
            family: ConstraintFamily::Load,
            user: None,
            body: Posynomial::new(
                params
                    .servers
                    .iter()
                    .map(|s| Monomial::new(1.0 / r, [(var_server_load(&s.name), 1.0)]))
                    .collect(),
            ),
        });
        constraints.push(GpConstraint {
            label: "energy".to_string(),
            family: ConstraintFamily::Energy,
            user: None,
            body: Posynomial::new(
                users
                    .iter()
                    .map(|u| Monomial::new(1.0 / params.c_total, [(var_energy(u.id), 1.0)]))
                    .collect(),
            ),
        });
        for u in &users {
            constraints.push(GpConstraint {
                label: format!("delay:u{}", u.id),
                family: ConstraintFamily::Delay,
                user: Some(u.id),
                body: Posynomial::new(vec![Monomial::new(
                    1.0 / u.d_max,
                    [(var_delay(u.id), 1.0)],
                )]),
            });
            constraints.push(GpConstraint {
                label: format!("bandwidth_min:u{}", u.id),
                family: ConstraintFamily::BandwidthMin,
                user: Some(u.id),
                body: Posynomial::new(vec![Monomial::new(
                    u.b_min,
                    [(var_bandwidth(u.id), -1.0)],
                )]),
            });
            constraints.push(GpConstraint {
                label: format!("bandwidth_max:u{}", u.id),
                family: ConstraintFamily::BandwidthMax,
                user: Some(u.id),
                body: Posynomial::new(vec![Monomial::new(
                    1.0 / u.b_max,
                    [(var_bandwidth(u.id), 1.0)],
                )]),
            });
        }
        let perturbation = vec![1.0; constraints.len()];
        GpInstance {
            objective,
            constraints,
            perturbation,
            params,
            users,
        }
    }

    /// Replaces the measured per-server base loads, leaving everything else
    /// (including the current perturbation) untouched. Servers absent from
    /// `loads` keep their previous value.
    pub fn with_base_loads(&self, loads: &BTreeMap<String, f64>) -> Self {
        let mut next = self.clone();
        for s in &mut next.params.servers {
            if let Some(&l) = loads.get(&s.name) {
                s.base_load = l;
            }
        }
        next
    }

    /// Expands per-family multipliers into a full perturbation vector
    /// (families not mentioned default to 1).
    pub fn family_perturbation(&self, factors: &BTreeMap<ConstraintFamily, f64>) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| factors.get(&c.family).copied().unwrap_or(1.0))
            .collect()
    }
}

/// Outcome of [`validate_standard_form`]: hard violations and advisory
/// warnings, each as a human-readable line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            writeln!(f, "standard form: ok")?;
        } else {
            writeln!(f, "standard form: {} violation(s)", self.violations.len())?;
        }
        for v in &self.violations {
            writeln!(f, "  violation: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Checks that the program is in standard form: positive finite
/// coefficients everywhere, non-empty objective, finite exponents, a
/// positive perturbation entry per constraint, and sane parameters.
/// Violations are reported, never thrown.
pub fn validate_standard_form(g: &GpInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_posynomial(&g.objective, "objective", &mut report);
    for c in &g.constraints {
        check_posynomial(&c.body, &format!("constraint `{}`", c.label), &mut report);
    }
    if g.constraints.is_empty() {
        report
            .warnings
            .push("no constraints; every assignment is vacuously feasible".to_string());
    }
    if g.perturbation.len() != g.constraints.len() {
        report.violations.push(format!(
            "perturbation has {} entries for {} constraints",
            g.perturbation.len(),
            g.constraints.len()
        ));
    }
    for (i, &u) in g.perturbation.iter().enumerate() {
        if u <= 0.0 || !u.is_finite() {
            report
                .violations
                .push(format!("perturbation entry {i} is {u}, must be positive"));
        }
    }
    if g.params.alpha <= 0.0 || !g.params.alpha.is_finite() {
        report
            .violations
            .push(format!("alpha is {}, must be positive", g.params.alpha));
    }
    if g.params.c_total <= 0.0 || !g.params.c_total.is_finite() {
        report.violations.push(format!(
            "energy budget is {}, must be positive",
            g.params.c_total
        ));
    }
    if g.params.epsilon < 0.0 {
        report.violations.push(format!(
            "strictness margin is {}, must be non-negative",
            g.params.epsilon
        ));
    }
    for s in &g.params.servers {
        if s.capacity <= 0.0 || !s.capacity.is_finite() {
            report.violations.push(format!(
                "server `{}` capacity is {}, must be positive",
                s.name, s.capacity
            ));
        }
        if s.base_load < 0.0 {
            report.violations.push(format!(
                "server `{}` base load is {}, must be non-negative",
                s.name, s.base_load
            ));
        }
    }
    for u in &g.users {
        if u.d_max <= 0.0 {
            report
                .violations
                .push(format!("user {} delay ceiling is {}", u.id, u.d_max));
        }
        if !(u.b_min > 0.0 && u.b_min <= u.b_max) {
            report.violations.push(format!(
                "user {} bandwidth window [{}, {}] is invalid",
                u.id, u.b_min, u.b_max
            ));
        }
        if u.weight < 0.0 {
            report
                .violations
                .push(format!("user {} demand weight is {}", u.id, u.weight));
        }
    }
    report
}

fn check_posynomial(p: &Posynomial, what: &str, report: &mut ValidationReport) {
    if p.terms.is_empty() {
        report.violations.push(format!("{what} has no terms"));
    }
    for (i, t) in p.terms.iter().enumerate() {
        if t.coefficient <= 0.0 || !t.coefficient.is_finite() {
            report.violations.push(format!(
                "{what} term {i} has non-positive coefficient {}",
                t.coefficient
            ));
        }
        for (var, &e) in &t.exponents {
            if !e.is_finite() {
                report
                    .violations
                    .push(format!("{what} term {i} has non-finite exponent on `{var}`"));
            }
        }
    }
}

/// Scales the constraint right-hand sides by `u` elementwise, returning the
/// perturbed program and leaving the original untouched. Applied to the
/// base program (all-ones bounds) the result has right-hand sides exactly
/// `u`; scaling by `1/u` afterwards restores the original bounds.
pub fn perturb(g: &GpInstance, u: &[f64]) -> Result<GpInstance, PosyError> {
    if u.len() != g.constraints.len() {
        return Err(PosyError::DimensionMismatch {
            expected: g.constraints.len(),
            got: u.len(),
        });
    }
    for (index, &value) in u.iter().enumerate() {
        if value <= 0.0 || !value.is_finite() {
            return Err(PosyError::NonPositivePerturbation { index, value });
        }
    }
    let mut next = g.clone();
    for (bound, &factor) in next.perturbation.iter_mut().zip(u) {
        *bound *= factor;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, f64)]) -> VarMap {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn demo_users() -> Vec<UserDemand> {
        vec![
            UserDemand {
                id: 1,
                d_max: 10.0,
                b_min: 1.0,
                b_max: 100.0,
                weight: 1.0,
                client: None,
            },
            UserDemand {
                id: 2,
                d_max: 8.0,
                b_min: 2.0,
                b_max: 50.0,
                weight: 1.0,
                client: None,
            },
        ]
    }

    fn demo_params() -> GpParams {
        GpParams {
            alpha: 1.0,
            c_total: 16.0,
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
        }
    }

    #[test]
    fn monomial_objective_term() {
        let m = Monomial::new(
            1.0,
            [
                ("d".to_string(), 1.0),
                ("c".to_string(), 1.0),
                ("s".to_string(), 1.0),
                ("b".to_string(), -1.0),
            ],
        );
        let v = vars(&[("d", 10.0), ("c", 3.0), ("s", 0.5), ("b", 5.0)]);
        let value = m.eval(&v).unwrap();
        assert!((value - 3.0).abs() <= 1e-12 * 3.0, "value {value}");
    }

    #[test]
    fn monomial_zero_exponents_yield_coefficient() {
        let m = Monomial::new(7.5, [("x".to_string(), 0.0), ("y".to_string(), 0.0)]);
        let v = vars(&[("x", 123.0), ("y", 0.25)]);
        assert_eq!(m.eval(&v).unwrap(), 7.5);
    }

    #[test]
    fn monomial_missing_variable() {
        let m = Monomial::new(1.0, [("b".to_string(), -1.0)]);
        assert_eq!(
            m.eval(&vars(&[("d", 1.0)])),
            Err(PosyError::MissingVariable("b".into()))
        );
    }

    #[test]
    fn monomial_rejects_non_positive_values() {
        let m = Monomial::new(1.0, [("x".to_string(), 2.0)]);
        assert!(matches!(
            m.eval(&vars(&[("x", 0.0)])),
            Err(PosyError::NonPositiveValue { .. })
        ));
        assert!(matches!(
            m.eval(&vars(&[("x", -3.0)])),
            Err(PosyError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn posynomial_sums_terms() {
        let p = Posynomial::new(vec![
            Monomial::new(2.0, [("x".to_string(), 1.0)]),
            Monomial::new(3.0, [("x".to_string(), 2.0)]),
        ]);
        assert_eq!(p.eval(&vars(&[("x", 1.0)])).unwrap(), 5.0);
    }

    #[test]
    fn single_term_posynomial_equals_monomial() {
        let m = Monomial::new(4.0, [("x".to_string(), 0.5)]);
        let p = Posynomial::new(vec![m.clone()]);
        let v = vars(&[("x", 9.0)]);
        assert_eq!(p.eval(&v).unwrap(), m.eval(&v).unwrap());
    }

    #[test]
    fn posynomial_ratio_term() {
        let p = Posynomial::new(vec![Monomial::new(
            1.0,
            [("x".to_string(), 1.0), ("y".to_string(), -1.0)],
        )]);
        assert_eq!(p.eval(&vars(&[("x", 4.0), ("y", 2.0)])).unwrap(), 2.0);
    }

    #[test]
    fn log_eval_matches_direct() {
        let p = Posynomial::new(vec![
            Monomial::new(2.0, [("x".to_string(), 1.5), ("y".to_string(), -0.5)]),
            Monomial::new(0.3, [("y".to_string(), 2.0)]),
        ]);
        let v = vars(&[("x", 3.7), ("y", 0.9)]);
        let logs: VarMap = v.iter().map(|(k, &x)| (k.clone(), x.ln())).collect();
        let direct = p.eval(&v).unwrap().ln();
        let viaexp = p.log_eval(&logs).unwrap();
        assert!((direct - viaexp).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn canonical_instance_is_standard_form() {
        let g = GpInstance::build(demo_users(), demo_params());
        let report = validate_standard_form(&g);
        assert!(report.is_valid(), "{report}");
        assert!(report.warnings.is_empty());
        // 2 global families + 3 per-user constraints * 2 users
        assert_eq!(g.constraints.len(), 8);
        assert_eq!(g.perturbation.len(), 8);
    }

    #[test]
    fn negative_coefficient_names_constraint() {
        let mut g = GpInstance::build(demo_users(), demo_params());
        g.constraints[1].body.terms[0].coefficient = -1.0;
        let report = validate_standard_form(&g);
        assert!(!report.is_valid());
        assert!(
            report.violations.iter().any(|v| v.contains("`energy`")),
            "{report}"
        );
    }

    #[test]
    fn empty_constraint_list_warns() {
        let mut g = GpInstance::build(demo_users(), demo_params());
        g.constraints.clear();
        g.perturbation.clear();
        let report = validate_standard_form(&g);
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn perturb_all_ones_is_identity() {
        let g = GpInstance::build(demo_users(), demo_params());
        let p = perturb(&g, &vec![1.0; g.constraints.len()]).unwrap();
        assert_eq!(p.perturbation, g.perturbation);
    }

    #[test]
    fn perturb_loosening_keeps_feasible_points() {
        let g = GpInstance::build(demo_users(), demo_params());
        let mut u = vec![1.0; g.constraints.len()];
        for (i, c) in g.constraints.iter().enumerate() {
            if c.family == ConstraintFamily::Delay {
                u[i] = 1.2;
            }
        }
        let loosened = perturb(&g, &u).unwrap();
        // Any point satisfying body <= u stays satisfied when u grows.
        let point = vars(&[
            ("d_u1", 5.0),
            ("d_u2", 5.0),
            ("c_u1", 3.0),
            ("c_u2", 3.0),
            ("b_u1", 10.0),
            ("b_u2", 10.0),
            ("s_u1", 0.5),
            ("s_u2", 0.5),
            ("s_srv_S_A", 0.5),
            ("s_srv_S_B", 0.5),
        ]);
        for (i, c) in g.constraints.iter().enumerate() {
            let lhs = c.body.eval(&point).unwrap();
            if lhs <= g.perturbation[i] {
                assert!(lhs <= loosened.perturbation[i]);
            }
        }
    }

    #[test]
    fn perturb_wrong_length() {
        let g = GpInstance::build(demo_users(), demo_params());
        let err = perturb(&g, &[1.0, 1.0]).unwrap_err();
        assert_eq!(
            err,
            PosyError::DimensionMismatch {
                expected: 8,
                got: 2
            }
        );
    }

    #[test]
    fn perturb_rejects_non_positive() {
        let g = GpInstance::build(demo_users(), demo_params());
        let mut u = vec![1.0; g.constraints.len()];
        u[3] = 0.0;
        assert!(matches!(
            perturb(&g, &u),
            Err(PosyError::NonPositivePerturbation { index: 3, .. })
        ));
    }

    #[test]
    fn perturb_round_trip_restores_bounds() {
        let g = GpInstance::build(demo_users(), demo_params());
        let u: Vec<f64> = (0..g.constraints.len())
            .map(|i| [0.5, 2.0, 0.25, 4.0][i % 4])
            .collect();
        let inv: Vec<f64> = u.iter().map(|x| 1.0 / x).collect();
        let round = perturb(&perturb(&g, &u).unwrap(), &inv).unwrap();
        assert_eq!(round.perturbation, g.perturbation);
    }

    #[test]
    fn family_perturbation_expands() {
        let g = GpInstance::build(demo_users(), demo_params());
        let factors: BTreeMap<ConstraintFamily, f64> = [
            (ConstraintFamily::Load, 0.9),
            (ConstraintFamily::Delay, 0.9),
        ]
        .into_iter()
        .collect();
        let u = g.family_perturbation(&factors);
        for (i, c) in g.constraints.iter().enumerate() {
            let expected = match c.family {
                ConstraintFamily::Load | ConstraintFamily::Delay => 0.9,
                _ => 1.0,
            };
            assert_eq!(u[i], expected);
        }
    }
}
