//! Parser for the `--grid` sweep specification.
//!
//! A spec is a semicolon-separated list of rows. Each row sets
//! per-family perturbation factors with comma-separated items:
//!
//! * `family=value` — one factor, e.g. `load=0.9`
//! * `fam1+fam2=value` — the same factor for several families
//! * `family=start..end:n` — expands the row into `n` rows stepping the
//!   factor linearly (at most one range per row)
//!
//! Family names are `load`, `energy`, `delay`, `bandwidth_min` (`bmin`),
//! `bandwidth_max` (`bmax`), or `all`. Families a row does not mention
//! stay at 1.

use std::collections::BTreeMap;

use asr_core::posy::ConstraintFamily;

type FamilyFactors = BTreeMap<ConstraintFamily, f64>;

pub fn parse_grid(spec: &str) -> Result<Vec<FamilyFactors>, String> {
    let mut rows = Vec::new();
    for (row_idx, row_spec) in spec.split(';').enumerate() {
        let row_spec = row_spec.trim();
        if row_spec.is_empty() {
            continue;
        }
        rows.extend(parse_row(row_spec).map_err(|e| format!("row {}: {e}", row_idx + 1))?);
    }
    if rows.is_empty() {
        return Err("grid spec contains no rows".to_string());
    }
    Ok(rows)
}

fn parse_row(row: &str) -> Result<Vec<FamilyFactors>, String> {
    let mut fixed: FamilyFactors = BTreeMap::new();
    let mut range: Option<(Vec<ConstraintFamily>, f64, f64, usize)> = None;
    for item in row.split(',') {
        let item = item.trim();
        let (names, value_spec) = item
            .split_once('=')
            .ok_or_else(|| format!("`{item}` is not of the form family=value"))?;
        let families = parse_families(names.trim())?;
        match parse_range(value_spec.trim())? {
            RangeOrValue::Value(v) => {
                check_factor(v)?;
                for f in families {
                    if fixed.insert(f, v).is_some() {
                        return Err(format!("family `{f}` set twice"));
                    }
                }
            }
            RangeOrValue::Range(start, end, steps) => {
                check_factor(start)?;
                check_factor(end)?;
                if range.is_some() {
                    return Err("at most one range item per row".to_string());
                }
                range = Some((families, start, end, steps));
            }
        }
    }
    match range {
        None => Ok(vec![fixed]),
        Some((families, start, end, steps)) => {
            let mut expanded = Vec::with_capacity(steps);
            for i in 0..steps {
                let value = start + (end - start) * i as f64 / (steps - 1) as f64;
                let mut row = fixed.clone();
                for &f in &families {
                    if row.insert(f, value).is_some() {
                        return Err(format!("family `{f}` set twice"));
                    }
                }
                expanded.push(row);
            }
            Ok(expanded)
        }
    }
}

fn parse_families(names: &str) -> Result<Vec<ConstraintFamily>, String> {
    let mut families = Vec::new();
    for name in names.split('+') {
        let name = name.trim();
        if name == "all" {
            families.extend(ConstraintFamily::ALL);
        } else {
            families.push(
                ConstraintFamily::parse(name)
                    .ok_or_else(|| format!("unknown constraint family `{name}`"))?,
            );
        }
    }
    Ok(families)
}

enum RangeOrValue {
    Value(f64),
    Range(f64, f64, usize),
}

fn parse_range(spec: &str) -> Result<RangeOrValue, String> {
    let Some((bounds, steps)) = spec.split_once(':') else {
        let v: f64 = spec
            .parse()
            .map_err(|_| format!("`{spec}` is not a number"))?;
        return Ok(RangeOrValue::Value(v));
    };
    let (start, end) = bounds
        .split_once("..")
        .ok_or_else(|| format!("range `{bounds}` must be start..end"))?;
    let start: f64 = start
        .trim()
        .parse()
        .map_err(|_| format!("`{start}` is not a number"))?;
    let end: f64 = end
        .trim()
        .parse()
        .map_err(|_| format!("`{end}` is not a number"))?;
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| format!("`{steps}` is not a step count"))?;
    if steps < 2 {
        return Err("ranges need at least 2 steps".to_string());
    }
    Ok(RangeOrValue::Range(start, end, steps))
}

fn check_factor(v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("perturbation factor {v} must be positive"))
    }
}
