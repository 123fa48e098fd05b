//! Bounded random-walk generator for time-varying delays.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SimError;

/// Parameters of a reflected random walk over `[min, max]` starting at the
/// interval midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    /// Maximum per-tick increment magnitude; 0 degenerates to a constant.
    pub step: f64,
    pub min: f64,
    pub max: f64,
}

impl WalkParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.min >= 0.0
            && self.min <= self.max
            && self.step >= 0.0
            && self.min.is_finite()
            && self.max.is_finite()
            && self.step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidBounds {
                min: self.min,
                max: self.max,
                step: self.step,
            })
        }
    }
}

fn reflect(mut x: f64, min: f64, max: f64) -> f64 {
    if min >= max {
        return min;
    }
    loop {
        if x > max {
            x = 2.0 * max - x;
        } else if x < min {
            x = 2.0 * min - x;
        } else {
            return x;
        }
    }
}

/// One walk value per tick, deterministic for a given seed. The first
/// value is the interval midpoint; each later value adds a uniform
/// increment in `[-step, step]` and reflects at the bounds.
pub fn generate_delay_walk(
    seed: u64,
    params: &WalkParams,
    n_ticks: usize,
) -> Result<Vec<f64>, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(n_ticks);
    let mut x = (params.min + params.max) / 2.0;
    for _ in 0..n_ticks {
        series.push(x);
        if params.step > 0.0 {
            let delta: f64 = rng.random_range(-params.step..=params.step);
            x = reflect(x + delta, params.min, params.max);
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_is_constant() {
        let params = WalkParams {
            step: 0.0,
            min: 2.0,
            max: 8.0,
        };
        let series = generate_delay_walk(7, &params, 50).unwrap();
        assert!(series.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn collapsed_interval_is_constant() {
        let params = WalkParams {
            step: 1.0,
            min: 5.0,
            max: 5.0,
        };
        let series = generate_delay_walk(7, &params, 50).unwrap();
        assert!(series.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn walk_stays_within_bounds() {
        let params = WalkParams {
            step: 0.7,
            min: 1.0,
            max: 3.0,
        };
        let series = generate_delay_walk(42, &params, 10_000).unwrap();
        assert_eq!(series.len(), 10_000);
        for &v in &series {
            assert!((1.0..=3.0).contains(&v), "value {v} escaped bounds");
        }
        // it actually moves
        assert!(series.iter().any(|&v| (v - 2.0).abs() > 0.1));
    }

    #[test]
    fn walk_is_deterministic_per_seed() {
        let params = WalkParams {
            step: 0.3,
            min: 0.0,
            max: 2.0,
        };
        let a = generate_delay_walk(9, &params, 1000).unwrap();
        let b = generate_delay_walk(9, &params, 1000).unwrap();
        let c = generate_delay_walk(10, &params, 1000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        for (min, max, step) in [(-1.0, 2.0, 0.1), (3.0, 2.0, 0.1), (0.0, 1.0, -0.5)] {
            let params = WalkParams { step, min, max };
            assert!(matches!(
                generate_delay_walk(0, &params, 10),
                Err(SimError::InvalidBounds { .. })
            ));
        }
    }
}
