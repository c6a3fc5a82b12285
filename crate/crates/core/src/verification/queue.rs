//! Seeded M/M/1 simulation via the Lindley recursion with batch means.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub const MIN_HORIZON: u64 = 10_000;
pub const BATCHES: usize = 20;

/// Two-sided 95% Student t quantile with `BATCHES − 2 = 18` degrees of
/// freedom (one batch is discarded).
const T_975_18: f64 = 2.100_922_040_240_97;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QueueSimResult {
    /// Mean time in system (hours) over the retained batches.
    pub mean_system_time: f64,
    /// 95% confidence half-width of the mean (hours).
    pub half_width_95: f64,
    /// Departures contributing to the estimate.
    pub sample_count: u64,
    pub rng_seed: u64,
}

impl QueueSimResult {
    /// Relative deviation from `1/(μ − λ)`.
    pub fn relative_error(&self, arrival_rate: f64, service_rate: f64) -> f64 {
        let exact = 1.0 / (service_rate - arrival_rate);
        (self.mean_system_time - exact).abs() / exact
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueueSimError {
    #[error("arrival rate {arrival_rate} is not below service rate {service_rate}; the queue is unstable")]
    Unstable {
        arrival_rate: f64,
        service_rate: f64,
    },
    #[error("rates must be positive and finite (arrival {arrival_rate}, service {service_rate})")]
    InvalidRate {
        arrival_rate: f64,
        service_rate: f64,
    },
    #[error("horizon {0} is below the minimum of 10000 departures")]
    HorizonTooShort(u64),
}

/// Simulates `horizon` departures of an M/M/1 queue starting empty.
///
/// The departures are split into 20 equal batches (any remainder is dropped
/// from the end); the first batch is discarded as warm-up.
pub fn simulate_mm1(
    arrival_rate: f64,
    service_rate: f64,
    horizon: u64,
    seed: u64,
) -> Result<QueueSimResult, QueueSimError> {
    let valid = |r: f64| r > 0.0 && r.is_finite();
    if !valid(arrival_rate) || !valid(service_rate) {
        return Err(QueueSimError::InvalidRate {
            arrival_rate,
            service_rate,
        });
    }
    if arrival_rate >= service_rate {
        return Err(QueueSimError::Unstable {
            arrival_rate,
            service_rate,
        });
    }
    if horizon < MIN_HORIZON {
        return Err(QueueSimError::HorizonTooShort(horizon));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inter = Exp::new(arrival_rate).expect("positive rate");
    let service = Exp::new(service_rate).expect("positive rate");
    let batch = horizon / BATCHES as u64;

    let mut means = [0.0; BATCHES];
    // waiting time in queue of the current customer
    let mut wait = 0.0_f64;
    for mean in means.iter_mut() {
        let mut sum = 0.0;
        for _ in 0..batch {
            let s: f64 = service.sample(&mut rng);
            sum += wait + s;
            let a: f64 = inter.sample(&mut rng);
            wait = (wait + s - a).max(0.0);
        }
        *mean = sum / batch as f64;
    }

    let kept = &means[1..];
    let k = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / k;
    let var = kept.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (k - 1.0);
    Ok(QueueSimResult {
        mean_system_time: mean,
        half_width_95: T_975_18 * libm::sqrt(var / k),
        sample_count: batch * (BATCHES as u64 - 1),
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_utilization_matches_formula() {
        let r = simulate_mm1(720.0, 1700.0, 1_000_000, 7).unwrap();
        assert!(r.relative_error(720.0, 1700.0) < 0.02, "{r:?}");
        assert!(r.half_width_95 > 0.0);
        assert_eq!(r.sample_count, 950_000);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = simulate_mm1(720.0, 1700.0, 20_000, 42).unwrap();
        let b = simulate_mm1(720.0, 1700.0, 20_000, 42).unwrap();
        assert_eq!(a.mean_system_time.to_bits(), b.mean_system_time.to_bits());
        assert_eq!(a, b);
        let c = simulate_mm1(720.0, 1700.0, 20_000, 43).unwrap();
        assert_ne!(a.mean_system_time, c.mean_system_time);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            simulate_mm1(1700.0, 1700.0, 20_000, 1),
            Err(QueueSimError::Unstable { .. })
        ));
        assert!(matches!(
            simulate_mm1(10.0, 5.0, 20_000, 1),
            Err(QueueSimError::Unstable { .. })
        ));
        assert!(matches!(
            simulate_mm1(1.0, 5.0, 9_999, 1),
            Err(QueueSimError::HorizonTooShort(9_999))
        ));
        assert!(matches!(
            simulate_mm1(0.0, 5.0, 20_000, 1),
            Err(QueueSimError::InvalidRate { .. })
        ));
    }
}
