//! Search for the lowest sampling rate that reaches the best recall.
//!
//! The rate is doubled while recall keeps improving, then the bracket
//! `[r / 2, r]` is bisected until it is no wider than `epsilon`. Every probe
//! is memoised and recorded, so the probe list can seed a performance table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on doubling steps when no rate limit is configured.
const MAX_DOUBLINGS: u32 = 64;

#[derive(Debug, Error)]
pub enum SearchError<E: std::error::Error + 'static> {
    #[error("`{field}` must be > 0, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("recall oracle returned {recall} at {rate} Hz, outside [0, 1]")]
    RecallOutOfRange { rate: f64, recall: f64 },
    #[error("recall oracle failed at {rate} Hz: {source}")]
    Oracle {
        rate: f64,
        #[source]
        source: E,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSearchConfig {
    /// Starting rate, Hz.
    pub r1: f64,
    /// Bisection stops once the bracket is at most this wide, Hz.
    pub epsilon: f64,
    /// Rates above this are never probed (typically the model's r_max).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rate: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSearchResult {
    pub rate: f64,
    pub recall: f64,
    /// Distinct probes in evaluation order.
    pub evaluations: Vec<Probe>,
    pub oracle_calls: usize,
    /// Rate at which the doubling phase stopped.
    pub doubling_peak: f64,
    /// Bracket handed to the bisection phase, `(bottom, top)`.
    pub bracket: (f64, f64),
}

/// Initial rate that samples once per time taken to pass the farthest
/// detected object: `v / d_far`.
pub fn initial_rate(d_far: f64, v: f64) -> Option<f64> {
    (d_far > 0.0 && v > 0.0).then(|| v / d_far)
}

struct Memo<F> {
    oracle: F,
    probes: Vec<Probe>,
}

impl<F, E> Memo<F>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::error::Error + 'static,
{
    fn recall(&mut self, rate: f64) -> Result<f64, SearchError<E>> {
        if let Some(p) = self.probes.iter().find(|p| p.rate == rate) {
            return Ok(p.recall);
        }
        let recall =
            (self.oracle)(rate).map_err(|source| SearchError::Oracle { rate, source })?;
        if !(0.0..=1.0).contains(&recall) {
            return Err(SearchError::RecallOutOfRange { rate, recall });
        }
        self.probes.push(Probe { rate, recall });
        Ok(recall)
    }
}

pub fn search<F, E>(config: &RateSearchConfig, oracle: F) -> Result<RateSearchResult, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::error::Error + 'static,
{
    for (field, value) in [("r1", config.r1), ("epsilon", config.epsilon)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SearchError::NonPositive { field, value });
        }
    }
    let mut memo = Memo {
        oracle,
        probes: Vec::new(),
    };

    let mut r = config.r1;
    let mut doublings = 0;
    loop {
        let next = 2.0 * r;
        if doublings >= MAX_DOUBLINGS || config.r_limit.is_some_and(|lim| next > lim) {
            // Still evaluate r so the result carries its recall.
            memo.recall(r)?;
            break;
        }
        let here = memo.recall(r)?;
        if memo.recall(next)? > here {
            r = next;
            doublings += 1;
        } else {
            break;
        }
    }

    let doubling_peak = r;
    let mut top = r;
    let mut bottom = r / 2.0;
    let bracket = (bottom, top);
    while top - bottom > config.epsilon {
        let mid = 0.5 * (top + bottom);
        if memo.recall(mid)? < memo.recall(top)? {
            bottom = mid;
        } else {
            top = mid;
        }
    }

    let recall = memo.recall(top)?;
    let oracle_calls = memo.probes.len();
    Ok(RateSearchResult {
        rate: top,
        recall,
        evaluations: memo.probes,
        oracle_calls,
        doubling_peak,
        bracket,
    })
}
