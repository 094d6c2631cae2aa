//! Cohort recovery experiment and the lazy-review penalty bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{judge_interaction, Conduct};
use crate::domain::{InteractionRecord, Role, UnifiedParty, UserId, Verdict, INITIAL_REPUTATION};
use crate::error::{Error, Result};
use crate::game::OracleParams;
use crate::reputation::{
    update_reputation_with, GainParams, ReputationState, Update, DEFAULT_ALPHA,
};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// One cohort per fault probability, in this order.
    pub faults: Vec<f64>,
    pub intervals: u64,
    /// Every user behaves honestly in the intervals after this one.
    pub switch_at: u64,
    pub cohort_size: usize,
    pub alpha: f64,
    pub oracle: OracleParams,
    /// Also pass honest reviews through the oracle, so that a share
    /// `1 - pi_bar` of them is wrongly flagged.
    pub judge_honest_reviews: bool,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            faults: vec![0.0, 0.1, 0.3, 0.5, 1.0],
            intervals: 40,
            switch_at: 20,
            cohort_size: 200,
            alpha: DEFAULT_ALPHA,
            oracle: OracleParams {
                pi: 0.9,
                pi_bar: 0.9,
            },
            judge_honest_reviews: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    /// Number of closed intervals; 0 is the initial state.
    pub interval: u64,
    pub fault_probability: f64,
    pub mean_reputation: f64,
    pub std_error: f64,
}

/// Each user writes one review per interval for a fresh author of reputation
/// ½, lazily with the cohort's fault probability until `switch_at`. Rows are
/// grouped by cohort, then ordered by interval.
///
/// The draws of user `k` depend only on `(seed, k, interval)`, so cohorts with
/// equal fault probabilities produce equal trajectories.
pub fn recovery_experiment(config: &RecoveryConfig) -> Result<Vec<RecoveryRow>> {
    let params = GainParams::permissive(config.alpha)?;
    OracleParams::new(config.oracle.pi, config.oracle.pi_bar)?;
    if config.cohort_size == 0 {
        return Err(Error::config("cohort_size", "must be at least 1"));
    }
    for &mu in &config.faults {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::domain("fault_probability", mu, "[0, 1]"));
        }
    }
    let author = UnifiedParty::singleton(UserId(0), Role::Author);
    let mut rows = Vec::with_capacity(config.faults.len() * (config.intervals as usize + 1));
    for &mu in &config.faults {
        let mut states = vec![ReputationState::default(); config.cohort_size];
        rows.push(summarize(0, mu, &states));
        for interval in 1..=config.intervals {
            for (k, state) in states.iter_mut().enumerate() {
                let mut rng = stream(config.seed, "recovery", &[k as u64, interval]);
                let faulty = interval <= config.switch_at && rng.gen_bool(mu);
                let verdict = match (faulty, config.judge_honest_reviews) {
                    (true, _) => judge_interaction(Conduct::Faulty, config.oracle, &mut rng),
                    (false, true) => judge_interaction(Conduct::Honest, config.oracle, &mut rng),
                    (false, false) => Verdict::Honest,
                };
                state.record(InteractionRecord::new(
                    author.clone(),
                    INITIAL_REPUTATION,
                    verdict,
                    interval,
                ));
                match update_reputation_with(state, &params, config.oracle.pi) {
                    Update::Applied(applied) => *state = applied.state,
                    Update::Inactive => unreachable!("a review was recorded"),
                }
            }
            rows.push(summarize(interval, mu, &states));
        }
    }
    Ok(rows)
}

fn summarize(interval: u64, mu: f64, states: &[ReputationState]) -> RecoveryRow {
    let n = states.len() as f64;
    let mean = states.iter().map(|s| s.score).sum::<f64>() / n;
    let std_error = if states.len() > 1 {
        let var = states.iter().map(|s| (s.score - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    RecoveryRow {
        interval,
        fault_probability: mu,
        mean_reputation: mean,
        std_error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub inclusive: bool,
}

/// A sub-interval of `[0, 1]` with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitRange {
    pub lower: Bound,
    pub upper: Bound,
}

impl UnitRange {
    pub fn new(
        lower: f64,
        lower_inclusive: bool,
        upper: f64,
        upper_inclusive: bool,
    ) -> Result<Self> {
        for v in [lower, upper] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain("range bound", v, "[0, 1]"));
            }
        }
        if lower > upper || (lower == upper && !(lower_inclusive && upper_inclusive)) {
            return Err(Error::domain(
                "range lower bound",
                lower,
                "below the upper bound",
            ));
        }
        Ok(UnitRange {
            lower: Bound {
                value: lower,
                inclusive: lower_inclusive,
            },
            upper: Bound {
                value: upper,
                inclusive: upper_inclusive,
            },
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lower.value || (self.lower.inclusive && x == self.lower.value);
        let below = x < self.upper.value || (self.upper.inclusive && x == self.upper.value);
        above && below
    }
}

/// Punishment of a user whose single interval review goes to a counterparty
/// of reputation `counterparty`, lazy with probability `mu` and caught with
/// probability `pi`: `(1 + R̄ − μπR̄) / (1 + R̄)`.
pub fn lazy_penalty(mu: f64, pi: f64, counterparty: f64) -> f64 {
    (1.0 + counterparty - mu * pi * counterparty) / (1.0 + counterparty)
}

/// Range of [`lazy_penalty`] over the given detection and laziness ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRange {
    pub lower: Bound,
    pub upper: Bound,
}

/// The penalty decreases in `mu·pi`, so the lowest penalty comes from the
/// largest product and is attained only if both upper ends are.
pub fn lazy_penalty_range(pi: UnitRange, mu: UnitRange, counterparty: f64) -> Result<PenaltyRange> {
    if !(counterparty > 0.0 && counterparty < 1.0) {
        return Err(Error::domain(
            "counterparty reputation",
            counterparty,
            "(0, 1)",
        ));
    }
    Ok(PenaltyRange {
        lower: Bound {
            value: lazy_penalty(mu.upper.value, pi.upper.value, counterparty),
            inclusive: mu.upper.inclusive && pi.upper.inclusive,
        },
        upper: Bound {
            value: lazy_penalty(mu.lower.value, pi.lower.value, counterparty),
            inclusive: mu.lower.inclusive && pi.lower.inclusive,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reputation::update_map;

    #[test]
    fn penalty_examples() {
        assert_eq!(lazy_penalty(0.0, 0.9, 0.5), 1.0);
        assert!((lazy_penalty(0.1, 0.5, 0.5) - 1.475 / 1.5).abs() < 1e-15);
        let range = lazy_penalty_range(
            UnitRange::new(0.5, true, 1.0, false).unwrap(),
            UnitRange::new(0.1, true, 1.0, true).unwrap(),
            0.5,
        )
        .unwrap();
        assert!((range.lower.value - 2.0 / 3.0).abs() < 1e-12);
        assert!(!range.lower.inclusive);
        assert!((range.upper.value - 59.0 / 60.0).abs() < 1e-12);
        assert!(range.upper.inclusive);
    }

    #[test]
    fn unit_range_membership() {
        let r = UnitRange::new(0.5, true, 1.0, false).unwrap();
        assert!(r.contains(0.5) && r.contains(0.99) && !r.contains(1.0));
        assert!(UnitRange::new(0.6, true, 0.5, true).is_err());
    }

    fn small(faults: Vec<f64>) -> RecoveryConfig {
        RecoveryConfig {
            faults,
            cohort_size: 20,
            seed: 11,
            ..RecoveryConfig::default()
        }
    }

    #[test]
    fn honest_cohort_follows_direct_iteration() {
        let rows = recovery_experiment(&small(vec![0.0])).unwrap();
        let params = GainParams::new(DEFAULT_ALPHA).unwrap();
        let mut x = 0.5;
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row.interval, t as u64);
            assert!((row.mean_reputation - x).abs() < 1e-12);
            assert!(row.std_error < 1e-12);
            if t > 0 {
                assert!(row.mean_reputation > rows[t - 1].mean_reputation);
            }
            x = update_map(x, t as u64 + 1, &params).unwrap();
        }
        assert!(rows.last().unwrap().mean_reputation > 0.99);
    }

    #[test]
    fn always_lazy_cohort_sinks_before_switch() {
        let mut cfg = small(vec![1.0]);
        cfg.oracle = OracleParams::PERFECT;
        let rows = recovery_experiment(&cfg).unwrap();
        for w in rows[..=20].windows(2) {
            assert!(w[1].mean_reputation < w[0].mean_reputation);
        }
        assert!(rows[20].mean_reputation < 0.01);
        assert!(rows[40].mean_reputation > rows[20].mean_reputation);
    }

    #[test]
    fn equal_faults_give_equal_trajectories() {
        let rows = recovery_experiment(&small(vec![0.3, 0.3])).unwrap();
        let (a, b) = rows.split_at(41);
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.mean_reputation, y.mean_reputation);
        }
        assert_eq!(rows, recovery_experiment(&small(vec![0.3, 0.3])).unwrap());
    }

    #[test]
    fn switch_at_zero_is_all_honest() {
        let mut cfg = small(vec![0.7]);
        cfg.switch_at = 0;
        let honest = recovery_experiment(&small(vec![0.0])).unwrap();
        let switched = recovery_experiment(&cfg).unwrap();
        for (a, b) in honest.iter().zip(&switched) {
            assert_eq!(a.mean_reputation, b.mean_reputation);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(recovery_experiment(&small(vec![1.5])).is_err());
        let mut cfg = small(vec![0.0]);
        cfg.cohort_size = 0;
        assert!(recovery_experiment(&cfg).is_err());
    }
}
