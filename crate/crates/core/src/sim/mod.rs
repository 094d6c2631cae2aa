//! Multi-interval simulation harness.
//!
//! A [`World`] registers users, opens venues, submits papers, assigns
//! reviewers, judges every interaction through a noisy oracle and closes each
//! interval with reputation updates, logging everything to a [`Ledger`].
//! [`recovery_experiment`] runs the simpler one-review-per-interval cohort
//! model.
//!
//! [`Ledger`]: crate::ledger::Ledger

mod recovery;
mod world;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Role, UnifiedParty, UserId, Verdict};
use crate::error::{Error, Result};
use crate::game::OracleParams;
use crate::reputation::GainParams;
use crate::scoring::{SimilarityFn, DEFAULT_ACCEPT_THRESHOLD, DEFAULT_REJECT_THRESHOLD};

pub use recovery::{
    lazy_penalty, lazy_penalty_range, recovery_experiment, Bound, PenaltyRange, RecoveryConfig,
    RecoveryRow, UnitRange,
};
pub use world::{IntervalReport, Submission, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Honest,
    /// Repeats its previous review score.
    Lazy,
    /// Scores without reading the paper.
    BlindReviewer,
    /// Quietly sinks papers; caught only in the comparison round.
    SilentButDeadly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub archetype: Archetype,
    /// Probability that a single review is faulty.
    pub fault_probability: f64,
    /// Behaves honestly in every interval after this one.
    pub switch_to_honest_at: Option<u64>,
}

impl BehaviorProfile {
    pub const HONEST: BehaviorProfile = BehaviorProfile {
        archetype: Archetype::Honest,
        fault_probability: 0.0,
        switch_to_honest_at: None,
    };

    pub fn new(
        archetype: Archetype,
        fault_probability: f64,
        switch_to_honest_at: Option<u64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&fault_probability) {
            return Err(Error::domain(
                "fault_probability",
                fault_probability,
                "[0, 1]",
            ));
        }
        if archetype == Archetype::Honest && fault_probability != 0.0 {
            return Err(Error::domain(
                "fault_probability",
                fault_probability,
                "{0} for honest users",
            ));
        }
        Ok(BehaviorProfile {
            archetype,
            fault_probability,
            switch_to_honest_at,
        })
    }

    /// Fault probability in effect during `interval`.
    pub fn fault_probability_at(&self, interval: u64) -> f64 {
        match self.switch_to_honest_at {
            Some(switch) if interval > switch => 0.0,
            _ => self.fault_probability,
        }
    }

    pub fn is_honest(&self) -> bool {
        self.archetype == Archetype::Honest || self.fault_probability == 0.0
    }
}

/// Actual conduct in one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conduct {
    Honest,
    Faulty,
}

/// Faulty conduct is caught with probability `pi`; honest conduct is
/// confirmed with probability `pi_bar`.
pub fn judge_interaction<R: Rng + ?Sized>(
    truth: Conduct,
    oracle: OracleParams,
    rng: &mut R,
) -> Verdict {
    let u: f64 = rng.gen();
    match truth {
        Conduct::Faulty if u < oracle.pi => Verdict::Faulty,
        Conduct::Faulty => Verdict::Honest,
        Conduct::Honest if u < oracle.pi_bar => Verdict::Honest,
        Conduct::Honest => Verdict::Faulty,
    }
}

/// Draws `r` distinct reviewers uniformly from `pool`, which must already
/// exclude the authors. The sample is reported in pool order.
pub fn assign_reviewers<R: Rng + ?Sized>(
    pool: &[UserId],
    r: usize,
    rng: &mut R,
) -> Result<UnifiedParty> {
    if r == 0 || pool.len() < r {
        return Err(Error::InsufficientReviewers {
            needed: r.max(1),
            available: pool.len(),
        });
    }
    let mut picked = sample(rng, pool.len(), r).into_vec();
    picked.sort_unstable();
    UnifiedParty::new(picked.into_iter().map(|k| pool[k]), Role::Reviewer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub count: usize,
    pub archetype: Archetype,
    #[serde(default)]
    pub fault_probability: f64,
    #[serde(default)]
    pub switch_to_honest_at: Option<u64>,
}

/// A simulated world, as read from a JSON document. Missing fields take their
/// defaults; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub intervals: u64,
    pub master_seed: u64,
    pub alpha: f64,
    pub oracle: OracleParams,
    pub reviewers_per_paper: usize,
    /// Expected papers led by each user per interval.
    pub papers_per_user: f64,
    pub authors_per_paper: usize,
    pub venues_per_interval: usize,
    pub similarity: SimilarityFn,
    pub tag_universe: usize,
    pub tags_per_user: usize,
    pub tags_per_venue: usize,
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub committee_reputation_floor: f64,
    /// Accepted papers per venue and interval; `None` accepts every
    /// borderline paper.
    pub venue_capacity: Option<usize>,
    pub cohorts: Vec<CohortConfig>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            intervals: 10,
            master_seed: 0,
            alpha: crate::reputation::DEFAULT_ALPHA,
            oracle: OracleParams {
                pi: 0.9,
                pi_bar: 0.9,
            },
            reviewers_per_paper: 3,
            papers_per_user: 0.5,
            authors_per_paper: 2,
            venues_per_interval: 2,
            similarity: SimilarityFn::Cosine,
            tag_universe: 8,
            tags_per_user: 2,
            tags_per_venue: 3,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            reject_threshold: DEFAULT_REJECT_THRESHOLD,
            committee_reputation_floor: 0.0,
            venue_capacity: None,
            cohorts: vec![CohortConfig {
                count: 20,
                archetype: Archetype::Honest,
                fault_probability: 0.0,
                switch_to_honest_at: None,
            }],
        }
    }
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: WorldConfig = serde_json::from_str(text).map_err(|e| {
            let position = format!(" at line {} column {}", e.line(), e.column());
            let message = e.to_string();
            let reason = message.strip_suffix(&position).unwrap_or(&message);
            Error::config(format!("line {} column {}", e.line(), e.column()), reason)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn user_count(&self) -> usize {
        self.cohorts.iter().map(|c| c.count).sum()
    }

    pub fn honest_fraction(&self) -> f64 {
        let total = self.user_count();
        if total == 0 {
            return 1.0;
        }
        self.honest_users() as f64 / total as f64
    }

    /// At least two thirds of the users are honest.
    pub fn in_assumption(&self) -> bool {
        3 * self.honest_users() >= 2 * self.user_count()
    }

    fn honest_users(&self) -> usize {
        self.cohorts
            .iter()
            .filter(|c| c.archetype == Archetype::Honest || c.fault_probability == 0.0)
            .map(|c| c.count)
            .sum()
    }

    pub fn gain_params(&self) -> Result<GainParams> {
        GainParams::permissive(self.alpha).map_err(|_| Error::config("alpha", "must lie in (0, 1)"))
    }

    pub fn behaviors(&self) -> Result<Vec<BehaviorProfile>> {
        let mut out = Vec::with_capacity(self.user_count());
        for (k, c) in self.cohorts.iter().enumerate() {
            let profile =
                BehaviorProfile::new(c.archetype, c.fault_probability, c.switch_to_honest_at)
                    .map_err(|e| {
                        Error::config(format!("cohorts[{k}].fault_probability"), e.to_string())
                    })?;
            out.extend(std::iter::repeat_n(profile, c.count));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} is outside [0, 1]")))
            }
        };
        self.gain_params()?;
        unit("oracle.pi", self.oracle.pi)?;
        unit("oracle.pi_bar", self.oracle.pi_bar)?;
        unit(
            "committee_reputation_floor",
            self.committee_reputation_floor,
        )?;
        if self.reviewers_per_paper == 0 {
            return Err(Error::config("reviewers_per_paper", "must be at least 1"));
        }
        if !(self.papers_per_user.is_finite() && self.papers_per_user >= 0.0) {
            return Err(Error::config(
                "papers_per_user",
                "must be a non-negative number",
            ));
        }
        if self.authors_per_paper == 0 {
            return Err(Error::config("authors_per_paper", "must be at least 1"));
        }
        if self.venues_per_interval == 0 {
            return Err(Error::config("venues_per_interval", "must be at least 1"));
        }
        if self.tag_universe == 0 {
            return Err(Error::config("tag_universe", "must be at least 1"));
        }
        if self.tags_per_user == 0 || self.tags_per_user > self.tag_universe {
            return Err(Error::config(
                "tags_per_user",
                "must lie in 1..=tag_universe",
            ));
        }
        if self.tags_per_venue == 0 || self.tags_per_venue > self.tag_universe {
            return Err(Error::config(
                "tags_per_venue",
                "must lie in 1..=tag_universe",
            ));
        }
        let score_range = crate::domain::MIN_REVIEW_SCORE..=crate::domain::MAX_REVIEW_SCORE;
        if !score_range.contains(&self.accept_threshold) {
            return Err(Error::config("accept_threshold", "must lie in [1, 5]"));
        }
        if !score_range.contains(&self.reject_threshold)
            || self.reject_threshold >= self.accept_threshold
        {
            return Err(Error::config(
                "reject_threshold",
                "must lie in [1, accept_threshold)",
            ));
        }
        if self.cohorts.is_empty() {
            return Err(Error::config("cohorts", "at least one cohort is required"));
        }
        for (k, c) in self.cohorts.iter().enumerate() {
            unit(
                &format!("cohorts[{k}].fault_probability"),
                c.fault_probability,
            )?;
        }
        self.behaviors()?;
        let needed = self.authors_per_paper + self.reviewers_per_paper;
        if self.user_count() < needed {
            return Err(Error::config(
                "cohorts",
                format!("need at least authors_per_paper + reviewers_per_paper = {needed} users"),
            ));
        }
        Ok(())
    }
}
