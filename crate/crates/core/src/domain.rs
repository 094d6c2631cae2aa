//! Shared vocabulary: users, tags, unified parties, papers, venues.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::reputation::ReputationState;
use crate::{Error, Result};

/// Reputation every user starts with.
pub const INITIAL_REPUTATION: f64 = 0.5;

/// Lowest and highest admissible review score.
pub const MIN_REVIEW_SCORE: f64 = 1.0;
pub const MAX_REVIEW_SCORE: f64 = 5.0;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_newtype!(
    /// Stable user identifier, shared across venues and never reused.
    UserId,
    "u"
);
id_newtype!(PaperId, "p");
id_newtype!(VenueId, "v");

/// A set of normalized (trimmed, lowercased) topic tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagSet(BTreeSet<String>);

impl TagSet {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TagSet(
            tags.into_iter()
                .map(|t| t.as_ref().trim().to_lowercase())
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn intersection_len(&self, other: &TagSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn union_len(&self, other: &TagSet) -> usize {
        self.0.union(&other.0).count()
    }
}

impl<S: AsRef<str>> FromIterator<S> for TagSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TagSet::new(iter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Author,
    Reviewer,
}

/// The co-authors of one paper, or the reviewers assigned to it, acting as a
/// single counterparty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedParty {
    members: BTreeSet<UserId>,
    role: Role,
}

impl UnifiedParty {
    pub fn new<I: IntoIterator<Item = UserId>>(members: I, role: Role) -> Result<Self> {
        let members: BTreeSet<UserId> = members.into_iter().collect();
        if members.is_empty() {
            return Err(Error::EmptyParty);
        }
        Ok(UnifiedParty { members, role })
    }

    pub fn singleton(member: UserId, role: Role) -> Self {
        UnifiedParty {
            members: BTreeSet::from([member]),
            role,
        }
    }

    pub fn members(&self) -> &BTreeSet<UserId> {
        &self.members
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.members.contains(&user)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Oracle verdict on one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Honest,
    Faulty,
    /// Caught in the review comparison round; punished through the partial
    /// punishment factor rather than the full one.
    PartiallyFaulty,
}

/// One interaction of a user with a unified counterparty during an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub counterparty: UnifiedParty,
    /// Counterparty reputation frozen when the interaction happened.
    pub counterparty_reputation: f64,
    pub verdict: Verdict,
    pub interval: u64,
    /// Tag similarity between the user and the reviewed paper; `1.0` for
    /// interactions where expertise does not soften punishment (authoring).
    pub expertise: f64,
}

impl InteractionRecord {
    pub fn new(
        counterparty: UnifiedParty,
        counterparty_reputation: f64,
        verdict: Verdict,
        interval: u64,
    ) -> Self {
        InteractionRecord {
            counterparty,
            counterparty_reputation,
            verdict,
            interval,
            expertise: 1.0,
        }
    }

    pub fn with_expertise(mut self, expertise: f64) -> Self {
        self.expertise = expertise;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub tags: TagSet,
    pub reputation: ReputationState,
}

impl UserProfile {
    pub fn new(id: UserId, tags: TagSet) -> Self {
        UserProfile {
            id,
            tags,
            reputation: ReputationState::default(),
        }
    }

    pub fn score(&self) -> f64 {
        self.reputation.score
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub reviewer: UserId,
    /// Score on the `[1, 5]` scale.
    pub score: f64,
    /// Competence of the reviewer for this paper, in `[0, 1]`.
    pub competence: f64,
    pub reviewer_reputation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pending,
    Accepted,
    Rejected,
    BorderlineAccepted,
    BorderlineRejected,
}

impl Decision {
    pub fn is_accepted(self) -> bool {
        matches!(self, Decision::Accepted | Decision::BorderlineAccepted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: PaperId,
    pub venue: VenueId,
    pub authors: UnifiedParty,
    pub tags: TagSet,
    pub reviews: Vec<Review>,
    pub weighted_score: Option<f64>,
    pub decision: Decision,
}

impl PaperRecord {
    pub fn new(id: PaperId, venue: VenueId, authors: UnifiedParty, tags: TagSet) -> Self {
        PaperRecord {
            id,
            venue,
            authors,
            tags,
            reviews: Vec::new(),
            weighted_score: None,
            decision: Decision::Pending,
        }
    }

    pub fn mean_score(&self) -> Option<f64> {
        if self.reviews.is_empty() {
            return None;
        }
        Some(self.reviews.iter().map(|r| r.score).sum::<f64>() / self.reviews.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueConfig {
    pub id: VenueId,
    pub topic_tags: TagSet,
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub committee_reputation_floor: f64,
    /// Size `r` of the unified reviewer of every paper.
    pub reviewers_per_paper: usize,
    /// Maximum number of accepted papers, if bounded.
    pub capacity: Option<usize>,
}

impl VenueConfig {
    pub fn validate(&self) -> Result<()> {
        let in_scale = |s: f64| (MIN_REVIEW_SCORE..=MAX_REVIEW_SCORE).contains(&s);
        if !in_scale(self.accept_threshold) || !in_scale(self.reject_threshold) {
            return Err(Error::InvalidVenue(format!(
                "{}: thresholds must lie in [1, 5]",
                self.id
            )));
        }
        if self.reject_threshold >= self.accept_threshold {
            return Err(Error::InvalidVenue(format!(
                "{}: reject threshold {} must be below accept threshold {}",
                self.id, self.reject_threshold, self.accept_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.committee_reputation_floor) {
            return Err(Error::InvalidVenue(format!(
                "{}: committee reputation floor must lie in [0, 1)",
                self.id
            )));
        }
        if self.reviewers_per_paper == 0 {
            return Err(Error::InvalidVenue(format!(
                "{}: at least one reviewer per paper is required",
                self.id
            )));
        }
        Ok(())
    }
}

/// Read access to current user reputations.
pub trait ReputationLookup {
    fn reputation_of(&self, user: UserId) -> Option<f64>;
}

impl ReputationLookup for BTreeMap<UserId, UserProfile> {
    fn reputation_of(&self, user: UserId) -> Option<f64> {
        self.get(&user).map(UserProfile::score)
    }
}

impl ReputationLookup for BTreeMap<UserId, f64> {
    fn reputation_of(&self, user: UserId) -> Option<f64> {
        self.get(&user).copied()
    }
}

/// Reputation of a unified party: the arithmetic mean of its members' scores.
pub fn unified_reputation<L: ReputationLookup + ?Sized>(
    party: &UnifiedParty,
    world: &L,
) -> Result<f64> {
    let mut sum = 0.0;
    for &member in party.members() {
        sum += world
            .reputation_of(member)
            .ok_or(Error::UnknownUser(member))?;
    }
    Ok(sum / party.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PaperViolation {
    ScoreOutOfRange { reviewer: UserId, score: f64 },
    CompetenceOutOfRange { reviewer: UserId, competence: f64 },
    ReviewerIsAuthor { reviewer: UserId },
    DuplicateReviewer { reviewer: UserId },
}

/// Every invariant violation of `paper`; empty iff the paper is valid.
pub fn validate_paper(paper: &PaperRecord) -> Vec<PaperViolation> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for review in &paper.reviews {
        let reviewer = review.reviewer;
        if !(MIN_REVIEW_SCORE..=MAX_REVIEW_SCORE).contains(&review.score) {
            violations.push(PaperViolation::ScoreOutOfRange {
                reviewer,
                score: review.score,
            });
        }
        if !(0.0..=1.0).contains(&review.competence) {
            violations.push(PaperViolation::CompetenceOutOfRange {
                reviewer,
                competence: review.competence,
            });
        }
        if paper.authors.contains(reviewer) {
            violations.push(PaperViolation::ReviewerIsAuthor { reviewer });
        }
        if !seen.insert(reviewer) {
            violations.push(PaperViolation::DuplicateReviewer { reviewer });
        }
    }
    violations
}
