//! Tag similarity, reviewer competence, the weighted paper score and the
//! accept/reject/borderline pipeline.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::domain::{PaperId, PaperRecord, TagSet, VenueConfig};
use crate::{Error, Result};

pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 4.0;
pub const DEFAULT_REJECT_THRESHOLD: f64 = 2.0;

/// A similarity measure on tag sets with values in `[0, 1]`.
pub trait TagSimilarity {
    fn similarity(&self, a: &TagSet, b: &TagSet) -> f64;
}

/// Built-in set similarities. Both treat a tag set as a binary vector over the
/// union of tags; two empty sets have similarity 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityFn {
    #[default]
    Cosine,
    Jaccard,
}

impl TagSimilarity for SimilarityFn {
    fn similarity(&self, a: &TagSet, b: &TagSet) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let common = a.intersection_len(b) as f64;
        match self {
            SimilarityFn::Cosine => common / ((a.len() * b.len()) as f64).sqrt(),
            SimilarityFn::Jaccard => common / a.union_len(b) as f64,
        }
    }
}

pub fn similarity<S: TagSimilarity + ?Sized>(a: &TagSet, b: &TagSet, sim: &S) -> f64 {
    sim.similarity(a, b).clamp(0.0, 1.0)
}

/// Competence of a reviewer for a paper: the similarity of their tags.
pub fn competence<S: TagSimilarity + ?Sized>(
    reviewer_tags: &TagSet,
    paper_tags: &TagSet,
    sim: &S,
) -> f64 {
    similarity(reviewer_tags, paper_tags, sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedScore {
    /// `W = R_author · Σ C·R·S / (r · Σ C·R)`.
    pub weighted: f64,
    /// `Σ C·R·S / Σ C·R`, the competence- and reputation-weighted mean review
    /// score, equal to `r·W / R_author`.
    pub reviewer_mean: f64,
}

/// Weighted score of a paper given the reputation of its unified author.
pub fn weighted_score(paper: &PaperRecord, author_reputation: f64) -> Result<WeightedScore> {
    if paper.reviews.is_empty() {
        return Err(Error::NotReviewable(paper.id));
    }
    let (mut numer, mut denom) = (0.0, 0.0);
    for review in &paper.reviews {
        let w = review.competence * review.reviewer_reputation;
        numer += w * review.score;
        denom += w;
    }
    if denom <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let r = paper.reviews.len() as f64;
    Ok(WeightedScore {
        weighted: author_reputation * numer / (r * denom),
        reviewer_mean: numer / denom,
    })
}

/// Like [`weighted_score`], but falls back to the plain mean review score when
/// every weight is zero. The flag is `true` when the fallback was taken.
pub fn weighted_score_or_mean(
    paper: &PaperRecord,
    author_reputation: f64,
) -> Result<(WeightedScore, bool)> {
    match weighted_score(paper, author_reputation) {
        Ok(w) => Ok((w, false)),
        Err(Error::DegenerateWeights) => {
            let mean = paper.mean_score().ok_or(Error::NotReviewable(paper.id))?;
            let r = paper.reviews.len() as f64;
            Ok((
                WeightedScore {
                    weighted: author_reputation * mean / r,
                    reviewer_mean: mean,
                },
                true,
            ))
        }
        Err(e) => Err(e),
    }
}

/// Outcome of thresholding the mean review score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Triage {
    Accepted,
    Rejected,
    Borderline,
}

pub fn decide(paper: &PaperRecord, venue: &VenueConfig) -> Result<Triage> {
    let mean = paper.mean_score().ok_or(Error::NotReviewable(paper.id))?;
    Ok(if mean >= venue.accept_threshold {
        Triage::Accepted
    } else if mean <= venue.reject_threshold {
        Triage::Rejected
    } else {
        Triage::Borderline
    })
}

/// A borderline paper competing for the remaining acceptance slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorderlineCandidate {
    pub paper: PaperId,
    pub author_reputation: f64,
    pub weighted_score: Option<f64>,
    pub submission_order: u64,
}

fn rank(a: &BorderlineCandidate, b: &BorderlineCandidate) -> Ordering {
    b.author_reputation
        .total_cmp(&a.author_reputation)
        .then_with(|| match (a.weighted_score, b.weighted_score) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.submission_order.cmp(&b.submission_order))
        .then_with(|| a.paper.cmp(&b.paper))
}

/// Accepts up to `remaining_capacity` borderline papers, highest author
/// reputation first; ties go to the higher weighted score, then to the
/// earlier submission. Returns the accepted papers in rank order.
pub fn select_borderline(
    borderline: &[BorderlineCandidate],
    remaining_capacity: usize,
) -> Vec<PaperId> {
    let mut ranked: Vec<&BorderlineCandidate> = borderline.iter().collect();
    ranked.sort_by(|a, b| rank(a, b));
    ranked
        .into_iter()
        .take(remaining_capacity)
        .map(|c| c.paper)
        .collect()
}
