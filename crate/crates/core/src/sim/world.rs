use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    assign_reviewers, judge_interaction, Archetype, BehaviorProfile, Conduct, WorldConfig,
};
use crate::domain::{
    unified_reputation, Decision, InteractionRecord, PaperId, PaperRecord, Review, Role, TagSet,
    UnifiedParty, UserId, UserProfile, VenueConfig, VenueId, Verdict, MAX_REVIEW_SCORE,
    MIN_REVIEW_SCORE,
};
use crate::error::Result;
use crate::ledger::{
    self, DecisionMade, DepositEscrowed, DepositReturned, EventPayload, FaultFlagged, Ledger,
    PaperSnapshot, PaperSubmitted, ReputationUpdated, ReviewSubmitted, ReviewerAssigned,
    UserRegistered, UserSnapshot, VenueCreated, WorldSnapshot,
};
use crate::reputation::{update_reputation_with, GainParams, Update};
use crate::rng::stream;
use crate::scoring::{
    competence, decide, select_borderline, similarity, weighted_score_or_mean, BorderlineCandidate,
    Triage,
};

/// Share of the unified author's reputation held in escrow per submission.
const DEPOSIT_SHARE: f64 = 0.1;

/// One paper to submit in an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub authors: Vec<UserId>,
    /// Index of the target venue among the interval's venues.
    pub venue_slot: usize,
    pub tags: TagSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub interval: u64,
    pub user_count: usize,
    pub mean_reputation: f64,
    pub papers: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub borderline_accepted: usize,
    pub borderline_rejected: usize,
    /// Hex digest of the world snapshot after the interval closed.
    pub digest: String,
}

#[derive(Debug)]
pub struct World {
    config: WorldConfig,
    params: GainParams,
    users: BTreeMap<UserId, UserProfile>,
    behaviors: BTreeMap<UserId, BehaviorProfile>,
    last_review_score: BTreeMap<UserId, f64>,
    papers: BTreeMap<PaperId, PaperRecord>,
    ledger: Ledger,
    interval: u64,
    next_paper: u64,
    next_venue: u64,
}

fn tag_name(k: usize) -> String {
    format!("t{k}")
}

fn random_tags<R: Rng>(rng: &mut R, universe: usize, count: usize) -> TagSet {
    sample(rng, universe, count)
        .into_iter()
        .map(tag_name)
        .collect()
}

struct PendingPaper {
    id: PaperId,
    author_reputation: f64,
    quality: f64,
    reviewers: UnifiedParty,
    reviewer_reputation: f64,
    deposit: f64,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        World::with_ledger(config, Ledger::in_memory())
    }

    /// Registers every user (in interval 0) into `ledger`.
    pub fn with_ledger(config: WorldConfig, ledger: Ledger) -> Result<Self> {
        config.validate()?;
        let params = config.gain_params()?;
        let mut world = World {
            params,
            users: BTreeMap::new(),
            behaviors: BTreeMap::new(),
            last_review_score: BTreeMap::new(),
            papers: BTreeMap::new(),
            ledger,
            interval: 0,
            next_paper: 1,
            next_venue: 1,
            config,
        };
        for (k, behavior) in world.config.behaviors()?.into_iter().enumerate() {
            let id = UserId(k as u64 + 1);
            let mut rng = stream(world.config.master_seed, "user-tags", &[id.0]);
            let tags = random_tags(
                &mut rng,
                world.config.tag_universe,
                world.config.tags_per_user,
            );
            let profile = UserProfile::new(id, tags.clone());
            world.ledger.append(
                0,
                EventPayload::UserRegistered(UserRegistered {
                    user: id,
                    tags,
                    reputation: profile.score(),
                }),
            )?;
            world.users.insert(id, profile);
            world.behaviors.insert(id, behavior);
        }
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn users(&self) -> &BTreeMap<UserId, UserProfile> {
        &self.users
    }

    pub fn papers(&self) -> &BTreeMap<PaperId, PaperRecord> {
        &self.papers
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    /// Number of intervals closed so far.
    pub fn interval(&self) -> u64 {
        self.interval
    }

    /// Overrides the behavior of one user.
    pub fn set_behavior(&mut self, user: UserId, behavior: BehaviorProfile) {
        self.behaviors.insert(user, behavior);
    }

    pub fn mean_reputation(&self) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        self.users.values().map(UserProfile::score).sum::<f64>() / self.users.len() as f64
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            users: self
                .users
                .iter()
                .map(|(&id, u)| {
                    let s = UserSnapshot {
                        score: u.reputation.score,
                        active_intervals: u.reputation.active_intervals,
                    };
                    (id, s)
                })
                .collect(),
            papers: self
                .papers
                .iter()
                .map(|(&id, p)| {
                    let s = PaperSnapshot {
                        decision: p.decision,
                        weighted_score: p.weighted_score,
                    };
                    (id, s)
                })
                .collect(),
        }
    }

    /// Draws the submissions of the next interval from the configured rates.
    pub fn plan_submissions(&self) -> Vec<Submission> {
        let interval = self.interval + 1;
        let cfg = &self.config;
        let ids: Vec<UserId> = self.users.keys().copied().collect();
        let mut plan = Vec::new();
        for (k, &lead) in ids.iter().enumerate() {
            let mut rng = stream(cfg.master_seed, "submissions", &[interval, lead.0]);
            let whole = cfg.papers_per_user.floor();
            let extra = rng.gen_bool(cfg.papers_per_user - whole);
            let count = whole as usize + usize::from(extra);
            for _ in 0..count {
                let others = ids.len() - 1;
                let coauthors = (cfg.authors_per_paper - 1).min(others);
                let mut authors = vec![lead];
                for pick in sample(&mut rng, others, coauthors) {
                    // Skip over the lead author's own index.
                    let idx = if pick >= k { pick + 1 } else { pick };
                    authors.push(ids[idx]);
                }
                authors.sort_unstable();
                plan.push(Submission {
                    authors,
                    venue_slot: rng.gen_range(0..cfg.venues_per_interval),
                    tags: self.users[&lead].tags.clone(),
                });
            }
        }
        plan
    }

    pub fn run_interval(&mut self) -> Result<IntervalReport> {
        let plan = self.plan_submissions();
        self.run_interval_with(&plan)
    }

    /// Runs every remaining configured interval.
    pub fn run(&mut self) -> Result<Vec<IntervalReport>> {
        let mut reports = Vec::new();
        while self.interval < self.config.intervals {
            reports.push(self.run_interval()?);
        }
        Ok(reports)
    }

    fn append(&mut self, payload: EventPayload) -> Result<()> {
        self.ledger.append(self.interval, payload)?;
        Ok(())
    }

    fn open_venues(&mut self) -> Result<Vec<VenueConfig>> {
        let cfg = &self.config;
        let mut venues = Vec::with_capacity(cfg.venues_per_interval);
        for slot in 0..cfg.venues_per_interval {
            let mut rng = stream(cfg.master_seed, "venue-tags", &[self.interval, slot as u64]);
            let venue = VenueConfig {
                id: VenueId(self.next_venue),
                topic_tags: random_tags(&mut rng, cfg.tag_universe, cfg.tags_per_venue),
                accept_threshold: cfg.accept_threshold,
                reject_threshold: cfg.reject_threshold,
                committee_reputation_floor: cfg.committee_reputation_floor,
                reviewers_per_paper: cfg.reviewers_per_paper,
                capacity: cfg.venue_capacity,
            };
            venue.validate()?;
            self.next_venue += 1;
            venues.push(venue);
        }
        for venue in &venues {
            self.append(EventPayload::VenueCreated(VenueCreated {
                venue: venue.clone(),
            }))?;
        }
        Ok(venues)
    }

    /// Reviewer pool for a paper: non-authors above the venue's reputation
    /// floor who share a topic with it, or every non-author when that pool is
    /// too small.
    fn reviewer_pool(&self, venue: &VenueConfig, authors: &UnifiedParty) -> Vec<UserId> {
        let eligible: Vec<UserId> = self
            .users
            .values()
            .filter(|u| !authors.contains(u.id))
            .filter(|u| u.score() >= venue.committee_reputation_floor)
            .filter(|u| similarity(&u.tags, &venue.topic_tags, &self.config.similarity) > 0.0)
            .map(|u| u.id)
            .collect();
        if eligible.len() >= venue.reviewers_per_paper {
            eligible
        } else {
            self.users
                .keys()
                .copied()
                .filter(|&u| !authors.contains(u))
                .collect()
        }
    }

    fn write_review<R: Rng>(
        &self,
        reviewer: UserId,
        quality: f64,
        rng: &mut R,
    ) -> (f64, Option<Archetype>) {
        let behavior = self.behaviors[&reviewer];
        let faulty = rng.gen_bool(behavior.fault_probability_at(self.interval));
        let honest_score =
            (quality + rng.gen_range(-0.5..=0.5)).clamp(MIN_REVIEW_SCORE, MAX_REVIEW_SCORE);
        if !faulty {
            return (honest_score, None);
        }
        let score = match behavior.archetype {
            Archetype::Honest => honest_score,
            Archetype::Lazy => *self
                .last_review_score
                .get(&reviewer)
                .unwrap_or(&honest_score),
            Archetype::BlindReviewer => rng.gen_range(MIN_REVIEW_SCORE..=MAX_REVIEW_SCORE),
            Archetype::SilentButDeadly => MIN_REVIEW_SCORE,
        };
        (score, Some(behavior.archetype))
    }

    /// Submission, assignment, review, judgement, decision and reputation
    /// update for one interval.
    pub fn run_interval_with(&mut self, plan: &[Submission]) -> Result<IntervalReport> {
        self.interval += 1;
        let interval = self.interval;
        let seed = self.config.master_seed;
        let oracle = self.config.oracle;
        let venues = self.open_venues()?;

        // Submission.
        let mut pending: Vec<(usize, PendingPaper)> = Vec::with_capacity(plan.len());
        for sub in plan {
            let venue = &venues[sub.venue_slot % venues.len()];
            let authors = UnifiedParty::new(sub.authors.iter().copied(), Role::Author)?;
            let author_reputation = unified_reputation(&authors, &self.users)?;
            let id = PaperId(self.next_paper);
            self.next_paper += 1;
            let quality = stream(seed, "paper-quality", &[interval, id.0])
                .gen_range(MIN_REVIEW_SCORE..=MAX_REVIEW_SCORE);
            let deposit = DEPOSIT_SHARE * author_reputation;
            self.append(EventPayload::PaperSubmitted(PaperSubmitted {
                paper: id,
                venue: venue.id,
                authors: authors.members().iter().copied().collect(),
                tags: sub.tags.clone(),
            }))?;
            self.append(EventPayload::DepositEscrowed(DepositEscrowed {
                paper: id,
                authors: authors.members().iter().copied().collect(),
                amount: deposit,
            }))?;
            for &a in authors.members() {
                self.users
                    .get_mut(&a)
                    .expect("validated author")
                    .reputation
                    .record_submission();
            }
            self.papers.insert(
                id,
                PaperRecord::new(id, venue.id, authors, sub.tags.clone()),
            );
            let slot = sub.venue_slot % venues.len();
            pending.push((
                slot,
                PendingPaper {
                    id,
                    author_reputation,
                    quality,
                    reviewers: UnifiedParty::singleton(UserId(0), Role::Reviewer),
                    reviewer_reputation: 0.0,
                    deposit,
                },
            ));
        }

        // Assignment.
        for (slot, p) in pending.iter_mut() {
            let venue = &venues[*slot];
            let pool = self.reviewer_pool(venue, &self.papers[&p.id].authors);
            let mut rng = stream(seed, "assign", &[interval, p.id.0]);
            p.reviewers = assign_reviewers(&pool, venue.reviewers_per_paper, &mut rng)?;
            p.reviewer_reputation = unified_reputation(&p.reviewers, &self.users)?;
            for &reviewer in p.reviewers.members() {
                let payload = EventPayload::ReviewerAssigned(ReviewerAssigned {
                    paper: p.id,
                    reviewer,
                    reviewer_reputation: self.users[&reviewer].score(),
                });
                self.ledger.append(interval, payload)?;
            }
        }

        // Review and judgement.
        for (_, p) in &pending {
            let paper_tags = self.papers[&p.id].tags.clone();
            let authors = self.papers[&p.id].authors.clone();
            for &reviewer in p.reviewers.members() {
                let mut rng = stream(seed, "review", &[interval, p.id.0, reviewer.0]);
                let (score, fault) = self.write_review(reviewer, p.quality, &mut rng);
                let comp = competence(
                    &self.users[&reviewer].tags,
                    &paper_tags,
                    &self.config.similarity,
                );
                let truth = if fault.is_some() {
                    Conduct::Faulty
                } else {
                    Conduct::Honest
                };
                let mut verdict = judge_interaction(truth, oracle, &mut rng);
                if verdict == Verdict::Faulty && fault == Some(Archetype::SilentButDeadly) {
                    verdict = Verdict::PartiallyFaulty;
                }
                let review = Review {
                    reviewer,
                    score,
                    competence: comp,
                    reviewer_reputation: self.users[&reviewer].score(),
                };
                self.papers
                    .get_mut(&p.id)
                    .expect("submitted")
                    .reviews
                    .push(review);
                self.last_review_score.insert(reviewer, score);
                self.append(EventPayload::ReviewSubmitted(ReviewSubmitted {
                    paper: p.id,
                    reviewer,
                    score,
                    competence: comp,
                }))?;
                if verdict != Verdict::Honest {
                    self.append(EventPayload::FaultFlagged(FaultFlagged {
                        paper: p.id,
                        user: reviewer,
                        role: Role::Reviewer,
                        verdict,
                    }))?;
                }
                let record =
                    InteractionRecord::new(authors.clone(), p.author_reputation, verdict, interval)
                        .with_expertise(comp);
                self.users
                    .get_mut(&reviewer)
                    .expect("assigned")
                    .reputation
                    .record(record);
            }
            for &author in authors.members() {
                let mut rng = stream(seed, "author-judge", &[interval, p.id.0, author.0]);
                let verdict = judge_interaction(Conduct::Honest, oracle, &mut rng);
                if verdict != Verdict::Honest {
                    self.append(EventPayload::FaultFlagged(FaultFlagged {
                        paper: p.id,
                        user: author,
                        role: Role::Author,
                        verdict,
                    }))?;
                }
                let record = InteractionRecord::new(
                    p.reviewers.clone(),
                    p.reviewer_reputation,
                    verdict,
                    interval,
                );
                self.users
                    .get_mut(&author)
                    .expect("author")
                    .reputation
                    .record(record);
            }
        }

        // Decisions, venue by venue.
        let mut report = IntervalReport {
            interval,
            user_count: self.users.len(),
            mean_reputation: 0.0,
            papers: pending.len(),
            accepted: 0,
            rejected: 0,
            borderline_accepted: 0,
            borderline_rejected: 0,
            digest: String::new(),
        };
        for (slot, venue) in venues.iter().enumerate() {
            let mut accepted = 0usize;
            let mut borderline = Vec::new();
            let mut decided = Vec::new();
            for (order, (_, p)) in pending.iter().enumerate().filter(|(_, (s, _))| *s == slot) {
                let paper = self.papers.get_mut(&p.id).expect("submitted");
                let (ws, degenerate) = weighted_score_or_mean(paper, p.author_reputation)?;
                paper.weighted_score = Some(ws.weighted);
                match decide(paper, venue)? {
                    Triage::Accepted => {
                        paper.decision = Decision::Accepted;
                        accepted += 1;
                    }
                    Triage::Rejected => paper.decision = Decision::Rejected,
                    Triage::Borderline => borderline.push(BorderlineCandidate {
                        paper: p.id,
                        author_reputation: p.author_reputation,
                        weighted_score: Some(ws.weighted),
                        submission_order: order as u64,
                    }),
                }
                decided.push((p.id, degenerate, p.deposit));
            }
            let room = venue
                .capacity
                .map_or(usize::MAX, |c| c.saturating_sub(accepted));
            let chosen = select_borderline(&borderline, room);
            for c in &borderline {
                let paper = self.papers.get_mut(&c.paper).expect("submitted");
                paper.decision = if chosen.contains(&c.paper) {
                    Decision::BorderlineAccepted
                } else {
                    Decision::BorderlineRejected
                };
            }
            for (id, degenerate, deposit) in decided {
                let paper = &self.papers[&id];
                match paper.decision {
                    Decision::Accepted => report.accepted += 1,
                    Decision::Rejected => report.rejected += 1,
                    Decision::BorderlineAccepted => report.borderline_accepted += 1,
                    Decision::BorderlineRejected => report.borderline_rejected += 1,
                    Decision::Pending => unreachable!("every reviewed paper is decided"),
                }
                let payload = EventPayload::DecisionMade(DecisionMade {
                    paper: id,
                    decision: paper.decision,
                    mean_score: paper.mean_score().expect("reviewed"),
                    weighted_score: paper.weighted_score,
                    degenerate_weights: degenerate,
                });
                self.append(payload)?;
                self.append(EventPayload::DepositReturned(DepositReturned {
                    paper: id,
                    amount: deposit,
                }))?;
            }
        }

        // Reputation update for active users.
        let pi = oracle.pi;
        let ids: Vec<UserId> = self.users.keys().copied().collect();
        for id in ids {
            let state = &self.users[&id].reputation;
            if let Update::Applied(applied) = update_reputation_with(state, &self.params, pi) {
                let payload = EventPayload::ReputationUpdated(ReputationUpdated {
                    user: id,
                    previous: applied.previous_score,
                    score: applied.state.score,
                    punishment: applied.punishment,
                    gain: applied.gain,
                    active_intervals: applied.state.active_intervals,
                });
                self.users.get_mut(&id).expect("exists").reputation = applied.state;
                self.append(payload)?;
            }
        }
        self.ledger.flush()?;

        report.mean_reputation = self.mean_reputation();
        report.digest = self.snapshot().digest_hex();
        Ok(report)
    }

    /// Replays this world's own ledger and returns its digest.
    pub fn replayed_digest(&self) -> Result<String> {
        Ok(ledger::replay(self.ledger.events())?.digest_hex())
    }
}
