//! Append-only, hash-chained event log with replay.
//!
//! Every event stores the digest of its predecessor and its own digest,
//! `SHA-256` over a length-prefixed encoding of
//! `(prev_hash, sequence, interval, step, kind, payload JSON)`. The genesis
//! event links to 32 zero bytes. On disk the log is JSON Lines, one event per
//! line with lowercase hex digests; a line must re-serialize to exactly the
//! bytes stored, so any edit to a persisted event is detected.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::domain::{Decision, PaperId, Role, TagSet, UserId, VenueConfig, Verdict};

pub type Digest = [u8; 32];

pub const GENESIS_HASH: Digest = [0u8; 32];

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger I/O: {0}")]
    Io(#[from] io::Error),

    #[error("event for interval {interval} appended after interval {last}")]
    OrderingViolation { interval: u64, last: u64 },

    #[error("hash chain broken at sequence {sequence}")]
    BrokenChain { sequence: u64 },

    #[error("cannot encode event: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogicalTime {
    pub interval: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRegistered {
    pub user: UserId,
    pub tags: TagSet,
    pub reputation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueCreated {
    pub venue: VenueConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperSubmitted {
    pub paper: PaperId,
    pub venue: crate::domain::VenueId,
    pub authors: Vec<UserId>,
    pub tags: TagSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerAssigned {
    pub paper: PaperId,
    pub reviewer: UserId,
    pub reviewer_reputation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSubmitted {
    pub paper: PaperId,
    pub reviewer: UserId,
    pub score: f64,
    pub competence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultFlagged {
    pub paper: PaperId,
    pub user: UserId,
    pub role: Role,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMade {
    pub paper: PaperId,
    pub decision: Decision,
    pub mean_score: f64,
    pub weighted_score: Option<f64>,
    /// All competence weights were zero; the weighted score used the plain mean.
    pub degenerate_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationUpdated {
    pub user: UserId,
    pub previous: f64,
    pub score: f64,
    pub punishment: f64,
    pub gain: f64,
    pub active_intervals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositEscrowed {
    pub paper: PaperId,
    pub authors: Vec<UserId>,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositReturned {
    pub paper: PaperId,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventPayload {
    UserRegistered(UserRegistered),
    VenueCreated(VenueCreated),
    PaperSubmitted(PaperSubmitted),
    ReviewerAssigned(ReviewerAssigned),
    ReviewSubmitted(ReviewSubmitted),
    FaultFlagged(FaultFlagged),
    DecisionMade(DecisionMade),
    ReputationUpdated(ReputationUpdated),
    DepositEscrowed(DepositEscrowed),
    DepositReturned(DepositReturned),
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::UserRegistered(_) => "UserRegistered",
            EventPayload::VenueCreated(_) => "VenueCreated",
            EventPayload::PaperSubmitted(_) => "PaperSubmitted",
            EventPayload::ReviewerAssigned(_) => "ReviewerAssigned",
            EventPayload::ReviewSubmitted(_) => "ReviewSubmitted",
            EventPayload::FaultFlagged(_) => "FaultFlagged",
            EventPayload::DecisionMade(_) => "DecisionMade",
            EventPayload::ReputationUpdated(_) => "ReputationUpdated",
            EventPayload::DepositEscrowed(_) => "DepositEscrowed",
            EventPayload::DepositReturned(_) => "DepositReturned",
        }
    }

    fn body_json(&self) -> serde_json::Result<Vec<u8>> {
        match self {
            EventPayload::UserRegistered(p) => serde_json::to_vec(p),
            EventPayload::VenueCreated(p) => serde_json::to_vec(p),
            EventPayload::PaperSubmitted(p) => serde_json::to_vec(p),
            EventPayload::ReviewerAssigned(p) => serde_json::to_vec(p),
            EventPayload::ReviewSubmitted(p) => serde_json::to_vec(p),
            EventPayload::FaultFlagged(p) => serde_json::to_vec(p),
            EventPayload::DecisionMade(p) => serde_json::to_vec(p),
            EventPayload::ReputationUpdated(p) => serde_json::to_vec(p),
            EventPayload::DepositEscrowed(p) => serde_json::to_vec(p),
            EventPayload::DepositReturned(p) => serde_json::to_vec(p),
        }
    }
}

mod hex_digest {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &super::Digest, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<super::Digest, D::Error> {
        let s = <&str>::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(D::Error::custom)?;
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(D::Error::custom("digest hex must be lowercase"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub sequence: u64,
    pub timestamp: LogicalTime,
    #[serde(flatten)]
    pub payload: EventPayload,
    #[serde(with = "hex_digest")]
    pub prev_hash: Digest,
    #[serde(with = "hex_digest")]
    pub this_hash: Digest,
}

fn put_field(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_be_bytes());
    hasher.update(bytes);
}

fn event_digest(
    prev_hash: &Digest,
    sequence: u64,
    timestamp: LogicalTime,
    payload: &EventPayload,
) -> Result<Digest, LedgerError> {
    let mut hasher = Sha256::new();
    put_field(&mut hasher, prev_hash);
    put_field(&mut hasher, &sequence.to_be_bytes());
    put_field(&mut hasher, &timestamp.interval.to_be_bytes());
    put_field(&mut hasher, &timestamp.step.to_be_bytes());
    put_field(&mut hasher, payload.kind().as_bytes());
    put_field(&mut hasher, &payload.body_json()?);
    Ok(hasher.finalize().into())
}

impl LedgerEvent {
    pub fn recompute_hash(&self) -> Result<Digest, LedgerError> {
        event_digest(
            &self.prev_hash,
            self.sequence,
            self.timestamp,
            &self.payload,
        )
    }

    pub fn to_line(&self) -> Result<String, LedgerError> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Single-writer event log, optionally mirrored to a JSON Lines file.
pub struct Ledger {
    events: Vec<LedgerEvent>,
    sink: Option<BufWriter<File>>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("events", &self.events.len())
            .field("persistent", &self.sink.is_some())
            .finish()
    }
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::in_memory()
    }
}

impl Ledger {
    pub fn in_memory() -> Self {
        Ledger {
            events: Vec::new(),
            sink: None,
        }
    }

    /// A new, empty ledger persisted at `path` (truncating any existing file).
    pub fn create(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        Ok(Ledger {
            events: Vec::new(),
            sink: Some(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn head(&self) -> Digest {
        self.events.last().map_or(GENESIS_HASH, |e| e.this_hash)
    }

    /// Seals `payload` at the next step of `interval`.
    pub fn append(
        &mut self,
        interval: u64,
        payload: EventPayload,
    ) -> Result<&LedgerEvent, LedgerError> {
        let (sequence, step) = match self.events.last() {
            None => (0, 0),
            Some(last) if interval < last.timestamp.interval => {
                return Err(LedgerError::OrderingViolation {
                    interval,
                    last: last.timestamp.interval,
                })
            }
            Some(last) if interval == last.timestamp.interval => {
                (last.sequence + 1, last.timestamp.step + 1)
            }
            Some(last) => (last.sequence + 1, 0),
        };
        let timestamp = LogicalTime { interval, step };
        let prev_hash = self.head();
        let this_hash = event_digest(&prev_hash, sequence, timestamp, &payload)?;
        let event = LedgerEvent {
            sequence,
            timestamp,
            payload,
            prev_hash,
            this_hash,
        };
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{}", event.to_line()?)?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn flush(&mut self) -> Result<(), LedgerError> {
        if let Some(sink) = self.sink.as_mut() {
            sink.flush()?;
        }
        Ok(())
    }
}

impl Drop for Ledger {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatus {
    Valid {
        events: u64,
    },
    /// First sequence number whose event fails verification.
    Broken {
        sequence: u64,
    },
}

impl ChainStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainStatus::Valid { .. })
    }
}

/// Recomputes every digest and link; reports the first mismatch.
pub fn verify_chain(events: &[LedgerEvent]) -> ChainStatus {
    let mut prev = GENESIS_HASH;
    let mut last_time: Option<LogicalTime> = None;
    for (index, event) in events.iter().enumerate() {
        let index = index as u64;
        let ordered = last_time.is_none_or(|t| event.timestamp > t);
        let digest_ok = event.recompute_hash().is_ok_and(|h| h == event.this_hash);
        if event.sequence != index || event.prev_hash != prev || !ordered || !digest_ok {
            return ChainStatus::Broken { sequence: index };
        }
        prev = event.this_hash;
        last_time = Some(event.timestamp);
    }
    ChainStatus::Valid {
        events: events.len() as u64,
    }
}

/// Parses a persisted ledger. Lines that fail to parse, or that do not
/// re-serialize to their stored bytes, end the readable prefix; the index of
/// the first such line is returned alongside the events before it.
pub fn read_prefix(path: impl AsRef<Path>) -> Result<(Vec<LedgerEvent>, Option<u64>), LedgerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (index, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        let parsed = serde_json::from_slice::<LedgerEvent>(&line)
            .ok()
            .filter(|e| e.to_line().is_ok_and(|s| s.as_bytes() == line.as_slice()));
        match parsed {
            Some(event) => events.push(event),
            None => return Ok((events, Some(index as u64))),
        }
    }
    Ok((events, None))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<LedgerEvent>, LedgerError> {
    match read_prefix(path)? {
        (events, None) => Ok(events),
        (_, Some(sequence)) => Err(LedgerError::BrokenChain { sequence }),
    }
}

pub fn verify_file(path: impl AsRef<Path>) -> Result<ChainStatus, LedgerError> {
    let (events, malformed) = read_prefix(path)?;
    Ok(match (verify_chain(&events), malformed) {
        (broken @ ChainStatus::Broken { .. }, _) => broken,
        (_, Some(sequence)) => ChainStatus::Broken { sequence },
        (valid, None) => valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSnapshot {
    pub score: f64,
    pub active_intervals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperSnapshot {
    pub decision: Decision,
    pub weighted_score: Option<f64>,
}

/// The replayable part of a world: reputation states and paper decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub users: BTreeMap<UserId, UserSnapshot>,
    pub papers: BTreeMap<PaperId, PaperSnapshot>,
}

fn decision_code(d: Decision) -> u8 {
    match d {
        Decision::Pending => 0,
        Decision::Accepted => 1,
        Decision::Rejected => 2,
        Decision::BorderlineAccepted => 3,
        Decision::BorderlineRejected => 4,
    }
}

impl WorldSnapshot {
    pub fn apply(&mut self, event: &LedgerEvent) {
        match &event.payload {
            EventPayload::UserRegistered(e) => {
                self.users.insert(
                    e.user,
                    UserSnapshot {
                        score: e.reputation,
                        active_intervals: 0,
                    },
                );
            }
            EventPayload::ReputationUpdated(e) => {
                self.users.insert(
                    e.user,
                    UserSnapshot {
                        score: e.score,
                        active_intervals: e.active_intervals,
                    },
                );
            }
            EventPayload::PaperSubmitted(e) => {
                self.papers.insert(
                    e.paper,
                    PaperSnapshot {
                        decision: Decision::Pending,
                        weighted_score: None,
                    },
                );
            }
            EventPayload::DecisionMade(e) => {
                self.papers.insert(
                    e.paper,
                    PaperSnapshot {
                        decision: e.decision,
                        weighted_score: e.weighted_score,
                    },
                );
            }
            _ => {}
        }
    }

    /// SHA-256 over the bit patterns of every user and paper entry, in id order.
    pub fn digest(&self) -> Digest {
        let mut hasher = Sha256::new();
        hasher.update((self.users.len() as u64).to_be_bytes());
        for (id, u) in &self.users {
            hasher.update(id.0.to_be_bytes());
            hasher.update(u.score.to_bits().to_be_bytes());
            hasher.update(u.active_intervals.to_be_bytes());
        }
        hasher.update((self.papers.len() as u64).to_be_bytes());
        for (id, p) in &self.papers {
            hasher.update(id.0.to_be_bytes());
            hasher.update([decision_code(p.decision)]);
            match p.weighted_score {
                Some(w) => {
                    hasher.update([1]);
                    hasher.update(w.to_bits().to_be_bytes());
                }
                None => hasher.update([0]),
            }
        }
        hasher.finalize().into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// Rebuilds the world from a verified event sequence.
pub fn replay(events: &[LedgerEvent]) -> Result<WorldSnapshot, LedgerError> {
    if let ChainStatus::Broken { sequence } = verify_chain(events) {
        return Err(LedgerError::BrokenChain { sequence });
    }
    let mut world = WorldSnapshot::default();
    for event in events {
        world.apply(event);
    }
    Ok(world)
}

pub fn replay_file(path: impl AsRef<Path>) -> Result<WorldSnapshot, LedgerError> {
    replay(&read_events(path)?)
}
