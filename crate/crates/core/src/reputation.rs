//! Reputation update: `R' = R·P + f(R·P, t)`.
//!
//! `P` is the punishment factor of the closing interval, computed from the
//! user's interaction records, and `f` is a bounded gain peaked at `½` whose
//! exponent flattens as the user accumulates active intervals.

use serde::{Deserialize, Serialize};

use crate::domain::{InteractionRecord, Verdict, INITIAL_REPUTATION};
use crate::{Error, Result};

/// Scores are kept inside `[ε, 1 − ε]` so rounding never absorbs them at 0 or 1.
pub const SCORE_EPSILON: f64 = 1e-9;

/// Upper bound (exclusive) on `alpha` under which honest play is dominant.
pub const ALPHA_REGIME_BOUND: f64 = 1.0 / 6.0;

pub const DEFAULT_ALPHA: f64 = 0.05;

pub fn clamp_score(x: f64) -> f64 {
    x.clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
}

/// Peak height `alpha` of the gain function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GainParams {
    alpha: f64,
}

impl GainParams {
    /// Requires `0 < alpha < 1/6`.
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < ALPHA_REGIME_BOUND {
            Ok(GainParams { alpha })
        } else {
            Err(Error::domain("alpha", alpha, "(0, 1/6)"))
        }
    }

    /// Accepts any `alpha` in `(0, 1)`, including values outside the regime
    /// where honest play is provably dominant. Use [`GainParams::in_regime`]
    /// to flag such runs.
    pub fn permissive(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(GainParams { alpha })
        } else {
            Err(Error::domain("alpha", alpha, "(0, 1)"))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn in_regime(&self) -> bool {
        self.alpha < ALPHA_REGIME_BOUND
    }
}

impl Default for GainParams {
    fn default() -> Self {
        GainParams {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl TryFrom<f64> for GainParams {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        GainParams::permissive(alpha)
    }
}

impl From<GainParams> for f64 {
    fn from(p: GainParams) -> f64 {
        p.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationState {
    pub score: f64,
    /// Number of past intervals in which the user was active.
    pub active_intervals: u64,
    /// Interactions of the currently open interval.
    pub current_interactions: Vec<InteractionRecord>,
    /// Papers (co-)authored in the currently open interval.
    pub current_submissions: u32,
}

impl Default for ReputationState {
    fn default() -> Self {
        ReputationState::with_score(INITIAL_REPUTATION)
    }
}

impl ReputationState {
    pub fn with_score(score: f64) -> Self {
        ReputationState {
            score,
            active_intervals: 0,
            current_interactions: Vec::new(),
            current_submissions: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        !self.current_interactions.is_empty() || self.current_submissions > 0
    }

    /// The interval counter `t` fed to the gain function when the open
    /// interval closes: 1 on the first active interval.
    pub fn experience(&self) -> u64 {
        self.active_intervals + 1
    }

    pub fn record(&mut self, interaction: InteractionRecord) {
        self.current_interactions.push(interaction);
    }

    pub fn record_submission(&mut self) {
        self.current_submissions += 1;
    }
}

/// `(1 + Σ_{honest} R_k) / (1 + Σ_{honest ∪ faulty} R_k)`.
///
/// Partially faulty records are ignored here; see [`interval_punishment`].
pub fn punishment_factor(interactions: &[InteractionRecord]) -> f64 {
    let (honest, all) = weight_sums(interactions);
    (1.0 + honest) / (1.0 + all)
}

fn weight_sums(interactions: &[InteractionRecord]) -> (f64, f64) {
    let mut honest = 0.0;
    let mut all = 0.0;
    for rec in interactions {
        match rec.verdict {
            Verdict::Honest => {
                honest += rec.counterparty_reputation;
                all += rec.counterparty_reputation;
            }
            Verdict::Faulty => all += rec.counterparty_reputation,
            Verdict::PartiallyFaulty => {}
        }
    }
    (honest, all)
}

/// `g(t) = Σ_{k<t} 2^{-k} = 2 − 2^{1−t}`.
pub fn g_shift(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::domain("t", 0.0, "t >= 1"));
    }
    Ok(g_shift_unchecked(t))
}

fn g_shift_unchecked(t: u64) -> f64 {
    2.0 - (1.0 - t as f64).exp2()
}

/// The gain `f(x, t)`: `α(2x)^b` on `(0, ½]` and `α(2(1−x))^b` on `(½, 1)`
/// with `b = 3 − g(t)`.
pub fn gain_function(x: f64, t: u64, params: &GainParams) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain("x", x, "(0, 1)"));
    }
    if t == 0 {
        return Err(Error::domain("t", 0.0, "t >= 1"));
    }
    Ok(gain_unchecked(x, t, params.alpha))
}

fn gain_unchecked(x: f64, t: u64, alpha: f64) -> f64 {
    let exponent = 3.0 - g_shift_unchecked(t);
    let base = if x <= 0.5 { 2.0 * x } else { 2.0 * (1.0 - x) };
    alpha * base.powf(exponent)
}

/// `x + f(x, t)`: the post-update score as a function of the punished score.
pub fn update_map(x: f64, t: u64, params: &GainParams) -> Result<f64> {
    Ok(x + gain_function(x, t, params)?)
}

/// `P̃ = P + (1 − P)(1 − σ)`: punishment softened by lack of expertise.
pub fn expertise_adjusted_punishment(p: f64, sigma: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 1.0, "punishment {p} outside (0, 1]");
    debug_assert!((0.0..=1.0).contains(&sigma), "sigma {sigma} outside [0, 1]");
    p + (1.0 - p) * (1.0 - sigma)
}

/// `q + (1 − q)·R` with `q = ((1 − π) + π·P) / 2`.
pub fn partial_punishment(p: f64, pi: f64, reputation: f64) -> f64 {
    let q = ((1.0 - pi) + pi * p) / 2.0;
    q + (1.0 - q) * reputation
}

/// Total punishment for one interval.
///
/// The base factor comes from honest and faulty records, is softened by the
/// reputation-weighted mean expertise over the faulty ones, and is then
/// multiplied by one partial-punishment factor per partially faulty record.
/// Each partial factor uses the base factor that would apply had that record
/// been fully faulty.
pub fn interval_punishment(
    interactions: &[InteractionRecord],
    own_score: f64,
    detection_pi: f64,
) -> f64 {
    let (honest, all) = weight_sums(interactions);
    let base = (1.0 + honest) / (1.0 + all);

    let (mut weighted_sigma, mut faulty_weight) = (0.0, 0.0);
    for rec in interactions.iter().filter(|r| r.verdict == Verdict::Faulty) {
        weighted_sigma += rec.expertise * rec.counterparty_reputation;
        faulty_weight += rec.counterparty_reputation;
    }
    let mut total = if faulty_weight > 0.0 {
        expertise_adjusted_punishment(base, weighted_sigma / faulty_weight)
    } else {
        base
    };

    for rec in interactions
        .iter()
        .filter(|r| r.verdict == Verdict::PartiallyFaulty)
    {
        let as_faulty = (1.0 + honest) / (1.0 + all + rec.counterparty_reputation);
        total *= partial_punishment(as_faulty, detection_pi, own_score);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppliedUpdate {
    pub state: ReputationState,
    pub previous_score: f64,
    pub punishment: f64,
    pub gain: f64,
    /// The interval counter `t` used for the gain.
    pub experience: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Update {
    /// The user had no review or paper this interval; nothing changes.
    Inactive,
    Applied(AppliedUpdate),
}

impl Update {
    pub fn applied(self) -> Option<AppliedUpdate> {
        match self {
            Update::Applied(u) => Some(u),
            Update::Inactive => None,
        }
    }
}

/// Closes the open interval with a perfect comparison oracle for partially
/// faulty records.
pub fn update_reputation(state: &ReputationState, params: &GainParams) -> Update {
    update_reputation_with(state, params, 1.0)
}

/// Closes the open interval: `R' = clamp(R·P + f(R·P, t))`, increments the
/// active-interval counter and clears the interval's records.
pub fn update_reputation_with(
    state: &ReputationState,
    params: &GainParams,
    detection_pi: f64,
) -> Update {
    if !state.is_active() {
        return Update::Inactive;
    }
    let experience = state.experience();
    let punishment = interval_punishment(&state.current_interactions, state.score, detection_pi);
    let punished = state.score * punishment;
    let gain = gain_unchecked(punished, experience, params.alpha);
    Update::Applied(AppliedUpdate {
        state: ReputationState {
            score: clamp_score(punished + gain),
            active_intervals: state.active_intervals + 1,
            current_interactions: Vec::new(),
            current_submissions: 0,
        },
        previous_score: state.score,
        punishment,
        gain,
        experience,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Role, UnifiedParty, UserId};
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn rec(r: f64, verdict: Verdict) -> InteractionRecord {
        InteractionRecord::new(
            UnifiedParty::singleton(UserId(99), Role::Author),
            r,
            verdict,
            1,
        )
    }

    fn state(score: f64, records: Vec<InteractionRecord>) -> ReputationState {
        let mut s = ReputationState::with_score(score);
        s.current_interactions = records;
        s
    }

    #[test]
    fn punishment_examples() {
        assert_eq!(punishment_factor(&[]), 1.0);
        let p = punishment_factor(&[rec(0.8, Verdict::Honest), rec(0.5, Verdict::Faulty)]);
        assert!((p - 1.8 / 2.3).abs() < TOL);
        assert!((p - 0.78261).abs() < 1e-5);
        let p = punishment_factor(&[rec(0.5, Verdict::Faulty)]);
        assert!((p - 2.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn punishment_is_one_iff_no_faulty_record() {
        let honest = vec![rec(0.3, Verdict::Honest), rec(0.9, Verdict::Honest)];
        assert_eq!(punishment_factor(&honest), 1.0);
        let mut with_fault = honest.clone();
        with_fault.push(rec(0.01, Verdict::Faulty));
        assert!(punishment_factor(&with_fault) < 1.0);
    }

    #[test]
    fn repeated_faults_compound_within_one_interval() {
        let once = punishment_factor(&[rec(0.5, Verdict::Faulty)]);
        let twice = punishment_factor(&[rec(0.5, Verdict::Faulty), rec(0.5, Verdict::Faulty)]);
        assert!((twice - 0.5).abs() < TOL);
        assert!(twice < once);
    }

    #[test]
    fn g_shift_examples() {
        assert_eq!(g_shift(1).unwrap(), 1.0);
        assert_eq!(g_shift(2).unwrap(), 1.5);
        let g20 = g_shift(20).unwrap();
        assert!((g20 - (2.0 - 2f64.powi(-19))).abs() < TOL);
        assert!((g20 - 1.9999981).abs() < 1e-7);
        assert!(g_shift(0).is_err());
        // Partial sums of the geometric series.
        for t in 1..40u64 {
            let sum: f64 = (0..t).map(|k| 0.5f64.powi(k as i32)).sum();
            assert!((g_shift(t).unwrap() - sum).abs() < TOL);
        }
        assert!(g_shift(10_000).unwrap() < 2.0 + TOL);
    }

    #[test]
    fn gain_examples() {
        let p = GainParams::default();
        assert!((gain_function(0.5, 1, &p).unwrap() - 0.05).abs() < TOL);
        assert!((gain_function(0.25, 1, &p).unwrap() - 0.0125).abs() < TOL);
        assert!((gain_function(0.75, 1, &p).unwrap() - 0.0125).abs() < TOL);
        assert!(gain_function(0.0, 1, &p).is_err());
        assert!(gain_function(1.0, 1, &p).is_err());
        assert!(gain_function(0.5, 0, &p).is_err());
    }

    #[test]
    fn gain_params_regime() {
        assert!(GainParams::new(0.05).is_ok());
        assert!(GainParams::new(1.0 / 6.0).is_err());
        assert!(GainParams::new(0.0).is_err());
        let loose = GainParams::permissive(0.3).unwrap();
        assert!(!loose.in_regime());
    }

    #[test]
    fn update_examples() {
        let params = GainParams::default();
        let honest = state(0.5, vec![rec(0.5, Verdict::Honest)]);
        let up = update_reputation(&honest, &params).applied().unwrap();
        assert!((up.state.score - 0.55).abs() < TOL);
        assert_eq!(up.state.active_intervals, 1);
        assert!(up.state.current_interactions.is_empty());

        let faulty = state(0.5, vec![rec(0.5, Verdict::Faulty)]);
        let up = update_reputation(&faulty, &params).applied().unwrap();
        let expected = 1.0 / 3.0 + 0.05 * (2.0f64 / 3.0).powi(2);
        assert!((up.state.score - expected).abs() < TOL);
        assert!((up.state.score - 0.35556).abs() < 1e-5);

        let idle = ReputationState::default();
        assert_eq!(update_reputation(&idle, &params), Update::Inactive);
    }

    #[test]
    fn submission_alone_makes_a_user_active() {
        let mut s = ReputationState::default();
        s.record_submission();
        let up = update_reputation(&s, &GainParams::default())
            .applied()
            .unwrap();
        assert!((up.state.score - 0.55).abs() < TOL);
    }

    #[test]
    fn expertise_examples() {
        assert!((expertise_adjusted_punishment(0.8, 1.0) - 0.8).abs() < TOL);
        assert!((expertise_adjusted_punishment(0.8, 0.0) - 1.0).abs() < TOL);
        assert!((expertise_adjusted_punishment(0.8, 0.5) - 0.9).abs() < TOL);
    }

    #[test]
    fn partial_examples() {
        assert!((partial_punishment(0.5, 0.9, 0.6) - 0.71).abs() < TOL);
        for r in [0.1, 0.5, 0.9] {
            assert!((partial_punishment(1.0, 1.0, r) - (0.5 + 0.5 * r)).abs() < TOL);
        }
        let near_zero = partial_punishment(0.5, 0.9, 1e-12);
        assert!(near_zero > 0.275 && near_zero - 0.275 < 1e-11);
    }

    #[test]
    fn out_of_field_reviewer_is_not_punished() {
        let r = rec(0.5, Verdict::Faulty).with_expertise(0.0);
        assert_eq!(interval_punishment(&[r], 0.5, 1.0), 1.0);
        let r = rec(0.5, Verdict::Faulty).with_expertise(1.0);
        assert!((interval_punishment(&[r], 0.5, 1.0) - 2.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn partially_faulty_composes_multiplicatively() {
        let records = [
            rec(0.8, Verdict::Honest),
            rec(0.5, Verdict::PartiallyFaulty),
        ];
        let as_faulty = 1.8 / 2.3;
        let expected = partial_punishment(as_faulty, 0.9, 0.6);
        assert!((interval_punishment(&records, 0.6, 0.9) - expected).abs() < TOL);
        // Softer than a full fault against the same counterparty.
        let full = interval_punishment(
            &[rec(0.8, Verdict::Honest), rec(0.5, Verdict::Faulty)],
            0.6,
            0.9,
        );
        assert!(interval_punishment(&records, 0.6, 0.9) < 1.0);
        assert!(full < 1.0);
    }

    #[test]
    fn gain_is_continuous_at_half() {
        for alpha in [0.01, 0.05, 0.1, 0.16] {
            let p = GainParams::new(alpha).unwrap();
            for t in 1..=64 {
                let left = gain_function(0.5, t, &p).unwrap();
                let right = gain_function(0.5 + 1e-15, t, &p).unwrap();
                assert!((left - right).abs() < 1e-12, "alpha {alpha} t {t}");
            }
        }
    }

    fn verdict() -> impl Strategy<Value = Verdict> {
        prop_oneof![Just(Verdict::Honest), Just(Verdict::Faulty)]
    }

    fn history() -> impl Strategy<Value = Vec<InteractionRecord>> {
        proptest::collection::vec((0.001f64..0.999, verdict()), 0..10)
            .prop_map(|v| v.into_iter().map(|(r, v)| rec(r, v)).collect())
    }

    proptest! {
        #[test]
        fn honest_record_never_lowers_punishment(h in history(), r in 0.001f64..0.999) {
            let before = punishment_factor(&h);
            let mut after = h.clone();
            after.push(rec(r, Verdict::Honest));
            prop_assert!(punishment_factor(&after) >= before);
        }

        #[test]
        fn faulty_record_strictly_lowers_punishment(
            h in history(), lo in 0.001f64..0.5, delta in 0.01f64..0.49,
        ) {
            let before = punishment_factor(&h);
            let mut low = h.clone();
            low.push(rec(lo, Verdict::Faulty));
            let mut high = h.clone();
            high.push(rec(lo + delta, Verdict::Faulty));
            prop_assert!(punishment_factor(&low) < before);
            prop_assert!(punishment_factor(&high) < punishment_factor(&low));
        }

        #[test]
        fn gain_is_bounded_by_alpha(
            x in 1e-9f64..(1.0 - 1e-9), t in 1u64..200, alpha in 1e-4f64..0.1666,
        ) {
            let p = GainParams::new(alpha).unwrap();
            let g = gain_function(x, t, &p).unwrap();
            prop_assert!(g > 0.0 && g <= alpha);
            let mirrored = gain_function(1.0 - x, t, &p).unwrap();
            prop_assert!((g - mirrored).abs() < 1e-9);
        }

        #[test]
        fn iterated_updates_stay_in_open_unit_interval(
            start in 1e-9f64..(1.0 - 1e-9),
            steps in proptest::collection::vec(history(), 1..60),
            alpha in 1e-4f64..0.1666,
        ) {
            let params = GainParams::new(alpha).unwrap();
            let mut s = ReputationState::with_score(start);
            for records in steps {
                let all_honest = records.iter().all(|r| r.verdict == Verdict::Honest);
                s.current_interactions = records;
                s.record_submission();
                let before = s.score;
                let up = update_reputation(&s, &params).applied().unwrap();
                prop_assert!(up.state.score > 0.0 && up.state.score < 1.0);
                if all_honest && before < 1.0 - 1e-6 {
                    prop_assert!(up.state.score > before);
                }
                s = up.state;
            }
        }
    }
}
