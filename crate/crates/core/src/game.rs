//! The author/reviewer game.
//!
//! User `i` submits a paper and user `j` reviews it; each either plays
//! honestly (H) or faulty (F). A player's payoff is their reputation after the
//! interval closes, so `i` receives `X` when honest and `Y` when faulty, and
//! `j` receives `A` or `B` likewise, independently of the other's action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::reputation::{clamp_score, gain_function, GainParams};
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Honest,
    Faulty,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Honest, Strategy::Faulty];

    fn index(self) -> usize {
        match self {
            Strategy::Honest => 0,
            Strategy::Faulty => 1,
        }
    }
}

/// A pure strategy profile `(s_i, s_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Profile {
    pub i: Strategy,
    pub j: Strategy,
}

impl Profile {
    pub const HONEST: Profile = Profile {
        i: Strategy::Honest,
        j: Strategy::Honest,
    };

    pub fn new(i: Strategy, j: Strategy) -> Self {
        Profile { i, j }
    }
}

/// Two-player game with two pure strategies each; entry `[s_i][s_j]` holds
/// `(u_i, u_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bimatrix {
    pub payoffs: [[(f64, f64); 2]; 2],
}

impl Bimatrix {
    pub fn payoff(&self, p: Profile) -> (f64, f64) {
        self.payoffs[p.i.index()][p.j.index()]
    }
}

/// Profiles from which no player has a strictly improving unilateral
/// deviation, found by checking all four profiles.
pub fn pure_nash_equilibria(game: &Bimatrix) -> Vec<Profile> {
    let mut equilibria = Vec::new();
    for si in Strategy::ALL {
        for sj in Strategy::ALL {
            let (ui, uj) = game.payoff(Profile::new(si, sj));
            let i_deviates = Strategy::ALL
                .iter()
                .any(|&alt| game.payoff(Profile::new(alt, sj)).0 > ui);
            let j_deviates = Strategy::ALL
                .iter()
                .any(|&alt| game.payoff(Profile::new(si, alt)).1 > uj);
            if !i_deviates && !j_deviates {
                equilibria.push(Profile::new(si, sj));
            }
        }
    }
    equilibria
}

/// An earlier interaction in the same interval, not involving the opponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorInteraction {
    pub counterparty_reputation: f64,
    pub honest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub reputation: f64,
    /// Interval counter `t` used by the gain function.
    pub experience: u64,
    pub priors: Vec<PriorInteraction>,
}

impl PlayerState {
    pub fn fresh(reputation: f64) -> Self {
        PlayerState {
            reputation,
            experience: 1,
            priors: Vec::new(),
        }
    }

    fn validate(&self, who: &'static str) -> Result<()> {
        if !(self.reputation > 0.0 && self.reputation < 1.0) {
            return Err(Error::domain(who, self.reputation, "(0, 1)"));
        }
        if self.experience == 0 {
            return Err(Error::domain("t", 0.0, "t >= 1"));
        }
        for prior in &self.priors {
            let r = prior.counterparty_reputation;
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::domain("prior counterparty reputation", r, "(0, 1)"));
            }
        }
        Ok(())
    }

    /// `(Σ_{honest priors} R_k, Σ_{all priors} R_k)`.
    fn prior_sums(&self) -> (f64, f64) {
        self.priors.iter().fold((0.0, 0.0), |(h, a), p| {
            let r = p.counterparty_reputation;
            (if p.honest { h + r } else { h }, a + r)
        })
    }

    /// Punishment factors `(P^H, P^F)` for playing honestly or faulty against
    /// an opponent of reputation `opponent`.
    pub fn punishment_pair(&self, opponent: f64) -> (f64, f64) {
        let (honest, all) = self.prior_sums();
        let denom = 1.0 + all + opponent;
        ((1.0 + honest + opponent) / denom, (1.0 + honest) / denom)
    }

    fn outcome(&self, punishment: f64, params: &GainParams) -> f64 {
        let x = self.reputation * punishment;
        clamp_score(x + gain_function(x, self.experience, params).expect("x in (0,1), t >= 1"))
    }
}

/// Payoffs: `x`/`y` for `i` honest/faulty, `a`/`b` for `j` honest/faulty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payoffs {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub player_i: PlayerState,
    pub player_j: PlayerState,
    pub params: GainParams,
    pub payoffs: Payoffs,
}

impl GameInstance {
    pub fn bimatrix(&self) -> Bimatrix {
        let Payoffs { x, y, a, b } = self.payoffs;
        Bimatrix {
            payoffs: [[(x, a), (x, b)], [(y, a), (y, b)]],
        }
    }

    pub fn pure_nash_equilibria(&self) -> Vec<Profile> {
        pure_nash_equilibria(&self.bimatrix())
    }

    /// Honest play strictly dominates for both players and `(H, H)` is the
    /// only pure equilibrium.
    pub fn honest_unique(&self) -> bool {
        let p = self.payoffs;
        p.x > p.y && p.a > p.b && self.pure_nash_equilibria() == [Profile::HONEST]
    }
}

pub fn build_game(
    player_i: PlayerState,
    player_j: PlayerState,
    params: GainParams,
) -> Result<GameInstance> {
    player_i.validate("R_i")?;
    player_j.validate("R_j")?;
    let (ih, if_) = player_i.punishment_pair(player_j.reputation);
    let (jh, jf) = player_j.punishment_pair(player_i.reputation);
    let payoffs = Payoffs {
        x: player_i.outcome(ih, &params),
        y: player_i.outcome(if_, &params),
        a: player_j.outcome(jh, &params),
        b: player_j.outcome(jf, &params),
    };
    Ok(GameInstance {
        player_i,
        player_j,
        params,
        payoffs,
    })
}

/// Fault-detection oracle: faulty behavior is caught with probability `pi`,
/// honest behavior confirmed with probability `pi_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub pi: f64,
    pub pi_bar: f64,
}

impl OracleParams {
    pub const PERFECT: OracleParams = OracleParams {
        pi: 1.0,
        pi_bar: 1.0,
    };

    pub fn new(pi: f64, pi_bar: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::domain("pi", pi, "[0, 1]"));
        }
        if !(0.0..=1.0).contains(&pi_bar) {
            return Err(Error::domain("pi_bar", pi_bar, "[0, 1]"));
        }
        Ok(OracleParams { pi, pi_bar })
    }

    /// `pi_bar > 1 − pi`: honest behavior is confirmed more often than faulty
    /// behavior slips through.
    pub fn in_regime(&self) -> bool {
        self.pi_bar > 1.0 - self.pi
    }
}

/// Expected payoffs under an imperfect oracle:
/// `X' = π̄X + (1−π̄)Y`, `Y' = (1−π)X + πY`, and likewise for `A`, `B`.
pub fn perturb_with_oracle(game: &GameInstance, oracle: OracleParams) -> GameInstance {
    let OracleParams { pi, pi_bar } = oracle;
    let Payoffs { x, y, a, b } = game.payoffs;
    GameInstance {
        payoffs: Payoffs {
            x: pi_bar * x + (1.0 - pi_bar) * y,
            y: (1.0 - pi) * x + pi * y,
            a: pi_bar * a + (1.0 - pi_bar) * b,
            b: (1.0 - pi) * a + pi * b,
        },
        ..game.clone()
    }
}

fn random_player<R: Rng>(rng: &mut R) -> PlayerState {
    let priors = (0..rng.gen_range(0..=5))
        .map(|_| PriorInteraction {
            counterparty_reputation: rng.gen_range(0.01..0.99),
            honest: rng.gen_bool(0.5),
        })
        .collect();
    PlayerState {
        reputation: rng.gen_range(0.01..0.99),
        experience: rng.gen_range(1..=30),
        priors,
    }
}

/// A random game: reputations in `(0.01, 0.99)`, zero to five prior
/// interactions per player, `t` in `1..=30`.
pub fn random_instance<R: Rng>(rng: &mut R, params: GainParams) -> GameInstance {
    let i = random_player(rng);
    let j = random_player(rng);
    build_game(i, j, params).expect("generated states are in range")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub alpha: f64,
    pub oracle: Option<OracleParams>,
    pub instances: u64,
    pub passed: u64,
    /// `alpha < 1/6` and, with an oracle, `pi_bar > 1 − pi`.
    pub in_regime: bool,
}

impl SweepReport {
    pub fn failed(&self) -> u64 {
        self.instances - self.passed
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }
}

/// Builds `instances` random games for one `alpha` (optionally perturbed by an
/// oracle) and counts those where `(H, H)` is the unique pure equilibrium
/// with strict dominance for both players.
pub fn sweep(
    instances: u64,
    params: GainParams,
    oracle: Option<OracleParams>,
    seed: u64,
) -> SweepReport {
    let passed = (0..instances)
        .filter(|&k| {
            let mut rng = stream(seed, "game-instance", &[params.alpha().to_bits(), k]);
            let game = random_instance(&mut rng, params);
            match oracle {
                Some(o) => perturb_with_oracle(&game, o).honest_unique(),
                None => game.honest_unique(),
            }
        })
        .count() as u64;
    SweepReport {
        alpha: params.alpha(),
        oracle,
        instances,
        passed,
        in_regime: params.in_regime() && oracle.is_none_or(|o| o.in_regime()),
    }
}
