//! Majority-cluster attacks on the unified reviewer.
//!
//! A colluding group of `g` users out of an eligible pool of `n` succeeds when
//! at least `m` of the `r` uniformly drawn reviewers of a paper belong to it.
//! The success probability is the hypergeometric upper tail `P(X >= m)`; it is
//! computed exactly in rational arithmetic, cross-checked by a sequential
//! product form, and estimated by Monte Carlo.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::derive_seed;
use crate::{Error, Result};

/// `17/81`: limit of the attack probability for `r = 5`, `m = 3` when a third
/// of the pool colludes.
pub const WORST_CASE_LIMIT: f64 = 17.0 / 81.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackScenario {
    n: u64,
    g: u64,
    r: u64,
    m: u64,
}

/// Smallest strict majority of `r` seats.
pub fn default_majority(r: u64) -> u64 {
    r / 2 + 1
}

impl AttackScenario {
    /// Scenario with the default strict-majority threshold.
    pub fn new(n: u64, g: u64, r: u64) -> Result<Self> {
        Self::with_majority(n, g, r, default_majority(r))
    }

    pub fn with_majority(n: u64, g: u64, r: u64, m: u64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if n == 0 {
            return bad("pool size n must be at least 1".into());
        }
        if g > n {
            return bad(format!("group size g = {g} exceeds pool size n = {n}"));
        }
        if r == 0 || r > n {
            return bad(format!("reviewer count r = {r} must lie in 1..={n}"));
        }
        if m == 0 || m > r {
            return bad(format!("majority m = {m} must lie in 1..={r}"));
        }
        Ok(AttackScenario { n, g, r, m })
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn g(&self) -> u64 {
        self.g
    }
    pub fn r(&self) -> u64 {
        self.r
    }
    pub fn m(&self) -> u64 {
        self.m
    }
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `Σ_{i ∈ range} C(g, i)·C(n−g, r−i)`: committees with exactly `i` colluders.
fn committee_count(s: &AttackScenario, lo: u64, hi: u64) -> BigUint {
    (lo..=hi.min(s.g).min(s.r))
        .filter(|&i| s.r - i <= s.n - s.g)
        .map(|i| binomial(s.g, i) * binomial(s.n - s.g, s.r - i))
        .sum()
}

fn ratio(numer: BigUint, denom: BigUint) -> BigRational {
    BigRational::new(numer.into(), denom.into())
}

/// Exact `P(X >= m)` as a reduced fraction.
pub fn majority_attack_probability_exact(s: &AttackScenario) -> BigRational {
    ratio(committee_count(s, s.m, s.r), binomial(s.n, s.r))
}

/// `P(X >= m)`, rounded once from the exact fraction.
pub fn majority_attack_probability(s: &AttackScenario) -> f64 {
    to_f64(&majority_attack_probability_exact(s))
}

/// `P(X <= k)`.
pub fn hypergeometric_cdf(s: &AttackScenario, k: u64) -> f64 {
    to_f64(&ratio(committee_count(s, 0, k), binomial(s.n, s.r)))
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("probabilities are finite")
}

/// The attack probability as a sum over `i` of `C(r, i)` times the probability
/// of drawing `i` colluders first and `r − i` honest users after, in `f64`.
pub fn product_form_probability(s: &AttackScenario) -> f64 {
    let (n, g) = (s.n as f64, s.g as f64);
    (s.m..=s.r)
        .map(|i| {
            let fi = i as f64;
            let colluders: f64 = (0..i).map(|k| (g - k as f64) / (n - k as f64)).product();
            let honest: f64 = (i..s.r)
                .map(|j| (n - (g - fi) - j as f64) / (n - j as f64))
                .product();
            let arrangements = binomial(s.r, i).to_f64().expect("finite");
            arrangements * colluders * honest
        })
        .sum::<f64>()
        .max(0.0)
}

/// Exact binomial tail `Σ_{i=m}^{r} C(r,i)(1/3)^i(2/3)^{r−i}`: the large-pool
/// limit of the attack probability when a third of the pool colludes.
pub fn worst_case_limit_exact(r: u64, m: u64) -> BigRational {
    let numer: BigUint = (m..=r)
        .map(|i| binomial(r, i) * BigUint::from(2u32).pow((r - i) as u32))
        .sum();
    ratio(numer, BigUint::from(3u32).pow(r as u32))
}

pub fn worst_case_limit(r: u64, m: u64) -> f64 {
    to_f64(&worst_case_limit_exact(r, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of the attack probability. Trial `k` draws its
/// committee from a ChaCha8 stream selected by `k` under a key derived from
/// `seed`, so the result is independent of `workers`.
pub fn monte_carlo_attack(
    s: &AttackScenario,
    trials: u64,
    seed: u64,
    workers: usize,
) -> McEstimate {
    let key = derive_seed(seed, "monte-carlo-attack", &[s.n, s.g, s.r, s.m]);
    let (n, g, r, m) = (s.n as usize, s.g as usize, s.r as usize, s.m as usize);
    let trial = |k: u64| -> u64 {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(k);
        let colluders = index::sample(&mut rng, n, r)
            .into_iter()
            .filter(|&u| u < g)
            .count();
        u64::from(colluders >= m)
    };
    let successes = if workers <= 1 {
        (0..trials).map(trial).sum()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(|| (0..trials).into_par_iter().map(trial).sum())
    };
    let estimate = if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    };
    let std_error = if trials == 0 {
        0.0
    } else {
        (estimate * (1.0 - estimate) / trials as f64).sqrt()
    };
    McEstimate {
        trials,
        successes,
        estimate,
        std_error,
    }
}

/// A non-negative fraction `numer/denom`, parsed from `"1/3"` or `"0.25"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numer: u64,
    pub denom: u64,
}

impl Fraction {
    pub const ONE_THIRD: Fraction = Fraction { numer: 1, denom: 3 };

    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 || numer > denom {
            return Err(Error::InvalidScenario(format!(
                "fraction {numer}/{denom} must lie in [0, 1]"
            )));
        }
        Ok(Fraction { numer, denom })
    }

    /// `⌊n · numer / denom⌋`.
    pub fn floor_of(&self, n: u64) -> u64 {
        (u128::from(n) * u128::from(self.numer) / u128::from(self.denom)) as u64
    }

    pub fn value(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidScenario(format!("cannot parse fraction `{s}`"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let numer = a.trim().parse().map_err(|_| bad())?;
            let denom = b.trim().parse().map_err(|_| bad())?;
            return Fraction::new(numer, denom);
        }
        // Decimal: scale by a power of ten.
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        Fraction::new(int * denom + frac, denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub g: u64,
    pub probability: f64,
}

/// Attack probability for each pool size with `g = ⌊n · fraction⌋`.
pub fn convergence_curve(
    n_values: &[u64],
    fraction: Fraction,
    r: u64,
    m: u64,
) -> Result<Vec<CurvePoint>> {
    n_values
        .iter()
        .map(|&n| {
            let g = fraction.floor_of(n);
            let s = AttackScenario::with_majority(n, g, r, m)?;
            Ok(CurvePoint {
                n,
                g,
                probability: majority_attack_probability(&s),
            })
        })
        .collect()
}
