//! Bounded i.i.d. per-stage return laws with finite support.
//!
//! A [`ReturnDistribution`] always straddles zero (`x_min < 0 < x_max`); the
//! admissibility algebra in [`crate::strategy`] divides by both `x_max` and
//! `|x_min|`, so degenerate laws are rejected when they are built.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Default limit on `|outcomes|^n` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub value: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDistribution {
    outcomes: Vec<Outcome>,
    // cumulative[i] = P(index <= i); the last entry is pinned to +inf so that
    // sampling never runs off the end on rounding.
    cumulative: Vec<f64>,
    x_min: f64,
    x_max: f64,
    mean: f64,
}

/// Two-outcome gamble: `win_value` with probability `p`, otherwise `loss_value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinSpec {
    #[serde(rename = "win")]
    pub win_value: f64,
    #[serde(rename = "loss")]
    pub loss_value: f64,
    pub p: f64,
}

impl CoinSpec {
    pub fn even_money(stake: f64, p: f64) -> Self {
        CoinSpec {
            win_value: stake,
            loss_value: -stake,
            p,
        }
    }
}

/// Distribution as written in an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSpec {
    Outcomes(Vec<(f64, f64)>),
    Coin(CoinSpec),
}

impl TryFrom<&DistributionSpec> for ReturnDistribution {
    type Error = Error;

    fn try_from(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Outcomes(pairs) => ReturnDistribution::new(
                pairs
                    .iter()
                    .map(|&(value, probability)| Outcome { value, probability })
                    .collect(),
            ),
            DistributionSpec::Coin(coin) => make_coin(*coin),
        }
    }
}

impl ReturnDistribution {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        if outcomes.len() > u8::MAX as usize + 1 {
            return Err(Error::InvalidDistribution(format!(
                "{} outcomes; at most 256 are supported",
                outcomes.len()
            )));
        }
        for o in &outcomes {
            if !o.value.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite outcome value {}",
                    o.value
                )));
            }
            if !(o.probability > 0.0 && o.probability <= 1.0) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {} of outcome {} is not in (0, 1]",
                    o.probability, o.value
                )));
            }
        }
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let x_min = outcomes
            .iter()
            .map(|o| o.value)
            .fold(f64::INFINITY, f64::min);
        let x_max = outcomes
            .iter()
            .map(|o| o.value)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(x_min < 0.0 && 0.0 < x_max) {
            return Err(Error::InvalidDistribution(format!(
                "support [{x_min}, {x_max}] must satisfy x_min < 0 < x_max"
            )));
        }
        let mean = outcomes.iter().map(|o| o.value * o.probability).sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                acc += o.probability;
                acc
            })
            .collect();
        *cumulative.last_mut().expect("nonempty") = f64::INFINITY;
        Ok(ReturnDistribution {
            outcomes,
            cumulative,
            x_min,
            x_max,
            mean,
        })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Largest single-stage loss magnitude in either direction, `max(|x_min|, x_max)`.
    pub fn max_abs_return(&self) -> f64 {
        self.x_max.max(-self.x_min)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Returns `Some(stake)` when the law is `{+stake, -stake}` with any bias.
    pub fn even_money_stake(&self) -> Option<f64> {
        (self.outcomes.len() == 2 && self.x_max == -self.x_min).then_some(self.x_max)
    }

    /// Probability of the `x_max` outcome for a two-outcome law.
    pub fn win_probability(&self) -> Option<f64> {
        if self.outcomes.len() != 2 {
            return None;
        }
        self.outcomes
            .iter()
            .find(|o| o.value == self.x_max)
            .map(|o| o.probability)
    }

    /// Draws one outcome index by inversion of a single uniform variate.
    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.iter().position(|&c| u < c).unwrap_or(0)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.outcomes[self.sample_index(rng)].value
    }
}

/// Builds the two-outcome law of a coin flip; outcome 0 is the win.
pub fn make_coin(spec: CoinSpec) -> Result<ReturnDistribution> {
    if !(spec.win_value > 0.0 && spec.win_value.is_finite()) {
        return Err(Error::InvalidCoin(format!(
            "win value {} must be positive",
            spec.win_value
        )));
    }
    if !(spec.loss_value < 0.0 && spec.loss_value.is_finite()) {
        return Err(Error::InvalidCoin(format!(
            "loss value {} must be negative",
            spec.loss_value
        )));
    }
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(Error::InvalidCoin(format!(
            "win probability {} must lie in (0, 1)",
            spec.p
        )));
    }
    ReturnDistribution::new(vec![
        Outcome {
            value: spec.win_value,
            probability: spec.p,
        },
        Outcome {
            value: spec.loss_value,
            probability: 1.0 - spec.p,
        },
    ])
}

/// Independent random stream for Monte-Carlo path `path_index` under
/// `master_seed`.
///
/// Each path gets its own ChaCha stream, so the draws of a path depend only
/// on `(master_seed, path_index)` and never on how paths are scheduled.
pub fn path_stream(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// `n` i.i.d. returns drawn from `rng`.
pub fn sample_path<R: Rng + ?Sized>(
    dist: &ReturnDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Number of paths `|outcomes|^n`, or `None` on overflow.
pub fn path_count(dist: &ReturnDistribution, n: usize) -> Option<u64> {
    u32::try_from(n)
        .ok()
        .and_then(|n| (dist.len() as u64).checked_pow(n))
}

/// Iterates all `|outcomes|^n` return sequences with their probabilities, in
/// lexicographic order of outcome index (last stage varies fastest).
pub fn enumerate_paths(
    dist: &ReturnDistribution,
    n: usize,
    cap: u64,
) -> Result<PathEnumerator<'_>> {
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    match path_count(dist, n) {
        Some(total) if total <= cap => Ok(PathEnumerator {
            dist,
            indices: vec![0; n],
            remaining: total,
        }),
        _ => Err(Error::EnumerationTooLarge {
            outcomes: dist.len(),
            stages: n,
            cap,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct PathEnumerator<'a> {
    dist: &'a ReturnDistribution,
    indices: Vec<usize>,
    remaining: u64,
}

impl Iterator for PathEnumerator<'_> {
    type Item = (Vec<f64>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let outcomes = self.dist.outcomes();
        let returns = self.indices.iter().map(|&i| outcomes[i].value).collect();
        let probability = self
            .indices
            .iter()
            .map(|&i| outcomes[i].probability)
            .product();
        for slot in self.indices.iter_mut().rev() {
            *slot += 1;
            if *slot < outcomes.len() {
                break;
            }
            *slot = 0;
        }
        Some((returns, probability))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

impl ExactSizeIterator for PathEnumerator<'_> {}
