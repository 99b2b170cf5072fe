//! Order-based prediction sets.
//!
//! Every set here has the same shape: a candidate category `k` is kept when
//! the mass admitted up to (and including) `k`'s position in some ordering is
//! strictly greater than `α`. The schemes only differ in the ordering and in
//! whether the mass comes from a known `θ` or from the sample augmented with
//! the candidate itself.
//!
//! For the sample-based schemes the statistic for candidate `k` is
//!
//! ```text
//! p_k = (Σ_{l : key_l ≤ cand_k} x_l + 1) / (N + 1)
//! ```
//!
//! where `cand_k` is `o_k` for a fixed ordering, `x_k + 1` for the direct
//! set and `x_k + γ_k + 1` for the indirect set. `key_k ≤ cand_k` always holds,
//! so one sort of the keys plus prefix sums gives all `K` statistics in
//! `O(K log K)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::eb::ConcentrationVector;
use crate::error::{Error, Result};

/// Observed per-category counts of one area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

// Counts are compared exactly through f64, so totals must stay below 2^53.
const MAX_EXACT_COUNT: u64 = 1 << 53;

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("count vector needs at least one category"));
        }
        let total = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .filter(|&t| t < MAX_EXACT_COUNT)
            .ok_or_else(|| Error::invalid("total count too large"))?;
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of trials `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of categories `K`.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl TryFrom<Vec<u64>> for CountVector {
    type Error = Error;

    fn try_from(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts)
    }
}

/// Category probabilities `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid(
                "probability vector needs at least one category",
            ));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid(
                "probability vector needs at least one category",
            ));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A real vector whose (non-strict) order decides admission into a set.
/// Only the induced weak order matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingKey(Vec<f64>);

impl OrderingKey {
    pub fn new(keys: Vec<f64>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::invalid("ordering key needs at least one category"));
        }
        if keys.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("ordering keys must be finite"));
        }
        Ok(Self(keys))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&ProbabilityVector> for OrderingKey {
    fn from(theta: &ProbabilityVector) -> Self {
        Self(theta.0.clone())
    }
}

/// A prediction set: the categories (0-based) whose statistic exceeds `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    included: Vec<usize>,
    alpha: f64,
    pvalues: Vec<f64>,
}

impl PredictionSet {
    /// Thresholds per-category statistics at `alpha` (strictly).
    pub fn from_pvalues(pvalues: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let included = pvalues
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > alpha)
            .map(|(k, _)| k)
            .collect();
        Ok(Self {
            included,
            alpha,
            pvalues,
        })
    }

    /// Included category indices in increasing order.
    pub fn included(&self) -> &[usize] {
        &self.included
    }

    pub fn contains(&self, category: usize) -> bool {
        self.included.binary_search(&category).is_ok()
    }

    pub fn cardinality(&self) -> usize {
        self.included.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn num_categories(&self) -> usize {
        self.pvalues.len()
    }
}

/// How categories are ordered for a sample-based set.
#[derive(Debug, Clone, Copy)]
pub enum Scheme<'a> {
    /// Order by the sample's own counts.
    Direct,
    /// Order by posterior counts `x + γ`.
    Indirect(&'a ConcentrationVector),
    /// A fixed ordering chosen independently of the sample.
    FixedOrder(&'a OrderingKey),
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Set for a known `θ` under ordering `o`: keep `k` iff
/// `Σ_{l : o_k ≥ o_l} θ_l > α`.
pub fn order_set_known_theta(
    theta: &ProbabilityVector,
    order: &OrderingKey,
    alpha: f64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    check_dim(theta.len(), order.len())?;
    let keys = order.as_slice();
    let probs = theta.as_slice();

    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| cmp_finite(&keys[a], &keys[b]));

    let mut pvalues = vec![0.0; keys.len()];
    let mut cumulative = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && keys[idx[end]] == keys[idx[start]] {
            cumulative += probs[idx[end]];
            end += 1;
        }
        for &k in &idx[start..end] {
            pvalues[k] = cumulative;
        }
        start = end;
    }
    PredictionSet::from_pvalues(pvalues, alpha)
}

/// The smallest valid set for a known `θ`: admit categories by decreasing
/// probability.
pub fn oracle_set(theta: &ProbabilityVector, alpha: f64) -> Result<PredictionSet> {
    order_set_known_theta(theta, &OrderingKey::from(theta), alpha)
}

/// Sample-based set under a fixed ordering `o`.
pub fn conformal_set(x: &CountVector, order: &OrderingKey, alpha: f64) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    PredictionSet::from_pvalues(set_pvalues(x, Scheme::FixedOrder(order))?, alpha)
}

/// Direct set: admit categories by decreasing observed count, comparing the
/// candidate's augmented count `x_k + 1` against the others.
pub fn direct_set(x: &CountVector, alpha: f64) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    PredictionSet::from_pvalues(set_pvalues(x, Scheme::Direct)?, alpha)
}

/// Indirect set: admit categories by decreasing posterior count `x + γ`.
/// The admitted mass still comes from the raw counts.
pub fn indirect_set(
    x: &CountVector,
    gamma: &ConcentrationVector,
    alpha: f64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    PredictionSet::from_pvalues(set_pvalues(x, Scheme::Indirect(gamma))?, alpha)
}

/// Per-category statistics that the set operations threshold at `α`.
pub fn set_pvalues(x: &CountVector, scheme: Scheme<'_>) -> Result<Vec<f64>> {
    let counts = x.counts();
    match scheme {
        Scheme::FixedOrder(order) => {
            check_dim(counts.len(), order.len())?;
            let keys = order.as_slice();
            Ok(cumulative_pvalues(
                counts,
                x.total(),
                keys,
                keys,
                cmp_finite,
            ))
        }
        Scheme::Direct => {
            let candidates: Vec<u64> = counts.iter().map(|c| c + 1).collect();
            Ok(cumulative_pvalues(
                counts,
                x.total(),
                counts,
                &candidates,
                Ord::cmp,
            ))
        }
        Scheme::Indirect(gamma) => {
            let gamma = gamma.as_slice();
            check_dim(counts.len(), gamma.len())?;
            let keys: Vec<PosteriorCount> = counts
                .iter()
                .zip(gamma)
                .map(|(&count, &prior)| PosteriorCount { count, prior })
                .collect();
            let candidates: Vec<PosteriorCount> = keys
                .iter()
                .map(|p| PosteriorCount {
                    count: p.count + 1,
                    prior: p.prior,
                })
                .collect();
            Ok(cumulative_pvalues(
                counts,
                x.total(),
                &keys,
                &candidates,
                PosteriorCount::cmp_exact,
            ))
        }
    }
}

/// `p_k = (Σ_{l : keys[l] ≤ candidates[k]} x_l + 1) / (N + 1)`.
///
/// Requires `keys[k] ≤ candidates[k]` so the candidate's own count is among
/// the admitted ones.
fn cumulative_pvalues<T, F>(
    counts: &[u64],
    total: u64,
    keys: &[T],
    candidates: &[T],
    cmp: F,
) -> Vec<f64>
where
    F: Fn(&T, &T) -> Ordering,
{
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| cmp(&keys[a], &keys[b]));
    let prefix: Vec<u64> = idx
        .iter()
        .scan(0u64, |acc, &i| {
            *acc += counts[i];
            Some(*acc)
        })
        .collect();

    let denom = (total + 1) as f64;
    candidates
        .iter()
        .map(|cand| {
            let admitted = idx.partition_point(|&i| cmp(&keys[i], cand) != Ordering::Greater);
            debug_assert!(admitted > 0);
            (prefix[admitted - 1] + 1) as f64 / denom
        })
        .collect()
}

fn cmp_finite(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("ordering keys are finite")
}

/// The exact real number `count + prior`.
#[derive(Debug, Clone, Copy)]
struct PosteriorCount {
    count: u64,
    prior: f64,
}

impl PosteriorCount {
    /// Compares `a.count + a.prior` with `b.count + b.prior` without rounding
    /// the sums, so a common prior never breaks or creates ties.
    fn cmp_exact(a: &Self, b: &Self) -> Ordering {
        // Both counts are below 2^53, so the difference is exact.
        let count_diff = a.count as f64 - b.count as f64;
        let (s, e) = two_sum(a.prior, -b.prior);
        // sign(count_diff + s + e), with s = fl(s + e)
        match s.partial_cmp(&-count_diff).expect("finite") {
            Ordering::Equal => e.partial_cmp(&0.0).expect("finite"),
            ord => ord,
        }
    }
}

/// Knuth's error-free transformation: `a + b == s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}
