//! Two-sample linear rank statistics over pooled scores.
//!
//! Scores of the observed sample `s(X_1..X_n)` are pooled with scores of a
//! synthetic negative sample `s(U_1..U_m)`; the rank of a value is the number
//! of pooled values less than or equal to it. The rank-sum statistic adds the
//! ranks of the observed points, the `phi`-weighted statistic adds
//! `phi(rank / (N+1))`, and the smooth proxy replaces the hard rank with a
//! scaled sigmoid score so a gradient can flow through it.
//!
//! Ties are legitimate inputs (scores are arbitrary reals) but inflate
//! `<=`-counts; every entry point counts them and logs a warning, since a
//! scorer collapsing to a constant otherwise looks spuriously good.

use crate::error::{Error, Result};
use crate::scoregen::ScoreGen;

/// Scores of the observed sample and of the negative sample, pooled lazily.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    observed: Vec<f64>,
    negative: Vec<f64>,
}

/// Ranks of the observed scores within the pooled sample, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    ranks: Vec<u64>,
    /// Pooled sample size N = n + m.
    pooled: u64,
}

impl ScoredPair {
    /// Pool observed against negative scores. Both must be nonempty and free
    /// of NaN; ties across or within samples are allowed.
    pub fn new(observed: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if observed.is_empty() || negative.is_empty() {
            return Err(Error::params(
                "rank statistics need nonempty observed and negative samples",
            ));
        }
        if observed.iter().chain(&negative).any(|v| v.is_nan()) {
            return Err(Error::domain("scores must not contain NaN"));
        }
        let pair = ScoredPair { observed, negative };
        let ties = pair.tie_count();
        if ties > 0 {
            log::warn!(
                "pooled scores contain {ties} tied pairs; <=-ranks inflate and \
                 the statistic may overstate separation"
            );
        }
        Ok(pair)
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    pub fn m(&self) -> usize {
        self.negative.len()
    }

    /// Pooled size N = n + m.
    pub fn pooled_len(&self) -> usize {
        self.observed.len() + self.negative.len()
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn negative(&self) -> &[f64] {
        &self.negative
    }

    /// Number of unordered tied pairs in the pooled sample.
    pub fn tie_count(&self) -> u64 {
        let mut pooled: Vec<f64> = self.observed.iter().chain(&self.negative).copied().collect();
        pooled.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
        let mut ties = 0u64;
        let mut i = 0;
        while i < pooled.len() {
            let mut j = i + 1;
            while j < pooled.len() && pooled[j] == pooled[i] {
                j += 1;
            }
            let k = (j - i) as u64;
            ties += k * (k - 1) / 2;
            i = j;
        }
        ties
    }

    /// Rank of every observed score in the pooled sample:
    /// `Rank(s(X_i)) = #{ pooled values <= s(X_i) }`.
    ///
    /// Runs in O(N log N) by binary-searching each observed score in the
    /// sorted pool.
    pub fn ranks(&self) -> RankVector {
        let mut pooled: Vec<f64> = self.observed.iter().chain(&self.negative).copied().collect();
        pooled.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
        let ranks = self
            .observed
            .iter()
            .map(|&x| pooled.partition_point(|&v| v <= x) as u64)
            .collect();
        RankVector {
            ranks,
            pooled: pooled.len() as u64,
        }
    }

    /// Rank-sum statistic `sum_i Rank(s(X_i))` as an exact integer.
    pub fn rank_sum(&self) -> u64 {
        self.ranks().ranks.iter().sum()
    }

    /// The phi-weighted statistic `sum_i phi(Rank_i / (N+1))`.
    ///
    /// With the identity weighting this is `rank_sum / (N+1)` and is computed
    /// exactly that way: one integer sum and a single division, so the
    /// equality with the rank-sum holds to the last bit rather than up to
    /// float summation order.
    pub fn w_phi_stat(&self, phi: &ScoreGen) -> Result<f64> {
        let rv = self.ranks();
        let denom = (rv.pooled + 1) as f64;
        if phi.kind() == crate::scoregen::ScoreGenKind::Mww {
            return Ok(self.rank_sum() as f64 / denom);
        }
        let mut acc = 0.0;
        for &r in &rv.ranks {
            acc += phi.eval(r as f64 / denom)?;
        }
        Ok(acc)
    }

}

/// Smooth training proxy of the rank statistic:
/// `sum_i phi((N * s_i + 1) / (N + 1))` with `N = n + m`, where `s_i` are the
/// model scores of the n observed points and m is the negative-sample size.
///
/// The hard pooled rank is replaced by the raw model output, so the result is
/// differentiable in the scores wherever `phi` is. Scores must lie strictly
/// inside (0, 1) — a sigmoid output, not a rank.
pub fn w_phi_proxy(phi: &ScoreGen, model_scores_x: &[f64], m: usize) -> Result<f64> {
    if model_scores_x.is_empty() || m == 0 {
        return Err(Error::params(
            "proxy statistic needs n >= 1 observed scores and m >= 1 negatives",
        ));
    }
    let nf = (model_scores_x.len() + m) as f64;
    let denom = nf + 1.0;
    let mut acc = 0.0;
    for &s in model_scores_x {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!(
                "proxy statistic needs model scores in (0,1), got {s}"
            )));
        }
        acc += phi.eval((nf * s + 1.0) / denom)?;
    }
    Ok(acc)
}

impl RankVector {
    /// 1-based ranks, in observed order.
    pub fn as_slice(&self) -> &[u64] {
        &self.ranks
    }

    /// Pooled sample size N.
    pub fn pooled_len(&self) -> u64 {
        self.pooled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// O(N^2) rank oracle: literal <=-count per observed score.
    fn brute_force_ranks(observed: &[f64], negative: &[f64]) -> Vec<u64> {
        observed
            .iter()
            .map(|&x| {
                observed
                    .iter()
                    .chain(negative)
                    .filter(|&&v| v <= x)
                    .count() as u64
            })
            .collect()
    }

    #[test]
    fn worked_example_ranks() {
        // observed [0.9, 0.5], negative [0.1, 0.3]: pooled sorted is
        // 0.1 < 0.3 < 0.5 < 0.9, so ranks are 4 and 3.
        let pair = ScoredPair::new(vec![0.9, 0.5], vec![0.1, 0.3]).unwrap();
        assert_eq!(pair.ranks().as_slice(), &[4, 3]);
        assert_eq!(pair.rank_sum(), 7);
        // MWW weighting: (4 + 3) / 5
        let w = pair.w_phi_stat(&ScoreGen::mww()).unwrap();
        assert_eq!(w, 1.4);
    }

    #[test]
    fn perfectly_separated_rank_sum() {
        // n=3 observed above m=2 negatives: ranks 3,4,5 -> 12.
        let pair = ScoredPair::new(vec![5.0, 6.0, 7.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(pair.rank_sum(), 12);
    }

    #[test]
    fn median_statistic_on_separated_samples() {
        // n=m=2, observed strictly above: ranks 3,4; N+1=5; both ratios > 1/2.
        let pair = ScoredPair::new(vec![10.0, 11.0], vec![0.0, 1.0]).unwrap();
        let w = pair.w_phi_stat(&ScoreGen::median()).unwrap();
        assert_eq!(w, 2.0);
    }

    #[test]
    fn proxy_on_constant_scores() {
        // n=m=2 all scores 0.5: proxy arg = (4*0.5+1)/5 = 0.6 for both
        // observed points, so the MWW proxy is 1.2.
        let w = w_phi_proxy(&ScoreGen::mww(), &[0.5, 0.5], 2).unwrap();
        assert!((w - 1.2).abs() < 1e-15, "w = {w}");
    }

    #[test]
    fn proxy_approaches_one_near_saturation() {
        // n=m=1: (2s+1)/3 -> 1 as s -> 1.
        let w = w_phi_proxy(&ScoreGen::mww(), &[1.0 - 1e-12], 1).unwrap();
        assert!((w - 1.0).abs() < 1e-9, "w = {w}");
    }

    #[test]
    fn proxy_truncated_example() {
        // scores [0.9, 0.1], n=m=2: args (4*0.9+1)/5 = 0.92 and
        // (4*0.1+1)/5 = 0.28; with cutoff 0.7 only the first survives.
        let phi = ScoreGen::truncated(0.7).unwrap();
        let w = w_phi_proxy(&phi, &[0.9, 0.1], 2).unwrap();
        assert!((w - 0.92).abs() < 1e-15, "w = {w}");
    }

    #[test]
    fn proxy_rejects_invalid_inputs() {
        let phi = ScoreGen::mww();
        assert!(w_phi_proxy(&phi, &[1.5], 1).is_err());
        assert!(w_phi_proxy(&phi, &[0.0], 1).is_err());
        assert!(w_phi_proxy(&phi, &[1.0], 1).is_err());
        assert!(w_phi_proxy(&phi, &[], 1).is_err());
        assert!(w_phi_proxy(&phi, &[0.5], 0).is_err());
    }

    #[test]
    fn ranks_match_brute_force_on_random_inputs() {
        let mut rng = crate::rng::rng_from_seed(72205);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            let m = rng.gen_range(1..40);
            // Coarse grid forces plenty of ties.
            let observed: Vec<f64> =
                (0..n).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
            let negative: Vec<f64> =
                (0..m).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
            let expect = brute_force_ranks(&observed, &negative);
            let pair = ScoredPair::new(observed, negative).unwrap();
            assert_eq!(pair.ranks().as_slice(), expect.as_slice());
        }
    }

    #[test]
    fn tie_count_examples() {
        let pair = ScoredPair::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        // three 1.0s -> 3 tied pairs
        assert_eq!(pair.tie_count(), 3);
        let clean = ScoredPair::new(vec![0.1, 0.2], vec![0.3]).unwrap();
        assert_eq!(clean.tie_count(), 0);
    }

    #[test]
    fn empty_and_nan_inputs_rejected() {
        assert!(ScoredPair::new(vec![], vec![1.0]).is_err());
        assert!(ScoredPair::new(vec![1.0], vec![]).is_err());
        assert!(ScoredPair::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    proptest! {
        /// Ranks are invariant under strictly increasing transforms.
        #[test]
        fn ranks_invariant_under_monotone_transform(
            observed in proptest::collection::vec(-50.0f64..50.0, 1..30),
            negative in proptest::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let before = ScoredPair::new(observed.clone(), negative.clone())
                .unwrap()
                .ranks();
            // exp is strictly increasing and exact enough on this range to
            // preserve ordering.
            let t = |v: &f64| (v / 25.0).exp();
            let after = ScoredPair::new(
                observed.iter().map(t).collect(),
                negative.iter().map(t).collect(),
            )
            .unwrap()
            .ranks();
            prop_assert_eq!(before, after);
        }

        /// Every rank lies in [1, N] and the rank-sum in [n(n+1)/2, nm + n(n+1)/2].
        #[test]
        fn rank_range_invariants(
            observed in proptest::collection::vec(-50.0f64..50.0, 1..30),
            negative in proptest::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let n = observed.len() as u64;
            let m = negative.len() as u64;
            let pair = ScoredPair::new(observed, negative).unwrap();
            let rv = pair.ranks();
            for &r in rv.as_slice() {
                prop_assert!(r >= 1 && r <= n + m);
            }
            let s = pair.rank_sum();
            prop_assert!(s >= n * (n + 1) / 2);
            prop_assert!(s <= n * m + n * (n + 1) / 2);
        }
    }
}
