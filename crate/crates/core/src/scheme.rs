//! Sensing actions (channel groups) and probability measures over them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};

/// Default cap on the number of groups produced by [`GroupCatalog::enumerate`].
pub const DEFAULT_CATALOG_CAP: u128 = 1_000_000;

/// Tolerance on `Σ P_i = 1` accepted by [`SensingScheme::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Ordered list of channel groups a user may sense. Channel indices are
/// zero-based; every group is strictly increasing and has the same size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupCatalog {
    n: usize,
    s: usize,
    groups: Vec<Vec<usize>>,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl GroupCatalog {
    /// All `C(n, s)` subsets in lexicographic order.
    pub fn enumerate(n: usize, s: usize) -> Result<Self> {
        Self::enumerate_with_cap(n, s, DEFAULT_CATALOG_CAP)
    }

    pub fn enumerate_with_cap(n: usize, s: usize, cap: u128) -> Result<Self> {
        if n == 0 || s == 0 || s > n {
            return Err(Error::param("group size", format!("need 1 <= s <= n, got s = {s}, n = {n}")));
        }
        let count = binomial(n, s);
        if count > cap {
            return Err(Error::CatalogTooLarge { n, s, count, cap });
        }
        let mut groups = Vec::with_capacity(count as usize);
        let mut current: Vec<usize> = (0..s).collect();
        loop {
            groups.push(current.clone());
            // advance to the next combination
            let mut i = s;
            loop {
                if i == 0 {
                    return Ok(GroupCatalog { n, s, groups });
                }
                i -= 1;
                if current[i] < n - s + i {
                    break;
                }
            }
            current[i] += 1;
            for k in i + 1..s {
                current[k] = current[k - 1] + 1;
            }
        }
    }

    /// The `n` single-channel groups.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::enumerate(n, 1)
    }

    /// A restricted catalog. Groups are validated but kept in the given order.
    pub fn from_groups(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let s = groups
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::param("catalog", "no groups given"))?;
        if s == 0 || s > n {
            return Err(Error::param("catalog", format!("group size {s} invalid for {n} channels")));
        }
        for (gi, g) in groups.iter().enumerate() {
            if g.len() != s {
                return Err(Error::param("catalog", format!("group {gi} has size {}, expected {s}", g.len())));
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param("catalog", format!("group {gi} is not strictly increasing")));
            }
            if g[s - 1] >= n {
                return Err(Error::ChannelIndex { index: g[s - 1], n });
            }
        }
        let mut sorted = groups.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("catalog", "duplicate groups"));
        }
        Ok(GroupCatalog { n, s, groups })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn group_size(&self) -> usize {
        self.s
    }

    pub fn kappa(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn is_single_channel(&self) -> bool {
        self.s == 1
    }

    /// True when the catalog is exactly the lexicographic `C(n, s)` enumeration.
    pub fn is_full(&self) -> bool {
        binomial(self.n, self.s) == self.groups.len() as u128
    }

    /// Coverage `c_i = Σ_{g ∋ i} p_g` for a probability vector over groups.
    pub fn coverage_of(&self, probs: &[f64]) -> Vec<f64> {
        let mut cov = vec![0.0; self.n];
        for (g, p) in self.groups.iter().zip(probs) {
            for &i in g {
                cov[i] += p;
            }
        }
        cov
    }

    /// Adjoint of [`coverage_of`](Self::coverage_of): `out_g = Σ_{i ∈ g} v_i`.
    pub fn pull_back(&self, per_channel: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| g.iter().map(|&i| per_channel[i]).sum()).collect()
    }
}

/// A probability measure over a [`GroupCatalog`].
#[derive(Debug, Clone, PartialEq)]
pub struct SensingScheme {
    catalog: Arc<GroupCatalog>,
    probs: Vec<f64>,
}

impl SensingScheme {
    /// Validates nonnegativity and `|Σ p - 1| ≤ 1e-9`, then renormalizes.
    pub fn new(catalog: Arc<GroupCatalog>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != catalog.kappa() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} groups",
                probs.len(),
                catalog.kappa()
            )));
        }
        for (index, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidEntry {
                    field: "probabilities",
                    index,
                    value: p,
                    reason: "probability must be nonnegative",
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::param("probabilities", format!("sum is {total}, expected 1")));
        }
        Ok(SensingScheme {
            catalog,
            probs: renormalize(probs, total),
        })
    }

    /// Normalizes an arbitrary nonnegative weight vector.
    pub fn from_weights(catalog: Arc<GroupCatalog>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::param("weights", "sum must be positive"));
        }
        Self::new(catalog, weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(catalog: Arc<GroupCatalog>) -> Self {
        let k = catalog.kappa();
        SensingScheme {
            catalog,
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Single-channel scheme from a probability per channel.
    pub fn single(probs: Vec<f64>) -> Result<Self> {
        let cat = GroupCatalog::singletons(probs.len())?;
        Self::new(Arc::new(cat), probs)
    }

    pub fn catalog(&self) -> &GroupCatalog {
        &self.catalog
    }

    pub fn catalog_arc(&self) -> Arc<GroupCatalog> {
        Arc::clone(&self.catalog)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.catalog.n()
    }

    /// Probability that a single user senses channel `i`.
    pub fn channel_coverage(&self, i: usize) -> Result<f64> {
        if i >= self.n() {
            return Err(Error::ChannelIndex { index: i, n: self.n() });
        }
        Ok(self
            .catalog
            .groups()
            .iter()
            .zip(&self.probs)
            .filter(|(g, _)| g.contains(&i))
            .map(|(_, p)| p)
            .sum::<f64>()
            .min(1.0))
    }

    pub fn coverages(&self) -> Vec<f64> {
        self.catalog
            .coverage_of(&self.probs)
            .into_iter()
            .map(|c| c.min(1.0))
            .collect()
    }

    /// Per-channel probabilities when the scheme senses one channel at a time.
    pub fn channel_probs(&self) -> Result<&[f64]> {
        if !self.catalog.is_single_channel() {
            return Err(Error::NotSingleChannel(self.catalog.group_size()));
        }
        Ok(&self.probs)
    }

    /// `(group, probability)` pairs with one-based channel labels.
    pub fn to_records(&self) -> Vec<GroupProbability> {
        self.catalog
            .groups()
            .iter()
            .zip(&self.probs)
            .map(|(g, &p)| GroupProbability {
                group: g.iter().map(|i| i + 1).collect(),
                probability: p,
            })
            .collect()
    }

    pub fn from_records(n: usize, records: &[GroupProbability]) -> Result<Self> {
        let groups = records
            .iter()
            .map(|r| {
                r.group
                    .iter()
                    .map(|&i| {
                        i.checked_sub(1)
                            .ok_or_else(|| Error::param("group", "channel labels are one-based"))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let cat = GroupCatalog::from_groups(n, groups)?;
        Self::new(Arc::new(cat), records.iter().map(|r| r.probability).collect())
    }
}

/// Divides by `total` and pushes the residual rounding error into the largest
/// entry, so a vector that already sums to exactly 1 is returned unchanged.
fn renormalize(mut probs: Vec<f64>, total: f64) -> Vec<f64> {
    if total == 1.0 {
        return probs;
    }
    probs.iter_mut().for_each(|p| *p /= total);
    let residual = 1.0 - probs.iter().sum::<f64>();
    if let Some(max) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max = (*max + residual).max(0.0);
    }
    probs
}

/// Serialized form of one group of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProbability {
    pub group: Vec<usize>,
    pub probability: f64,
}

/// Heuristic single-channel scheme `P_j ∝ θ̄_j C_j`.
pub fn heuristic_single(cs: &ChannelSet) -> Result<SensingScheme> {
    let weights = cs.idle_rates();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::NoOpportunity);
    }
    SensingScheme::from_weights(Arc::new(GroupCatalog::singletons(cs.n())?), weights)
}

/// Output of [`heuristic_multi`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicScheme {
    pub scheme: SensingScheme,
    /// Sum of the group probabilities before renormalization.
    pub raw_sum: f64,
}

impl HeuristicScheme {
    pub fn deviation(&self) -> f64 {
        self.raw_sum - 1.0
    }
}

/// Group heuristic `P_g = (1/S) Σ_{i∈g} θ̄_i C_i / Σ_i θ̄_i C_i`, renormalized
/// when the raw sum is not one.
pub fn heuristic_multi(cs: &ChannelSet, catalog: Arc<GroupCatalog>) -> Result<HeuristicScheme> {
    if catalog.n() != cs.n() {
        return Err(Error::Dimension(format!(
            "catalog over {} channels, channel set has {}",
            catalog.n(),
            cs.n()
        )));
    }
    let idle = cs.idle_rates();
    let total: f64 = idle.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoOpportunity);
    }
    let s = catalog.group_size() as f64;
    let raw: Vec<f64> = catalog.pull_back(&idle).into_iter().map(|v| v / (s * total)).collect();
    let raw_sum: f64 = raw.iter().sum();
    if raw_sum <= 0.0 {
        return Err(Error::NoOpportunity);
    }
    let scheme = SensingScheme::new(catalog, raw.iter().map(|p| p / raw_sum).collect())?;
    Ok(HeuristicScheme { scheme, raw_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn singleton_and_full_band_catalogs() {
        let c = GroupCatalog::enumerate(3, 1).unwrap();
        assert_eq!(c.groups(), &[vec![0], vec![1], vec![2]]);
        let c = GroupCatalog::enumerate(3, 3).unwrap();
        assert_eq!(c.kappa(), 1);
        assert_eq!(c.group(0), &[0, 1, 2]);
    }

    #[test]
    fn four_choose_two_is_lexicographic() {
        let c = GroupCatalog::enumerate(4, 2).unwrap();
        assert_eq!(c.kappa(), 6);
        assert_eq!(c.group(0), &[0, 1]);
        assert_eq!(c.group(5), &[2, 3]);
        let mut sorted = c.groups().to_vec();
        sorted.sort();
        assert_eq!(sorted, c.groups());
    }

    #[test]
    fn enumeration_matches_brute_force_subsets() {
        for n in 1..=7usize {
            for s in 1..=n {
                let c = GroupCatalog::enumerate(n, s).unwrap();
                let brute: Vec<Vec<usize>> = (0u32..(1 << n))
                    .filter(|m| m.count_ones() as usize == s)
                    .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
                    .collect();
                let mut brute_sorted = brute.clone();
                brute_sorted.sort();
                assert_eq!(c.groups(), brute_sorted.as_slice(), "n={n} s={s}");
            }
        }
    }

    #[test]
    fn catalog_cap_is_enforced() {
        let err = GroupCatalog::enumerate_with_cap(30, 15, 1000).unwrap_err();
        assert!(matches!(err, Error::CatalogTooLarge { .. }));
        assert!(GroupCatalog::enumerate(3, 4).is_err());
        assert!(GroupCatalog::enumerate(3, 0).is_err());
    }

    #[test]
    fn restricted_catalog_validation() {
        assert!(GroupCatalog::from_groups(4, vec![vec![0, 1], vec![2, 3]]).is_ok());
        assert!(GroupCatalog::from_groups(4, vec![vec![1, 0]]).is_err());
        assert!(GroupCatalog::from_groups(4, vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(GroupCatalog::from_groups(4, vec![vec![0, 4]]).is_err());
        assert!(GroupCatalog::from_groups(4, vec![vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn scheme_validation() {
        let cat = Arc::new(GroupCatalog::singletons(2).unwrap());
        assert!(SensingScheme::new(cat.clone(), vec![0.5, 0.6]).is_err());
        assert!(SensingScheme::new(cat.clone(), vec![-0.1, 1.1]).is_err());
        assert!(SensingScheme::new(cat.clone(), vec![1.0]).is_err());
        let s = SensingScheme::new(cat, vec![0.3, 0.7 + 5e-10]).unwrap();
        assert_relative_eq!(s.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn heuristic_single_examples() {
        let sym = ChannelSet::symmetric(4, 1.0, 0.3).unwrap();
        for p in heuristic_single(&sym).unwrap().probs() {
            assert_relative_eq!(*p, 0.25, epsilon = 1e-15);
        }
        let cs = ChannelSet::new(vec![1.0, 1.0], vec![0.0, 1.0], 1.0).unwrap();
        assert_eq!(heuristic_single(&cs).unwrap().probs(), &[1.0, 0.0]);
        let cs = ChannelSet::new(vec![2.0, 1.0], vec![0.2, 0.8], 1.0).unwrap();
        let p = heuristic_single(&cs).unwrap();
        assert_relative_eq!(p.probs()[0], 8.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(p.probs()[1], 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn heuristic_needs_an_opportunity() {
        let cs = ChannelSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(heuristic_single(&cs).unwrap_err(), Error::NoOpportunity);
    }

    #[test]
    fn heuristic_multi_reductions() {
        let cs = ChannelSet::new(vec![2.0, 1.0, 0.5], vec![0.2, 0.8, 0.1], 1.0).unwrap();
        let single = heuristic_single(&cs).unwrap();
        let multi = heuristic_multi(&cs, Arc::new(GroupCatalog::enumerate(3, 1).unwrap())).unwrap();
        assert_relative_eq!(multi.raw_sum, 1.0, epsilon = 1e-15);
        for (a, b) in single.probs().iter().zip(multi.scheme.probs()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }

        let cs2 = ChannelSet::new(vec![2.0, 1.0], vec![0.2, 0.8], 1.0).unwrap();
        let one = heuristic_multi(&cs2, Arc::new(GroupCatalog::enumerate(2, 2).unwrap())).unwrap();
        assert_eq!(one.scheme.probs(), &[1.0]);
    }

    #[test]
    fn heuristic_multi_three_choose_two() {
        let cs = ChannelSet::symmetric(3, 1.0, 0.0).unwrap();
        let h = heuristic_multi(&cs, Arc::new(GroupCatalog::enumerate(3, 2).unwrap())).unwrap();
        assert_relative_eq!(h.raw_sum, 1.0, epsilon = 1e-15);
        for p in h.scheme.probs() {
            assert_relative_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        // raw sum on a full catalog is C(n-1, s-1)/s, so it is 1 only in special cases
        let cs = ChannelSet::symmetric(10, 1.0, 0.5).unwrap();
        let h = heuristic_multi(&cs, Arc::new(GroupCatalog::enumerate(10, 2).unwrap())).unwrap();
        assert_relative_eq!(h.raw_sum, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let s = SensingScheme::single(vec![0.2, 0.3, 0.5]).unwrap();
        assert_relative_eq!(s.channel_coverage(1).unwrap(), 0.3);
        let full = SensingScheme::uniform(Arc::new(GroupCatalog::enumerate(3, 3).unwrap()));
        for i in 0..3 {
            assert_eq!(full.channel_coverage(i).unwrap(), 1.0);
        }
        let pairs = SensingScheme::uniform(Arc::new(GroupCatalog::enumerate(3, 2).unwrap()));
        for i in 0..3 {
            assert_relative_eq!(pairs.channel_coverage(i).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        }
        assert!(matches!(pairs.channel_coverage(3), Err(Error::ChannelIndex { .. })));
    }

    #[test]
    fn records_round_trip() {
        let cat = Arc::new(GroupCatalog::enumerate(4, 2).unwrap());
        let s = SensingScheme::from_weights(cat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let recs = s.to_records();
        assert_eq!(recs[0].group, vec![1, 2]);
        let back = SensingScheme::from_records(4, &recs).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn coverage_sums_to_group_size(
            n in 1usize..7,
            s_frac in 0.0f64..1.0,
            weights in prop::collection::vec(0.01f64..1.0, 35),
        ) {
            let s = 1 + ((n - 1) as f64 * s_frac) as usize;
            let cat = Arc::new(GroupCatalog::enumerate(n, s).unwrap());
            let k = cat.kappa();
            let scheme = SensingScheme::from_weights(cat, weights[..k].to_vec()).unwrap();
            let total: f64 = (0..n).map(|i| scheme.channel_coverage(i).unwrap()).sum();
            prop_assert!((total - s as f64).abs() < 1e-12);
        }

        #[test]
        fn heuristic_single_scale_invariant(
            widths in prop::collection::vec(0.1f64..5.0, 1..8),
            k in 0.01f64..100.0,
            seed in 0u64..1000,
        ) {
            let thetas: Vec<f64> = (0..widths.len()).map(|j| ((seed + j as u64 * 37) % 100) as f64 / 100.0).collect();
            let cs = ChannelSet::new(widths, thetas, 1.0).unwrap();
            let a = heuristic_single(&cs).unwrap();
            let b = heuristic_single(&cs.scaled(k).unwrap()).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
