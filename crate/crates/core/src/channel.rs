//! Licensed spectrum: per-channel bandwidth, Bernoulli occupancy and the
//! capacity quantities derived from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of `N` orthogonal channels. Channel `j` has bandwidth `W_j`, is busy
/// (used by its primary owner) with probability `θ_j` independently of the
/// others, and carries rate `C_j = a·W_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelSet")]
pub struct ChannelSet {
    widths: Vec<f64>,
    thetas: Vec<f64>,
    rate_factor: f64,
}

#[derive(Deserialize)]
struct RawChannelSet {
    widths: Vec<f64>,
    thetas: Vec<f64>,
    #[serde(default = "default_rate_factor")]
    rate_factor: f64,
}

fn default_rate_factor() -> f64 {
    1.0
}

impl TryFrom<RawChannelSet> for ChannelSet {
    type Error = Error;

    fn try_from(raw: RawChannelSet) -> Result<Self> {
        ChannelSet::new(raw.widths, raw.thetas, raw.rate_factor)
    }
}

/// Derived capacities of a [`ChannelSet`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySummary {
    /// `C_j = a·W_j`.
    pub rates: Vec<f64>,
    /// Expected primary throughput `Σ θ_j C_j`.
    pub c_primary: f64,
    /// `Σ C_j`.
    pub c_max: f64,
    /// Utilization efficiency `c_primary / c_max`.
    pub rho: f64,
    /// `C_j / c_max`.
    pub normalized: Vec<f64>,
    /// Residual capacity `Σ (1-θ_j) C_j`, the ceiling on secondary throughput.
    pub c_residual: f64,
}

impl ChannelSet {
    pub fn new(widths: Vec<f64>, thetas: Vec<f64>, rate_factor: f64) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Dimension("channel set must not be empty".into()));
        }
        if widths.len() != thetas.len() {
            return Err(Error::Dimension(format!(
                "{} widths but {} occupancy probabilities",
                widths.len(),
                thetas.len()
            )));
        }
        if !(rate_factor.is_finite() && rate_factor > 0.0) {
            return Err(Error::param("rate_factor", format!("{rate_factor} is not positive")));
        }
        for (index, &w) in widths.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidEntry {
                    field: "widths",
                    index,
                    value: w,
                    reason: "bandwidth must be positive and finite",
                });
            }
        }
        for (index, &t) in thetas.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidEntry {
                    field: "thetas",
                    index,
                    value: t,
                    reason: "occupancy probability must lie in [0, 1]",
                });
            }
        }
        Ok(ChannelSet {
            widths,
            thetas,
            rate_factor,
        })
    }

    /// `n` identical channels.
    pub fn symmetric(n: usize, width: f64, theta: f64) -> Result<Self> {
        ChannelSet::new(vec![width; n], vec![theta; n], 1.0)
    }

    pub fn n(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn rate_factor(&self) -> f64 {
        self.rate_factor
    }

    pub fn rate(&self, j: usize) -> f64 {
        self.rate_factor * self.widths[j]
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.rate(j)).collect()
    }

    /// `θ̄_j = 1 - θ_j`.
    pub fn idle_prob(&self, j: usize) -> f64 {
        1.0 - self.thetas[j]
    }

    /// Expected idle capacity per channel, `θ̄_j C_j`.
    pub fn idle_rates(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.idle_prob(j) * self.rate(j)).collect()
    }

    pub fn residual_capacity(&self) -> f64 {
        self.idle_rates().iter().sum()
    }

    pub fn summarize(&self) -> CapacitySummary {
        let rates = self.rates();
        let c_max: f64 = rates.iter().sum();
        let c_primary: f64 = rates.iter().zip(&self.thetas).map(|(c, t)| t * c).sum();
        let c_residual: f64 = rates.iter().zip(&self.thetas).map(|(c, t)| (1.0 - t) * c).sum();
        let normalized = rates.iter().map(|c| c / c_max).collect();
        CapacitySummary {
            rho: (c_primary / c_max).clamp(0.0, 1.0),
            rates,
            c_primary,
            c_max,
            normalized,
            c_residual,
        }
    }

    /// Same channels with every bandwidth multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        ChannelSet::new(
            self.widths.iter().map(|w| w * k).collect(),
            self.thetas.clone(),
            self.rate_factor,
        )
    }

    /// Reorders channels so that new channel `i` is old channel `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        ChannelSet::new(
            perm.iter().map(|&j| self.widths[j]).collect(),
            perm.iter().map(|&j| self.thetas[j]).collect(),
            self.rate_factor,
        )
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Dimension(format!("permutation of length {} for {n} channels", perm.len())));
    }
    for &j in perm {
        if j >= n || seen[j] {
            return Err(Error::param("permutation", format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Recipe for channel sets where only the utilization `ρ` is prescribed.
///
/// Widths are drawn uniformly from `width_range`, occupancies i.i.d. uniform
/// on `[0, 1]`; the occupancies are then mapped through `θ ↦ ρ + b(θ - m)`,
/// where `m` is their rate-weighted mean and `b ≤ 1` is the largest slope that
/// keeps every value inside `[0, 1]`. The result hits `ρ` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationTarget {
    pub n: usize,
    pub rho: f64,
    pub width_range: (f64, f64),
    pub seed: u64,
}

impl UtilizationTarget {
    pub fn new(n: usize, rho: f64, seed: u64) -> Self {
        UtilizationTarget {
            n,
            rho,
            width_range: (0.5, 1.5),
            seed,
        }
    }

    pub fn generate(&self) -> Result<ChannelSet> {
        if self.n == 0 {
            return Err(Error::param("n", "at least one channel is required"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param("rho", format!("{} outside [0, 1]", self.rho)));
        }
        let (lo, hi) = self.width_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::param("width_range", format!("({lo}, {hi}) is not a positive interval")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let widths: Vec<f64> = (0..self.n)
            .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect();
        let raw: Vec<f64> = (0..self.n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = widths.iter().sum();
        let mean = raw.iter().zip(&widths).map(|(t, w)| t * w).sum::<f64>() / total;

        let mut slope: f64 = 1.0;
        for &t in &raw {
            let dev = t - mean;
            if dev > 0.0 {
                slope = slope.min((1.0 - self.rho) / dev);
            } else if dev < 0.0 {
                slope = slope.min(self.rho / -dev);
            }
        }
        let thetas = raw
            .iter()
            .map(|t| (self.rho + slope * (t - mean)).clamp(0.0, 1.0))
            .collect();
        ChannelSet::new(widths, thetas, 1.0)
    }
}
