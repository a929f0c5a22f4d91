//! Discrete-slot Monte Carlo simulators.
//!
//! Every slot draws from its own ChaCha8 sub-stream, addressed by the master
//! seed, a per-simulator stream id and the slot index. Shards are contiguous
//! slot ranges, so estimates do not depend on which thread ran which slot.
//! Shard accumulators are pooled in shard order, which makes a run with a
//! fixed shard count bit-reproducible; different shard counts agree up to
//! floating-point rounding of the pooling step.

mod csma;
mod datalink;
mod spatial;
mod stats;

pub use csma::{simulate_csma, CsmaEstimates};
pub use datalink::simulate_aloha_datalink;
pub use spatial::{simulate_spatial, SpatialEstimates, SpatialScenario, SUCCESS_K_MAX};
pub use stats::{slots_for_relative_error, RatioAccumulator, SimEstimate, Welford};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run length, master seed and number of shards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub slots: u64,
    pub seed: u64,
    pub shards: usize,
}

impl SimOptions {
    pub fn new(slots: u64, seed: u64) -> Result<Self> {
        if slots == 0 {
            return Err(Error::param("slots", "at least one slot is required"));
        }
        Ok(SimOptions { slots, seed, shards: 1 })
    }

    pub fn with_shards(mut self, shards: usize) -> Result<Self> {
        if shards == 0 {
            return Err(Error::param("shards", "at least one shard is required"));
        }
        self.shards = shards;
        Ok(self)
    }

    fn shard_ranges(&self) -> Vec<(u64, u64)> {
        let k = (self.shards as u64).min(self.slots).max(1);
        (0..k)
            .map(|i| (i * self.slots / k, (i + 1) * self.slots / k))
            .collect()
    }
}

pub(crate) trait Accumulator: Send {
    fn merge(&mut self, other: Self);
}

/// Runs `slot` for every slot and pools the shard accumulators in order.
pub(crate) fn run_slots<A: Accumulator>(
    opts: &SimOptions,
    stream: u64,
    init: impl Fn() -> A + Sync,
    slot: impl Fn(&mut ChaCha8Rng, &mut A) + Sync,
) -> A {
    let mut base = ChaCha8Rng::seed_from_u64(opts.seed);
    base.set_stream(stream);
    let shard = |(lo, hi): (u64, u64)| {
        let mut acc = init();
        for s in lo..hi {
            let mut rng = base.clone();
            rng.set_word_pos((s as u128) << 32);
            slot(&mut rng, &mut acc);
        }
        acc
    };
    let ranges = opts.shard_ranges();
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        use rayon::prelude::*;
        ranges.into_par_iter().map(shard).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = ranges.into_iter().map(shard).collect();
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("at least one shard");
    for p in parts {
        total.merge(p);
    }
    total
}

/// Inverse-CDF sampler over a probability vector. Zero-probability entries
/// are never returned.
pub(crate) struct Categorical {
    cumulative: Vec<f64>,
    last: usize,
}

impl Categorical {
    pub(crate) fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Categorical { cumulative, last }
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.last];
        self.cumulative.partition_point(|&c| c <= u).min(self.last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default)]
    struct Sum(Welford);

    impl Accumulator for Sum {
        fn merge(&mut self, o: Self) {
            self.0.merge(&o.0);
        }
    }

    #[test]
    fn shards_cover_every_slot_once() {
        let opts = SimOptions::new(10, 0).unwrap().with_shards(4).unwrap();
        let r = opts.shard_ranges();
        assert_eq!(r.first().unwrap().0, 0);
        assert_eq!(r.last().unwrap().1, 10);
        assert!(r.windows(2).all(|w| w[0].1 == w[1].0));
        let many = SimOptions::new(3, 0).unwrap().with_shards(8).unwrap();
        assert_eq!(many.shard_ranges().len(), 3);
    }

    #[test]
    fn slot_streams_ignore_sharding() {
        let run = |shards| {
            let opts = SimOptions::new(1000, 9).unwrap().with_shards(shards).unwrap();
            run_slots(&opts, 7, Sum::default, |rng, acc| acc.0.push(rng.random::<f64>()))
        };
        let one = run(1);
        let many = run(7);
        assert_eq!(one.0.count(), many.0.count());
        assert!((one.0.mean() - many.0.mean()).abs() <= 1e-12);
        assert_eq!(run(7).0, many.0);
    }

    #[test]
    fn categorical_skips_empty_entries() {
        let c = Categorical::new(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = [0usize; 5];
        for _ in 0..10_000 {
            hits[c.sample(&mut rng)] += 1;
        }
        assert_eq!(hits[0] + hits[2] + hits[4], 0);
        assert!(hits[1] > 4500 && hits[3] > 4500);
    }
}
