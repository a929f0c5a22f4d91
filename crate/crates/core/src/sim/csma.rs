use rand::Rng;
use serde::Serialize;

use super::{run_slots, Accumulator, Categorical, SimEstimate, SimOptions, Welford};
use crate::channel::ChannelSet;
use crate::csma::DetectorModel;
use crate::error::{Error, Result};
use crate::scheme::SensingScheme;

const STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsmaEstimates {
    pub throughput: SimEstimate,
    /// Throughput divided by the residual capacity.
    pub utilized_fraction: SimEstimate,
    /// Per channel: probability that it is busy and at least one user
    /// accesses it.
    pub collision: Vec<SimEstimate>,
}

struct Acc {
    throughput: Welford,
    collision: Vec<Welford>,
    accessors: Vec<u32>,
}

impl Accumulator for Acc {
    fn merge(&mut self, other: Self) {
        self.throughput.merge(&other.throughput);
        for (a, b) in self.collision.iter_mut().zip(&other.collision) {
            a.merge(b);
        }
    }
}

/// CSMA/CA contention with a noisy detector. Contention among the users
/// that access the same channel always produces exactly one winner, so the
/// channel is used whenever it has an accessor; the winner's identity does
/// not affect any reported metric and is not drawn.
pub fn simulate_csma(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    m: u32,
    det: &DetectorModel,
    opts: &SimOptions,
) -> Result<CsmaEstimates> {
    if scheme.n() != cs.n() {
        return Err(Error::Dimension(format!(
            "scheme over {} channels, channel set has {}",
            scheme.n(),
            cs.n()
        )));
    }
    let catalog = scheme.catalog();
    let picker = Categorical::new(scheme.probs());
    let rates = cs.rates();
    let thetas = cs.thetas();
    let n = cs.n();
    let acc = run_slots(
        opts,
        STREAM,
        || Acc {
            throughput: Welford::default(),
            collision: vec![Welford::default(); n],
            accessors: vec![0; n],
        },
        |rng, acc| {
            let busy: Vec<bool> = thetas.iter().map(|&t| rng.random::<f64>() < t).collect();
            acc.accessors.iter_mut().for_each(|c| *c = 0);
            for _ in 0..m {
                for &j in catalog.group(picker.sample(rng)) {
                    let looks_idle = rng.random::<f64>() < if busy[j] { det.alpha } else { det.beta };
                    if looks_idle && rng.random::<f64>() < det.f0 {
                        acc.accessors[j] += 1;
                    }
                }
            }
            let mut total = 0.0;
            for j in 0..n {
                let used = acc.accessors[j] > 0;
                if used && !busy[j] {
                    total += rates[j];
                }
                acc.collision[j].push(if used && busy[j] { 1.0 } else { 0.0 });
            }
            acc.throughput.push(total);
        },
    );
    let throughput = acc.throughput.estimate("csma_throughput", opts.seed);
    let c_t = cs.residual_capacity();
    let utilized_fraction = SimEstimate {
        mean: if c_t > 0.0 { throughput.mean / c_t } else { 0.0 },
        std_error: if c_t > 0.0 { throughput.std_error / c_t } else { 0.0 },
        label: "utilized_fraction".into(),
        ..throughput.clone()
    };
    let collision = acc
        .collision
        .iter()
        .enumerate()
        .map(|(j, w)| w.estimate(format!("collision[{j}]"), opts.seed))
        .collect();
    Ok(CsmaEstimates {
        throughput,
        utilized_fraction,
        collision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csma::{collision_probability_any_access, csma_throughput};
    use crate::scheme::GroupCatalog;
    use std::sync::Arc;

    #[test]
    fn lone_idle_channel_is_always_used() {
        let cs = ChannelSet::new(vec![2.5], vec![0.0], 1.0).unwrap();
        let s = SensingScheme::single(vec![1.0]).unwrap();
        let e = simulate_csma(&cs, &s, 2, &DetectorModel::perfect(), &SimOptions::new(1000, 3).unwrap()).unwrap();
        assert_eq!((e.throughput.mean, e.throughput.std_error), (2.5, 0.0));
        assert_eq!(e.collision[0].mean, 0.0);
    }

    #[test]
    fn matches_analytic_throughput_and_collisions() {
        let cs = ChannelSet::new(vec![1.0, 1.5, 0.8, 1.2], vec![0.3, 0.5, 0.2, 0.6], 1.0).unwrap();
        let cat = Arc::new(GroupCatalog::enumerate(4, 2).unwrap());
        let s = SensingScheme::new(cat, vec![0.3, 0.1, 0.2, 0.15, 0.15, 0.1]).unwrap();
        let opts = SimOptions::new(60_000, 21).unwrap().with_shards(6).unwrap();
        let e = simulate_csma(&cs, &s, 3, &DetectorModel::perfect(), &opts).unwrap();
        assert!(e.throughput.within(csma_throughput(&cs, &s, 3).unwrap(), 4.0), "{e:?}");
        assert!(e.collision.iter().all(|c| c.mean == 0.0));

        let det = DetectorModel::new(0.2, 0.8, 0.7).unwrap();
        let e = simulate_csma(&cs, &s, 3, &det, &opts).unwrap();
        for j in 0..4 {
            let want = collision_probability_any_access(&cs, &s, 3, &det, j).unwrap();
            assert!(e.collision[j].within(want, 4.0), "channel {j}: {:?} vs {want}", e.collision[j]);
        }
    }
}
