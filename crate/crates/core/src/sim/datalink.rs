use rand::Rng;

use super::{run_slots, Accumulator, Categorical, SimEstimate, SimOptions, Welford};
use crate::aloha::AlohaParams;
use crate::channel::ChannelSet;
use crate::error::Result;
use crate::scheme::SensingScheme;

const STREAM: u64 = 1;

struct Acc {
    throughput: Welford,
    counts: Vec<u32>,
}

impl Accumulator for Acc {
    fn merge(&mut self, other: Self) {
        self.throughput.merge(&other.throughput);
    }
}

/// Slotted ALOHA without spatial structure: a user earns `C_j` when its
/// channel is idle and nobody else chose it.
pub fn simulate_aloha_datalink(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
    opts: &SimOptions,
) -> Result<SimEstimate> {
    let (_, probs) = crate::aloha::single_channel_inputs(cs, scheme)?;
    let picker = Categorical::new(probs);
    let rates = cs.rates();
    let thetas = cs.thetas();
    let n = cs.n();
    let acc = run_slots(
        opts,
        STREAM,
        || Acc {
            throughput: Welford::default(),
            counts: vec![0; n],
        },
        |rng, acc| {
            let busy: Vec<bool> = thetas.iter().map(|&t| rng.random::<f64>() < t).collect();
            acc.counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..params.m {
                if rng.random::<f64>() < params.q {
                    acc.counts[picker.sample(rng)] += 1;
                }
            }
            let total: f64 = (0..n)
                .filter(|&j| !busy[j] && acc.counts[j] == 1)
                .map(|j| rates[j])
                .sum();
            acc.throughput.push(total);
        },
    );
    Ok(acc.throughput.estimate("aloha_throughput", opts.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aloha::network_throughput;

    #[test]
    fn silent_users_earn_nothing() {
        let cs = ChannelSet::symmetric(3, 1.0, 0.2).unwrap();
        let s = SensingScheme::single(vec![0.2, 0.3, 0.5]).unwrap();
        let e = simulate_aloha_datalink(&cs, &s, AlohaParams::new(5, 0.0).unwrap(), &SimOptions::new(500, 1).unwrap()).unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn two_users_two_idle_channels() {
        let cs = ChannelSet::symmetric(2, 1.0, 0.0).unwrap();
        let s = SensingScheme::single(vec![0.5, 0.5]).unwrap();
        let p = AlohaParams::new(2, 1.0).unwrap();
        let e = simulate_aloha_datalink(&cs, &s, p, &SimOptions::new(100_000, 5).unwrap().with_shards(4).unwrap()).unwrap();
        assert!(e.within(1.0, 3.0), "{e:?}");
        assert!(e.within(network_throughput(&cs, &s, p).unwrap(), 3.0));
    }

    #[test]
    fn repeat_runs_are_identical() {
        let cs = ChannelSet::new(vec![1.0, 2.0], vec![0.3, 0.6], 1.5).unwrap();
        let s = SensingScheme::single(vec![0.7, 0.3]).unwrap();
        let p = AlohaParams::new(4, 0.5).unwrap();
        let o = SimOptions::new(2000, 11).unwrap().with_shards(3).unwrap();
        assert_eq!(
            simulate_aloha_datalink(&cs, &s, p, &o).unwrap(),
            simulate_aloha_datalink(&cs, &s, p, &o).unwrap()
        );
    }
}
