use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::{run_slots, Accumulator, Categorical, RatioAccumulator, SimEstimate, SimOptions, Welford};
use crate::aloha::AlohaParams;
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::scheme::SensingScheme;
use crate::spatial::SpatialConfig;

const STREAM: u64 = 3;

/// Largest contender count with its own conditional success estimate.
pub const SUCCESS_K_MAX: usize = 8;

/// Cell model instance simulated on a square torus of area `cfg.cell_area`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialScenario {
    pub cfg: SpatialConfig,
    pub cs: ChannelSet,
    pub scheme: SensingScheme,
    pub params: AlohaParams,
}

impl SpatialScenario {
    pub fn new(cfg: SpatialConfig, cs: ChannelSet, scheme: SensingScheme, params: AlohaParams) -> Result<Self> {
        cfg.validate()?;
        crate::aloha::single_channel_inputs(&cs, &scheme)?;
        let sc = SpatialScenario { cfg, cs, scheme, params };
        let half = 0.5 * sc.side();
        let reach = sc.cfg.detection_radius().max(sc.cfg.r_i_s).max(sc.cfg.r_i_p);
        if reach > half {
            return Err(Error::param(
                "cell_area",
                format!("torus half-side {half} is shorter than the largest sensing or interference radius {reach}"),
            ));
        }
        Ok(sc)
    }

    /// Side length of the torus.
    pub fn side(&self) -> f64 {
        self.cfg.cell_area.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialEstimates {
    /// Sum of `C_j` over successful secondary links per slot.
    pub throughput: SimEstimate,
    /// Per channel: transmitting secondaries with a primary receiver inside
    /// their interference disc, per slot.
    pub collision: Vec<SimEstimate>,
    /// Total collision events over the run.
    pub collision_events: u64,
    /// Per channel: fraction of secondary positions with no primary
    /// transmitter within the detection radius.
    pub void: Vec<SimEstimate>,
    /// Per channel: fraction of secondary positions with no primary
    /// transmitter within the detection radius among those with a primary
    /// receiver inside the interference disc.
    pub p_cc: Vec<Option<SimEstimate>>,
    /// Success probability of an active user given `k` active users on its
    /// channel, for `k = 1..=SUCCESS_K_MAX` (index `k - 1`).
    pub success_by_k: Vec<Option<SimEstimate>>,
    /// Success probability of an active user.
    pub success_rate: Option<SimEstimate>,
}

#[derive(Clone, Copy)]
struct Point {
    x: f64,
    y: f64,
}

struct Torus {
    side: f64,
}

impl Torus {
    fn wrap(&self, x: f64, y: f64) -> Point {
        Point {
            x: x.rem_euclid(self.side),
            y: y.rem_euclid(self.side),
        }
    }

    fn dist2(&self, a: Point, b: Point) -> f64 {
        let fold = |d: f64| {
            let d = d.abs();
            d.min(self.side - d)
        };
        let (dx, dy) = (fold(a.x - b.x), fold(a.y - b.y));
        dx * dx + dy * dy
    }

    fn uniform(&self, rng: &mut impl Rng) -> Point {
        Point {
            x: rng.random::<f64>() * self.side,
            y: rng.random::<f64>() * self.side,
        }
    }
}

struct Acc {
    throughput: Welford,
    collision: Vec<Welford>,
    events: u64,
    void: Vec<Welford>,
    p_cc: Vec<RatioAccumulator>,
    by_k: Vec<RatioAccumulator>,
    success: RatioAccumulator,
}

impl Accumulator for Acc {
    fn merge(&mut self, o: Self) {
        self.throughput.merge(&o.throughput);
        self.events += o.events;
        for (a, b) in self.collision.iter_mut().zip(&o.collision) {
            a.merge(b);
        }
        for (a, b) in self.void.iter_mut().zip(&o.void) {
            a.merge(b);
        }
        for (a, b) in self.p_cc.iter_mut().zip(&o.p_cc) {
            a.merge(b);
        }
        for (a, b) in self.by_k.iter_mut().zip(&o.by_k) {
            a.merge(b);
        }
        self.success.merge(&o.success);
    }
}

struct User {
    tx: Point,
    rx: Point,
    channel: usize,
    active: bool,
}

/// Simulates the cell model slot by slot. Primary transmitters of channel
/// `j` form a Poisson field of density `λθ_j`, each with a receiver uniform
/// in its transmission disc. Secondary transmitters are uniform with their
/// receiver at distance `r_r_s`; an active secondary transmits on its chosen
/// channel unless a primary transmitter of that channel lies within `r_d`.
pub fn simulate_spatial(sc: &SpatialScenario, opts: &SimOptions) -> Result<SpatialEstimates> {
    let sc = SpatialScenario::new(sc.cfg, sc.cs.clone(), sc.scheme.clone(), sc.params)?;
    let cfg = sc.cfg;
    let torus = Torus { side: sc.side() };
    let n = sc.cs.n();
    let m = sc.params.m;
    let q = sc.params.q;
    let rates = sc.cs.rates();
    let picker = Categorical::new(sc.scheme.probs());
    let fields: Vec<Option<Poisson<f64>>> = sc
        .cs
        .thetas()
        .iter()
        .map(|&t| {
            let mean = cfg.lambda * t * cfg.cell_area;
            (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"))
        })
        .collect();
    let r_d2 = cfg.detection_radius().powi(2);
    let r_is2 = cfg.r_i_s * cfg.r_i_s;
    let r_ip2 = cfg.r_i_p * cfg.r_i_p;

    let acc = run_slots(
        opts,
        STREAM,
        || Acc {
            throughput: Welford::default(),
            collision: vec![Welford::default(); n],
            events: 0,
            void: vec![Welford::default(); n],
            p_cc: vec![RatioAccumulator::default(); n],
            by_k: vec![RatioAccumulator::default(); SUCCESS_K_MAX],
            success: RatioAccumulator::default(),
        },
        |rng, acc| {
            let users: Vec<User> = (0..m)
                .map(|_| {
                    let tx = torus.uniform(rng);
                    let phi = rng.random::<f64>() * TAU;
                    let rx = torus.wrap(tx.x + cfg.r_r_s * phi.cos(), tx.y + cfg.r_r_s * phi.sin());
                    let channel = picker.sample(rng);
                    let active = rng.random::<f64>() < q;
                    User { tx, rx, channel, active }
                })
                .collect();
            let primaries: Vec<Vec<(Point, Point)>> = fields
                .iter()
                .map(|field| {
                    let count = field.as_ref().map_or(0, |f| f.sample(rng) as usize);
                    (0..count)
                        .map(|_| {
                            let tx = torus.uniform(rng);
                            let r = cfg.r_r_p * rng.random::<f64>().sqrt();
                            let phi = rng.random::<f64>() * TAU;
                            (tx, torus.wrap(tx.x + r * phi.cos(), tx.y + r * phi.sin()))
                        })
                        .collect()
                })
                .collect();

            let mut slot_throughput = 0.0;
            let mut by_k = [(0.0, 0.0); SUCCESS_K_MAX];
            let (mut successes, mut active_total) = (0.0, 0.0);
            for j in 0..n {
                let prim = &primaries[j];
                let mut voids = 0usize;
                let (mut cc_num, mut cc_den) = (0.0, 0.0);
                let mut transmitters = Vec::new();
                let mut contenders = 0usize;
                for (i, u) in users.iter().enumerate() {
                    let void = prim.iter().all(|(t, _)| torus.dist2(u.tx, *t) >= r_d2);
                    let near_rx = prim.iter().any(|(_, r)| torus.dist2(u.tx, *r) < r_is2);
                    voids += void as usize;
                    if near_rx {
                        cc_den += 1.0;
                        cc_num += void as u8 as f64;
                    }
                    if u.active && u.channel == j {
                        contenders += 1;
                        if void {
                            transmitters.push(i);
                        }
                    }
                }
                if m > 0 {
                    acc.void[j].push(voids as f64 / m as f64);
                }
                acc.p_cc[j].push(cc_num, cc_den);

                let collisions = transmitters
                    .iter()
                    .filter(|&&i| prim.iter().any(|(_, r)| torus.dist2(users[i].tx, *r) < r_is2))
                    .count();
                acc.collision[j].push(collisions as f64);
                acc.events += collisions as u64;

                let won = transmitters
                    .iter()
                    .filter(|&&i| {
                        let rx = users[i].rx;
                        prim.iter().all(|(t, _)| torus.dist2(rx, *t) >= r_ip2)
                            && transmitters
                                .iter()
                                .all(|&o| o == i || torus.dist2(rx, users[o].tx) >= r_is2)
                    })
                    .count() as f64;
                slot_throughput += won * rates[j];
                successes += won;
                active_total += contenders as f64;
                if (1..=SUCCESS_K_MAX).contains(&contenders) {
                    by_k[contenders - 1].0 += won;
                    by_k[contenders - 1].1 += contenders as f64;
                }
            }
            acc.throughput.push(slot_throughput);
            acc.success.push(successes, active_total);
            for (a, (num, den)) in acc.by_k.iter_mut().zip(by_k) {
                a.push(num, den);
            }
        },
    );

    let seed = opts.seed;
    Ok(SpatialEstimates {
        throughput: acc.throughput.estimate("cell_throughput", seed),
        collision: acc
            .collision
            .iter()
            .enumerate()
            .map(|(j, w)| w.estimate(format!("collision[{j}]"), seed))
            .collect(),
        collision_events: acc.events,
        void: acc
            .void
            .iter()
            .enumerate()
            .map(|(j, w)| w.estimate(format!("void[{j}]"), seed))
            .collect(),
        p_cc: acc
            .p_cc
            .iter()
            .enumerate()
            .map(|(j, r)| r.estimate(format!("p_cc[{j}]"), seed))
            .collect(),
        success_by_k: acc
            .by_k
            .iter()
            .enumerate()
            .map(|(k, r)| r.estimate(format!("success_k{}", k + 1), seed))
            .collect(),
        success_rate: acc.success.estimate("success_rate", seed),
    })
}
