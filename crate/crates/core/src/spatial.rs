//! Cell model: primaries form a Poisson field of density `λθ_j` per channel,
//! secondaries sense for primary transmitters within a detection radius, and
//! interference is decided by fixed-radius discs.
//!
//! Every probability returned here is clamped to `[0, 1]`. The raw value is
//! kept next to it together with a [`ProbFlag`] so callers can count how
//! often the approximations left the unit interval.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::aloha::{binomial_pmf, single_channel_inputs, AlohaParams};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::geometry::{crescent_area, lens_area, region_area, Disc};
use crate::quad::{integrate, integrate_vec, QuadOptions, DEFAULT_MAX_SUBDIVISIONS};
use crate::scheme::SensingScheme;

/// Absolute tolerance of the annulus-weight integral.
pub const ANNULUS_TOLERANCE: f64 = 1e-8;

/// Absolute tolerance of the detection-radius bisection.
pub const RADIUS_TOLERANCE: f64 = 1e-6;

/// Target absolute error of each averaged conditional probability.
pub const SUCCESS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Primary transmitter density per unit area (before thinning by `θ_j`).
    pub lambda: f64,
    pub r_r_p: f64,
    pub r_r_s: f64,
    pub r_i_p: f64,
    pub r_i_s: f64,
    /// Detection radius. Values above `r_i_s + r_r_p` act as that bound.
    pub r_d: f64,
    pub cell_area: f64,
    /// Collision budget.
    pub xi: f64,
}

impl SpatialConfig {
    /// Equal transmission and interference radii, cell area chosen so that
    /// the interference-to-cell area ratio is `gamma`, detection radius 0.
    pub fn symmetric(radius: f64, lambda: f64, xi: f64, gamma: f64) -> Result<Self> {
        let cfg = SpatialConfig {
            lambda,
            r_r_p: radius,
            r_r_s: radius,
            r_i_p: radius,
            r_i_s: radius,
            r_d: 0.0,
            cell_area: Self::cell_area_for_gamma(radius, gamma)?,
            xi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cell_area_for_gamma(r_i_s: f64, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param("gamma", format!("{gamma} outside (0, 1)")));
        }
        if !(r_i_s > 0.0 && r_i_s.is_finite()) {
            return Err(Error::param("r_i_s", format!("{r_i_s} must be positive")));
        }
        Ok(PI * r_i_s * r_i_s / gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("r_r_p", self.r_r_p),
            ("r_r_s", self.r_r_s),
            ("r_i_p", self.r_i_p),
            ("r_i_s", self.r_i_s),
            ("cell_area", self.cell_area),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive and finite")));
            }
        }
        if !(self.r_d >= 0.0 && self.r_d.is_finite()) {
            return Err(Error::param("r_d", format!("{} must be nonnegative", self.r_d)));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::param("xi", format!("{} outside [0, 1]", self.xi)));
        }
        let g = self.gamma();
        if g >= 1.0 {
            return Err(Error::param(
                "cell_area",
                format!("interference disc covers the whole cell (gamma = {g})"),
            ));
        }
        Ok(())
    }

    /// Ratio of the secondary interference disc to the cell area.
    pub fn gamma(&self) -> f64 {
        PI * self.r_i_s * self.r_i_s / self.cell_area
    }

    /// Radius at which no undetected primary receiver can be interfered with.
    pub fn max_detection_radius(&self) -> f64 {
        self.r_i_s + self.r_r_p
    }

    /// `r_d` clamped to `[0, r_i_s + r_r_p]`.
    pub fn detection_radius(&self) -> f64 {
        self.r_d.clamp(0.0, self.max_detection_radius())
    }

    pub fn with_detection_radius(mut self, r_d: f64) -> Self {
        self.r_d = r_d.clamp(0.0, self.max_detection_radius());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbFlag {
    Ok,
    Clamped,
    /// The conditioning event has probability zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaggedProb {
    pub value: f64,
    pub raw: f64,
    pub flag: ProbFlag,
}

impl FlaggedProb {
    fn clamp(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        FlaggedProb {
            value,
            raw,
            flag: if value == raw { ProbFlag::Ok } else { ProbFlag::Clamped },
        }
    }

    fn degenerate() -> Self {
        FlaggedProb {
            value: 0.0,
            raw: 0.0,
            flag: ProbFlag::Degenerate,
        }
    }

    pub fn is_clamped(&self) -> bool {
        self.flag == ProbFlag::Clamped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusWeight {
    /// `(r_i_s + r_r_p)² − r_d²`.
    pub s_tilde: f64,
    /// Average, over transmitters in the annulus, of the probability that
    /// their receiver lies outside the interference disc.
    pub s_bar: f64,
}

pub fn annulus_weight(cfg: &SpatialConfig) -> Result<AnnulusWeight> {
    cfg.validate()?;
    let outer = cfg.max_detection_radius();
    let rd = cfg.detection_radius();
    let s_tilde = (outer * outer - rd * rd).max(0.0);
    if s_tilde == 0.0 {
        return Ok(AnnulusWeight { s_tilde, s_bar: 1.0 });
    }
    let disc = PI * cfg.r_r_p * cfg.r_r_p;
    let opts = QuadOptions {
        abs_tol: ANNULUS_TOLERANCE * s_tilde / 2.0,
        max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
    };
    let q = integrate(
        |r| crescent_area(cfg.r_r_p, cfg.r_i_s, r) / disc * r,
        rd,
        outer,
        &[(cfg.r_r_p - cfg.r_i_s).abs()],
        opts,
    )?;
    Ok(AnnulusWeight {
        s_tilde,
        s_bar: (2.0 * q.value / s_tilde).clamp(0.0, 1.0),
    })
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::param("theta", format!("{theta} outside [0, 1]")))
    }
}

/// Probability that a secondary transmitter misses every primary
/// transmitter within `r_d` although a primary receiver lies within its
/// interference radius.
pub fn p_cc(cfg: &SpatialConfig, theta: f64) -> Result<FlaggedProb> {
    check_theta(theta)?;
    let aw = annulus_weight(cfg)?;
    Ok(p_cc_with(cfg, theta, &aw))
}

/// [`p_cc`] with a precomputed annulus weight for the same radii.
pub fn p_cc_with(cfg: &SpatialConfig, theta: f64, aw: &AnnulusWeight) -> FlaggedProb {
    if theta == 0.0 {
        return FlaggedProb::degenerate();
    }
    let rd = cfg.detection_radius();
    if rd >= cfg.max_detection_radius() {
        return FlaggedProb::clamp(0.0);
    }
    let a = cfg.lambda * theta * PI;
    let num = (-a * rd * rd).exp() * -(-a * aw.s_tilde * (1.0 - aw.s_bar)).exp_m1();
    let den = -(-a * cfg.r_i_s * cfg.r_i_s).exp_m1();
    FlaggedProb::clamp(num / den)
}

/// `M q P_j p_cc(θ_j)`: expected number of collisions the secondaries
/// cause on channel `j` per slot, read as a probability.
pub fn p_collision_channel(
    cfg: &SpatialConfig,
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
    j: usize,
) -> Result<FlaggedProb> {
    let (_, probs) = single_channel_inputs(cs, scheme)?;
    if j >= cs.n() {
        return Err(Error::ChannelIndex { index: j, n: cs.n() });
    }
    let pcc = p_cc(cfg, cs.thetas()[j])?;
    if pcc.flag == ProbFlag::Degenerate {
        return Ok(pcc);
    }
    Ok(FlaggedProb::clamp(params.m as f64 * params.q * probs[j] * pcc.value))
}

/// `Σ_j P_j p_cc(θ_j)` at the configured detection radius.
pub fn collision_load(cfg: &SpatialConfig, cs: &ChannelSet, scheme: &SensingScheme) -> Result<f64> {
    let (_, probs) = single_channel_inputs(cs, scheme)?;
    let aw = annulus_weight(cfg)?;
    Ok(load_with(cfg, cs.thetas(), probs, &aw))
}

fn load_with(cfg: &SpatialConfig, thetas: &[f64], probs: &[f64], aw: &AnnulusWeight) -> f64 {
    thetas
        .iter()
        .zip(probs)
        .map(|(&t, &p)| if p == 0.0 { 0.0 } else { p * p_cc_with(cfg, t, aw).value })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRadius {
    pub r_d: f64,
    /// `Σ_j P_j p_cc` at `r_d`.
    pub load: f64,
    /// `N ξ / (M q)`; infinite when `q = 0`.
    pub budget: f64,
    pub iterations: u32,
}

/// Smallest detection radius meeting the average collision budget
/// `Σ_j P_j p_cc ≤ N ξ / (M q)`. The `r_d` of `cfg` is ignored.
pub fn solve_detection_radius(
    cfg: &SpatialConfig,
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
) -> Result<DetectionRadius> {
    let (_, probs) = single_channel_inputs(cs, scheme)?;
    cfg.validate()?;
    let budget = if params.q == 0.0 {
        f64::INFINITY
    } else {
        cs.n() as f64 * cfg.xi / (params.m as f64 * params.q)
    };
    let load_at = |r: f64| -> Result<f64> {
        let c = cfg.with_detection_radius(r);
        let aw = annulus_weight(&c)?;
        Ok(load_with(&c, cs.thetas(), probs, &aw))
    };
    let zero = load_at(0.0)?;
    if zero <= budget {
        return Ok(DetectionRadius {
            r_d: 0.0,
            load: zero,
            budget,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, cfg.max_detection_radius());
    let mut load_hi = 0.0;
    let mut iterations = 0;
    while hi - lo > RADIUS_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let l = load_at(mid)?;
        if l <= budget {
            hi = mid;
            load_hi = l;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(DetectionRadius {
        r_d: hi,
        load: load_hi,
        budget,
        iterations,
    })
}

/// Conditional probabilities entering the success probability of one
/// channel, all of which depend on `θ` but not on the number of contenders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessTerms {
    pub theta: f64,
    /// Probability of an opportunity at the transmitter and no primary
    /// interferer at the receiver.
    pub head: f64,
    /// Primary-free receiver given one and two secondary interferers.
    pub p3: [f64; 2],
    /// Opportunity at the transmitter given one, two and three or more
    /// secondary interferers.
    pub p4: [f64; 3],
}

impl SuccessTerms {
    /// Success probability with `k` active secondaries on the channel.
    pub fn p_success(&self, k: u32, gamma: f64) -> FlaggedProb {
        if k <= 1 {
            return FlaggedProb::clamp(self.head);
        }
        let n = (k - 1) as f64;
        let miss = 1.0 - gamma;
        let pmf0 = miss.powf(n);
        let pmf1 = n * gamma * miss.powf(n - 1.0);
        let pmf2 = if k >= 3 {
            0.5 * n * (n - 1.0) * gamma * gamma * miss.powf(n - 2.0)
        } else {
            0.0
        };
        let tail = if k >= 4 { (1.0 - pmf0 - pmf1 - pmf2).max(0.0) } else { 0.0 };
        let interfered = pmf1 * self.p3[0] * self.p4[0] + pmf2 * self.p3[1] * self.p4[1] + tail * self.p4[2];
        FlaggedProb::clamp(self.head - interfered)
    }
}

/// Success terms for each entry of `thetas` at the configured detection
/// radius. Equal values are integrated once.
pub fn success_terms(cfg: &SpatialConfig, thetas: &[f64]) -> Result<Vec<SuccessTerms>> {
    cfg.validate()?;
    for &t in thetas {
        check_theta(t)?;
    }
    let mut distinct: Vec<f64> = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    for &t in thetas {
        index.entry(t.to_bits()).or_insert_with(|| {
            distinct.push(t);
            distinct.len() - 1
        });
    }
    let rates: Vec<f64> = distinct.iter().map(|t| cfg.lambda * t).collect();
    let rd = cfg.detection_radius();
    let p3_1 = p3_single(cfg, rd, &rates)?;
    let p3_2 = p3_pair(cfg, rd, &rates)?;
    let p4_1 = p4_single(cfg, rd, &rates)?;
    let near = crescent_area(rd, rd, (cfg.r_i_s / 2.0 - cfg.r_r_s).abs());
    let far = crescent_area(rd, rd, (cfg.r_i_s - cfg.r_r_s).abs());
    let head_area = PI * (rd * rd + cfg.r_i_p * cfg.r_i_p) - lens_area(rd, cfg.r_i_p, cfg.r_r_s);

    let per_distinct: Vec<SuccessTerms> = distinct
        .iter()
        .enumerate()
        .map(|(d, &theta)| {
            let lt = rates[d];
            SuccessTerms {
                theta,
                head: (-lt * head_area).exp(),
                p3: [p3_1[d].clamp(0.0, 1.0), p3_2[d].clamp(0.0, 1.0)],
                p4: [p4_1[d].clamp(0.0, 1.0), (-lt * near).exp(), (-lt * far).exp()],
            }
        })
        .collect();
    Ok(thetas.iter().map(|t| per_distinct[index[&t.to_bits()]]).collect())
}

pub fn p_success(cfg: &SpatialConfig, theta: f64, k: u32) -> Result<FlaggedProb> {
    if k == 0 {
        return Err(Error::param("k", "at least one active secondary is required"));
    }
    let terms = success_terms(cfg, &[theta])?;
    Ok(terms[0].p_success(k, cfg.gamma()))
}

fn opts(tol: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: tol,
        max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
    }
}

fn fill_exp(out: &mut [f64], rates: &[f64], area: f64) {
    for (o, lt) in out.iter_mut().zip(rates) {
        *o = (-lt * area).exp();
    }
}

// Radii are rescaled by r_i_s so every integral runs over unit intervals.
fn p3_single(cfg: &SpatialConfig, rd: f64, rates: &[f64]) -> Result<Vec<f64>> {
    let (rs, rp) = (cfg.r_i_s, cfg.r_i_p);
    let breaks = [(rp - rd).abs() / rs, (rp + rd) / rs];
    integrate_vec(
        |u, out| {
            fill_exp(out, rates, crescent_area(rp, rd, u * rs));
            for o in out.iter_mut() {
                *o *= 2.0 * u;
            }
        },
        rates.len(),
        0.0,
        1.0,
        &breaks,
        opts(SUCCESS_TOLERANCE / 2.0),
    )
}

fn p3_pair(cfg: &SpatialConfig, rd: f64, rates: &[f64]) -> Result<Vec<f64>> {
    let (rs, rp) = (cfg.r_i_s, cfg.r_i_p);
    let dim = rates.len();
    let centre = Disc::new(0.0, 0.0, rp);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
    };
    // The integrand is symmetric in (r1, r2), so integrate r2 ≤ r1 twice.
    let result = integrate_vec(
        |u1, out| {
            if rd >= rp + u1 * rs {
                // the first detection disc already covers the receiver disc
                out.iter_mut().for_each(|o| *o = 8.0 * u1 * u1 * u1 / 2.0);
                return;
            }
            let first = Disc::new(u1 * rs, 0.0, rd);
            let middle = integrate_vec(
                |u2, mid| {
                    let inner = integrate_vec(
                        |v, o| {
                            let second = Disc::polar(u2 * rs, PI * v, rd);
                            fill_exp(o, rates, region_area(&[centre], &[first, second]));
                        },
                        dim,
                        0.0,
                        1.0,
                        &[],
                        opts(SUCCESS_TOLERANCE / 3.0),
                    );
                    match inner {
                        Ok(vals) => mid.iter_mut().zip(vals).for_each(|(m, v)| *m = u2 * v),
                        Err(e) => {
                            record(e);
                            mid.iter_mut().for_each(|m| *m = 0.0);
                        }
                    }
                },
                dim,
                0.0,
                u1,
                &[],
                opts(SUCCESS_TOLERANCE / 12.0),
            );
            match middle {
                Ok(vals) => out.iter_mut().zip(vals).for_each(|(o, v)| *o = 8.0 * u1 * v),
                Err(e) => {
                    record(e);
                    out.iter_mut().for_each(|o| *o = 0.0);
                }
            }
        },
        dim,
        0.0,
        1.0,
        &[],
        opts(SUCCESS_TOLERANCE / 3.0),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result
}

fn p4_single(cfg: &SpatialConfig, rd: f64, rates: &[f64]) -> Result<Vec<f64>> {
    if rd == 0.0 {
        return Ok(vec![1.0; rates.len()]);
    }
    let rs = cfg.r_i_s;
    let dim = rates.len();
    let own = Disc::new(-cfg.r_r_s, 0.0, rd);
    let receiver = Disc::new(0.0, 0.0, cfg.r_i_p);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let result = integrate_vec(
        |u, out| {
            let inner = integrate_vec(
                |v, o| {
                    let other = Disc::polar(u * rs, PI * v, rd);
                    fill_exp(o, rates, region_area(&[own], &[receiver, other]));
                },
                dim,
                0.0,
                1.0,
                &[],
                opts(SUCCESS_TOLERANCE / 4.0),
            );
            match inner {
                Ok(vals) => out.iter_mut().zip(vals).for_each(|(o, v)| *o = 2.0 * u * v),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    out.iter_mut().for_each(|o| *o = 0.0);
                }
            }
        },
        dim,
        0.0,
        1.0,
        &[],
        opts(SUCCESS_TOLERANCE / 2.0),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result
}

/// Throughput of the double binomial mixture
/// `Σ_l Bin(l; M, q) · l · Σ_j C_j Σ_K Bin(K; l, P_j) s(j, K)` for an
/// arbitrary success law `s`.
pub fn double_mixture(rates: &[f64], probs: &[f64], params: AlohaParams, success: impl Fn(usize, u32) -> f64) -> f64 {
    let outer = binomial_pmf(params.m, params.q);
    let mut total = 0.0;
    for (l, wl) in outer.iter().enumerate().skip(1) {
        if *wl == 0.0 {
            continue;
        }
        let mut per_user = 0.0;
        for (j, (&c, &p)) in rates.iter().zip(probs).enumerate() {
            if p == 0.0 || c == 0.0 {
                continue;
            }
            let inner = binomial_pmf(l as u32, p);
            per_user += c * inner
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, w)| w * success(j, k as u32))
                .sum::<f64>();
        }
        total += wl * l as f64 * per_user;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellThroughput {
    pub value: f64,
    /// Number of `(channel class, K)` success probabilities that had to be
    /// clamped into `[0, 1]`.
    pub clamped: usize,
}

#[derive(Debug, Clone)]
struct ChannelClass {
    prob: f64,
    rate: f64,
    terms: SuccessTerms,
}

/// Precomputed cell model at a fixed detection radius. Channels sharing
/// `(P_j, θ_j)` are merged.
#[derive(Debug, Clone)]
pub struct CellModel {
    gamma: f64,
    r_d: f64,
    classes: Vec<ChannelClass>,
}

/// Per-user throughput given `l` active users, for `l = 0..=l_max`.
#[derive(Debug, Clone)]
pub struct ConditionalThroughput {
    pub values: Vec<f64>,
    pub clamped: usize,
}

impl CellModel {
    pub fn new(cfg: &SpatialConfig, cs: &ChannelSet, scheme: &SensingScheme) -> Result<Self> {
        let (_, probs) = single_channel_inputs(cs, scheme)?;
        let terms = success_terms(cfg, cs.thetas())?;
        let mut classes: Vec<ChannelClass> = Vec::new();
        for j in 0..cs.n() {
            if probs[j] == 0.0 {
                continue;
            }
            match classes
                .iter_mut()
                .find(|c| c.prob == probs[j] && c.terms.theta == cs.thetas()[j])
            {
                Some(c) => c.rate += cs.rate(j),
                None => classes.push(ChannelClass {
                    prob: probs[j],
                    rate: cs.rate(j),
                    terms: terms[j],
                }),
            }
        }
        Ok(CellModel {
            gamma: cfg.gamma(),
            r_d: cfg.detection_radius(),
            classes,
        })
    }

    pub fn detection_radius(&self) -> f64 {
        self.r_d
    }

    pub fn conditional(&self, l_max: u32) -> ConditionalThroughput {
        self.conditional_with(l_max, false)
    }

    /// Per-user throughput given `l` active users when the user is tagged:
    /// it picks channel `j` with probability `P_j` and meets
    /// `Bin(l − 1, P_j)` other users there.
    pub fn conditional_tagged(&self, l_max: u32) -> ConditionalThroughput {
        self.conditional_with(l_max, true)
    }

    fn conditional_with(&self, l_max: u32, tagged: bool) -> ConditionalThroughput {
        let mut values = vec![0.0; l_max as usize + 1];
        let mut clamped = 0;
        for class in &self.classes {
            let ps: Vec<f64> = (0..=l_max)
                .map(|k| {
                    if k == 0 {
                        return 0.0;
                    }
                    let p = class.terms.p_success(k, self.gamma);
                    if p.is_clamped() {
                        clamped += 1;
                    }
                    p.value
                })
                .collect();
            for l in 1..=l_max {
                let g: f64 = if tagged {
                    let pmf = binomial_pmf(l - 1, class.prob);
                    class.prob * pmf.iter().zip(&ps[1..]).map(|(w, s)| w * s).sum::<f64>()
                } else {
                    let pmf = binomial_pmf(l, class.prob);
                    pmf.iter().zip(&ps).skip(1).map(|(w, s)| w * s).sum()
                };
                values[l as usize] += class.rate * g;
            }
        }
        ConditionalThroughput { values, clamped }
    }

    pub fn throughput(&self, params: AlohaParams) -> CellThroughput {
        let table = self.conditional(params.m);
        CellThroughput {
            value: mix(&table.values, params),
            clamped: table.clamped,
        }
    }

    /// Like [`CellModel::throughput`] with the tagged-user conditional. This
    /// counts each successful link once and is what a slot simulation
    /// measures; the untagged mixture weights every user by the number of
    /// contenders on its channel.
    pub fn throughput_tagged(&self, params: AlohaParams) -> CellThroughput {
        let table = self.conditional_tagged(params.m);
        CellThroughput {
            value: mix(&table.values, params),
            clamped: table.clamped,
        }
    }

    /// Throughput for every population in `ms`, sharing one conditional table.
    pub fn sweep(&self, q: f64, ms: &[u32]) -> Result<Vec<CellThroughput>> {
        self.sweep_with(q, ms, false)
    }

    /// Tagged-user counterpart of [`CellModel::sweep`].
    pub fn sweep_tagged(&self, q: f64, ms: &[u32]) -> Result<Vec<CellThroughput>> {
        self.sweep_with(q, ms, true)
    }

    fn sweep_with(&self, q: f64, ms: &[u32], tagged: bool) -> Result<Vec<CellThroughput>> {
        let l_max = ms.iter().copied().max().unwrap_or(0);
        let table = self.conditional_with(l_max, tagged);
        ms.iter()
            .map(|&m| {
                let params = AlohaParams::new(m, q)?;
                Ok(CellThroughput {
                    value: mix(&table.values, params),
                    clamped: table.clamped,
                })
            })
            .collect()
    }
}

fn mix(conditional: &[f64], params: AlohaParams) -> f64 {
    binomial_pmf(params.m, params.q)
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, w)| w * l as f64 * conditional[l])
        .sum()
}

/// Expected secondary throughput of the cell model at the configured
/// detection radius.
pub fn cell_network_throughput(
    cfg: &SpatialConfig,
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
) -> Result<CellThroughput> {
    Ok(CellModel::new(cfg, cs, scheme)?.throughput(params))
}

/// How the detection radius is chosen at each point of a population sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionPolicy {
    /// Use the radius in the configuration.
    Fixed,
    /// Re-solve the collision budget for every population.
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSweepPoint {
    pub m: u32,
    pub r_d: f64,
    pub throughput: f64,
    pub clamped: usize,
}

pub fn cell_sweep(
    cfg: &SpatialConfig,
    cs: &ChannelSet,
    scheme: &SensingScheme,
    q: f64,
    ms: &[u32],
    policy: DetectionPolicy,
) -> Result<Vec<CellSweepPoint>> {
    match policy {
        DetectionPolicy::Fixed => {
            let model = CellModel::new(cfg, cs, scheme)?;
            let values = model.sweep(q, ms)?;
            Ok(ms
                .iter()
                .zip(values)
                .map(|(&m, v)| CellSweepPoint {
                    m,
                    r_d: model.detection_radius(),
                    throughput: v.value,
                    clamped: v.clamped,
                })
                .collect())
        }
        DetectionPolicy::Solve => {
            let eval = |&m: &u32| -> Result<CellSweepPoint> {
                let params = AlohaParams::new(m, q)?;
                let r = solve_detection_radius(cfg, cs, scheme, params)?;
                let model = CellModel::new(&cfg.with_detection_radius(r.r_d), cs, scheme)?;
                let t = model.throughput(params);
                Ok(CellSweepPoint {
                    m,
                    r_d: r.r_d,
                    throughput: t.value,
                    clamped: t.clamped,
                })
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                ms.par_iter().map(eval).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                ms.iter().map(eval).collect()
            }
        }
    }
}

fn check_simplified(n: usize, q: f64, gamma: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "at least one channel is required"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", format!("{q} outside [0, 1]")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("{gamma} outside (0, 1)")));
    }
    Ok(())
}

/// Closed-form total throughput for identical channels, equal radii `R`
/// and detection radius `2R`.
#[allow(clippy::too_many_arguments)]
pub fn simplified_cell_throughput(
    radius: f64,
    lambda: f64,
    theta: f64,
    n: usize,
    m: u32,
    q: f64,
    gamma: f64,
    rate: f64,
) -> Result<f64> {
    check_simplified(n, q, gamma)?;
    check_theta(theta)?;
    let nf = n as f64;
    let m1 = m as f64 - 1.0;
    let bracket = (1.0 - gamma / nf) * (1.0 - q * gamma / nf).powf(m1) - (1.0 - 1.0 / nf) * (1.0 - q / nf).powf(m1);
    Ok((-3.0 * PI * lambda * theta * radius * radius).exp() * rate * q / (1.0 - gamma) * nf * m as f64 * bracket)
}

/// Stationary point `−1 / ln(1 − qγ/N)` of the dominant term of
/// [`simplified_cell_throughput`].
pub fn simplified_optimal_m(n: usize, q: f64, gamma: f64) -> Result<f64> {
    check_simplified(n, q, gamma)?;
    if q == 0.0 {
        return Err(Error::param("q", "must be positive"));
    }
    Ok(-1.0 / (-q * gamma / n as f64).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cfg(r_d: f64) -> SpatialConfig {
        SpatialConfig::symmetric(1.0, 1.0 / 2.25, 0.2, 0.1)
            .unwrap()
            .with_detection_radius(r_d)
    }

    fn uniform_in_disc(rng: &mut ChaCha8Rng, r: f64) -> (f64, f64) {
        let rho = r * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        (rho * phi.cos(), rho * phi.sin())
    }

    #[test]
    fn annulus_weight_edges() {
        let full = annulus_weight(&unit_cfg(2.0)).unwrap();
        assert_eq!(full.s_tilde, 0.0);
        assert_eq!(full.s_bar, 1.0);
        let open = annulus_weight(&unit_cfg(0.0)).unwrap();
        assert_relative_eq!(open.s_tilde, 4.0);
        assert!(open.s_bar > 0.0 && open.s_bar < 1.0);
    }

    #[test]
    fn annulus_weight_matches_placement_monte_carlo() {
        let cfg = unit_cfg(1.0);
        let aw = annulus_weight(&cfg).unwrap();
        // transmitter uniform in the annulus, receiver uniform in its disc
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let (lo, hi) = (1.0f64, 2.0f64);
        let hits = (0..n)
            .filter(|_| {
                let r = (lo * lo + rng.random::<f64>() * (hi * hi - lo * lo)).sqrt();
                let (dx, dy) = uniform_in_disc(&mut rng, 1.0);
                (r + dx).hypot(dy) > 1.0
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - aw.s_bar).abs() < 3.5 * se, "{p} vs {}", aw.s_bar);
    }

    #[test]
    fn p_cc_boundary_and_substitution() {
        assert_eq!(p_cc(&unit_cfg(2.0), 0.5).unwrap().value, 0.0);
        assert_eq!(p_cc(&unit_cfg(5.0), 0.5).unwrap().value, 0.0);
        let cfg = unit_cfg(0.0);
        let aw = annulus_weight(&cfg).unwrap();
        let a = cfg.lambda * 0.5 * PI;
        let expected = (1.0 - (-a * aw.s_tilde * (1.0 - aw.s_bar)).exp()) / (1.0 - (-a).exp());
        assert_relative_eq!(p_cc(&cfg, 0.5).unwrap().value, expected, epsilon = 1e-14);
        assert_eq!(p_cc(&cfg, 0.0).unwrap().flag, ProbFlag::Degenerate);
        assert!(p_cc(&cfg, 1.5).is_err());
    }

    #[test]
    fn p_cc_non_increasing_in_detection_radius() {
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let v = p_cc(&unit_cfg(i as f64 * 0.05), 0.3).unwrap().value;
            assert!(v <= prev + 1e-12);
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn collision_is_linear_in_population() {
        let cs = ChannelSet::symmetric(10, 1.0, 0.4).unwrap();
        let scheme = SensingScheme::single(vec![0.1; 10]).unwrap();
        let cfg = unit_cfg(1.0);
        let pcc = p_cc(&cfg, 0.4).unwrap().value;
        let p = p_collision_channel(&cfg, &cs, &scheme, AlohaParams::new(10, 0.3).unwrap(), 2).unwrap();
        assert_relative_eq!(p.value, 10.0 * 0.3 * 0.1 * pcc, epsilon = 1e-15);
        let zero = p_collision_channel(&cfg, &cs, &scheme, AlohaParams::new(10, 0.0).unwrap(), 2).unwrap();
        assert_eq!(zero.value, 0.0);
        let big = p_collision_channel(&unit_cfg(0.0), &cs, &scheme, AlohaParams::new(5000, 1.0).unwrap(), 0).unwrap();
        assert!(big.is_clamped() && big.value == 1.0);
    }

    #[test]
    fn detection_radius_edges_and_monotonicity() {
        let cs = ChannelSet::symmetric(20, 1.0, 0.15).unwrap();
        let scheme = SensingScheme::single(vec![0.05; 20]).unwrap();
        let mut cfg = unit_cfg(0.0);
        let small = solve_detection_radius(&cfg, &cs, &scheme, AlohaParams::new(2, 0.3).unwrap()).unwrap();
        assert_eq!(small.r_d, 0.0);
        let mut prev = 0.0;
        for m in [5, 10, 20, 40, 80, 160] {
            let r = solve_detection_radius(&cfg, &cs, &scheme, AlohaParams::new(m, 0.3).unwrap()).unwrap();
            assert!(r.r_d >= prev - 1e-12);
            assert!(r.load <= r.budget);
            prev = r.r_d;
        }
        cfg.xi = 0.0;
        let strict = solve_detection_radius(&cfg, &cs, &scheme, AlohaParams::new(3, 0.3).unwrap()).unwrap();
        assert_eq!(strict.r_d, 2.0);
    }

    #[test]
    fn single_contender_success_is_head_term() {
        let cfg = unit_cfg(1.2);
        let t = success_terms(&cfg, &[0.3]).unwrap()[0];
        let lt = cfg.lambda * 0.3;
        let area = PI * (1.44 + 1.0) - lens_area(1.2, 1.0, 1.0);
        assert_relative_eq!(t.p_success(1, cfg.gamma()).value, (-lt * area).exp(), epsilon = 1e-15);
    }

    #[test]
    fn error_free_radius_removes_receiver_side_terms() {
        // with r_d = 2R the detection disc of any interferer within R covers
        // the receiver's interference disc
        let cfg = unit_cfg(2.0);
        let t = success_terms(&cfg, &[0.15, 0.6]).unwrap();
        for s in &t {
            assert_relative_eq!(s.p3[0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(s.p3[1], 1.0, epsilon = 1e-9);
            assert_eq!(s.p4[2], 1.0);
            assert_relative_eq!(s.head, (-4.0 * PI * cfg.lambda * s.theta).exp(), epsilon = 1e-14);
        }
    }

    #[test]
    fn pair_term_matches_sampled_average() {
        let mut cfg = unit_cfg(0.8);
        cfg.lambda = 1.0;
        let theta = 0.7;
        let t = success_terms(&cfg, &[theta]).unwrap()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40_000;
        let centre = Disc::new(0.0, 0.0, 1.0);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let r1 = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..PI);
            let a = region_area(&[centre], &[Disc::new(r1, 0.0, 0.8), Disc::polar(r2, phi, 0.8)]);
            let v = (-theta * a).exp();
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - t.p3[1]).abs() < 3.5 * se, "{mean} vs {}", t.p3[1]);

        let own = Disc::new(-1.0, 0.0, 0.8);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let r = rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..PI);
            let a = region_area(&[own], &[centre, Disc::polar(r, phi, 0.8)]);
            let v = (-theta * a).exp();
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - t.p4[0]).abs() < 3.5 * se, "{mean} vs {}", t.p4[0]);
    }

    #[test]
    fn success_is_clamped_not_negative() {
        let cfg = unit_cfg(2.0);
        let t = success_terms(&cfg, &[0.9]).unwrap()[0];
        for k in 1..200 {
            let p = t.p_success(k, 0.3);
            assert!((0.0..=1.0).contains(&p.value));
        }
    }

    #[test]
    fn cell_throughput_reductions() {
        let cs = ChannelSet::new(vec![1.0, 2.0, 0.5], vec![0.1, 0.5, 0.3], 1.0).unwrap();
        let scheme = SensingScheme::single(vec![0.5, 0.3, 0.2]).unwrap();
        let cfg = unit_cfg(0.9);
        let terms = success_terms(&cfg, cs.thetas()).unwrap();
        let zero = cell_network_throughput(&cfg, &cs, &scheme, AlohaParams::new(7, 0.0).unwrap()).unwrap();
        assert_eq!(zero.value, 0.0);
        let one = cell_network_throughput(&cfg, &cs, &scheme, AlohaParams::new(1, 0.4).unwrap()).unwrap();
        let expected: f64 = (0..3)
            .map(|j| scheme.probs()[j] * terms[j].p_success(1, cfg.gamma()).value * cs.rate(j))
            .sum::<f64>()
            * 0.4;
        assert_relative_eq!(one.value, expected, epsilon = 1e-14);
        // table-based evaluation agrees with the direct double mixture
        let params = AlohaParams::new(12, 0.35).unwrap();
        let direct = double_mixture(&cs.rates(), scheme.probs(), params, |j, k| {
            terms[j].p_success(k, cfg.gamma()).value
        });
        let model = cell_network_throughput(&cfg, &cs, &scheme, params).unwrap();
        assert_relative_eq!(model.value, direct, epsilon = 1e-12);
    }

    #[test]
    fn tagged_mixture_counts_each_link_once() {
        let cs = ChannelSet::new(vec![1.0, 2.0, 0.5], vec![0.1, 0.5, 0.3], 1.0).unwrap();
        let scheme = SensingScheme::single(vec![0.5, 0.3, 0.2]).unwrap();
        let cfg = unit_cfg(0.9);
        let terms = success_terms(&cfg, cs.thetas()).unwrap();
        let model = CellModel::new(&cfg, &cs, &scheme).unwrap();
        let one = AlohaParams::new(1, 0.4).unwrap();
        assert_relative_eq!(model.throughput_tagged(one).value, model.throughput(one).value, epsilon = 1e-15);

        let params = AlohaParams::new(9, 0.6).unwrap();
        let mut direct = 0.0;
        for (l, wl) in binomial_pmf(params.m, params.q).iter().enumerate().skip(1) {
            for j in 0..3 {
                let p = scheme.probs()[j];
                for (others, w) in binomial_pmf(l as u32 - 1, p).iter().enumerate() {
                    let s = terms[j].p_success(others as u32 + 1, cfg.gamma()).value;
                    direct += wl * l as f64 * p * w * s * cs.rate(j);
                }
            }
        }
        let tagged = model.throughput_tagged(params).value;
        assert_relative_eq!(tagged, direct, epsilon = 1e-12);
        assert!(tagged < model.throughput(params).value);
    }

    #[test]
    fn simplified_closed_form_matches_mixture() {
        let (r, lambda, theta, gamma, q, c): (f64, f64, f64, f64, f64, f64) = (1.0, 1.0 / 2.25, 0.15, 0.1, 0.3, 1.5);
        for n in [1usize, 3, 8] {
            let head = (-3.0 * PI * lambda * theta * r * r).exp();
            let rates = vec![c; n];
            let probs = vec![1.0 / n as f64; n];
            for m in [1u32, 2, 5, 17, 60] {
                let params = AlohaParams::new(m, q).unwrap();
                let mixed = double_mixture(&rates, &probs, params, |_, k| head * (1.0 - gamma).powi(k as i32 - 1));
                let closed = simplified_cell_throughput(r, lambda, theta, n, m, q, gamma, c).unwrap();
                assert_relative_eq!(mixed, closed, max_relative = 1e-11);
            }
        }
        assert!(simplified_cell_throughput(1.0, 1.0, 0.1, 5, 3, 0.3, 1.0, 1.0).is_err());
    }

    #[test]
    fn simplified_optimum_scales_like_n_over_q_gamma() {
        let m = simplified_optimal_m(10, 0.3, 0.1).unwrap();
        assert_relative_eq!(m, -1.0 / (1.0f64 - 0.03 / 10.0).ln(), max_relative = 1e-14);
        assert!((m / (10.0 / 0.03) - 1.0).abs() < 1e-2);
        assert!(simplified_optimal_m(10, 0.0, 0.1).is_err());
    }
}
