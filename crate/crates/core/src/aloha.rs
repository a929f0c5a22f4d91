//! Slotted-ALOHA secondary throughput when interference and detection ranges
//! are unbounded: any two transmissions on the same channel collide, and
//! every user sees the true channel state.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::scheme::SensingScheme;

/// Default cap on `N^M · 2^M` for [`brute_force_throughput`].
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Population above which binomial weights are accumulated in log space.
const LOG_SPACE_THRESHOLD: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaParams {
    /// Number of secondary users `M`.
    pub m: u32,
    /// Per-slot transmit probability `q`.
    pub q: f64,
}

impl AlohaParams {
    pub fn new(m: u32, q: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m", "population must be at least 1"));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", format!("{q} outside [0, 1]")));
        }
        Ok(AlohaParams { m, q })
    }
}

/// `Binomial(m, q)` probabilities for `i = 0..=m`.
pub fn binomial_pmf(m: u32, q: f64) -> Vec<f64> {
    let n = m as usize;
    let mut out = vec![0.0; n + 1];
    if q <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if q >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    if m > LOG_SPACE_THRESHOLD {
        let (lq, lp) = (q.ln(), (-q).ln_1p());
        let mut log_choose = 0.0;
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                log_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            *slot = (log_choose + i as f64 * lq + (n - i) as f64 * lp).exp();
        }
    } else {
        let mut choose = 1.0;
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                choose = choose * (n - i + 1) as f64 / i as f64;
            }
            *slot = choose * q.powi(i as i32) * (1.0 - q).powi((n - i) as i32);
        }
    }
    out
}

pub(crate) fn single_channel_inputs<'a>(cs: &ChannelSet, scheme: &'a SensingScheme) -> Result<(Vec<f64>, &'a [f64])> {
    let probs = scheme.channel_probs()?;
    if probs.len() != cs.n() {
        return Err(Error::Dimension(format!(
            "scheme over {} channels, channel set has {}",
            probs.len(),
            cs.n()
        )));
    }
    Ok((cs.idle_rates(), probs))
}

/// Expected rate of one user when exactly `k` users transmit:
/// `Σ_j θ̄_j C_j P_j (1-P_j)^{k-1}`.
pub fn single_user_throughput(cs: &ChannelSet, scheme: &SensingScheme, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "at least one active user is required"));
    }
    let (idle, probs) = single_channel_inputs(cs, scheme)?;
    Ok(idle
        .iter()
        .zip(probs)
        .map(|(w, p)| w * p * (1.0 - p).powi(k as i32 - 1))
        .sum())
}

/// Expected secondary throughput as the binomial mixture
/// `Σ_i C(M,i) q^i (1-q)^{M-i} · i · C_single|i`.
pub fn network_throughput(cs: &ChannelSet, scheme: &SensingScheme, params: AlohaParams) -> Result<f64> {
    let (idle, probs) = single_channel_inputs(cs, scheme)?;
    let weights = binomial_pmf(params.m, params.q);
    let mut total = 0.0;
    // (1 - P_j)^{i-1} advanced incrementally in i
    let mut miss: Vec<f64> = vec![1.0; probs.len()];
    for (i, w) in weights.iter().enumerate().skip(1) {
        if i > 1 {
            for (m, p) in miss.iter_mut().zip(probs) {
                *m *= 1.0 - p;
            }
        }
        if *w == 0.0 {
            continue;
        }
        let single: f64 = idle.iter().zip(probs).zip(&miss).map(|((c, p), m)| c * p * m).sum();
        total += w * i as f64 * single;
    }
    Ok(total)
}

/// Closed form of the mixture obtained from the binomial identity:
/// `qM Σ_j θ̄_j C_j P_j (1 - qP_j)^{M-1}`.
pub fn closed_form_throughput(cs: &ChannelSet, scheme: &SensingScheme, params: AlohaParams) -> Result<f64> {
    let (idle, probs) = single_channel_inputs(cs, scheme)?;
    let (m, q) = (params.m as i32, params.q);
    Ok(q * m as f64
        * idle
            .iter()
            .zip(probs)
            .map(|(c, p)| c * p * (1.0 - q * p).powi(m - 1))
            .sum::<f64>())
}

/// The single-line closed form as printed in the source derivation, which
/// carries an extra `(1 - P_j)` factor: `qM Σ_j θ̄_j C_j P_j (1-P_j)(1 - qP_j)^{M-1}`.
/// Kept for side-by-side comparison; it disagrees with exhaustive enumeration.
pub fn printed_closed_form_throughput(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
) -> Result<f64> {
    let (idle, probs) = single_channel_inputs(cs, scheme)?;
    let (m, q) = (params.m as i32, params.q);
    Ok(q * m as f64
        * idle
            .iter()
            .zip(probs)
            .map(|(c, p)| c * p * (1.0 - p) * (1.0 - q * p).powi(m - 1))
            .sum::<f64>())
}

/// Exact expectation by enumerating every activity pattern and every channel
/// choice. A user earns `C_j` when it is active, channel `j` is idle and no
/// other active user picked `j`.
pub fn brute_force_throughput_with_cap(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    params: AlohaParams,
    cap: u128,
) -> Result<f64> {
    let (_, probs) = single_channel_inputs(cs, scheme)?;
    let n = probs.len();
    let m = params.m as usize;
    let needed = (n as u128)
        .checked_pow(m as u32)
        .and_then(|v| v.checked_mul(1u128 << m.min(127)))
        .unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::EnumerationTooLarge { needed, cap });
    }
    let q = params.q;
    let rates = cs.rates();
    let mut total = 0.0;
    let mut choice = vec![0usize; m];
    for active in 0u64..(1u64 << m) {
        let k = active.count_ones() as i32;
        let p_active = q.powi(k) * (1.0 - q).powi(m as i32 - k);
        if p_active == 0.0 {
            continue;
        }
        choice.iter_mut().for_each(|c| *c = 0);
        loop {
            let mut weight = p_active;
            for (u, &c) in choice.iter().enumerate() {
                if active & (1 << u) != 0 {
                    weight *= probs[c];
                }
            }
            if weight > 0.0 {
                let mut reward = 0.0;
                for u in 0..m {
                    if active & (1 << u) == 0 {
                        continue;
                    }
                    let j = choice[u];
                    let alone = (0..m).all(|v| v == u || active & (1 << v) == 0 || choice[v] != j);
                    if alone {
                        reward += cs.idle_prob(j) * rates[j];
                    }
                }
                total += weight * reward;
            }
            // next channel assignment for active users (odometer)
            let mut u = 0;
            loop {
                if u == m {
                    break;
                }
                if active & (1 << u) != 0 {
                    choice[u] += 1;
                    if choice[u] < n {
                        break;
                    }
                    choice[u] = 0;
                }
                u += 1;
            }
            if u == m {
                break;
            }
        }
    }
    Ok(total)
}

pub fn brute_force_throughput(cs: &ChannelSet, scheme: &SensingScheme, params: AlohaParams) -> Result<f64> {
    brute_force_throughput_with_cap(cs, scheme, params, DEFAULT_ENUMERATION_CAP)
}

/// Real stationary point `-1/ln(1 - q/N)` of the symmetric-channel
/// throughput `qM(1 - q/N)^{M-1}` in `M`.
pub fn symmetric_optimal_m(n: usize, q: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "at least one channel is required"));
    }
    if !(q > 0.0 && q < 1.0) || q >= n as f64 {
        return Err(Error::param("q", format!("{q} must lie in (0, 1)")));
    }
    Ok(-1.0 / (-q / n as f64).ln_1p())
}

/// Evaluates both integer neighbours of the stationary point of `f` and
/// returns the better one (ties go to the smaller population).
pub fn best_integer_neighbor(m_star: f64, f: impl Fn(u32) -> f64) -> u32 {
    let lo = (m_star.floor() as u32).max(1);
    let hi = (m_star.ceil() as u32).max(1);
    if f(hi) > f(lo) {
        hi
    } else {
        lo
    }
}

/// One point of a population sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub m: u32,
    pub throughput: f64,
}

/// Throughput for each `M` in `m_range` (values below 1 are skipped). With
/// `normalize` the values are divided by the residual capacity `C_t`.
pub fn throughput_sweep(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    q: f64,
    m_range: std::ops::RangeInclusive<u32>,
    normalize: bool,
) -> Result<Vec<SweepPoint>> {
    let ms: Vec<u32> = m_range.filter(|&m| m >= 1).collect();
    let scale = if normalize {
        let ct = cs.residual_capacity();
        if ct <= 0.0 {
            return Err(Error::NoOpportunity);
        }
        1.0 / ct
    } else {
        1.0
    };
    let eval = |m: u32| -> Result<SweepPoint> {
        let c = network_throughput(cs, scheme, AlohaParams::new(m, q)?)?;
        Ok(SweepPoint {
            m,
            throughput: c * scale,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ms.into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ms.into_iter().map(eval).collect()
    }
}

/// Population with the largest throughput in a sweep (first one on ties).
pub fn sweep_argmax(points: &[SweepPoint]) -> Option<SweepPoint> {
    points.iter().copied().fold(None, |best: Option<SweepPoint>, p| match best {
        Some(b) if b.throughput >= p.throughput => Some(b),
        _ => Some(p),
    })
}

/// Number of strict local maxima of a sequence (plateaus count once).
pub fn local_maxima(values: &[f64]) -> usize {
    let mut count = 0;
    let mut rising = true;
    for w in values.windows(2) {
        if w[1] < w[0] && rising {
            count += 1;
            rising = false;
        } else if w[1] > w[0] {
            rising = true;
        }
    }
    if rising && values.len() > 1 {
        count += 1;
    }
    count
}
