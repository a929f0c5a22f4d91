use serde::{Deserialize, Serialize};

/// Monte Carlo point estimate from per-slot samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Standard error of the mean under the normal approximation.
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub label: String,
}

impl SimEstimate {
    /// Distance from `value` in standard errors. Infinite when the estimate
    /// has zero spread and differs from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean.abs()
    }
}

/// Slot count needed for `target` relative standard error, extrapolated
/// from a pilot run. `None` when the pilot mean is zero.
pub fn slots_for_relative_error(pilot: &SimEstimate, target: f64) -> Option<u64> {
    if pilot.mean == 0.0 || target.is_nan() || target <= 0.0 {
        return None;
    }
    let ratio = pilot.std_error / (target * pilot.mean.abs());
    Some(((pilot.samples as f64) * ratio * ratio).ceil().max(1.0) as u64)
}

/// Streaming mean and variance with pairwise merging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, label: impl Into<String>, seed: u64) -> SimEstimate {
        SimEstimate {
            mean: self.mean,
            std_error: if self.n == 0 {
                0.0
            } else {
                (self.variance() / self.n as f64).sqrt()
            },
            samples: self.n,
            seed,
            label: label.into(),
        }
    }
}

/// Ratio of per-slot sums `Σx / Σy` with a delta-method standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioAccumulator {
    n: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl RatioAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    pub fn merge(&mut self, o: &RatioAccumulator) {
        self.n += o.n;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
    }

    pub fn numerator(&self) -> f64 {
        self.sx
    }

    pub fn denominator(&self) -> f64 {
        self.sy
    }

    /// `None` when no slot contributed to the denominator.
    pub fn estimate(&self, label: impl Into<String>, seed: u64) -> Option<SimEstimate> {
        if self.sy <= 0.0 {
            return None;
        }
        let r = self.sx / self.sy;
        let n = self.n as f64;
        let std_error = if self.n < 2 {
            0.0
        } else {
            let resid = (self.sxx - 2.0 * r * self.sxy + r * r * self.syy).max(0.0);
            let y_bar = self.sy / n;
            (resid / (n * (n - 1.0))).sqrt() / y_bar
        };
        Some(SimEstimate {
            mean: r,
            std_error,
            samples: self.n,
            seed,
            label: label.into(),
        })
    }
}
