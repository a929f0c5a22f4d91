//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

/// Absolute tolerance used for the radial and angular integrals of the
/// spatial model.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Hard cap on interval subdivisions per integral.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 2000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: DEFAULT_TOLERANCE,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]`, splitting first at every interior breakpoint
/// and then bisecting the interval with the largest error estimate until the
/// summed estimate drops below `abs_tol`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            subdivisions: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(hi);

    let mut evaluations = 0;
    let mut intervals: Vec<(f64, f64, f64, f64)> = edges
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            (w[0], w[1], v, e)
        })
        .collect();
    let mut subdivisions = 0;
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        if !value.is_finite() {
            return Err(Error::Numerical {
                context: "quadrature",
                detail: format!("non-finite integrand on [{lo}, {hi}]"),
            });
        }
        if total_err <= opts.abs_tol {
            return Ok(Quadrature {
                value: sign * value,
                error: total_err,
                evaluations,
                subdivisions,
            });
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Numerical {
                context: "quadrature",
                detail: format!(
                    "error estimate {total_err:.3e} above tolerance {:.1e} after {subdivisions} subdivisions on [{lo}, {hi}]",
                    opts.abs_tol
                ),
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (l, r, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (l + r);
        let (v1, e1) = gk15(&mut f, l, mid);
        let (v2, e2) = gk15(&mut f, mid, r);
        evaluations += 30;
        intervals.push((l, mid, v1, e1));
        intervals.push((mid, r, v2, e2));
        subdivisions += 1;
    }
}

/// Vector-valued version of [`integrate`]: `f(x, out)` writes `dim`
/// components, each of which must meet `abs_tol`.
pub fn integrate_vec(
    mut f: impl FnMut(f64, &mut [f64]),
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Vec<f64>> {
    if a == b || dim == 0 {
        return Ok(vec![0.0; dim]);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(hi);

    let mut scratch = vec![0.0; dim];
    let mut rule = |l: f64, r: f64| -> Panel {
        let center = 0.5 * (l + r);
        let half = 0.5 * (r - l);
        let mut kronrod = vec![0.0; dim];
        let mut gauss = vec![0.0; dim];
        f(center, &mut scratch);
        for c in 0..dim {
            kronrod[c] = scratch[c] * WGK[7];
            gauss[c] = scratch[c] * WG[3];
        }
        for (k, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
            let dx = half * x;
            f(center - dx, &mut scratch);
            let left = scratch.clone();
            f(center + dx, &mut scratch);
            for c in 0..dim {
                let pair = left[c] + scratch[c];
                kronrod[c] += w * pair;
                if k % 2 == 1 {
                    gauss[c] += WG[k / 2] * pair;
                }
            }
        }
        let err: Vec<f64> = kronrod.iter().zip(&gauss).map(|(k, g)| ((k - g) * half).abs()).collect();
        Panel {
            lo: l,
            hi: r,
            value: kronrod.iter().map(|k| k * half).collect(),
            worst: err.iter().copied().fold(0.0, f64::max),
            err,
        }
    };

    let mut panels: Vec<Panel> = edges.windows(2).map(|w| rule(w[0], w[1])).collect();
    let mut subdivisions = 0;
    loop {
        let mut total_err = vec![0.0; dim];
        let mut value = vec![0.0; dim];
        for p in &panels {
            for c in 0..dim {
                total_err[c] += p.err[c];
                value[c] += p.value[c];
            }
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                context: "quadrature",
                detail: format!("non-finite integrand on [{lo}, {hi}]"),
            });
        }
        let worst = total_err.iter().copied().fold(0.0, f64::max);
        if worst <= opts.abs_tol {
            return Ok(value.into_iter().map(|v| sign * v).collect());
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Numerical {
                context: "quadrature",
                detail: format!(
                    "error estimate {worst:.3e} above tolerance {:.1e} after {subdivisions} subdivisions on [{lo}, {hi}]",
                    opts.abs_tol
                ),
            });
        }
        let idx = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.worst.total_cmp(&y.1.worst))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(rule(p.lo, mid));
        panels.push(rule(mid, p.hi));
        subdivisions += 1;
    }
}

struct Panel {
    lo: f64,
    hi: f64,
    value: Vec<f64>,
    err: Vec<f64>,
    worst: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| x.powi(5) - 2.0 * x * x + 1.0, -1.0, 2.0, &[], QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0 + 3.0;
        assert_relative_eq!(q.value, exact, epsilon = 1e-13);
    }

    #[test]
    fn kinks_and_reversed_limits() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            ..Default::default()
        };
        let q = integrate(|x: f64| (x - 0.3).abs().sqrt(), 0.0, 1.0, &[0.3], opts).unwrap();
        let exact = (2.0 / 3.0) * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        assert_relative_eq!(q.value, exact, epsilon = 1e-10);
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0, &[], opts).unwrap();
        assert_relative_eq!(r.value, -(1f64.exp() - 1.0), epsilon = 1e-13);
    }

    #[test]
    fn vector_components_agree_with_scalar() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            ..Default::default()
        };
        let v = integrate_vec(
            |x, out| {
                out[0] = (-x).exp();
                out[1] = (x - 0.5).abs();
            },
            2,
            0.0,
            1.0,
            &[0.5],
            opts,
        )
        .unwrap();
        assert_relative_eq!(v[0], 1.0 - (-1f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(v[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn gives_up_with_diagnostics() {
        let opts = QuadOptions {
            abs_tol: 1e-14,
            max_subdivisions: 3,
        };
        let err = integrate(|x: f64| (1.0 / x.max(1e-300)).sqrt(), 0.0, 1.0, &[], opts).unwrap_err();
        assert!(err.is_numerical());
    }
}
