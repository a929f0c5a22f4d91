//! Euclidean projections onto the probability simplex and onto the capped
//! simplex `{0 ≤ x ≤ 1, Σx = k}`.

/// Projects `v` onto `{x : x ≥ 0, Σx = 1}` with the sort-and-threshold
/// construction.
pub fn project(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Projects `v` onto `{x : 0 ≤ x ≤ 1, Σx = total}` for `0 ≤ total ≤ v.len()`.
/// The shift is bracketed by bisection and then solved exactly on the
/// resulting set of uncapped coordinates.
pub fn project_capped(v: &[f64], total: f64) -> Vec<f64> {
    let clip = |tau: f64| -> Vec<f64> { v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).collect() };
    let mass = |tau: f64| -> f64 { v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).sum() };
    let lo_v = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_v = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_v - 1.0, hi_v);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let (mut free_sum, mut free, mut capped) = (0.0, 0usize, 0usize);
    for &x in v {
        let y = x - tau;
        if y >= 1.0 {
            capped += 1;
        } else if y > 0.0 {
            free_sum += x;
            free += 1;
        }
    }
    if free == 0 {
        return clip(tau);
    }
    let exact = (free_sum - (total - capped as f64)) / free as f64;
    let refined = clip(exact);
    let err = |x: &[f64]| (x.iter().sum::<f64>() - total).abs();
    let coarse = clip(tau);
    if err(&refined) <= err(&coarse) {
        refined
    } else {
        coarse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fixed_points_and_examples() {
        let x = vec![0.2, 0.3, 0.5];
        assert_eq!(project(&x), x);
        assert_eq!(project(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project(&[0.0, 0.0, 0.0]);
        for v in p {
            assert_relative_eq!(v, 1.0 / 3.0);
        }
        assert_eq!(project(&[5.0]), vec![1.0]);
    }

    #[test]
    fn capped_examples() {
        assert_eq!(project_capped(&[0.5, 0.5, 0.5, 0.5], 2.0), vec![0.5; 4]);
        assert_eq!(project_capped(&[3.0, 3.0, 0.0], 2.0), vec![1.0, 1.0, 0.0]);
        let p = project_capped(&[0.9, 0.1, 0.0], 1.0);
        assert_relative_eq!(p[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.1, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn capped_lands_inside_and_is_closest(v in prop::collection::vec(-3.0f64..3.0, 2..12),
                                              k in 0.0f64..1.0,
                                              w in prop::collection::vec(0.0f64..1.0, 12)) {
            let n = v.len();
            let total = (k * n as f64).floor().max(1.0);
            let p = project_capped(&v, total);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((p.iter().sum::<f64>() - total).abs() < 1e-12);
            // another feasible point built from w
            let other = project_capped(&w[..n], total);
            let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            prop_assert!(d(&p) <= d(&other) + 1e-12);
        }

        #[test]
        fn lands_on_simplex_and_is_closest(v in prop::collection::vec(-3.0f64..3.0, 1..12),
                                            w in prop::collection::vec(0.0f64..1.0, 12)) {
            let p = project(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // any other simplex point is no closer
            let total: f64 = w[..v.len()].iter().sum::<f64>() + 1e-9;
            let other: Vec<f64> = w[..v.len()].iter().map(|x| (x + 1e-9 / v.len() as f64) / total).collect();
            let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            prop_assert!(d(&p) <= d(&other) + 1e-12);
        }
    }
}
