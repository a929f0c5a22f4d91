//! Planar disc geometry: lens areas and areas of regions bounded by circle
//! arcs (intersections of some discs minus the union of others).

use std::f64::consts::{PI, TAU};

/// Area of the intersection of two discs with radii `r1`, `r2` whose centres
/// are `d` apart.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    let (r1, r2, d) = (r1.max(0.0), r2.max(0.0), d.abs());
    if r1 == 0.0 || r2 == 0.0 || d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let c1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0);
    let c2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0);
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    (r1 * r1 * c1.acos() + r2 * r2 * c2.acos() - 0.5 * k.sqrt()).max(0.0)
}

/// Area of the disc of radius `r1` lying outside a disc of radius `r2` at
/// centre distance `d`.
pub fn crescent_area(r1: f64, r2: f64, d: f64) -> f64 {
    (PI * r1 * r1 - lens_area(r1, r2, d)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Disc {
    pub fn new(x: f64, y: f64, r: f64) -> Self {
        Disc { x, y, r }
    }

    /// Disc centred at polar coordinates `(rho, phi)`.
    pub fn polar(rho: f64, phi: f64, r: f64) -> Self {
        Disc {
            x: rho * phi.cos(),
            y: rho * phi.sin(),
            r,
        }
    }

    pub fn area(&self) -> f64 {
        PI * self.r * self.r
    }

    fn dist(&self, other: &Disc) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        (px - self.x).hypot(py - self.y) <= self.r
    }

    fn same_as(&self, other: &Disc) -> bool {
        let scale = self.r.max(other.r).max(1.0);
        self.dist(other) <= 1e-12 * scale && (self.r - other.r).abs() <= 1e-12 * scale
    }

    /// Angles (on this circle) of the proper crossings with `other`'s circle.
    fn crossings(&self, other: &Disc) -> Option<(f64, f64)> {
        let d = self.dist(other);
        if d == 0.0 || d >= self.r + other.r || d <= (self.r - other.r).abs() {
            return None;
        }
        let base = (other.y - self.y).atan2(other.x - self.x);
        let cos_half = ((d * d + self.r * self.r - other.r * other.r) / (2.0 * d * self.r)).clamp(-1.0, 1.0);
        let half = cos_half.acos();
        Some((base - half, base + half))
    }

    /// `½∮(x dy - y dx)` along the arc from angle `t1` to `t2`.
    fn arc_term(&self, t1: f64, t2: f64) -> f64 {
        0.5 * (self.r * self.r * (t2 - t1) + self.x * self.r * (t2.sin() - t1.sin())
            - self.y * self.r * (t2.cos() - t1.cos()))
    }
}

fn dedup(discs: &[Disc]) -> Vec<Disc> {
    let mut out: Vec<Disc> = Vec::with_capacity(discs.len());
    for d in discs {
        if !out.iter().any(|o| o.same_as(d)) {
            out.push(*d);
        }
    }
    out
}

/// Area of `(∩ inside) \ (∪ outside)`, computed exactly with Green's theorem
/// over the boundary arcs. With an empty `inside` list the result is 0.
pub fn region_area(inside: &[Disc], outside: &[Disc]) -> f64 {
    if inside.is_empty() || inside.iter().any(|d| d.r <= 0.0) {
        return 0.0;
    }
    let inside = dedup(inside);
    let outside: Vec<Disc> = dedup(&outside.iter().copied().filter(|d| d.r > 0.0).collect::<Vec<_>>());
    if inside.iter().any(|a| outside.iter().any(|b| b.same_as(a))) {
        return 0.0;
    }

    let all: Vec<(Disc, bool)> = inside
        .iter()
        .map(|d| (*d, true))
        .chain(outside.iter().map(|d| (*d, false)))
        .collect();

    let mut area = 0.0;
    for (k, &(disc, is_inside)) in all.iter().enumerate() {
        let mut angles: Vec<f64> = Vec::new();
        for (l, (other, _)) in all.iter().enumerate() {
            if l != k {
                if let Some((a, b)) = disc.crossings(other) {
                    angles.push(a.rem_euclid(TAU));
                    angles.push(b.rem_euclid(TAU));
                }
            }
        }
        angles.sort_by(f64::total_cmp);
        let arcs: Vec<(f64, f64)> = if angles.is_empty() {
            vec![(0.0, TAU)]
        } else {
            let mut v: Vec<(f64, f64)> = angles.windows(2).map(|w| (w[0], w[1])).collect();
            v.push((angles[angles.len() - 1], angles[0] + TAU));
            v
        };
        for (t1, t2) in arcs {
            if t2 - t1 <= 0.0 {
                continue;
            }
            let tm = 0.5 * (t1 + t2);
            let (px, py) = (disc.x + disc.r * tm.cos(), disc.y + disc.r * tm.sin());
            let keep = all.iter().enumerate().all(|(l, (other, other_inside))| {
                if l == k {
                    return true;
                }
                if *other_inside {
                    other.contains(px, py)
                } else {
                    !other.contains(px, py)
                }
            });
            if keep {
                let term = disc.arc_term(t1, t2);
                area += if is_inside { term } else { -term };
            }
        }
    }
    area.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lens_examples() {
        assert_eq!(lens_area(1.0, 1.0, 3.0), 0.0);
        assert_relative_eq!(lens_area(1.0, 1.0, 0.0), PI);
        let expected = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert_relative_eq!(lens_area(1.0, 1.0, 1.0), expected, epsilon = 1e-14);
        assert_relative_eq!(expected, 1.2284, epsilon = 1e-4);
        assert_relative_eq!(lens_area(2.0, 1.0, 0.5), PI, epsilon = 1e-15);
    }

    #[test]
    fn lens_matches_dart_integration() {
        // uniform darts in the bounding box of the first disc
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                x * x + y * y <= 1.0 && (x - 1.0).powi(2) + y * y <= 1.0
            })
            .count();
        let p = hits as f64 / n as f64;
        let est = 4.0 * p;
        let se = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - lens_area(1.0, 1.0, 1.0)).abs() < 3.0 * se);
    }

    #[test]
    fn region_area_reproduces_lens_and_crescent() {
        for &(r1, r2, d) in &[(1.0, 1.0, 1.0), (2.0, 1.0, 1.5), (1.0, 0.3, 0.9), (1.0, 1.0, 0.0), (1.0, 1.0, 2.5)] {
            let a = Disc::new(0.0, 0.0, r1);
            let b = Disc::new(d, 0.0, r2);
            assert_relative_eq!(region_area(&[a, b], &[]), lens_area(r1, r2, d), epsilon = 1e-12);
            assert_relative_eq!(region_area(&[a], &[b]), crescent_area(r1, r2, d), epsilon = 1e-12);
        }
    }

    #[test]
    fn three_disc_region_matches_monte_carlo() {
        let a = Disc::new(0.0, 0.0, 1.0);
        let b = Disc::new(0.8, 0.3, 0.9);
        let c = Disc::polar(0.7, 2.0, 0.8);
        let exact = region_area(&[a], &[b, c]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                a.contains(x, y) && !b.contains(x, y) && !c.contains(x, y)
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((4.0 * p - exact).abs() < 3.5 * se, "{} vs {exact}", 4.0 * p);
    }

    #[test]
    fn degenerate_regions() {
        let a = Disc::new(0.0, 0.0, 1.0);
        assert_eq!(region_area(&[a], &[a]), 0.0);
        assert_relative_eq!(region_area(&[a], &[Disc::new(0.0, 0.0, 0.0)]), PI, epsilon = 1e-14);
        assert_relative_eq!(region_area(&[a], &[Disc::new(0.0, 0.0, 2.0)]), 0.0, epsilon = 1e-14);
        assert_relative_eq!(region_area(&[a], &[Disc::new(5.0, 0.0, 1.0)]), PI, epsilon = 1e-14);
        // two identical holes count once
        let h = Disc::new(1.0, 0.0, 1.0);
        assert_relative_eq!(region_area(&[a], &[h, h]), crescent_area(1.0, 1.0, 1.0), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn lens_symmetric_and_monotone(r1 in 0.01f64..3.0, r2 in 0.01f64..3.0, d in 0.0f64..7.0, dd in 0.0f64..1.0) {
            let a = lens_area(r1, r2, d);
            prop_assert!((a - lens_area(r2, r1, d)).abs() < 1e-12);
            prop_assert!(lens_area(r1, r2, d + dd) <= a + 1e-12);
            prop_assert!(a <= PI * r1.min(r2).powi(2) + 1e-12);
        }

        #[test]
        fn inclusion_exclusion_holds(
            bx in -1.5f64..1.5, by in -1.5f64..1.5, br in 0.1f64..1.5,
            cx in -1.5f64..1.5, cy in -1.5f64..1.5, cr in 0.1f64..1.5,
        ) {
            let a = Disc::new(0.0, 0.0, 1.0);
            let b = Disc::new(bx, by, br);
            let c = Disc::new(cx, cy, cr);
            let lhs = region_area(&[a], &[b, c]);
            let rhs = a.area() - region_area(&[a, b], &[]) - region_area(&[a, c], &[])
                + region_area(&[a, b, c], &[]);
            prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
        }
    }
}
