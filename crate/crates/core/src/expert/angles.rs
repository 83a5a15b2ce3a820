//! Capture and protected angles seen from the attacker.
//!
//! Each defender blocks the angular interval of directions whose rays hit
//! its capture disk: centered on the attacker-to-defender bearing with
//! half-width `asin(min(1, r_cap / r))`. The capture angle is the measure
//! of the union of these intervals; the protected angle is the part of the
//! cone toward the protected disk that no interval covers.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Minimum attacker-defender separation for a well-defined bearing, m.
pub const MIN_SEPARATION: f64 = 1e-6;

/// Half-open arcs `[start, end)` on `[0, 2pi)`, sorted and disjoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
}

#[inline]
fn wrap_2pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Split a centered interval into non-wrapping pieces on `[0, 2pi)`.
fn push_interval(out: &mut Vec<(f64, f64)>, center: f64, half: f64) {
    if half >= PI {
        out.push((0.0, TAU));
        return;
    }
    let start = wrap_2pi(center - half);
    let end = start + 2.0 * half;
    if end <= TAU {
        out.push((start, end));
    } else {
        out.push((start, TAU));
        out.push((0.0, end - TAU));
    }
}

impl ArcSet {
    /// Union of intervals given as `(center, half_width)`.
    pub fn union_of(intervals: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pieces = Vec::new();
        for (c, h) in intervals {
            if h > 0.0 {
                push_interval(&mut pieces, c, h);
            }
        }
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (s, e) in pieces {
            match arcs.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => arcs.push((s, e)),
            }
        }
        Self { arcs }
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(s, e)| e - s).sum::<f64>().min(TAU)
    }

    /// Measure of the overlap between this set and the interval
    /// `(center, half)`.
    pub fn overlap_with(&self, center: f64, half: f64) -> f64 {
        let mut cone = Vec::with_capacity(2);
        push_interval(&mut cone, center, half);
        let mut total = 0.0;
        for &(cs, ce) in &cone {
            for &(s, e) in &self.arcs {
                let lo = cs.max(s);
                let hi = ce.min(e);
                if hi > lo {
                    total += hi - lo;
                }
            }
        }
        total
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }
}

/// Half-width of the blocked interval for a defender `r` away.
#[inline]
pub fn capture_half_width(r: f64, r_cap: f64) -> f64 {
    if r <= r_cap {
        FRAC_PI_2
    } else {
        (r_cap / r).asin()
    }
}

/// Union of blocked intervals for all defenders.
pub fn capture_arcs(p_a: Vec2, defenders: impl IntoIterator<Item = Vec2>, r_cap: f64) -> ArcSet {
    ArcSet::union_of(defenders.into_iter().filter_map(|p| {
        let d = p - p_a;
        let r = d.norm();
        (r > MIN_SEPARATION).then(|| (d.angle(), capture_half_width(r, r_cap)))
    }))
}

/// Capture angle, rad, in `[0, 2pi]`.
pub fn capture_angle(p_a: Vec2, defenders: &[Vec2], r_cap: f64) -> f64 {
    capture_arcs(p_a, defenders.iter().copied(), r_cap).measure()
}

/// Protected angle, rad. Errors if the attacker is already inside the
/// protected disk.
pub fn protected_angle(p_a: Vec2, p_p: Vec2, rho_p: f64, defenders: &[Vec2], r_cap: f64) -> Result<f64> {
    let d = (p_p - p_a).norm();
    if d <= rho_p {
        return Err(Error::InvalidArgument(format!(
            "protected_angle: attacker {d:.3} m from center is inside the protected area (rho_p = {rho_p})"
        )));
    }
    let arcs = capture_arcs(p_a, defenders.iter().copied(), r_cap);
    Ok(protected_angle_with(p_a, p_p, rho_p, &arcs))
}

/// Protected angle against a precomputed capture union. Inside the
/// protected disk the cone saturates at half-width pi/2.
pub fn protected_angle_with(p_a: Vec2, p_p: Vec2, rho_p: f64, capture: &ArcSet) -> f64 {
    let to_p = p_p - p_a;
    let d = to_p.norm();
    let half = if d <= rho_p { FRAC_PI_2 } else { (rho_p / d).asin() };
    let cone = 2.0 * half;
    (cone - capture.overlap_with(to_p.angle(), half)).clamp(0.0, cone)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn single_defender_at_two_radii() {
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(2.0, 0.0)], 1.0);
        assert!((a - PI / 3.0).abs() < 1e-12);
        assert!((a - 1.0472).abs() < 1e-4);
    }

    #[test]
    fn far_defenders_vanish() {
        assert_eq!(capture_angle(Vec2::ZERO, &[], 1.0), 0.0);
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(1e9, 0.0), Vec2::new(0.0, -1e9)], 1.0);
        assert!(a < 1e-8);
    }

    #[test]
    fn union_not_sum() {
        let one = capture_angle(Vec2::ZERO, &[Vec2::new(0.0, 3.0)], 1.0);
        let two = capture_angle(Vec2::ZERO, &[Vec2::new(0.0, 3.0), Vec2::new(0.0, 3.0)], 1.0);
        assert_eq!(one, two);
    }

    #[test]
    fn interval_straddling_zero_bearing() {
        // bearing pi: the interval wraps across the 0/2pi seam
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(-2.0, 1e-12)], 1.0);
        assert!((a - PI / 3.0).abs() < 1e-9);
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(-2.0, -1e-12)], 1.0);
        assert!((a - PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn inside_capture_radius_blocks_half_circle() {
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(0.5, 0.0)], 1.0);
        assert!((a - PI).abs() < 1e-12);
        let a = capture_angle(Vec2::ZERO, &[Vec2::new(0.5, 0.0), Vec2::new(-0.5, 0.0)], 1.0);
        assert!((a - TAU).abs() < 1e-12);
    }

    #[test]
    fn protected_angle_examples() {
        let p_a = Vec2::new(0.0, 10.0);
        let full = 2.0 * (2.0f64 / 10.0).asin();
        let a = protected_angle(p_a, Vec2::ZERO, 2.0, &[], 1.0).unwrap();
        assert!((a - full).abs() < 1e-12);

        // defender on the bearing at distance 2: its pi/3 interval covers the cone
        let a = protected_angle(p_a, Vec2::ZERO, 2.0, &[Vec2::new(0.0, 8.0)], 1.0).unwrap();
        assert!(full < PI / 3.0);
        assert!(a.abs() < 1e-12);

        // defenders behind the attacker leave the cone untouched
        let behind = [Vec2::new(0.0, 12.0), Vec2::new(1.0, 13.0)];
        let a = protected_angle(p_a, Vec2::ZERO, 2.0, &behind, 1.0).unwrap();
        assert!((a - full).abs() < 1e-12);

        assert!(protected_angle(Vec2::new(0.0, 1.0), Vec2::ZERO, 2.0, &[], 1.0).is_err());
    }

    #[test]
    fn partial_cover() {
        // cone half-width asin(0.2); capture interval centered off-axis by
        // exactly that amount covers half of the cone
        let p_a = Vec2::new(0.0, 10.0);
        let half = (0.2f64).asin();
        let bearing = -PI / 2.0 + half;
        let r = 3.0;
        let d = p_a + Vec2::from_angle(bearing) * r;
        let cap = (1.0 / r).asin();
        assert!(cap < 2.0 * half);
        let a = protected_angle(p_a, Vec2::ZERO, 2.0, &[d], 1.0).unwrap();
        // capture interval covers [bearing - cap, bearing + cap], cone is
        // [-pi/2 - half, -pi/2 + half]; uncovered part is below bearing - cap
        let uncovered = ((bearing - cap) - (-PI / 2.0 - half)).max(0.0);
        assert!(uncovered > 0.01);
        assert!((a - uncovered).abs() < 1e-12);
    }
}
