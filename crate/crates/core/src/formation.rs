//! Arc-formation patterns and per-defender tracking control.
//!
//! A [`ShapeParams`] value fixes the whole formation for a given team size:
//! consecutive reference points are `zeta` apart, the chord heads along
//! `phi + pi/2`, and the polyline turns by `beta / (n - 1)` at every joint.
//! References are re-centered so their centroid is exactly `p_c`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use crate::world::AgentState;

/// Number of scalar shape parameters.
pub const SHAPE_DIM: usize = 5;

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    /// Formation center, m.
    pub p_c: Vec2,
    /// Direction, rad. Kept unwrapped.
    pub phi: f64,
    /// Spacing between consecutive slots, m.
    pub zeta: f64,
    /// Opening angle, rad.
    pub beta: f64,
}

impl ShapeParams {
    pub const fn new(p_c: Vec2, phi: f64, zeta: f64, beta: f64) -> Self {
        Self { p_c, phi, zeta, beta }
    }

    /// `[p_cx, p_cy, phi, zeta, beta]`
    pub fn to_array(&self) -> [f64; SHAPE_DIM] {
        [self.p_c.x, self.p_c.y, self.phi, self.zeta, self.beta]
    }

    pub fn from_array(a: [f64; SHAPE_DIM]) -> Self {
        Self::new(Vec2::new(a[0], a[1]), a[2], a[3], a[4])
    }

    /// `self + dt * rate`, componentwise.
    pub fn advanced(&self, rate: &[f64; SHAPE_DIM], dt: f64) -> Self {
        let mut a = self.to_array();
        for (x, r) in a.iter_mut().zip(rate) {
            *x += dt * r;
        }
        Self::from_array(a)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Clamp limits applied to every shape-parameter update.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeBounds {
    /// m
    pub zeta_min: f64,
    /// m
    pub zeta_max: f64,
    /// rad
    pub beta_min: f64,
    /// rad
    pub beta_max: f64,
}

impl Default for ShapeBounds {
    fn default() -> Self {
        Self {
            zeta_min: 0.5,
            zeta_max: 4.0,
            beta_min: -TAU,
            beta_max: TAU,
        }
    }
}

impl ShapeBounds {
    pub fn clamp(&self, theta: ShapeParams) -> ShapeParams {
        ShapeParams {
            zeta: theta.zeta.clamp(self.zeta_min, self.zeta_max),
            beta: theta.beta.clamp(self.beta_min, self.beta_max),
            ..theta
        }
    }

    pub fn contains(&self, theta: &ShapeParams) -> bool {
        (self.zeta_min..=self.zeta_max).contains(&theta.zeta)
            && (self.beta_min..=self.beta_max).contains(&theta.beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta_min > 0.0 && self.zeta_max >= self.zeta_min) {
            return Err(Error::Config("shape: need 0 < zeta_min <= zeta_max".into()));
        }
        if !(self.beta_max >= self.beta_min) {
            return Err(Error::Config("shape: need beta_min <= beta_max".into()));
        }
        Ok(())
    }
}

/// Ordered reference positions, one per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormationPattern {
    pub refs: Vec<Vec2>,
}

impl FormationPattern {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn centroid(&self) -> Vec2 {
        let sum = self.refs.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
        sum / self.refs.len() as f64
    }
}

/// Heading of segment `i -> i+1` (0-based `i`, so slot `i + 1` in
/// one-based numbering is reached by segment heading `psi_{i+2}`).
#[inline]
fn segment_heading(theta: &ShapeParams, n: usize, seg: usize) -> f64 {
    // one-based slot index of the segment's end point
    let i = (seg + 2) as f64;
    let n_f = n as f64;
    theta.phi + FRAC_PI_2 + (2.0 * i - n_f - 2.0) * theta.beta / (2.0 * (n_f - 1.0))
}

/// Reference positions of the arc formation for `n` defenders.
pub fn pattern(theta: &ShapeParams, n: usize) -> Result<FormationPattern> {
    let mut refs = Vec::with_capacity(n);
    pattern_into(theta, n, &mut refs)?;
    Ok(FormationPattern { refs })
}

/// Allocation-free variant of [`pattern`] for hot loops.
pub fn pattern_into(theta: &ShapeParams, n: usize, out: &mut Vec<Vec2>) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pattern needs n >= 2, got {n}")));
    }
    out.clear();
    let mut q = Vec2::ZERO;
    let mut sum = Vec2::ZERO;
    out.push(q);
    for seg in 0..n - 1 {
        q += Vec2::from_angle(segment_heading(theta, n, seg)) * theta.zeta;
        sum += q;
        out.push(q);
    }
    let shift = theta.p_c - sum / n as f64;
    for p in out.iter_mut() {
        *p += shift;
    }
    Ok(())
}

/// How the tracking law compensates the vehicle's own drag.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragCompensation {
    /// `v / C_d`. Leaves most of the drag in place, so the loop stays
    /// well damped.
    #[default]
    Partial,
    /// `C_d * v`, cancels the drag exactly. The position loop is then an
    /// undamped double integrator.
    Cancel,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormationControlConfig {
    /// Position gain, 1/s^2.
    pub k_p: f64,
    pub drag_compensation: DragCompensation,
    /// Greedy nearest-slot assignment instead of identity.
    pub greedy_slots: bool,
}

impl Default for FormationControlConfig {
    fn default() -> Self {
        Self {
            k_p: 4.0,
            drag_compensation: DragCompensation::Partial,
            greedy_slots: false,
        }
    }
}

/// Unsaturated tracking input for one defender.
pub fn formation_control(
    s: &AgentState,
    p_ref: Vec2,
    pc_dot: Vec2,
    k_p: f64,
    c_d: f64,
    comp: DragCompensation,
) -> Vec2 {
    let drag = match comp {
        DragCompensation::Partial => s.v / c_d,
        DragCompensation::Cancel => s.v * c_d,
    };
    (p_ref - s.p) * k_p + pc_dot + drag
}

/// Slot index for each defender: `perm[i]` is the slot defender `i` tracks.
pub fn assign_slots(defenders: &[AgentState], pattern: &FormationPattern, greedy: bool) -> Result<Vec<usize>> {
    let n = defenders.len();
    if pattern.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: pattern.len(),
        });
    }
    if !greedy {
        return Ok((0..n).collect());
    }
    // globally closest remaining (defender, slot) pair first
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, d) in defenders.iter().enumerate() {
        for (j, &r) in pattern.refs.iter().enumerate() {
            pairs.push((d.p.distance(r), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; n];
    let mut slot_taken = vec![false; n];
    let mut left = n;
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !slot_taken[j] {
            perm[i] = j;
            slot_taken[j] = true;
            left -= 1;
            if left == 0 {
                break;
            }
        }
    }
    Ok(perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::step_agent;
    use std::f64::consts::PI;

    #[test]
    fn three_slot_arc_matches_hand_evaluation() {
        let theta = ShapeParams::new(Vec2::ZERO, 0.0, 1.0, PI / 2.0);
        let p = pattern(&theta, 3).unwrap();
        let expected = [(-0.12756, -0.92388), (0.25512, 0.0), (-0.12756, 0.92388)];
        for (r, (x, y)) in p.refs.iter().zip(expected) {
            assert!((r.x - x).abs() < 1e-5 && (r.y - y).abs() < 1e-5, "{r:?}");
        }
        // exact closed form: psi_2 = 3pi/8, psi_3 = 5pi/8
        let c = (3.0 * PI / 8.0).cos();
        let s = (3.0 * PI / 8.0).sin();
        assert!((p.refs[1].x - 2.0 * c / 3.0).abs() < 1e-12);
        assert!((p.refs[2].y - s).abs() < 1e-12);
    }

    #[test]
    fn centroid_is_center() {
        for n in 2..10 {
            let theta = ShapeParams::new(Vec2::new(5.0, 5.0), 1.3 * n as f64, 0.7, 0.4 * n as f64);
            let c = pattern(&theta, n).unwrap().centroid();
            assert!((c - Vec2::new(5.0, 5.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_opening_is_a_line() {
        let theta = ShapeParams::new(Vec2::ZERO, 0.0, 1.0, 0.0);
        let p = pattern(&theta, 4).unwrap();
        for w in p.refs.windows(2) {
            let d = w[1] - w[0];
            assert!(d.x.abs() < 1e-12 && (d.y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_rejects_single_slot() {
        assert!(pattern(&ShapeParams::default(), 1).is_err());
        assert!(pattern(&ShapeParams::default(), 0).is_err());
    }

    #[test]
    fn formation_control_examples() {
        let s = AgentState::at_rest(Vec2::new(1.0, 2.0));
        let u = formation_control(&s, s.p, Vec2::ZERO, 4.0, 7.5, DragCompensation::Partial);
        assert_eq!(u, Vec2::ZERO);
        let s = AgentState::default();
        let u = formation_control(&s, Vec2::new(1.0, 0.0), Vec2::ZERO, 4.0, 7.5, DragCompensation::Partial);
        assert_eq!(u, Vec2::new(4.0, 0.0));
        let s = AgentState::new(Vec2::ZERO, Vec2::new(1.5, 0.0));
        let a = formation_control(&s, Vec2::ZERO, Vec2::ZERO, 4.0, 7.5, DragCompensation::Partial);
        let b = formation_control(&s, Vec2::ZERO, Vec2::ZERO, 4.0, 7.5, DragCompensation::Cancel);
        assert!((a.x - 0.2).abs() < 1e-15);
        assert!((b.x - 11.25).abs() < 1e-15);
    }

    #[test]
    fn formation_control_is_affine() {
        let s1 = AgentState::new(Vec2::new(0.3, -0.2), Vec2::new(0.5, 0.1));
        let s2 = AgentState::new(Vec2::new(-1.0, 0.4), Vec2::new(-0.2, 0.7));
        let r = Vec2::new(1.0, 1.0);
        let pc = Vec2::new(0.2, -0.1);
        let lam = 0.37;
        let mix = AgentState::new(s1.p * lam + s2.p * (1.0 - lam), s1.v * lam + s2.v * (1.0 - lam));
        for comp in [DragCompensation::Partial, DragCompensation::Cancel] {
            let f = |s: &AgentState| formation_control(s, r, pc, 4.0, 7.5, comp);
            let lhs = f(&mix);
            let rhs = f(&s1) * lam + f(&s2) * (1.0 - lam);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_loop_error_decays_monotonically() {
        let p_ref = Vec2::new(1.0, -0.5);
        let mut s = AgentState::default();
        let mut errs = Vec::new();
        for _ in 0..200 {
            let u = formation_control(&s, p_ref, Vec2::ZERO, 4.0, 7.5, DragCompensation::Partial);
            s = step_agent(s, u, 7.5, 15.0, 0.05).unwrap();
            errs.push((p_ref - s.p).norm());
        }
        // from rest the loop is overdamped, so decay starts immediately
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(errs[199] < 1e-2 * errs[0]);
    }

    #[test]
    fn exact_drag_cancellation_oscillates() {
        let p_ref = Vec2::new(1.0, 0.0);
        let mut s = AgentState::default();
        let mut overshoot = false;
        for _ in 0..200 {
            let u = formation_control(&s, p_ref, Vec2::ZERO, 4.0, 7.5, DragCompensation::Cancel);
            s = step_agent(s, u, 7.5, 15.0, 0.05).unwrap();
            overshoot |= s.p.x > 1.5;
        }
        assert!(overshoot);
    }

    #[test]
    fn identity_slots() {
        let ds = vec![AgentState::default(); 3];
        let p = pattern(&ShapeParams::new(Vec2::ZERO, 0.0, 1.0, 1.0), 3).unwrap();
        assert_eq!(assign_slots(&ds, &p, false).unwrap(), vec![0, 1, 2]);
        assert!(assign_slots(&ds[..2], &p, false).is_err());
    }

    fn brute_force_assignment(ds: &[AgentState], refs: &[Vec2]) -> Vec<usize> {
        fn permute(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, ds: &[AgentState], refs: &[Vec2], best: &mut (f64, Vec<usize>)) {
            if k == ds.len() {
                let cost: f64 = cur.iter().enumerate().map(|(i, &j)| ds[i].p.distance(refs[j])).sum();
                if cost < best.0 {
                    *best = (cost, cur.clone());
                }
                return;
            }
            for j in 0..refs.len() {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    permute(k + 1, cur, used, ds, refs, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (f64::INFINITY, vec![]);
        permute(0, &mut vec![], &mut vec![false; refs.len()], ds, refs, &mut best);
        best.1
    }

    #[test]
    fn greedy_slots_recover_shuffle() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let p = pattern(&ShapeParams::new(Vec2::new(1.0, 2.0), 0.4, 1.5, 2.0), n).unwrap();
            let mut shuffle: Vec<usize> = (0..n).collect();
            shuffle.shuffle(&mut rng);
            let ds: Vec<AgentState> = shuffle.iter().map(|&j| AgentState::at_rest(p.refs[j])).collect();
            let perm = assign_slots(&ds, &p, true).unwrap();
            assert_eq!(perm, shuffle);
            assert_eq!(perm, brute_force_assignment(&ds, &p.refs));
        }
    }

    #[test]
    fn greedy_slots_is_a_permutation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(2..9);
            let p = pattern(&ShapeParams::new(Vec2::ZERO, rng.random(), 1.0, rng.random_range(0.0..6.0)), n).unwrap();
            let ds: Vec<AgentState> = (0..n)
                .map(|_| AgentState::at_rest(Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))))
                .collect();
            let mut perm = assign_slots(&ds, &p, true).unwrap();
            perm.sort_unstable();
            assert_eq!(perm, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn clamp_keeps_bounds() {
        let b = ShapeBounds::default();
        let t = b.clamp(ShapeParams::new(Vec2::ZERO, 10.0, 0.01, -7.0));
        assert_eq!(t.zeta, b.zeta_min);
        assert_eq!(t.beta, -TAU);
        assert_eq!(t.phi, 10.0);
        assert!(b.contains(&t));
    }
}
