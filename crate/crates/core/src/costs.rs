//! Prior cost functions and the constrained per-step objective.
//!
//! All three costs are bounded above by one. The cohesion cost can go negative
//! (down to -1 when every neighbor sits on the candidate), exactly as its
//! piecewise-linear form implies.

use std::f64::consts::FRAC_2_PI;

use serde::{Deserialize, Serialize};

use crate::optimizer::SearchBox;
use crate::{Error, Result, Vec3};

/// Weights, constraint parameters and fixed shape constants of the objective.
/// The first five fields form the adaptation search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostProfile {
    pub w_eta: f64,
    pub w_z: f64,
    pub w_g: f64,
    pub delta_min: f64,
    pub c_penalty: f64,
    pub alpha: f64,
    pub c_dist: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for CostProfile {
    fn default() -> Self {
        CostProfile {
            w_eta: 0.5,
            w_z: 0.3,
            w_g: 0.8,
            delta_min: 3.0,
            c_penalty: 0.75,
            alpha: 0.5,
            c_dist: 50.0,
            z_min: 35.0,
            z_max: 100.0,
        }
    }
}

/// Names of the adaptable parameters, in [`CostProfile::theta`] order.
pub const THETA_NAMES: [&str; 5] = ["w_eta", "w_z", "w_g", "delta_min", "c_penalty"];

impl CostProfile {
    pub fn theta(&self) -> [f64; 5] {
        [self.w_eta, self.w_z, self.w_g, self.delta_min, self.c_penalty]
    }

    pub fn with_theta(mut self, theta: [f64; 5]) -> Self {
        [self.w_eta, self.w_z, self.w_g, self.delta_min, self.c_penalty] = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("profile.w_eta", self.w_eta),
            ("profile.w_z", self.w_z),
            ("profile.w_g", self.w_g),
            ("profile.c_penalty", self.c_penalty),
            ("profile.alpha", self.alpha),
        ];
        for (key, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..=100.0).contains(&self.delta_min) {
            return Err(Error::config("profile.delta_min", "must lie in [0, 100]"));
        }
        if !(self.c_dist.is_finite() && self.c_dist > 0.0) {
            return Err(Error::config("profile.c_dist", "must be positive"));
        }
        if !(self.z_min > 0.0 && self.z_max > self.z_min) {
            return Err(Error::config(
                "profile.z_max",
                "need 0 < z_min < z_max",
            ));
        }
        Ok(())
    }
}

fn cohesion_term(d: f64, comm_range: f64, c_penalty: f64) -> f64 {
    if d < 0.75 * comm_range {
        2.0 * d / comm_range - 1.0
    } else {
        c_penalty
    }
}

fn cohesion_from_sorted(sorted: &[f64], comm_range: f64, profile: &CostProfile) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mut weight = 1.0;
    let mut sum = 0.0;
    for &d in sorted {
        weight *= profile.alpha;
        sum += weight * cohesion_term(d, comm_range, profile.c_penalty);
    }
    (sum / sorted.len() as f64).min(1.0)
}

/// Combined separation/cohesion cost against predicted neighbor positions.
pub fn cohesion_cost(
    candidate: Vec3,
    predicted_neighbors: &[Vec3],
    comm_range: f64,
    profile: &CostProfile,
) -> f64 {
    const STACK: usize = 32;
    let n = predicted_neighbors.len();
    if n <= STACK {
        let mut buf = [0.0; STACK];
        for (slot, p) in buf.iter_mut().zip(predicted_neighbors) {
            *slot = candidate.distance(*p);
        }
        let d = &mut buf[..n];
        d.sort_unstable_by(f64::total_cmp);
        cohesion_from_sorted(d, comm_range, profile)
    } else {
        let mut d: Vec<f64> = predicted_neighbors.iter().map(|p| candidate.distance(*p)).collect();
        d.sort_unstable_by(f64::total_cmp);
        cohesion_from_sorted(&d, comm_range, profile)
    }
}

/// Altitude cost: zero at `z_min`, quadratic below it and (more gently) above it.
pub fn safety_cost(candidate_z: f64, profile: &CostProfile) -> f64 {
    let raw = if profile.z_min > candidate_z {
        (candidate_z / profile.z_min - 1.0).powi(2)
    } else {
        ((candidate_z - profile.z_min) / profile.z_max).powi(2)
    };
    raw.min(1.0)
}

/// Arctan-shaped cost of the distance to the goal tile center.
pub fn goal_cost(candidate: Vec3, goal_center: Vec3, profile: &CostProfile) -> f64 {
    (FRAC_2_PI * (candidate.distance(goal_center) / profile.c_dist).atan()).min(1.0)
}

/// Everything one receding-horizon solve needs.
#[derive(Debug, Clone)]
pub struct DecisionContext {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Per-axis acceleration limits of this agent.
    pub acc_limits: Vec3,
    /// Time to the horizon the candidate position refers to.
    pub horizon: f64,
    /// Neighbor positions predicted at the horizon.
    pub neighbors: Vec<Vec3>,
    /// Neighbor motion predicted at the start of the horizon. When present, separation
    /// is also checked at intermediate points of the path to the candidate.
    pub neighbor_paths: Vec<NeighborPath>,
    pub goal: Option<Vec3>,
    pub profile: CostProfile,
    pub comm_range: f64,
}

/// Constant-acceleration extrapolation over `dt`. An axis whose acceleration opposes
/// its velocity stops at zero velocity instead of reversing.
pub fn dead_reckon(p: Vec3, v: Vec3, a: Vec3, dt: f64) -> Vec3 {
    let (p, v, a) = (p.to_array(), v.to_array(), a.to_array());
    let mut out = [0.0; 3];
    for k in 0..3 {
        let t = if a[k] * v[k] < 0.0 { dt.min(-v[k] / a[k]) } else { dt };
        out[k] = p[k] + v[k] * t + 0.5 * a[k] * t * t + (v[k] + a[k] * t) * (dt - t);
    }
    Vec3::new(out[0], out[1], out[2])
}

/// Last reported neighbor motion, `elapsed` seconds old at the start of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborPath {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub elapsed: f64,
}

impl NeighborPath {
    /// Predicted position `s` seconds into the horizon.
    pub fn at(&self, s: f64) -> Vec3 {
        dead_reckon(self.position, self.velocity, self.acceleration, self.elapsed + s)
    }

    /// How far the neighbor may have strayed from the extrapolation since its report,
    /// had it switched to a different acceleration of magnitude `acc` right after.
    pub fn drift_bound(&self, acc: f64) -> f64 {
        0.5 * acc * self.elapsed * self.elapsed
    }
}

/// Fractions of the horizon at which the path to a candidate is checked. Each check
/// widens the separation by the neighbor's drift bound, so stale reports keep agents
/// further apart.
pub const PATH_CHECKS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

impl DecisionContext {
    /// Point reached at fraction `f` of the horizon when flying to `candidate` under
    /// constant acceleration.
    pub fn path_point(&self, candidate: Vec3, f: f64) -> Vec3 {
        let t = self.horizon;
        self.position + self.velocity * (f * t) + (candidate - self.position - self.velocity * t) * (f * f)
    }
    /// Per-axis reachable box at the horizon under constant bounded acceleration.
    pub fn reachable_box(&self) -> SearchBox {
        let t = self.horizon;
        let center = self.position + self.velocity * t;
        let half = self.acc_limits * (0.5 * t * t);
        SearchBox::new(center - half, center + half)
    }
}

/// Weighted sum of the priors. The goal term only exists while a goal is held.
pub fn objective(candidate: Vec3, ctx: &DecisionContext) -> f64 {
    let p = &ctx.profile;
    let mut total = 0.0;
    if p.w_eta != 0.0 {
        total += p.w_eta * cohesion_cost(candidate, &ctx.neighbors, ctx.comm_range, p);
    }
    if p.w_z != 0.0 {
        total += p.w_z * safety_cost(candidate.z, p);
    }
    if let Some(goal) = ctx.goal {
        if p.w_g != 0.0 {
            total += p.w_g * goal_cost(candidate, goal, p);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Sum of constraint excesses; zero iff feasible.
    pub violation: f64,
}

/// Total constraint violation: distance outside the reachable box plus, for each
/// predicted neighbor not strictly farther than `delta_min`, the shortfall. Along the
/// path the threshold grows with the age of each neighbor's report.
pub fn violation(candidate: Vec3, ctx: &DecisionContext) -> f64 {
    let b = ctx.reachable_box();
    let mut v = 0.0;
    for axis in 0..3 {
        let c = candidate[axis];
        v += (b.lower[axis] - c).max(0.0) + (c - b.upper[axis]).max(0.0);
    }
    let dmin = ctx.profile.delta_min;
    let dmin2 = dmin * dmin;
    for n in &ctx.neighbors {
        let d2 = candidate.distance_squared(*n);
        if d2 <= dmin2 {
            // exactly at the boundary still violates the strict inequality
            v += (dmin - d2.sqrt()).max(f64::MIN_POSITIVE);
        }
    }
    for f in PATH_CHECKS {
        let x = ctx.path_point(candidate, f);
        let s = f * ctx.horizon;
        for n in &ctx.neighbor_paths {
            let dm = dmin + n.drift_bound(ctx.acc_limits.x);
            let d2 = x.distance_squared(n.at(s));
            if d2 <= dm * dm {
                v += (dm - d2.sqrt()).max(f64::MIN_POSITIVE);
            }
        }
    }
    v
}

pub fn feasible(candidate: Vec3, ctx: &DecisionContext) -> Feasibility {
    let violation = violation(candidate, ctx);
    Feasibility {
        feasible: violation == 0.0,
        violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RC: f64 = 200.0;

    fn profile() -> CostProfile {
        CostProfile::default()
    }

    fn at_x(d: f64) -> Vec3 {
        Vec3::new(d, 0.0, 0.0)
    }

    #[test]
    fn cohesion_half_range_is_zero() {
        let p = CostProfile { alpha: 1.0, ..profile() };
        assert!(cohesion_cost(Vec3::ZERO, &[at_x(RC / 2.0)], RC, &p).abs() < 1e-12);
    }

    #[test]
    fn cohesion_beyond_three_quarters_is_penalty() {
        let p = CostProfile { alpha: 1.0, c_penalty: 0.75, ..profile() };
        let c = cohesion_cost(Vec3::ZERO, &[at_x(0.8 * RC)], RC, &p);
        assert!((c - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cohesion_two_neighbors_hand_value() {
        let p = CostProfile { alpha: 0.5, ..profile() };
        let c = cohesion_cost(Vec3::ZERO, &[at_x(RC / 2.0), at_x(RC / 4.0)], RC, &p);
        assert!((c - (-0.125)).abs() < 1e-12, "{c}");
    }

    #[test]
    fn cohesion_empty_and_coincident() {
        assert_eq!(cohesion_cost(Vec3::ZERO, &[], RC, &profile()), 0.0);
        let p = CostProfile { alpha: 1.0, ..profile() };
        let c = cohesion_cost(Vec3::ZERO, &[Vec3::ZERO, Vec3::ZERO], RC, &p);
        assert!((c + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cohesion_many_neighbors_uses_heap_path() {
        let p = CostProfile { alpha: 1.0, ..profile() };
        let ns: Vec<Vec3> = (0..40).map(|_| at_x(RC / 2.0)).collect();
        assert!(cohesion_cost(Vec3::ZERO, &ns, RC, &p).abs() < 1e-12);
    }

    #[test]
    fn safety_cost_values() {
        let p = profile();
        assert_eq!(safety_cost(p.z_min, &p), 0.0);
        assert!((safety_cost(0.0, &p) - 1.0).abs() < 1e-12);
        assert!((safety_cost(p.z_min + p.z_max, &p) - 1.0).abs() < 1e-12);
        assert_eq!(safety_cost(-50.0, &p), 1.0);
        assert_eq!(safety_cost(1e6, &p), 1.0);
    }

    #[test]
    fn goal_cost_values() {
        let p = profile();
        let g = Vec3::new(10.0, 20.0, 40.0);
        assert_eq!(goal_cost(g, g, &p), 0.0);
        let at_centroid = g + Vec3::new(p.c_dist, 0.0, 0.0);
        assert!((goal_cost(at_centroid, g, &p) - 0.5).abs() < 1e-12);
        let far = g + Vec3::new(1000.0 * p.c_dist, 0.0, 0.0);
        let oracle = (2.0 / std::f64::consts::PI) * 1000f64.atan();
        let c = goal_cost(far, g, &p);
        assert!((c - oracle).abs() < 1e-12);
        assert!((c - 0.99936).abs() < 1e-5 && c < 1.0);
    }

    fn ctx() -> DecisionContext {
        DecisionContext {
            position: Vec3::new(0.0, 0.0, 40.0),
            velocity: Vec3::new(2.0, 0.0, 0.0),
            acc_limits: Vec3::new(3.0, 3.0, 6.0),
            horizon: 0.05,
            neighbors: vec![],
            neighbor_paths: vec![],
            goal: None,
            profile: profile(),
            comm_range: RC,
        }
    }

    #[test]
    fn null_objective() {
        let mut c = ctx();
        c.profile.w_eta = 0.0;
        c.profile.w_z = 0.0;
        c.profile.w_g = 0.0;
        c.goal = Some(Vec3::new(100.0, 0.0, 40.0));
        c.neighbors = vec![Vec3::new(5.0, 5.0, 40.0)];
        assert_eq!(objective(Vec3::new(1.0, 2.0, 3.0), &c), 0.0);
    }

    #[test]
    fn goal_only_objective_is_zero_at_goal() {
        let mut c = ctx();
        c.profile.w_eta = 0.0;
        c.profile.w_z = 0.0;
        c.profile.w_g = 1.0;
        let g = Vec3::new(30.0, 0.0, 40.0);
        c.goal = Some(g);
        assert_eq!(objective(g, &c), 0.0);
    }

    #[test]
    fn weighted_sum_hand_check() {
        // components: cohesion 0.75 (single neighbor past 0.75 r_c, alpha 1),
        // safety 1 (z = 0), goal 0.5 (distance = c_dist)
        let mut c = ctx();
        c.profile = CostProfile {
            w_eta: 0.5,
            w_z: 0.3,
            w_g: 0.2,
            alpha: 1.0,
            c_penalty: 0.75,
            ..profile()
        };
        let cand = Vec3::new(0.0, 0.0, 0.0);
        c.neighbors = vec![Vec3::new(0.8 * RC, 0.0, 0.0)];
        c.goal = Some(Vec3::new(0.0, c.profile.c_dist, 0.0));
        assert!((objective(cand, &c) - 0.775).abs() < 1e-12);
    }

    #[test]
    fn goal_term_omitted_without_goal() {
        let mut c = ctx();
        let cand = Vec3::new(0.0, 0.0, c.profile.z_min);
        assert_eq!(objective(cand, &c), 0.0);
        c.goal = Some(Vec3::new(500.0, 0.0, 40.0));
        assert!(objective(cand, &c) > 0.0);
    }

    #[test]
    fn ballistic_point_is_feasible() {
        let c = ctx();
        let f = feasible(c.position + c.velocity * c.horizon, &c);
        assert!(f.feasible);
        assert_eq!(f.violation, 0.0);
    }

    #[test]
    fn coincident_neighbor_violates_by_delta_min() {
        let mut c = ctx();
        c.profile.delta_min = 10.0;
        let cand = c.position + c.velocity * c.horizon;
        c.neighbors = vec![cand];
        let f = feasible(cand, &c);
        assert!(!f.feasible);
        assert!((f.violation - 10.0).abs() < 1e-12);
    }

    #[test]
    fn braking_axis_stops_instead_of_reversing() {
        let p = dead_reckon(Vec3::ZERO, Vec3::new(6.0, 0.0, 0.0), Vec3::new(-3.0, 0.0, 0.0), 5.0);
        // stops after 2 s having covered 6 m
        assert!((p.x - 6.0).abs() < 1e-12);
        let p = dead_reckon(Vec3::ZERO, Vec3::new(6.0, 0.0, 0.0), Vec3::new(-3.0, 0.0, 0.0), 1.0);
        assert!((p.x - 4.5).abs() < 1e-12);
        let p = dead_reckon(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), 2.0);
        assert!((p.x - 6.0).abs() < 1e-12);
    }

    #[test]
    fn path_through_a_neighbor_is_infeasible() {
        let mut c = ctx();
        c.horizon = 2.0;
        c.position = Vec3::new(0.0, 0.0, 40.0);
        c.velocity = Vec3::new(20.0, 0.0, 0.0);
        c.acc_limits = Vec3::new(3.0, 3.0, 6.0);
        c.profile.delta_min = 5.0;
        let cand = Vec3::new(40.0, 0.0, 40.0);
        // a hovering neighbor halfway along the straight path
        let n = Vec3::new(20.0, 0.0, 40.0);
        assert!(feasible(cand, &c).feasible);
        c.neighbor_paths = vec![NeighborPath {
            position: n,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            elapsed: 0.0,
        }];
        let f = feasible(cand, &c);
        assert!(!f.feasible);
        assert!((f.violation - 5.0).abs() < 1e-9);
        assert_eq!(c.path_point(cand, 0.0), c.position);
        assert_eq!(c.path_point(cand, 1.0), cand);
    }

    #[test]
    fn stale_reports_widen_the_separation() {
        let mut c = ctx();
        c.horizon = 2.0;
        c.position = Vec3::new(0.0, 0.0, 40.0);
        c.velocity = Vec3::ZERO;
        c.acc_limits = Vec3::new(3.0, 3.0, 6.0);
        c.profile.delta_min = 5.0;
        let cand = c.position;
        let mut n = NeighborPath {
            position: Vec3::new(8.0, 0.0, 40.0),
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            elapsed: 0.0,
        };
        c.neighbor_paths = vec![n];
        assert!(feasible(cand, &c).feasible);
        n.elapsed = 3.0;
        assert!((n.drift_bound(3.0) - 13.5).abs() < 1e-12);
        c.neighbor_paths = vec![n];
        assert!(!feasible(cand, &c).feasible);
    }

    #[test]
    fn exact_separation_is_infeasible() {
        let mut c = ctx();
        c.profile.delta_min = 10.0;
        let cand = c.position + c.velocity * c.horizon;
        c.neighbors = vec![cand + Vec3::new(10.0, 0.0, 0.0)];
        assert!(!feasible(cand, &c).feasible);
        c.neighbors = vec![cand + Vec3::new(10.000001, 0.0, 0.0)];
        assert!(feasible(cand, &c).feasible);
    }

    #[test]
    fn far_candidate_is_unreachable() {
        let c = ctx();
        let b = c.reachable_box();
        // half width along x: 0.5 * 3 * 0.05^2
        assert!((b.upper.x - b.lower.x - 3.0 * 0.0025).abs() < 1e-15);
        let f = feasible(c.position + Vec3::new(1000.0, 0.0, 0.0), &c);
        assert!(!f.feasible);
        assert!(f.violation > 999.0);
    }
}
