//! Differential evolution (DE/rand/1/bin) with feasibility-rule selection.
//!
//! Candidates are compared feasible-first: a feasible point beats any infeasible
//! one, two feasible points compare by objective and two infeasible points by
//! total violation. On exact ties the incumbent is kept.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl SearchBox {
    pub fn new(lower: Vec3, upper: Vec3) -> Self {
        debug_assert!(lower.x <= upper.x && lower.y <= upper.y && lower.z <= upper.z);
        SearchBox { lower, upper }
    }

    pub fn center(&self) -> Vec3 {
        (self.lower + self.upper) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| self.lower[i] <= p[i] && p[i] <= self.upper[i])
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        p.clamp(self.lower, self.upper)
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let lo = self.lower;
        let span = self.upper - self.lower;
        Vec3::new(
            lo.x + rng.random::<f64>() * span.x,
            lo.y + rng.random::<f64>() * span.y,
            lo.z + rng.random::<f64>() * span.z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DEParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub seed: u64,
}

impl Default for DEParams {
    fn default() -> Self {
        DEParams {
            population_size: 24,
            max_generations: 40,
            differential_weight: 0.5,
            crossover_rate: 0.9,
            seed: 0,
        }
    }
}

impl DEParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::config("de.population_size", "must be at least 4"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("de.crossover_rate", "must lie in [0, 1]"));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight < 2.0) {
            return Err(Error::config(
                "de.differential_weight",
                "must lie in (0, 2)",
            ));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        DEParams { seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub point: Vec3,
    pub value: f64,
    pub violation: f64,
    pub feasible: bool,
}

impl Solution {
    /// Feasibility ordering: strictly better than `other`.
    pub fn beats(&self, other: &Solution) -> bool {
        match (self.violation == 0.0, other.violation == 0.0) {
            (true, true) => self.value < other.value,
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.violation < other.violation,
        }
    }
}

/// Minimizes `objective` subject to `violation(x) == 0` over `bx`.
///
/// Always returns a point inside the box; `feasible` reports whether any
/// zero-violation point was found.
pub fn minimize<F, C>(objective: F, violation: C, bx: &SearchBox, params: &DEParams) -> Solution
where
    F: FnMut(Vec3) -> f64,
    C: FnMut(Vec3) -> f64,
{
    minimize_traced(objective, violation, bx, params, |_, _| {})
}

/// As [`minimize`], with the first population members replaced by `hints`
/// (clamped into the box), e.g. the previous step's solution.
pub fn minimize_hinted<F, C>(
    objective: F,
    violation: C,
    bx: &SearchBox,
    params: &DEParams,
    hints: &[Vec3],
) -> Solution
where
    F: FnMut(Vec3) -> f64,
    C: FnMut(Vec3) -> f64,
{
    run(objective, violation, bx, params, hints, |_, _| {})
}

/// As [`minimize`], calling `on_generation(generation, incumbent)` after the initial
/// population (generation 0) and after every generation.
pub fn minimize_traced<F, C, T>(
    objective: F,
    violation: C,
    bx: &SearchBox,
    params: &DEParams,
    on_generation: T,
) -> Solution
where
    F: FnMut(Vec3) -> f64,
    C: FnMut(Vec3) -> f64,
    T: FnMut(usize, &Solution),
{
    run(objective, violation, bx, params, &[], on_generation)
}

fn run<F, C, T>(
    mut objective: F,
    mut violation: C,
    bx: &SearchBox,
    params: &DEParams,
    hints: &[Vec3],
    mut on_generation: T,
) -> Solution
where
    F: FnMut(Vec3) -> f64,
    C: FnMut(Vec3) -> f64,
    T: FnMut(usize, &Solution),
{
    let mut rng = SimRng::seed_from_u64(params.seed);
    let np = params.population_size.max(4);
    let mut eval = |p: Vec3| {
        let v = violation(p);
        Solution {
            point: p,
            value: objective(p),
            violation: v,
            feasible: v == 0.0,
        }
    };

    let mut pop: Vec<Solution> = (0..np)
        .map(|i| {
            let p = bx.sample(&mut rng);
            eval(hints.get(i).map_or(p, |h| bx.clamp(*h)))
        })
        .collect();
    let mut best = pop[0];
    for s in &pop[1..] {
        if s.beats(&best) {
            best = *s;
        }
    }
    on_generation(0, &best);

    let f = params.differential_weight;
    let cr = params.crossover_rate;
    let mut next = pop.clone();
    for generation in 1..=params.max_generations {
        for i in 0..np {
            let (r1, r2, r3) = distinct_three(&mut rng, np, i);
            let (a, b, c) = (pop[r1].point, pop[r2].point, pop[r3].point);
            let mutant = a + (b - c) * f;
            let target = pop[i].point;
            let forced = rng.random_range(0..3usize);
            let mut trial = [0.0; 3];
            for (axis, slot) in trial.iter_mut().enumerate() {
                *slot = if axis == forced || rng.random::<f64>() < cr {
                    mutant[axis]
                } else {
                    target[axis]
                };
            }
            let candidate = eval(bx.clamp(Vec3::from(trial)));
            next[i] = if candidate.beats(&pop[i]) { candidate } else { pop[i] };
            if next[i].beats(&best) {
                best = next[i];
            }
        }
        std::mem::swap(&mut pop, &mut next);
        on_generation(generation, &best);
    }
    best
}

fn distinct_three(rng: &mut impl Rng, n: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let r = rng.random_range(0..n);
        if r != exclude && !taken.contains(&r) {
            return r;
        }
    };
    let r1 = pick(&[]);
    let r2 = pick(&[r1]);
    let r3 = pick(&[r1, r2]);
    (r1, r2, r3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> SearchBox {
        SearchBox::new(Vec3::ZERO, Vec3::splat(1.0))
    }

    #[test]
    fn convex_bowl_finds_center() {
        let bx = SearchBox::new(Vec3::new(-3.0, 1.0, 10.0), Vec3::new(5.0, 2.0, 14.0));
        let c = bx.center();
        let diag = (bx.upper - bx.lower).norm();
        let s = minimize(|p| p.distance_squared(c), |_| 0.0, &bx, &DEParams::default());
        assert!(s.feasible);
        assert!(s.point.distance(c) <= 1e-3 * diag, "{:?}", s.point);
    }

    #[test]
    fn linear_objective_hits_boundary() {
        let s = minimize(|p| p.x, |_| 0.0, &unit_box(), &DEParams::default());
        assert!(s.point.x < 1e-3, "{:?}", s.point);
    }

    #[test]
    fn degenerate_axes_stay_pinned() {
        let bx = SearchBox::new(Vec3::new(0.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0));
        let s = minimize(|p| (p.x - 0.25).abs(), |_| 0.0, &bx, &DEParams::default());
        assert_eq!((s.point.y, s.point.z), (2.0, 3.0));
        assert!((s.point.x - 0.25).abs() < 1e-3);
    }

    #[test]
    fn infeasible_everywhere_reports_least_violation() {
        let s = minimize(|p| p.x, |p| 2.0 - p.y, &unit_box(), &DEParams::default());
        assert!(!s.feasible);
        assert!((s.point.y - 1.0).abs() < 1e-3);
    }

    #[test]
    fn incumbent_never_worsens() {
        let bx = SearchBox::new(Vec3::splat(-10.0), Vec3::splat(10.0));
        let mut trace: Vec<Solution> = Vec::new();
        minimize_traced(
            |p| p.norm(),
            |p| (5.0 - p.norm()).max(0.0),
            &bx,
            &DEParams::default().with_seed(9),
            |_, s| trace.push(*s),
        );
        assert_eq!(trace.len(), DEParams::default().max_generations + 1);
        for w in trace.windows(2) {
            assert!(!w[0].beats(&w[1]), "incumbent regressed");
        }
    }

    #[test]
    fn same_seed_same_point() {
        let bx = SearchBox::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        let run = |seed| {
            minimize(
                |p| (p.x - 0.3).powi(2) + p.y.sin() + p.z * p.z,
                |_| 0.0,
                &bx,
                &DEParams::default().with_seed(seed),
            )
            .point
        };
        assert_eq!(run(4).to_array(), run(4).to_array());
        assert_ne!(run(4).to_array(), run(5).to_array());
    }

    #[test]
    fn params_validation() {
        assert!(DEParams::default().validate().is_ok());
        assert!(DEParams { population_size: 3, ..Default::default() }.validate().is_err());
        assert!(DEParams { differential_weight: 2.0, ..Default::default() }.validate().is_err());
        assert!(DEParams { crossover_rate: 1.5, ..Default::default() }.validate().is_err());
    }
}
