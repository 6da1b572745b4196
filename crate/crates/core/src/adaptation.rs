//! Adaptive simulated annealing over the five adaptable profile parameters.
//!
//! Proposals are drawn uniformly from the bounds box shifted to the incumbent and
//! scaled by `T_C / T_0`, so the search contracts as the temperature falls and
//! widens again at every re-anneal.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostProfile, THETA_NAMES};
use crate::rng::{self, SimRng};
use crate::trial::{run_setup, TrialSetup};
use crate::{Error, Result};

/// Per-parameter `[min, max]`, in profile parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaBounds {
    pub w_eta: [f64; 2],
    pub w_z: [f64; 2],
    pub w_g: [f64; 2],
    pub delta_min: [f64; 2],
    pub c_penalty: [f64; 2],
}

impl Default for ThetaBounds {
    fn default() -> Self {
        ThetaBounds {
            w_eta: [0.0, 1.0],
            w_z: [0.0, 1.0],
            w_g: [0.0, 1.0],
            delta_min: [0.0, 100.0],
            c_penalty: [0.0, 1.0],
        }
    }
}

impl ThetaBounds {
    pub fn as_array(&self) -> [[f64; 2]; 5] {
        [self.w_eta, self.w_z, self.w_g, self.delta_min, self.c_penalty]
    }

    pub fn lower(&self) -> [f64; 5] {
        self.as_array().map(|b| b[0])
    }

    pub fn upper(&self) -> [f64; 5] {
        self.as_array().map(|b| b[1])
    }

    pub fn clamp(&self, theta: [f64; 5]) -> [f64; 5] {
        let b = self.as_array();
        std::array::from_fn(|i| theta[i].clamp(b[i][0], b[i][1]))
    }

    pub fn validate(&self) -> Result<()> {
        let outer = ThetaBounds::default().as_array();
        for (i, [lo, hi]) in self.as_array().into_iter().enumerate() {
            let key = format!("asa.bounds.{}", THETA_NAMES[i]);
            if !(lo <= hi && lo >= outer[i][0] && hi <= outer[i][1]) {
                return Err(Error::config(
                    key,
                    format!("need {} <= min <= max <= {}", outer[i][0], outer[i][1]),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsaConfig {
    pub max_trials: usize,
    pub temperature_decay: f64,
    pub reanneal_period: usize,
    pub bounds: ThetaBounds,
    pub trials_per_eval: usize,
    pub seed: u64,
}

impl Default for AsaConfig {
    fn default() -> Self {
        AsaConfig {
            max_trials: 50,
            temperature_decay: 0.95,
            reanneal_period: 25,
            bounds: ThetaBounds::default(),
            trials_per_eval: 1,
            seed: 0,
        }
    }
}

impl AsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_decay > 0.0 && self.temperature_decay < 1.0) {
            return Err(Error::config("asa.temperature_decay", "must lie in (0, 1)"));
        }
        if self.reanneal_period == 0 {
            return Err(Error::config("asa.reanneal_period", "must be at least 1"));
        }
        if self.trials_per_eval == 0 {
            return Err(Error::config("asa.trials_per_eval", "must be at least 1"));
        }
        self.bounds.validate()
    }

    /// Temperature at iteration `i`, restarting from `T_0` every re-anneal period.
    pub fn temperature(&self, i: usize) -> f64 {
        let t0 = initial_temperature(self.max_trials, self.temperature_decay);
        t0 * self.temperature_decay.powi((i % self.reanneal_period) as i32)
    }
}

/// `decay^(-max_trials)`.
pub fn initial_temperature(max_trials: usize, decay: f64) -> f64 {
    decay.powf(-(max_trials as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsaState {
    /// Accepted incumbent the proposals are centered on.
    pub current: [f64; 5],
    pub e_min: f64,
    pub e_prev: f64,
    pub temperature: f64,
    pub iteration: usize,
}

impl AsaState {
    pub fn new(start: [f64; 5], t0: f64) -> Self {
        AsaState {
            current: start,
            e_min: f64::INFINITY,
            e_prev: f64::INFINITY,
            temperature: t0,
            iteration: 0,
        }
    }
}

/// Draws a candidate around the incumbent; the spread is the bounds box scaled by
/// `temperature / t0`.
pub fn propose(state: &AsaState, bounds: &ThetaBounds, t0: f64, rng: &mut impl Rng) -> [f64; 5] {
    let scale = state.temperature / t0;
    let b = bounds.as_array();
    let theta = std::array::from_fn(|i| {
        let w = state.current[i];
        let lo = (b[i][0] - w) * scale;
        let hi = (b[i][1] - w) * scale;
        let y = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        w + y
    });
    bounds.clamp(theta)
}

/// Acceptance test. Updates the incumbent on acceptance and `e_prev` always.
pub fn accept(e_candidate: f64, candidate: [f64; 5], state: &mut AsaState, rng: &mut impl Rng) -> bool {
    let v: f64 = rng.random();
    let metropolis = ((state.e_prev - e_candidate) / state.temperature).exp();
    let accepted = e_candidate < state.e_min || metropolis > v;
    if accepted {
        state.current = candidate;
        state.e_min = state.e_min.min(e_candidate);
    }
    state.e_prev = e_candidate;
    accepted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub temperature: f64,
    pub w_eta: f64,
    pub w_z: f64,
    pub w_g: f64,
    pub delta_min: f64,
    pub c_penalty: f64,
    pub e_c: f64,
    pub accepted: bool,
    pub best_e_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResult {
    pub initial_profile: CostProfile,
    pub initial_e_c: f64,
    pub best_profile: CostProfile,
    pub best_e_c: f64,
    pub trace: Vec<TraceRow>,
}

/// Anneals starting from `initial`. `evaluate(iteration, profile)` scores a profile;
/// iteration `None` is the initial profile, which also seeds the incumbent.
/// `on_row` sees each trace row as soon as it exists.
pub fn run_adaptation<E, R>(asa: &AsaConfig, initial: CostProfile, mut evaluate: E, mut on_row: R) -> Result<AdaptationResult>
where
    E: FnMut(Option<usize>, &CostProfile) -> Result<f64>,
    R: FnMut(&TraceRow),
{
    asa.validate()?;
    let t0 = initial_temperature(asa.max_trials, asa.temperature_decay);
    let mut rng: SimRng = rng::stream(asa.seed, &[rng::tag::ASA]);
    let start = asa.bounds.clamp(initial.theta());
    let mut state = AsaState::new(start, t0);
    let initial_e_c = evaluate(None, &initial)?;
    state.e_min = initial_e_c;
    state.e_prev = initial_e_c;
    let mut best = (initial, initial_e_c);
    let mut trace = Vec::with_capacity(asa.max_trials);
    for i in 0..asa.max_trials {
        state.iteration = i;
        state.temperature = asa.temperature(i);
        let theta = propose(&state, &asa.bounds, t0, &mut rng);
        let profile = initial.with_theta(theta);
        let e = evaluate(Some(i), &profile)?;
        let accepted = accept(e, theta, &mut state, &mut rng);
        if e < best.1 {
            best = (profile, e);
        }
        let row = TraceRow {
            iteration: i,
            temperature: state.temperature,
            w_eta: theta[0],
            w_z: theta[1],
            w_g: theta[2],
            delta_min: theta[3],
            c_penalty: theta[4],
            e_c: e,
            accepted,
            best_e_c: best.1,
        };
        on_row(&row);
        trace.push(row);
    }
    Ok(AdaptationResult {
        initial_profile: initial,
        initial_e_c,
        best_profile: best.0,
        best_e_c: best.1,
        trace,
    })
}

/// Seeds of the trials scoring one evaluation. Every iteration has its own fixed set.
pub fn evaluation_seeds(asa: &AsaConfig, iteration: Option<usize>) -> Vec<u64> {
    let it = iteration.map_or(u64::MAX, |i| i as u64);
    (0..asa.trials_per_eval as u64)
        .map(|k| rng::derive_seed(asa.seed, &[rng::tag::ASA_EVAL, it, k]))
        .collect()
}

/// Mean heuristic of `setup` with `profile` over the given seeds.
pub fn evaluate_profile(setup: &TrialSetup, profile: &CostProfile, seeds: &[u64]) -> Result<f64> {
    let setup = TrialSetup {
        profile: *profile,
        ..setup.clone()
    };
    let scores: Vec<f64> = seeds
        .par_iter()
        .map(|&s| run_setup(&setup, s).map(|o| o.heuristic))
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Adapts the profile of `setup` by running trials.
pub fn adapt_scenario<R: FnMut(&TraceRow)>(asa: &AsaConfig, setup: &TrialSetup, on_row: R) -> Result<AdaptationResult> {
    run_adaptation(
        asa,
        setup.profile,
        |it, p| evaluate_profile(setup, p, &evaluation_seeds(asa, it)),
        on_row,
    )
}
