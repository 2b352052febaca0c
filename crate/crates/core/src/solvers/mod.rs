//! Min-power and max-min-SINDR power control.
//!
//! Three min-power solvers share [`PowerControlProblem`] and [`SolveResult`]:
//! a primal-dual gradient method, the parallel fixed-point update and a
//! cyclic per-UE line search (BCD). [`dither`] searches BS noise levels on a
//! grid around any of them and [`max_min`] bisects on a common target.

pub mod bcd;
pub mod dither;
pub mod fixed_point;
pub mod gradient;
pub mod max_min;

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bussgang::{evaluate_sindr, OperatingPoint, SindrEvaluation};
use crate::error::{Error, Result};
use crate::scenario::ChannelSet;

pub use bcd::solve_bcd;
pub use dither::{best_dither_for_powers, dither_candidates, dither_search, farthest_bs};
pub use fixed_point::solve_fixed_point;
pub use gradient::solve_gradient;
pub use max_min::{solve_max_min, solve_max_min_dithered, MaxMinOutcome};

/// `x_k` each UE starts from in isolation when no initial powers are given.
pub const ISOLATED_START_X: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gradient,
    FixedPoint,
    Bcd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Gradient, SolverKind::FixedPoint, SolverKind::Bcd];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gradient => "gradient",
            SolverKind::FixedPoint => "fixed-point",
            SolverKind::Bcd => "bcd",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(SolverKind::Gradient),
            "fixed-point" | "fixed_point" => Ok(SolverKind::FixedPoint),
            "bcd" => Ok(SolverKind::Bcd),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerControlProblem {
    /// Linear SINDR targets; a zero target switches the UE off.
    pub targets: Vec<f64>,
    /// Starting powers in mW; `None` uses [`isolated_start_powers`].
    pub initial_powers: Option<Vec<f64>>,
    /// Per-UE power cap in mW.
    pub max_power: f64,
    /// Absolute SINDR tolerance.
    pub epsilon: f64,
    /// Line-search resolution in dB.
    pub delta_rho_db: f64,
    /// Primal step of the gradient method, in units of the reference power.
    pub step_zeta: f64,
    /// Dual step of the gradient method.
    pub step_eta: f64,
    pub max_iters: usize,
    /// Candidate noise levels in dB above the noise floor.
    pub dither_grid_db: Vec<f64>,
}

pub fn default_epsilon(targets: &[f64]) -> f64 {
    let top = targets.iter().copied().fold(0.0, f64::max);
    (0.0125 * top).max(1e-3)
}

pub fn default_dither_grid() -> Vec<f64> {
    (0..=15).map(|i| 3.0 * i as f64).collect()
}

impl PowerControlProblem {
    pub fn new(targets: Vec<f64>, max_power: f64) -> Self {
        let epsilon = default_epsilon(&targets);
        PowerControlProblem {
            targets,
            initial_powers: None,
            max_power,
            epsilon,
            delta_rho_db: 0.1,
            step_zeta: 1.0,
            step_eta: 1.0,
            max_iters: 5000,
            dither_grid_db: default_dither_grid(),
        }
    }

    /// Same problem with a common target for every UE.
    pub fn with_common_target(&self, gamma: f64) -> Self {
        let mut next = self.clone();
        next.targets = vec![gamma; self.targets.len()];
        next
    }

    pub fn validate(&self, channels: &ChannelSet) -> Result<()> {
        let k = channels.num_ues();
        if self.targets.len() != k {
            return Err(Error::invalid(format!("{} targets for {k} UEs", self.targets.len())));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid(format!("targets must be finite and >= 0, got {t}")));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.delta_rho_db > 0.0) {
            return Err(Error::invalid("delta_rho must be positive"));
        }
        if !(self.max_power > 0.0) || self.max_power.is_nan() {
            return Err(Error::invalid("max_power must be positive"));
        }
        if !(self.step_zeta >= 0.0) || !(self.step_eta >= 0.0) {
            return Err(Error::invalid("step sizes must be >= 0"));
        }
        if let Some(init) = &self.initial_powers {
            if init.len() != k {
                return Err(Error::invalid(format!("{} initial powers for {k} UEs", init.len())));
            }
            if init.iter().any(|p| !(*p >= 0.0) || *p > self.max_power) {
                return Err(Error::invalid("initial powers must lie in [0, max_power]"));
            }
        }
        Ok(())
    }

    pub(crate) fn thresholds(&self) -> Vec<f64> {
        self.targets.iter().map(|g| g / (g + 1.0)).collect()
    }

    pub(crate) fn active(&self) -> Vec<bool> {
        self.targets.iter().map(|g| *g > 0.0).collect()
    }

    /// All active UEs within `epsilon` of their targets.
    pub(crate) fn met(&self, sindr: &[f64]) -> bool {
        self.targets
            .iter()
            .zip(sindr)
            .all(|(g, s)| *g == 0.0 || (s - g).abs() <= self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Achieved,
    Infeasible,
    MaxIterations,
}

impl SolveStatus {
    pub fn code(self) -> f64 {
        match self {
            SolveStatus::Achieved => 1.0,
            SolveStatus::Infeasible => 0.0,
            SolveStatus::MaxIterations => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub powers: Vec<f64>,
    pub min_sindr: f64,
    /// UE whose update could not reach its target in this iteration.
    pub failed_ue: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub powers: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub achieved_sindr: Vec<f64>,
    /// Dual variables in `1/mW` (gradient method only).
    pub duals: Option<Vec<f64>>,
    pub status: SolveStatus,
    pub trace: Vec<TraceEntry>,
    pub failed_ue: Option<usize>,
    pub iterations: usize,
    /// Number of SINDR evaluations spent.
    pub evaluations: usize,
}

impl SolveResult {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn min_sindr(&self) -> f64 {
        self.achieved_sindr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn achieved(&self) -> bool {
        self.status == SolveStatus::Achieved
    }
}

/// Counts SINDR evaluations for a fixed channel and noise configuration.
pub(crate) struct Evaluator<'a> {
    pub channels: &'a ChannelSet,
    pub noise_levels: Vec<f64>,
    pub count: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(channels: &'a ChannelSet, noise_levels: &[f64]) -> Result<Self> {
        if noise_levels.len() != channels.num_bs() {
            return Err(Error::invalid(format!(
                "{} noise levels for {} BSs",
                noise_levels.len(),
                channels.num_bs()
            )));
        }
        Ok(Evaluator {
            channels,
            noise_levels: noise_levels.to_vec(),
            count: 0,
        })
    }

    pub fn point(&self, powers: &[f64]) -> OperatingPoint {
        OperatingPoint::new(powers.to_vec(), self.noise_levels.clone())
    }

    pub fn eval(&mut self, powers: &[f64]) -> Result<SindrEvaluation> {
        self.count += 1;
        evaluate_sindr(self.channels, &self.point(powers))
    }
}

/// Powers at which each UE alone reaches `x_k = ISOLATED_START_X`, capped at
/// `max_power`.
///
/// Starts from the low-SNR linearization `x ~ 2/pi rho sum_i |h_k(i)|^2 / sigma_i^2`
/// and applies one multiplicative correction with the exact `x`.
pub fn isolated_start_powers(channels: &ChannelSet, noise_levels: &[f64], max_power: f64) -> Result<Vec<f64>> {
    let mut ev = Evaluator::new(channels, noise_levels)?;
    isolated_start(&mut ev, max_power)
}

pub(crate) fn isolated_start(ev: &mut Evaluator<'_>, max_power: f64) -> Result<Vec<f64>> {
    let nk = ev.channels.num_ues();
    let mut out = Vec::with_capacity(nk);
    for k in 0..nk {
        let lin: f64 = (0..ev.channels.dim())
            .map(|i| ev.channels.h[(i, k)].norm_sqr() / ev.noise_levels[ev.channels.bs_of_row(i)])
            .sum::<f64>()
            * FRAC_2_PI;
        if !(lin > 0.0) {
            out.push(max_power);
            continue;
        }
        let guess = ISOLATED_START_X / lin;
        let mut powers = vec![0.0; nk];
        powers[k] = guess;
        let x = ev.eval(&powers)?.x[k];
        let refined = if x > 0.0 { guess * ISOLATED_START_X / x } else { guess };
        out.push(refined.min(max_power));
    }
    Ok(out)
}

pub(crate) fn start_powers(problem: &PowerControlProblem, ev: &mut Evaluator<'_>) -> Result<Vec<f64>> {
    let mut powers = match &problem.initial_powers {
        Some(p) => p.clone(),
        None => isolated_start(ev, problem.max_power)?,
    };
    for (p, g) in powers.iter_mut().zip(&problem.targets) {
        if *g == 0.0 {
            *p = 0.0;
        }
    }
    Ok(powers)
}

pub fn solve_min_power(
    kind: SolverKind,
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_levels: &[f64],
) -> Result<SolveResult> {
    match kind {
        SolverKind::Gradient => solve_gradient(problem, channels, noise_levels),
        SolverKind::FixedPoint => solve_fixed_point(problem, channels, noise_levels),
        SolverKind::Bcd => solve_bcd(problem, channels, noise_levels),
    }
}

pub(crate) fn finish(
    ev: &Evaluator<'_>,
    powers: Vec<f64>,
    eval: SindrEvaluation,
    status: SolveStatus,
    trace: Vec<TraceEntry>,
    failed_ue: Option<usize>,
    iterations: usize,
    duals: Option<Vec<f64>>,
) -> SolveResult {
    SolveResult {
        powers,
        noise_levels: ev.noise_levels.clone(),
        achieved_sindr: eval.sindr,
        duals,
        status,
        trace,
        failed_ue,
        iterations,
        evaluations: ev.count,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::scenario::{draw_channels, ChannelSet, ScenarioConfig};

    /// One BS with `M` antennas and `K` UEs at `d` metres.
    pub fn single_bs(m: usize, k: usize, d: f64, seed: u64) -> (ChannelSet, f64) {
        let cfg = ScenarioConfig::new(vec![[0.0, 0.0]], m, vec![[d, 0.0]; k]);
        (draw_channels(&cfg, seed).unwrap(), cfg.noise_floor_mw())
    }

    /// Two BSs 100 m apart with `K` co-located UEs at `d` metres from BS 0.
    pub fn two_bs(m: usize, k: usize, d: f64, seed: u64) -> (ChannelSet, f64) {
        let cfg = ScenarioConfig::new(vec![[0.0, 0.0], [100.0, 0.0]], m, vec![[d, 0.0]; k]);
        (draw_channels(&cfg, seed).unwrap(), cfg.noise_floor_mw())
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::single_bs;
    use super::*;

    #[test]
    fn problem_validation() {
        let (ch, _) = single_bs(4, 2, 30.0, 1);
        let p = PowerControlProblem::new(vec![2.0, 3.0], 1.0);
        assert!(p.validate(&ch).is_ok());
        assert!(PowerControlProblem::new(vec![2.0], 1.0).validate(&ch).is_err());
        assert!(PowerControlProblem::new(vec![-1.0, 2.0], 1.0).validate(&ch).is_err());
        let mut bad = p.clone();
        bad.delta_rho_db = 0.0;
        assert!(bad.validate(&ch).is_err());
        let mut bad = p.clone();
        bad.initial_powers = Some(vec![0.5, 2.0]);
        assert!(bad.validate(&ch).is_err());
        let mut bad = p;
        bad.epsilon = 0.0;
        assert!(bad.validate(&ch).is_err());
    }

    #[test]
    fn isolated_start_hits_small_x() {
        let (ch, s) = single_bs(32, 3, 30.0, 2);
        let powers = isolated_start_powers(&ch, &[s], 1e3).unwrap();
        for k in 0..3 {
            let mut alone = vec![0.0; 3];
            alone[k] = powers[k];
            let ev = evaluate_sindr(&ch, &OperatingPoint::new(alone, vec![s])).unwrap();
            assert!((ev.x[k] / ISOLATED_START_X - 1.0).abs() < 1e-3, "{}", ev.x[k]);
        }
    }

    #[test]
    fn solver_kind_parsing() {
        for kind in SolverKind::ALL {
            assert_eq!(kind.name().parse::<SolverKind>().unwrap(), kind);
        }
        assert!("newton".parse::<SolverKind>().is_err());
    }
}
