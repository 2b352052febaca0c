//! Max-min SINDR by bisection on a common target, with a min-power solver as
//! the feasibility oracle.

use super::dither::dither_candidates;
use super::{default_epsilon, isolated_start_powers, solve_min_power, PowerControlProblem, SolveResult, SolverKind};
use crate::bussgang::{evaluate_sindr, OperatingPoint};
use crate::error::{Error, Result};
use crate::scenario::{db_to_linear, ChannelSet};

/// Maximum number of times the upper bracket is doubled.
const MAX_DOUBLINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinOutcome {
    /// Largest common target found feasible (0 if none).
    pub gamma: f64,
    /// Min-power solution at `gamma`.
    pub result: SolveResult,
    /// Number of feasibility solves.
    pub probes: usize,
}

/// Best SINDR any single UE reaches alone on a 1 dB grid up to the cap.
fn single_ue_ceiling(channels: &ChannelSet, noise: &[f64], max_power: f64) -> Result<f64> {
    let nk = channels.num_ues();
    let start = isolated_start_powers(channels, noise, max_power)?;
    let mut best: f64 = 0.0;
    for k in 0..nk {
        let mut p = start[k];
        loop {
            let mut powers = vec![0.0; nk];
            powers[k] = p.min(max_power);
            let s = evaluate_sindr(channels, &OperatingPoint::new(powers, noise.to_vec()))?.sindr[k];
            best = best.max(s);
            if p >= max_power {
                break;
            }
            p *= db_to_linear(1.0);
        }
    }
    Ok(best)
}

fn probe(
    kind: SolverKind,
    base: &PowerControlProblem,
    channels: &ChannelSet,
    noise: &[f64],
    gamma: f64,
    warm: Option<&[f64]>,
) -> Result<SolveResult> {
    let mut p = base.with_common_target(gamma);
    p.epsilon = default_epsilon(&p.targets);
    p.initial_powers = warm.map(|w| w.iter().map(|v| v.min(base.max_power)).collect());
    solve_min_power(kind, &p, channels, noise)
}

fn trivial(kind: SolverKind, base: &PowerControlProblem, channels: &ChannelSet, noise: &[f64]) -> Result<SolveResult> {
    let mut p = base.with_common_target(0.0);
    p.initial_powers = None;
    solve_min_power(kind, &p, channels, noise)
}

/// Bisection from a known-feasible `lo` (with its solution) towards `hi`.
fn bisect(
    kind: SolverKind,
    base: &PowerControlProblem,
    channels: &ChannelSet,
    noise: &[f64],
    tol: f64,
    mut lo: f64,
    mut lo_result: Option<SolveResult>,
    mut hi: f64,
    mut probes: usize,
) -> Result<MaxMinOutcome> {
    let mut hi_confirmed = false;
    let mut doublings = 0;
    loop {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let warm = lo_result.as_ref().map(|r| r.powers.clone());
            let r = probe(kind, base, channels, noise, mid, warm.as_deref())?;
            probes += 1;
            if r.achieved() {
                lo = mid;
                lo_result = Some(r);
            } else {
                hi = mid;
                hi_confirmed = true;
            }
        }
        if hi_confirmed || hi <= tol {
            break;
        }
        // Never saw an infeasible target: test the bracket itself.
        let warm = lo_result.as_ref().map(|r| r.powers.clone());
        let r = probe(kind, base, channels, noise, hi, warm.as_deref())?;
        probes += 1;
        if !r.achieved() {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::consistency(format!("max-min bracket still feasible at {hi}")));
        }
        doublings += 1;
        lo = hi;
        lo_result = Some(r);
        hi *= 2.0;
    }
    let result = match lo_result {
        Some(r) => r,
        None => trivial(kind, base, channels, noise)?,
    };
    Ok(MaxMinOutcome {
        gamma: lo,
        result,
        probes,
    })
}

/// Largest common SINDR target the min-power solver can meet within the
/// power cap, to absolute tolerance `tol`.
///
/// Targets and `epsilon` in `problem` are ignored; each probe uses the
/// default tolerance for its target. The cap, grid step and initial powers
/// are used. Each probe warm-starts from the last feasible powers.
pub fn solve_max_min(
    kind: SolverKind,
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_levels: &[f64],
    tol: f64,
) -> Result<MaxMinOutcome> {
    if !(tol > 0.0) {
        return Err(Error::invalid("bisection tolerance must be positive"));
    }
    let ceiling = single_ue_ceiling(channels, noise_levels, problem.max_power)?;
    bisect(kind, problem, channels, noise_levels, tol, 0.0, None, 2.0 * ceiling, 0)
}

/// Max-min with dithering: bisection per dither candidate.
///
/// Returns `(best, undithered)`. A candidate is only bisected if it is
/// feasible just above the best target found so far, so the dithered value is
/// never below the undithered one. Ties keep the less dithered candidate.
pub fn solve_max_min_dithered(
    kind: SolverKind,
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_floor: f64,
    tol: f64,
) -> Result<(MaxMinOutcome, MaxMinOutcome)> {
    let plain_noise = vec![noise_floor; channels.num_bs()];
    let plain = solve_max_min(kind, problem, channels, &plain_noise, tol)?;
    let mut best = plain.clone();
    for noise in dither_candidates(channels, noise_floor, &problem.dither_grid_db)? {
        if noise == plain_noise {
            continue;
        }
        let start = best.gamma + tol;
        let r = probe(kind, problem, channels, &noise, start, None)?;
        if !r.achieved() {
            best.probes += 1;
            continue;
        }
        let ceiling = single_ue_ceiling(channels, &noise, problem.max_power)?;
        let hi = (2.0 * ceiling).max(2.0 * start);
        let found = bisect(
            kind,
            problem,
            channels,
            &noise,
            tol,
            start,
            Some(r),
            hi,
            best.probes + 1,
        )?;
        best = found;
    }
    Ok((best, plain))
}
