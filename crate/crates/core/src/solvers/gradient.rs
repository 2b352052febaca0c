//! Primal-dual gradient method on the Lagrangian
//! `L = sum_k rho_k - mu_k (x_k - gamma_k / (1 + gamma_k))`.
//!
//! Powers are stepped in units of a reference power `rho_ref`, the power at
//! which a UE alone would reach `x = 1` under the low-SNR linearization, so
//! `step_zeta` does not depend on path loss. The dual step for UE `k` is
//! `step_eta * (1 + gamma_k)^2`, which puts the constraint on the SINDR
//! scale.

use super::{
    finish, isolated_start, start_powers, Evaluator, PowerControlProblem, SolveResult, SolveStatus, TraceEntry,
    ISOLATED_START_X,
};
use crate::bussgang::{compute_statistics, sindr_from_x};
use crate::error::{Error, Result};
use crate::gradients::{constraint_jacobian, lagrangian_value, DerivativePieces};
use crate::scenario::ChannelSet;

/// Consecutive iterations with a UE pinned at a power bound before giving up.
const STALL_LIMIT: usize = 100;
/// Normalized dual values beyond this are treated as divergence.
const DUAL_LIMIT: f64 = 1e12;
const MAX_HALVINGS: usize = 40;

fn reference_power(ev: &mut Evaluator<'_>, active: &[bool]) -> Result<f64> {
    let start = isolated_start(ev, f64::INFINITY)?;
    let logs: Vec<f64> = start
        .iter()
        .zip(active)
        .filter(|(p, a)| **a && p.is_finite() && **p > 0.0)
        .map(|(p, _)| (p / ISOLATED_START_X).ln())
        .collect();
    if logs.is_empty() {
        return Ok(1.0);
    }
    Ok((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

pub fn solve_gradient(
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_levels: &[f64],
) -> Result<SolveResult> {
    problem.validate(channels)?;
    let nk = channels.num_ues();
    let active = problem.active();
    let thresholds = problem.thresholds();
    let mut ev = Evaluator::new(channels, noise_levels)?;
    let rho_ref = reference_power(&mut ev, &active)?;
    let mut powers = start_powers(problem, &mut ev)?;
    let mut duals = vec![0.0; nk];
    let mut trace = Vec::new();
    let mut pinned = 0usize;

    for iter in 0..=problem.max_iters {
        ev.count += 1;
        let stats = compute_statistics(channels, &ev.point(&powers))?;
        let pieces = DerivativePieces::compute(channels, &stats)?;
        let x: Vec<f64> = (0..nk).map(|k| (powers[k] * pieces.gains[k]).clamp(0.0, 1.0)).collect();
        let sindr = x.iter().map(|v| sindr_from_x(*v)).collect::<Result<Vec<_>>>()?;
        let min_sindr = sindr.iter().copied().fold(f64::INFINITY, f64::min);
        trace.push(TraceEntry {
            iteration: iter,
            powers: powers.clone(),
            min_sindr,
            failed_ue: None,
        });
        let eval = crate::bussgang::SindrEvaluation { x: x.clone(), sindr };
        let mu_out = Some(duals.clone());
        if problem.met(&eval.sindr) {
            return Ok(finish(
                &ev,
                powers,
                eval,
                SolveStatus::Achieved,
                trace,
                None,
                iter,
                mu_out,
            ));
        }
        let diverged = !min_sindr.is_finite()
            || duals.iter().any(|m| !m.is_finite() || *m / rho_ref > DUAL_LIMIT)
            || pinned >= STALL_LIMIT;
        if iter == problem.max_iters || diverged {
            return Ok(finish(
                &ev,
                powers,
                eval,
                SolveStatus::MaxIterations,
                trace,
                None,
                iter,
                mu_out,
            ));
        }

        let jac = constraint_jacobian(channels, &pieces);
        let grad: Vec<f64> = (0..nk)
            .map(|k| {
                let coupling: f64 = (0..nk).map(|kb| duals[kb] * powers[kb] * jac[(kb, k)]).sum();
                1.0 - duals[k] * pieces.gains[k] - coupling
            })
            .collect();
        let l0 = lagrangian_value(&powers, &x, &duals, &thresholds);

        let mut step = problem.step_zeta * rho_ref;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = (0..nk)
                .map(|k| {
                    if active[k] {
                        (powers[k] - step * grad[k]).clamp(0.0, problem.max_power)
                    } else {
                        0.0
                    }
                })
                .collect();
            let next = ev.eval(&trial)?;
            if lagrangian_value(&trial, &next.x, &duals, &thresholds) <= l0 {
                accepted = Some((trial, next));
                break;
            }
            step *= 0.5;
        }
        let Some((next_powers, next_eval)) = accepted else {
            // No descent at this dual point; move only the duals.
            for k in 0..nk {
                if active[k] {
                    let g = problem.targets[k];
                    duals[k] =
                        (duals[k] - rho_ref * problem.step_eta * (1.0 + g).powi(2) * (x[k] - thresholds[k])).max(0.0);
                }
            }
            continue;
        };
        powers = next_powers;
        for k in 0..nk {
            if active[k] {
                let g = problem.targets[k];
                let slack = next_eval.x[k] - thresholds[k];
                duals[k] = (duals[k] - rho_ref * problem.step_eta * (1.0 + g).powi(2) * slack).max(0.0);
            }
        }
        if duals.iter().any(|m| m.is_nan()) {
            return Err(Error::consistency("dual update produced NaN"));
        }
        let at_bound = (0..nk).any(|k| active[k] && (powers[k] == 0.0 || powers[k] == problem.max_power));
        pinned = if at_bound { pinned + 1 } else { 0 };
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::single_bs;
    use super::*;

    #[test]
    fn converges_on_small_instance() {
        let (ch, s) = single_bs(16, 2, 30.0, 10);
        let problem = PowerControlProblem::new(vec![2.0, 3.0], 1e3);
        let r = solve_gradient(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved, "{:?}", r.trace.last());
        assert!(r.duals.as_ref().unwrap().iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn zero_target_is_trivial() {
        let (ch, s) = single_bs(8, 2, 30.0, 11);
        let problem = PowerControlProblem::new(vec![0.0, 0.0], 1e3);
        let r = solve_gradient(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);
        assert_eq!(r.powers, vec![0.0, 0.0]);
    }
}
