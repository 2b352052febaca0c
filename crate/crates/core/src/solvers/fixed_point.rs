//! Parallel fixed-point update `rho_k <- gamma_k / SINDR_k * rho_k`.

use super::{finish, start_powers, Evaluator, PowerControlProblem, SolveResult, SolveStatus, TraceEntry};
use crate::error::Result;
use crate::scenario::ChannelSet;

/// Runs the update until every active UE is within `epsilon` of its target.
///
/// Stops as infeasible when a UE that is still short of its target fails to
/// gain SINDR from one update to the next, and reports that UE. Powers are
/// clipped to `max_power`.
pub fn solve_fixed_point(
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_levels: &[f64],
) -> Result<SolveResult> {
    problem.validate(channels)?;
    let mut ev = Evaluator::new(channels, noise_levels)?;
    let mut powers = start_powers(problem, &mut ev)?;
    let mut eval = ev.eval(&powers)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        powers: powers.clone(),
        min_sindr: eval.min_sindr(),
        failed_ue: None,
    }];
    if problem.met(&eval.sindr) {
        return Ok(finish(&ev, powers, eval, SolveStatus::Achieved, trace, None, 0, None));
    }

    for iter in 1..=problem.max_iters {
        for (k, p) in powers.iter_mut().enumerate() {
            let g = problem.targets[k];
            if g == 0.0 {
                continue;
            }
            let s = eval.sindr[k];
            *p = if s > 0.0 {
                (g / s * *p).min(problem.max_power)
            } else {
                problem.max_power
            };
        }
        let next = ev.eval(&powers)?;
        let failed = (0..powers.len()).find(|&k| {
            let g = problem.targets[k];
            g > 0.0 && eval.sindr[k] < g - problem.epsilon && next.sindr[k] <= eval.sindr[k]
        });
        eval = next;
        trace.push(TraceEntry {
            iteration: iter,
            powers: powers.clone(),
            min_sindr: eval.min_sindr(),
            failed_ue: failed,
        });
        if problem.met(&eval.sindr) {
            return Ok(finish(
                &ev,
                powers,
                eval,
                SolveStatus::Achieved,
                trace,
                None,
                iter,
                None,
            ));
        }
        if failed.is_some() {
            return Ok(finish(
                &ev,
                powers,
                eval,
                SolveStatus::Infeasible,
                trace,
                failed,
                iter,
                None,
            ));
        }
    }
    let iters = problem.max_iters;
    Ok(finish(
        &ev,
        powers,
        eval,
        SolveStatus::MaxIterations,
        trace,
        None,
        iters,
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::single_bs;
    use super::*;

    #[test]
    fn reaches_target_from_below() {
        let (ch, s) = single_bs(16, 2, 30.0, 3);
        let problem = PowerControlProblem::new(vec![2.0, 3.0], 1e3);
        let r = solve_fixed_point(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);
        for (got, want) in r.achieved_sindr.iter().zip(&problem.targets) {
            assert!((got - want).abs() <= problem.epsilon);
        }
        for w in r.trace.windows(2) {
            assert!(w[1].min_sindr >= w[0].min_sindr);
        }
    }

    #[test]
    fn zero_target_switches_ue_off() {
        let (ch, s) = single_bs(8, 2, 30.0, 4);
        let problem = PowerControlProblem::new(vec![0.0, 0.0], 1e3);
        let r = solve_fixed_point(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);
        assert_eq!(r.powers, vec![0.0, 0.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let (ch, s) = single_bs(8, 1, 30.0, 5);
        let problem = PowerControlProblem::new(vec![1e4], 1e6);
        let r = solve_fixed_point(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.failed_ue, Some(0));
    }
}
