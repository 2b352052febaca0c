//! Cyclic per-UE line search on a dB power grid.

use super::{finish, start_powers, Evaluator, PowerControlProblem, SolveResult, SolveStatus, TraceEntry};
use crate::bussgang::SindrEvaluation;
use crate::error::Result;
use crate::scenario::ChannelSet;

/// Hard limit on grid steps in one line search.
const MAX_STEPS: usize = 100_000;

enum Search {
    /// The UE ended inside its window.
    Met,
    /// Moved past the window while stepping down; kept the last point above it.
    Overshot,
    /// SINDR peaked or the power cap was reached below the window.
    Failed,
}

/// One line search for UE `k`, with the other powers fixed.
///
/// Steps up from the current power on the grid `rho * 10^(i delta / 10)` while
/// the SINDR is below the window and down while it is above. An upward search
/// stops at the first SINDR decrease and keeps the peak power.
fn line_search(
    k: usize,
    problem: &PowerControlProblem,
    ev: &mut Evaluator<'_>,
    powers: &mut [f64],
    eval: &mut SindrEvaluation,
) -> Result<Search> {
    let g = problem.targets[k];
    let eps = problem.epsilon;
    let base = powers[k];
    let s0 = eval.sindr[k];
    if (s0 - g).abs() <= eps {
        return Ok(Search::Met);
    }
    let up = s0 < g;
    if up && base >= problem.max_power {
        return Ok(Search::Failed);
    }
    let mut prev = s0;
    for i in 1..=MAX_STEPS {
        let sign = if up { 1.0 } else { -1.0 };
        let mut trial = base * 10f64.powf(sign * i as f64 * problem.delta_rho_db / 10.0);
        if up && trial > problem.max_power {
            trial = problem.max_power;
        }
        powers[k] = trial;
        let next = ev.eval(powers)?;
        let s = next.sindr[k];
        if (s - g).abs() <= eps {
            *eval = next;
            return Ok(Search::Met);
        }
        if up {
            if s <= prev {
                powers[k] = base * 10f64.powf((i - 1) as f64 * problem.delta_rho_db / 10.0);
                *eval = ev.eval(powers)?;
                return Ok(Search::Failed);
            }
            *eval = next;
            if trial >= problem.max_power {
                return Ok(Search::Failed);
            }
        } else {
            if s < g - eps {
                powers[k] = base * 10f64.powf(-((i - 1) as f64) * problem.delta_rho_db / 10.0);
                *eval = ev.eval(powers)?;
                return Ok(Search::Overshot);
            }
            *eval = next;
        }
        prev = s;
    }
    Ok(Search::Failed)
}

/// Cyclic coordinate descent over the UEs.
///
/// Each outer iteration runs one line search per active UE in index order.
/// The run is infeasible as soon as one UE cannot reach its window, and
/// reports that UE.
pub fn solve_bcd(problem: &PowerControlProblem, channels: &ChannelSet, noise_levels: &[f64]) -> Result<SolveResult> {
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
        let before = powers.clone();
        for k in 0..powers.len() {
            if problem.targets[k] == 0.0 {
                continue;
            }
            if let Search::Failed = line_search(k, problem, &mut ev, &mut powers, &mut eval)? {
                trace.push(TraceEntry {
                    iteration: iter,
                    powers: powers.clone(),
                    min_sindr: eval.min_sindr(),
                    failed_ue: Some(k),
                });
                return Ok(finish(
                    &ev,
                    powers,
                    eval,
                    SolveStatus::Infeasible,
                    trace,
                    Some(k),
                    iter,
                    None,
                ));
            }
        }
        trace.push(TraceEntry {
            iteration: iter,
            powers: powers.clone(),
            min_sindr: eval.min_sindr(),
            failed_ue: None,
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
        if powers == before {
            return Ok(finish(
                &ev,
                powers,
                eval,
                SolveStatus::MaxIterations,
                trace,
                None,
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
    use crate::bussgang::{evaluate_sindr, OperatingPoint};

    #[test]
    fn single_ue_matches_exhaustive_grid() {
        let (ch, s) = single_bs(32, 1, 30.0, 6);
        let mut problem = PowerControlProblem::new(vec![4.0], 1e3);
        problem.initial_powers = Some(vec![1e-4]);
        let r = solve_bcd(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);

        // Smallest grid point inside the window.
        let mut oracle = None;
        for i in 0..2000 {
            let p = 1e-4 * 10f64.powf(i as f64 * 0.1 / 10.0);
            let sindr = evaluate_sindr(&ch, &OperatingPoint::new(vec![p], vec![s]))
                .unwrap()
                .sindr[0];
            if (sindr - 4.0).abs() <= problem.epsilon {
                oracle = Some(p);
                break;
            }
        }
        assert_eq!(r.powers[0], oracle.unwrap());
    }

    #[test]
    fn feasible_start_returns_immediately() {
        let (ch, s) = single_bs(16, 1, 30.0, 7);
        let p0 = 0.01;
        let sindr = evaluate_sindr(&ch, &OperatingPoint::new(vec![p0], vec![s]))
            .unwrap()
            .sindr[0];
        let mut problem = PowerControlProblem::new(vec![sindr], 1e3);
        problem.initial_powers = Some(vec![p0]);
        let r = solve_bcd(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.powers, vec![p0]);
    }

    #[test]
    fn steps_down_from_above() {
        let (ch, s) = single_bs(16, 2, 30.0, 8);
        let mut problem = PowerControlProblem::new(vec![1.0, 1.0], 1e3);
        problem.initial_powers = Some(vec![10.0, 10.0]);
        let start = evaluate_sindr(&ch, &OperatingPoint::new(vec![10.0; 2], vec![s])).unwrap();
        assert!(start.min_sindr() > 1.0 + problem.epsilon);
        let r = solve_bcd(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Achieved);
        assert!(r.powers.iter().all(|p| *p < 10.0));
    }

    #[test]
    fn peak_below_target_is_infeasible() {
        let (ch, s) = single_bs(8, 1, 30.0, 9);
        let problem = PowerControlProblem::new(vec![1e4], 1e6);
        let r = solve_bcd(&problem, &ch, &[s]).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.failed_ue, Some(0));
        assert_eq!(r.trace.last().unwrap().failed_ue, Some(0));
    }
}
