//! Grid search over BS noise levels (dithering).
//!
//! The BS with the weakest total large-scale gain keeps the noise floor; every
//! other BS takes each level of the dB grid, and all combinations are tried.

use rayon::prelude::*;

use super::{solve_min_power, PowerControlProblem, SolveResult, SolverKind};
use crate::bussgang::{evaluate_sindr, OperatingPoint, SindrEvaluation};
use crate::error::{Error, Result};
use crate::scenario::{db_to_linear, ChannelSet};

/// BS with the smallest `sum_k delta_{b,k}`; the first one on ties.
pub fn farthest_bs(channels: &ChannelSet) -> usize {
    let totals: Vec<f64> = (0..channels.num_bs()).map(|b| channels.delta.row(b).sum()).collect();
    let mut best = 0;
    for (b, t) in totals.iter().enumerate() {
        if *t < totals[best] {
            best = b;
        }
    }
    best
}

/// Noise-level vectors for every grid combination, in lexicographic order of
/// the grid indices with the last BS varying fastest.
///
/// The grid is sorted and deduplicated first, so the first candidate has the
/// least dither.
pub fn dither_candidates(channels: &ChannelSet, noise_floor: f64, grid_db: &[f64]) -> Result<Vec<Vec<f64>>> {
    if grid_db.is_empty() {
        return Err(Error::invalid("dither grid is empty"));
    }
    if let Some(g) = grid_db.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(Error::invalid(format!(
            "dither levels must be finite and >= 0 dB, got {g}"
        )));
    }
    if !(noise_floor > 0.0) {
        return Err(Error::invalid("noise floor must be positive"));
    }
    let mut grid = grid_db.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let levels: Vec<f64> = grid.iter().map(|g| noise_floor * db_to_linear(*g)).collect();

    let nb = channels.num_bs();
    let pinned = farthest_bs(channels);
    let free: Vec<usize> = (0..nb).filter(|b| *b != pinned).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; free.len()];
    loop {
        let mut noise = vec![noise_floor; nb];
        for (slot, b) in free.iter().enumerate() {
            noise[*b] = levels[idx[slot]];
        }
        out.push(noise);
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < levels.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn total_dither(noise: &[f64], floor: f64) -> f64 {
    noise.iter().map(|n| n - floor).sum()
}

/// Min-power solve for every dither candidate.
///
/// Returns the achieved candidate with the least total power. Candidates
/// within `delta_rho_db` of that power are broken in favour of the least
/// total dither. When no candidate is achieved, the one with the highest
/// minimum SINDR is returned with its own status.
pub fn dither_search(
    kind: SolverKind,
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    noise_floor: f64,
) -> Result<SolveResult> {
    let candidates = dither_candidates(channels, noise_floor, &problem.dither_grid_db)?;
    let results = candidates
        .par_iter()
        .map(|noise| solve_min_power(kind, problem, channels, noise))
        .collect::<Result<Vec<_>>>()?;

    let best_total = results
        .iter()
        .filter(|r| r.achieved())
        .map(SolveResult::total_power)
        .fold(f64::INFINITY, f64::min);
    if best_total.is_finite() {
        let limit = best_total * db_to_linear(problem.delta_rho_db);
        let mut pick: Option<&SolveResult> = None;
        for r in results.iter().filter(|r| r.achieved() && r.total_power() <= limit) {
            let better = match pick {
                None => true,
                Some(p) => total_dither(&r.noise_levels, noise_floor) < total_dither(&p.noise_levels, noise_floor),
            };
            if better {
                pick = Some(r);
            }
        }
        return Ok(pick.expect("an achieved candidate exists").clone());
    }
    let mut best = &results[0];
    for r in &results[1..] {
        if r.min_sindr() > best.min_sindr() {
            best = r;
        }
    }
    Ok(best.clone())
}

/// Dither candidate that maximizes the minimum SINDR at fixed powers; the
/// first (least dithered) one on ties.
pub fn best_dither_for_powers(
    channels: &ChannelSet,
    powers: &[f64],
    noise_floor: f64,
    grid_db: &[f64],
) -> Result<(Vec<f64>, SindrEvaluation)> {
    let candidates = dither_candidates(channels, noise_floor, grid_db)?;
    let evals = candidates
        .par_iter()
        .map(|noise| evaluate_sindr(channels, &OperatingPoint::new(powers.to_vec(), noise.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.min_sindr() > evals[best].min_sindr() {
            best = i;
        }
    }
    Ok((candidates[best].clone(), evals[best].clone()))
}
