//! Experiment specifications and the sweeps that run them.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::oracle::{run_oracle_suite, OracleOptions};
use super::table::ResultTable;
use crate::bussgang::{evaluate_sindr, OperatingPoint};
use crate::error::{Error, Result};
use crate::scenario::{
    dbm_to_linear, draw_channels_realization, reject_unknown_keys, ChannelSet, Point, ScenarioConfig,
};
use crate::solvers::{
    dither_candidates, dither_search, solve_max_min, solve_max_min_dithered, solve_min_power, PowerControlProblem,
    SolveResult, SolverKind,
};

/// Environment variable that overrides the worker-pool size.
pub const WORKERS_ENV: &str = "ONEBIT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SweepPower,
    SweepDistance,
    MinPowerVsTarget,
    MinPowerVsDistance,
    MaxminVsDistance,
    OracleSuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SweepPower => "sweep_power",
            ExperimentKind::SweepDistance => "sweep_distance",
            ExperimentKind::MinPowerVsTarget => "min_power_vs_target",
            ExperimentKind::MinPowerVsDistance => "min_power_vs_distance",
            ExperimentKind::MaxminVsDistance => "maxmin_vs_distance",
            ExperimentKind::OracleSuite => "oracle_suite",
        }
    }

    fn axis_units(self) -> Option<AxisUnits> {
        match self {
            ExperimentKind::SweepPower => Some(AxisUnits::Dbm),
            ExperimentKind::SweepDistance | ExperimentKind::MinPowerVsDistance | ExperimentKind::MaxminVsDistance => {
                Some(AxisUnits::M)
            }
            ExperimentKind::MinPowerVsTarget => Some(AxisUnits::Linear),
            ExperimentKind::OracleSuite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisUnits {
    #[serde(rename = "dBm")]
    Dbm,
    #[serde(rename = "m")]
    M,
    #[serde(rename = "linear")]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub units: AxisUnits,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("axis step must be > 0, got {}", self.step)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(Error::Config(format!(
                "axis needs start <= stop, got {} > {}",
                self.start, self.stop
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UeLayout {
    /// Every UE at the swept point.
    #[default]
    Colocated,
    /// Even UEs at distance `d` from the reference BS, odd UEs at `d` from
    /// the other BS.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub sizes: Vec<(usize, usize, usize)>,
    #[serde(default = "default_draws")]
    pub draws: u64,
    #[serde(default = "default_gain_scale")]
    pub gain_scale: f64,
}

fn default_draws() -> u64 {
    1_000_000
}
fn default_gain_scale() -> f64 {
    1.0
}
fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Bcd]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub axis: Option<Axis>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub dithering: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// SINDR targets (min-power kinds).
    #[serde(default)]
    pub targets: Vec<f64>,
    /// Transmit powers for `sweep_distance`, power caps for `maxmin_vs_distance`.
    #[serde(default)]
    pub powers_dbm: Vec<f64>,
    #[serde(default)]
    pub ue_layout: UeLayout,
    #[serde(default)]
    pub reference_bs: usize,
    #[serde(default)]
    pub dither_grid_db: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta_rho_db: Option<f64>,
    #[serde(default)]
    pub step_zeta: Option<f64>,
    #[serde(default)]
    pub step_eta: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub bisection_tol: Option<f64>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

impl ExperimentSpec {
    pub const FIELDS: &'static [&'static str] = &[
        "kind",
        "scenario",
        "axis",
        "solvers",
        "dithering",
        "output",
        "targets",
        "powers_dbm",
        "ue_layout",
        "reference_bs",
        "dither_grid_db",
        "epsilon",
        "delta_rho_db",
        "step_zeta",
        "step_eta",
        "max_iters",
        "bisection_tol",
        "oracle",
    ];

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        reject_unknown_keys(&value, Self::FIELDS, "experiment")?;
        if let Some(scenario) = value.get("scenario") {
            reject_unknown_keys(scenario, ScenarioConfig::FIELDS, "scenario")?;
        }
        let spec: ExperimentSpec = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        self.scenario.validate().map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        })?;
        if self.kind == ExperimentKind::OracleSuite {
            let Some(o) = &self.oracle else {
                return cfg("oracle_suite needs an 'oracle' section".into());
            };
            if o.sizes.is_empty() {
                return cfg("oracle.sizes is empty".into());
            }
            return Ok(());
        }
        let units = self.kind.axis_units().expect("sweep kinds have axis units");
        let axis_needed = !(self.kind == ExperimentKind::MinPowerVsTarget && !self.targets.is_empty());
        match &self.axis {
            Some(axis) => {
                if axis.units != units {
                    return cfg(format!(
                        "{} needs axis units {:?}, got {:?}",
                        self.kind.name(),
                        units,
                        axis.units
                    ));
                }
                axis.points()?;
            }
            None if axis_needed => return cfg(format!("{} needs an 'axis'", self.kind.name())),
            None => {}
        }
        if self.scenario.ue_positions.is_empty() {
            return cfg("scenario needs at least one UE".into());
        }
        if self.reference_bs >= self.scenario.num_bs() {
            return cfg(format!("reference_bs {} out of range", self.reference_bs));
        }
        if self.solvers.is_empty() {
            return cfg("solvers list is empty".into());
        }
        match self.kind {
            ExperimentKind::SweepDistance | ExperimentKind::MaxminVsDistance if self.powers_dbm.is_empty() => {
                return cfg(format!("{} needs 'powers_dbm'", self.kind.name()));
            }
            ExperimentKind::MinPowerVsDistance if self.targets.is_empty() => {
                return cfg("min_power_vs_distance needs 'targets'".into());
            }
            _ => {}
        }
        if self.targets.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return cfg("targets must be finite and >= 0".into());
        }
        if let Some(grid) = &self.dither_grid_db {
            if grid.is_empty() {
                return cfg("dither_grid_db is empty".into());
            }
        }
        if self.scenario.num_channel_realizations == 0 {
            return cfg("num_channel_realizations must be >= 1".into());
        }
        Ok(())
    }

    fn sweep_points(&self) -> Result<Vec<f64>> {
        if self.kind == ExperimentKind::MinPowerVsTarget && !self.targets.is_empty() {
            return Ok(self.targets.clone());
        }
        self.axis
            .as_ref()
            .ok_or_else(|| Error::Config("missing axis".into()))?
            .points()
    }

    fn problem(&self, targets: Vec<f64>, max_power: f64) -> PowerControlProblem {
        let mut p = PowerControlProblem::new(targets, max_power);
        if let Some(e) = self.epsilon {
            p.epsilon = e;
        }
        if let Some(d) = self.delta_rho_db {
            p.delta_rho_db = d;
        }
        if let Some(z) = self.step_zeta {
            p.step_zeta = z;
        }
        if let Some(e) = self.step_eta {
            p.step_eta = e;
        }
        if let Some(m) = self.max_iters {
            p.max_iters = m;
        }
        if let Some(g) = &self.dither_grid_db {
            p.dither_grid_db = g.clone();
        }
        p
    }

    /// Scenario with the UEs moved to distance `d` from the reference BS.
    pub fn scenario_at(&self, d: f64) -> ScenarioConfig {
        let mut s = self.scenario.clone();
        let bs = &s.bs_positions;
        let origin = bs[self.reference_bs];
        let other = bs
            .iter()
            .enumerate()
            .find(|(b, _)| *b != self.reference_bs)
            .map(|(_, p)| *p);
        let (dir, far) = match other {
            Some(p) => {
                let v = [p[0] - origin[0], p[1] - origin[1]];
                let len = (v[0] * v[0] + v[1] * v[1]).sqrt();
                ([v[0] / len, v[1] / len], p)
            }
            None => ([1.0, 0.0], origin),
        };
        let near: Point = [origin[0] + d * dir[0], origin[1] + d * dir[1]];
        let mirrored: Point = [far[0] - d * dir[0], far[1] - d * dir[1]];
        for (k, pos) in s.ue_positions.iter_mut().enumerate() {
            *pos = match self.ue_layout {
                UeLayout::Symmetric if k % 2 == 1 && other.is_some() => mirrored,
                _ => near,
            };
        }
        s
    }
}

/// Hex SHA-256 of the spec with `output` cleared, over its canonical JSON.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    let mut canonical = spec.clone();
    canonical.output = None;
    let json = serde_json::to_string(&canonical).expect("spec serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Worker count from the environment, if set.
pub fn worker_count() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Runs an experiment in a worker pool sized by [`WORKERS_ENV`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut table = pool.install(|| run_kind(spec))?;
    let mut meta = vec![
        ("kind".to_string(), spec.kind.name().to_string()),
        ("seed".to_string(), spec.scenario.seed.to_string()),
        (
            "realizations".to_string(),
            spec.scenario.num_channel_realizations.to_string(),
        ),
        ("config_sha256".to_string(), config_hash(spec)),
    ];
    if spec.kind != ExperimentKind::OracleSuite {
        let names: Vec<&str> = spec.solvers.iter().map(|s| s.name()).collect();
        meta.push(("solvers".to_string(), names.join(" ")));
        meta.push(("dithering".to_string(), spec.dithering.to_string()));
    }
    meta.append(&mut table.metadata);
    table.metadata = meta;
    Ok(table)
}

fn run_kind(spec: &ExperimentSpec) -> Result<ResultTable> {
    match spec.kind {
        ExperimentKind::SweepPower => sweep_power(spec),
        ExperimentKind::SweepDistance => sweep_distance(spec),
        ExperimentKind::MinPowerVsTarget => min_power_vs_target(spec),
        ExperimentKind::MinPowerVsDistance => min_power_vs_distance(spec),
        ExperimentKind::MaxminVsDistance => maxmin_vs_distance(spec),
        ExperimentKind::OracleSuite => oracle_suite(spec),
    }
}

fn realizations(scenario: &ScenarioConfig) -> Result<Vec<ChannelSet>> {
    (0..scenario.num_channel_realizations as u64)
        .into_par_iter()
        .map(|r| draw_channels_realization(scenario, scenario.seed, r))
        .collect()
}

fn label(v: f64) -> String {
    format!("{v}")
}

fn floor_noise(scenario: &ScenarioConfig) -> Vec<f64> {
    vec![scenario.noise_floor_mw(); scenario.num_bs()]
}

fn to_dbm(p_mw: f64) -> f64 {
    10.0 * p_mw.log10()
}

fn dither_db(noise: &[f64], floor: f64) -> Vec<f64> {
    noise.iter().map(|n| 10.0 * (n / floor).log10()).collect()
}

/// Mean per-UE SINDR over the realizations, and the mean minimum SINDR.
fn mean_sindr(channels: &[ChannelSet], powers: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64)> {
    let nk = powers.len();
    let mut per_ue = vec![0.0; nk];
    let mut min = 0.0;
    for ch in channels {
        let ev = evaluate_sindr(ch, &OperatingPoint::new(powers.to_vec(), noise.to_vec()))?;
        for (acc, s) in per_ue.iter_mut().zip(&ev.sindr) {
            *acc += s;
        }
        min += ev.min_sindr();
    }
    let n = channels.len() as f64;
    Ok((per_ue.into_iter().map(|v| v / n).collect(), min / n))
}

/// Noise levels maximizing the realization-averaged minimum SINDR; the least
/// dithered candidate on ties.
fn best_mean_dither(
    channels: &[ChannelSet],
    powers: &[f64],
    floor: f64,
    grid: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let candidates = dither_candidates(&channels[0], floor, grid)?;
    let scored = candidates
        .par_iter()
        .map(|noise| mean_sindr(channels, powers, noise))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in scored.iter().enumerate() {
        if s.1 > scored[best].1 {
            best = i;
        }
    }
    let (per_ue, min) = scored[best].clone();
    Ok((candidates[best].clone(), per_ue, min))
}

fn sweep_power(spec: &ExperimentSpec) -> Result<ResultTable> {
    let sc = &spec.scenario;
    let nk = sc.num_ues();
    let nb = sc.num_bs();
    let floor = sc.noise_floor_mw();
    let channels = realizations(sc)?;
    let grid = spec.problem(vec![0.0; nk], 1.0).dither_grid_db;
    let mut columns = vec!["power_dbm".to_string()];
    columns.extend((0..nk).map(|k| format!("sindr_ue{k}")));
    columns.push("min_sindr".into());
    if spec.dithering {
        columns.extend((0..nb).map(|b| format!("dither_db_bs{b}")));
    }
    let points = spec.sweep_points()?;
    let rows = points
        .par_iter()
        .map(|&p_dbm| {
            let powers = vec![dbm_to_linear(p_dbm); nk];
            let mut row = vec![p_dbm];
            if spec.dithering {
                let (noise, per_ue, min) = best_mean_dither(&channels, &powers, floor, &grid)?;
                row.extend(per_ue);
                row.push(min);
                row.extend(dither_db(&noise, floor));
            } else {
                let (per_ue, min) = mean_sindr(&channels, &powers, &floor_noise(sc))?;
                row.extend(per_ue);
                row.push(min);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(columns);
    for row in rows {
        table.push_row(row)?;
    }
    Ok(table)
}

fn sweep_distance(spec: &ExperimentSpec) -> Result<ResultTable> {
    let nk = spec.scenario.num_ues();
    let floor = spec.scenario.noise_floor_mw();
    let grid = spec.problem(vec![0.0; nk], 1.0).dither_grid_db;
    let mut columns = vec!["distance_m".to_string()];
    for p in &spec.powers_dbm {
        columns.push(format!("min_sindr_at_{}dBm", label(*p)));
        if spec.dithering {
            columns.push(format!("min_sindr_dither_at_{}dBm", label(*p)));
        }
    }
    let points = spec.sweep_points()?;
    let rows = points
        .par_iter()
        .map(|&d| {
            let sc = spec.scenario_at(d);
            let channels = realizations(&sc)?;
            let mut row = vec![d];
            for p in &spec.powers_dbm {
                let powers = vec![dbm_to_linear(*p); nk];
                row.push(mean_sindr(&channels, &powers, &floor_noise(&sc))?.1);
                if spec.dithering {
                    row.push(best_mean_dither(&channels, &powers, floor, &grid)?.2);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(columns);
    for row in rows {
        table.push_row(row)?;
    }
    Ok(table)
}

/// Min-power solve, with the dither search when enabled.
fn min_power_once(
    spec: &ExperimentSpec,
    kind: SolverKind,
    problem: &PowerControlProblem,
    channels: &ChannelSet,
    sc: &ScenarioConfig,
) -> Result<SolveResult> {
    if spec.dithering {
        dither_search(kind, problem, channels, sc.noise_floor_mw())
    } else {
        solve_min_power(kind, problem, channels, &floor_noise(sc))
    }
}

/// Summary of one min-power point over the realizations: mean total power
/// (dBm, over achieved runs), achieved fraction, mean iterations and the
/// dither of the first realization.
fn summarize(results: &[SolveResult], floor: f64) -> Vec<f64> {
    let achieved: Vec<&SolveResult> = results.iter().filter(|r| r.achieved()).collect();
    let total = if achieved.is_empty() {
        f64::NAN
    } else {
        to_dbm(achieved.iter().map(|r| r.total_power()).sum::<f64>() / achieved.len() as f64)
    };
    let n = results.len() as f64;
    let mut row = vec![
        total,
        achieved.len() as f64 / n,
        results.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
    ];
    row.extend(dither_db(&results[0].noise_levels, floor));
    row
}

fn summary_columns(prefix: &str, nb: usize) -> Vec<String> {
    let mut c = vec![
        format!("{prefix}_total_power_dbm"),
        format!("{prefix}_achieved"),
        format!("{prefix}_iterations"),
    ];
    c.extend((0..nb).map(|b| format!("{prefix}_dither_db_bs{b}")));
    c
}

fn min_power_vs_target(spec: &ExperimentSpec) -> Result<ResultTable> {
    let sc = &spec.scenario;
    let nk = sc.num_ues();
    let nb = sc.num_bs();
    let channels = realizations(sc)?;
    let mut columns = vec!["target_sindr".to_string()];
    for s in &spec.solvers {
        columns.extend(summary_columns(s.name(), nb));
    }
    let points = spec.sweep_points()?;
    let nr = channels.len();
    let tasks: Vec<(usize, usize, usize)> = (0..points.len())
        .flat_map(|i| (0..spec.solvers.len()).flat_map(move |s| (0..nr).map(move |r| (i, s, r))))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(i, s, r)| {
            let problem = spec.problem(vec![points[i]; nk], sc.max_ue_power_mw());
            min_power_once(spec, spec.solvers[s], &problem, &channels[r], sc)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_point = spec.solvers.len() * channels.len();
    let mut table = ResultTable::new(columns);
    for (i, g) in points.iter().enumerate() {
        let mut row = vec![*g];
        for s in 0..spec.solvers.len() {
            let start = i * per_point + s * channels.len();
            row.extend(summarize(&results[start..start + channels.len()], sc.noise_floor_mw()));
        }
        table.push_row(row)?;
    }
    Ok(table)
}

fn min_power_vs_distance(spec: &ExperimentSpec) -> Result<ResultTable> {
    let nk = spec.scenario.num_ues();
    let nb = spec.scenario.num_bs();
    let floor = spec.scenario.noise_floor_mw();
    let nr = spec.scenario.num_channel_realizations;
    let mut columns = vec!["distance_m".to_string()];
    for g in &spec.targets {
        for s in &spec.solvers {
            columns.extend(summary_columns(&format!("{}_target_{}", s.name(), label(*g)), nb));
        }
    }
    let points = spec.sweep_points()?;
    let scenarios: Vec<ScenarioConfig> = points.iter().map(|d| spec.scenario_at(*d)).collect();
    let channels: Vec<Vec<ChannelSet>> = scenarios.iter().map(realizations).collect::<Result<_>>()?;
    let combos: Vec<(usize, usize)> = (0..spec.targets.len())
        .flat_map(|t| (0..spec.solvers.len()).map(move |s| (t, s)))
        .collect();
    let tasks: Vec<(usize, usize, usize)> = (0..points.len())
        .flat_map(|i| (0..combos.len()).flat_map(move |c| (0..nr).map(move |r| (i, c, r))))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(i, c, r)| {
            let (t, s) = combos[c];
            let sc = &scenarios[i];
            let problem = spec.problem(vec![spec.targets[t]; nk], sc.max_ue_power_mw());
            min_power_once(spec, spec.solvers[s], &problem, &channels[i][r], sc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(columns);
    for (i, d) in points.iter().enumerate() {
        let mut row = vec![*d];
        for c in 0..combos.len() {
            let start = (i * combos.len() + c) * nr;
            row.extend(summarize(&results[start..start + nr], floor));
        }
        table.push_row(row)?;
    }
    Ok(table)
}

fn maxmin_vs_distance(spec: &ExperimentSpec) -> Result<ResultTable> {
    let nk = spec.scenario.num_ues();
    let nr = spec.scenario.num_channel_realizations;
    let tol = spec.bisection_tol.unwrap_or(0.01);
    let kind = spec.solvers[0];
    let mut columns = vec!["distance_m".to_string()];
    for p in &spec.powers_dbm {
        columns.push(format!("gamma_star_cap_{}dBm", label(*p)));
        if spec.dithering {
            columns.push(format!("gamma_star_dither_cap_{}dBm", label(*p)));
        }
    }
    let points = spec.sweep_points()?;
    let scenarios: Vec<ScenarioConfig> = points.iter().map(|d| spec.scenario_at(*d)).collect();
    let channels: Vec<Vec<ChannelSet>> = scenarios.iter().map(realizations).collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize, usize)> = (0..points.len())
        .flat_map(|i| (0..spec.powers_dbm.len()).flat_map(move |c| (0..nr).map(move |r| (i, c, r))))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(i, c, r)| {
            let sc = &scenarios[i];
            let problem = spec.problem(vec![1.0; nk], dbm_to_linear(spec.powers_dbm[c]));
            let ch = &channels[i][r];
            if spec.dithering {
                let (best, plain) = solve_max_min_dithered(kind, &problem, ch, sc.noise_floor_mw(), tol)?;
                Ok((plain.gamma, best.gamma))
            } else {
                let plain = solve_max_min(kind, &problem, ch, &floor_noise(sc), tol)?;
                Ok((plain.gamma, f64::NAN))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(columns);
    let caps = spec.powers_dbm.len();
    for (i, d) in points.iter().enumerate() {
        let mut row = vec![*d];
        for c in 0..caps {
            let slice = &results[(i * caps + c) * nr..(i * caps + c + 1) * nr];
            row.push(slice.iter().map(|v| v.0).sum::<f64>() / nr as f64);
            if spec.dithering {
                row.push(slice.iter().map(|v| v.1).sum::<f64>() / nr as f64);
            }
        }
        table.push_row(row)?;
    }
    Ok(table)
}

fn oracle_suite(spec: &ExperimentSpec) -> Result<ResultTable> {
    let o = spec
        .oracle
        .as_ref()
        .ok_or_else(|| Error::Config("missing oracle section".into()))?;
    let options = OracleOptions {
        draws: o.draws,
        seed: spec.scenario.seed,
        gain_scale: o.gain_scale,
    };
    let report = run_oracle_suite(&o.sizes, &options)?;
    let mut table = report.to_table()?;
    table.set_meta("all_passed", report.all_passed());
    Ok(table)
}
