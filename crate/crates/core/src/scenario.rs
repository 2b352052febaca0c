//! Network geometry, large-scale fading and Rayleigh channel draws.
//!
//! Channels are drawn from a ChaCha8 generator with one stream per
//! `(realization, bs, ue)` block, so the draw for a given block never depends
//! on how many other BSs or UEs exist. Each block is drawn as unit-variance
//! circularly-symmetric Gaussian noise and then scaled by `sqrt(delta)`, which
//! keeps the small-scale fading fixed when a UE is moved during a sweep.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

fn default_pathloss_exponent() -> f64 {
    3.0
}
fn default_pathloss_intercept_db() -> f64 {
    -61.0
}
fn default_noise_floor_dbm() -> f64 {
    -95.0
}
fn default_max_ue_power_dbm() -> f64 {
    30.0
}
fn default_realizations() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_positions: Vec<Point>,
    pub antennas_per_bs: usize,
    pub ue_positions: Vec<Point>,
    #[serde(default = "default_pathloss_exponent")]
    pub pathloss_exponent: f64,
    #[serde(default = "default_pathloss_intercept_db")]
    pub pathloss_intercept_db: f64,
    #[serde(default = "default_noise_floor_dbm")]
    pub noise_floor_dbm: f64,
    #[serde(default = "default_max_ue_power_dbm")]
    pub max_ue_power_dbm: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub num_channel_realizations: usize,
}

impl ScenarioConfig {
    pub const FIELDS: &'static [&'static str] = &[
        "bs_positions",
        "antennas_per_bs",
        "ue_positions",
        "pathloss_exponent",
        "pathloss_intercept_db",
        "noise_floor_dbm",
        "max_ue_power_dbm",
        "seed",
        "num_channel_realizations",
    ];

    /// A scenario with the default propagation and noise parameters.
    pub fn new(bs_positions: Vec<Point>, antennas_per_bs: usize, ue_positions: Vec<Point>) -> Self {
        ScenarioConfig {
            bs_positions,
            antennas_per_bs,
            ue_positions,
            pathloss_exponent: default_pathloss_exponent(),
            pathloss_intercept_db: default_pathloss_intercept_db(),
            noise_floor_dbm: default_noise_floor_dbm(),
            max_ue_power_dbm: default_max_ue_power_dbm(),
            seed: 0,
            num_channel_realizations: default_realizations(),
        }
    }

    /// Parses a JSON document, rejecting unknown keys (all of them are listed
    /// in the error).
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        reject_unknown_keys(&value, Self::FIELDS, "scenario")?;
        let config: ScenarioConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn noise_floor_mw(&self) -> f64 {
        dbm_to_linear(self.noise_floor_dbm)
    }

    pub fn max_ue_power_mw(&self) -> f64 {
        dbm_to_linear(self.max_ue_power_dbm)
    }

    pub fn distance(&self, bs: usize, ue: usize) -> f64 {
        let [bx, by] = self.bs_positions[bs];
        let [ux, uy] = self.ue_positions[ue];
        (bx - ux).hypot(by - uy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_positions.is_empty() {
            return Err(Error::Config("at least one BS is required".into()));
        }
        if self.ue_positions.is_empty() {
            return Err(Error::Config("at least one UE is required".into()));
        }
        if self.antennas_per_bs == 0 {
            return Err(Error::Config("antennas_per_bs must be positive".into()));
        }
        if self.num_channel_realizations == 0 {
            return Err(Error::Config("num_channel_realizations must be positive".into()));
        }
        let scalars = [
            ("pathloss_exponent", self.pathloss_exponent),
            ("pathloss_intercept_db", self.pathloss_intercept_db),
            ("noise_floor_dbm", self.noise_floor_dbm),
            ("max_ue_power_dbm", self.max_ue_power_dbm),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        for p in self.bs_positions.iter().chain(&self.ue_positions) {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Config(format!("non-finite position {p:?}")));
            }
        }
        for b in 0..self.num_bs() {
            for k in 0..self.num_ues() {
                if self.distance(b, k) <= 0.0 {
                    return Err(Error::Config(format!(
                        "UE {k} is co-located with BS {b}; distances must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Large-scale fading coefficients as linear power gains, `B x K`.
    pub fn large_scale_gains(&self) -> Result<DMatrix<f64>> {
        let mut delta = DMatrix::zeros(self.num_bs(), self.num_ues());
        for b in 0..self.num_bs() {
            for k in 0..self.num_ues() {
                delta[(b, k)] = db_to_linear(pathloss_db(self.distance(b, k), self)?);
            }
        }
        Ok(delta)
    }
}

pub(crate) fn reject_unknown_keys(value: &Value, known: &[&str], what: &str) -> Result<()> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config(format!("{what} must be a JSON object")))?;
    let unknown: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|key| !known.contains(key))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown {what} keys: {}", unknown.join(", "))))
    }
}

/// Distance-dependent pathloss in dB: `intercept - 10 * exponent * log10(d)`.
pub fn pathloss_db(distance_m: f64, config: &ScenarioConfig) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be positive and finite, got {distance_m}"
        )));
    }
    Ok(config.pathloss_intercept_db - 10.0 * config.pathloss_exponent * distance_m.log10())
}

pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

pub fn linear_to_dbm(p_mw: f64) -> Result<f64> {
    if !(p_mw > 0.0) {
        return Err(Error::invalid(format!(
            "cannot convert non-positive power {p_mw} to dBm"
        )));
    }
    Ok(10.0 * p_mw.log10())
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Aggregated channels of all UEs across all BSs.
///
/// Column `k` of `h` stacks `h_{1,k}; ...; h_{B,k}` in BS order, so rows
/// `[b*M, (b+1)*M)` belong to BS `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: DMatrix<Complex64>,
    pub delta: DMatrix<f64>,
    pub seed_used: u64,
    antennas_per_bs: usize,
}

impl ChannelSet {
    pub fn from_parts(
        h: DMatrix<Complex64>,
        delta: DMatrix<f64>,
        antennas_per_bs: usize,
        seed_used: u64,
    ) -> Result<Self> {
        if antennas_per_bs == 0 {
            return Err(Error::invalid("antennas_per_bs must be positive"));
        }
        if h.nrows() != delta.nrows() * antennas_per_bs || h.ncols() != delta.ncols() {
            return Err(Error::invalid(format!(
                "channel matrix {}x{} does not match {} BSs x {} antennas and {} UEs",
                h.nrows(),
                h.ncols(),
                delta.nrows(),
                antennas_per_bs,
                delta.ncols()
            )));
        }
        Ok(ChannelSet {
            h,
            delta,
            seed_used,
            antennas_per_bs,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.delta.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.h.ncols()
    }

    pub fn antennas_per_bs(&self) -> usize {
        self.antennas_per_bs
    }

    /// Total number of receive antennas `B*M`.
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn bs_of_row(&self, row: usize) -> usize {
        row / self.antennas_per_bs
    }

    pub fn block(&self, bs: usize, ue: usize) -> Vec<Complex64> {
        let m = self.antennas_per_bs;
        self.h.view((bs * m, ue), (m, 1)).iter().copied().collect()
    }
}

fn stream_id(realization: u64, bs: usize, ue: usize) -> u64 {
    assert!(bs < (1 << 20) && ue < (1 << 20), "block index out of range");
    (realization << 40) | ((bs as u64) << 20) | ue as u64
}

/// Unit-variance `CN(0, 1)` entries for one `(realization, bs, ue)` block.
pub fn standard_block(seed: u64, realization: u64, bs: usize, ue: usize, len: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(realization, bs, ue));
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(scale * re, scale * im)
        })
        .collect()
}

pub fn draw_channels(config: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    draw_channels_realization(config, seed, 0)
}

/// Draws channel realization `realization` for the given seed.
pub fn draw_channels_realization(config: &ScenarioConfig, seed: u64, realization: u64) -> Result<ChannelSet> {
    config.validate()?;
    let delta = config.large_scale_gains()?;
    channels_from_gains(delta, config.antennas_per_bs, seed, realization)
}

pub(crate) fn channels_from_gains(
    delta: DMatrix<f64>,
    antennas_per_bs: usize,
    seed: u64,
    realization: u64,
) -> Result<ChannelSet> {
    let (nb, nk) = delta.shape();
    let m = antennas_per_bs;
    let mut h = DMatrix::zeros(nb * m, nk);
    for k in 0..nk {
        for b in 0..nb {
            let amp = delta[(b, k)].sqrt();
            for (i, g) in standard_block(seed, realization, b, k, m).into_iter().enumerate() {
                h[(b * m + i, k)] = g * amp;
            }
        }
    }
    ChannelSet::from_parts(h, delta, m, seed)
}
