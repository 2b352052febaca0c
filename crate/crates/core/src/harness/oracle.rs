//! Monte-Carlo check of the closed-form quantizer statistics.
//!
//! Draws `y = sum_k sqrt(rho_k) h_k s_k + z`, quantizes it and compares the
//! sample moments `E[r r^H]`, `E[r y^H]` and `E[q y^H]` with `C_r`, `A C_y`
//! and zero, entry by entry, at four standard errors.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::table::ResultTable;
use crate::bussgang::{compute_statistics, quantize, OperatingPoint};
use crate::error::{Error, Result};
use crate::scenario::ChannelSet;
use crate::testing::{random_instance, random_point};

pub const MIN_DRAWS: u64 = 100_000;
pub const Z_LIMIT: f64 = 4.0;
/// Tolerance for entries whose samples are all identical.
pub const EXACT_TOL: f64 = 1e-12;
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub draws: u64,
    pub seed: u64,
    /// Multiplies the Bussgang gain before comparison; 1 for the real check.
    pub gain_scale: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            draws: 1_000_000,
            seed: 0,
            gain_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Largest `|error| / standard error` over entries with nonzero spread.
    pub max_z: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub num_bs: usize,
    pub antennas: usize,
    pub num_ues: usize,
    pub draws: u64,
    pub checks: Vec<OracleCheck>,
}

impl OracleInstance {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&OracleCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub instances: Vec<OracleInstance>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.instances.iter().all(OracleInstance::passed)
    }

    pub fn to_table(&self) -> Result<ResultTable> {
        let mut t = ResultTable::new(
            [
                "num_bs",
                "antennas",
                "num_ues",
                "draws",
                "arcsin_pass",
                "arcsin_max_z",
                "bussgang_pass",
                "bussgang_max_z",
                "uncorrelated_pass",
                "uncorrelated_max_z",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
        for inst in &self.instances {
            let mut row = vec![
                inst.num_bs as f64,
                inst.antennas as f64,
                inst.num_ues as f64,
                inst.draws as f64,
            ];
            for c in &inst.checks {
                row.push(if c.passed { 1.0 } else { 0.0 });
                row.push(c.max_z);
            }
            t.push_row(row)?;
        }
        Ok(t)
    }
}

/// Running sums of one complex matrix moment, with per-part squares.
#[derive(Clone)]
struct Moment {
    sum: Vec<Complex64>,
    sq_re: Vec<f64>,
    sq_im: Vec<f64>,
}

impl Moment {
    fn new(len: usize) -> Self {
        Moment {
            sum: vec![Complex64::new(0.0, 0.0); len],
            sq_re: vec![0.0; len],
            sq_im: vec![0.0; len],
        }
    }

    fn add_outer(&mut self, a: &[Complex64], b: &[Complex64]) {
        let n = b.len();
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let v = ai * bj.conj();
                let idx = i * n + j;
                self.sum[idx] += v;
                self.sq_re[idx] += v.re * v.re;
                self.sq_im[idx] += v.im * v.im;
            }
        }
    }

    fn merge(&mut self, other: &Moment) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sq_re[i] += other.sq_re[i];
            self.sq_im[i] += other.sq_im[i];
        }
    }

    /// Compares the sample mean with `target` (row-major `n x n`).
    fn check(&self, name: &'static str, draws: u64, target: &DMatrix<Complex64>) -> OracleCheck {
        let nf = draws as f64;
        let n = target.ncols();
        let mut passed = true;
        let mut max_z: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for idx in 0..self.sum.len() {
            let want = target[(idx / n, idx % n)];
            let mean = self.sum[idx] / nf;
            for (m, sq, w) in [(mean.re, self.sq_re[idx], want.re), (mean.im, self.sq_im[idx], want.im)] {
                let var = ((sq / nf - m * m) * nf / (nf - 1.0)).max(0.0);
                let se = (var / nf).sqrt();
                let err = (m - w).abs();
                max_abs = max_abs.max(err);
                if se <= EXACT_TOL * m.abs().max(1.0) {
                    passed &= err <= EXACT_TOL;
                } else {
                    let z = err / se;
                    max_z = max_z.max(z);
                    passed &= z <= Z_LIMIT;
                }
            }
        }
        OracleCheck {
            name,
            passed,
            max_z,
            max_abs_error: max_abs,
        }
    }
}

struct Accum {
    rr: Moment,
    ry: Moment,
    qy: Moment,
}

fn simulate_chunk(
    channels: &ChannelSet,
    point: &OperatingPoint,
    gain: &[f64],
    seed: u64,
    stream: u64,
    count: u64,
) -> Accum {
    let n = channels.dim();
    let nk = channels.num_ues();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scaled: Vec<Vec<Complex64>> = (0..nk)
        .map(|k| {
            let a = point.powers[k].sqrt();
            channels.h.column(k).iter().map(|h| h * a).collect()
        })
        .collect();
    let noise_sd: Vec<f64> = (0..n)
        .map(|i| (0.5 * point.noise_levels[channels.bs_of_row(i)]).sqrt())
        .collect();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut acc = Accum {
        rr: Moment::new(n * n),
        ry: Moment::new(n * n),
        qy: Moment::new(n * n),
    };
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut r = y.clone();
    let mut q = y.clone();
    for _ in 0..count {
        for (yi, sd) in y.iter_mut().zip(&noise_sd) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *yi = Complex64::new(sd * re, sd * im);
        }
        for col in &scaled {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let s = Complex64::new(half * re, half * im);
            for (yi, h) in y.iter_mut().zip(col) {
                *yi += h * s;
            }
        }
        for i in 0..n {
            r[i] = quantize(y[i]);
            q[i] = r[i] - y[i] * gain[i];
        }
        acc.rr.add_outer(&r, &r);
        acc.ry.add_outer(&r, &y);
        acc.qy.add_outer(&q, &y);
    }
    acc
}

/// Runs the three moment checks on one instance.
pub fn check_instance(
    channels: &ChannelSet,
    point: &OperatingPoint,
    options: &OracleOptions,
    stream_base: u64,
) -> Result<OracleInstance> {
    if options.draws < MIN_DRAWS {
        return Err(Error::invalid(format!(
            "oracle needs at least {MIN_DRAWS} draws, got {}",
            options.draws
        )));
    }
    let stats = compute_statistics(channels, point)?;
    let gain: Vec<f64> = stats.a_diag.iter().map(|a| a * options.gain_scale).collect();
    let n = channels.dim();
    let chunks = options.draws.div_ceil(CHUNK);
    let parts: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(options.draws - c * CHUNK);
            simulate_chunk(channels, point, &gain, options.seed, stream_base + c, count)
        })
        .collect();
    let mut total = Accum {
        rr: Moment::new(n * n),
        ry: Moment::new(n * n),
        qy: Moment::new(n * n),
    };
    for p in &parts {
        total.rr.merge(&p.rr);
        total.ry.merge(&p.ry);
        total.qy.merge(&p.qy);
    }
    let a_cy = DMatrix::from_fn(n, n, |i, j| stats.c_y[(i, j)] * gain[i]);
    let zero = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    Ok(OracleInstance {
        num_bs: channels.num_bs(),
        antennas: channels.antennas_per_bs(),
        num_ues: channels.num_ues(),
        draws: options.draws,
        checks: vec![
            total.rr.check("arcsin", options.draws, &stats.c_r),
            total.ry.check("bussgang", options.draws, &a_cy),
            total.qy.check("uncorrelated", options.draws, &zero),
        ],
    })
}

/// One random instance per `(B, M, K)` size: unit large-scale gains, powers
/// in `[0.2, 3]` and noise levels in `[0.3, 1.5]`.
pub fn run_oracle_suite(sizes: &[(usize, usize, usize)], options: &OracleOptions) -> Result<OracleReport> {
    let mut instances = Vec::with_capacity(sizes.len());
    for (idx, &(nb, m, nk)) in sizes.iter().enumerate() {
        if nb == 0 || m == 0 {
            return Err(Error::invalid(format!("oracle size ({nb}, {m}, {nk}) needs B, M >= 1")));
        }
        let inst_seed = options.seed.wrapping_add(idx as u64);
        let channels = random_instance(nb, m, nk, inst_seed);
        let point = random_point(&channels, inst_seed);
        instances.push(check_instance(&channels, &point, options, (idx as u64) << 32)?);
    }
    Ok(OracleReport { instances })
}
