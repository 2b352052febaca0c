//! Second-order statistics of the 1-bit quantized receiver.
//!
//! For the stacked received vector `y = sum_k sqrt(rho_k) h_k d_k + z` the
//! quantizer output is decomposed as `r = A y + q` with
//!
//! * `C_y = sum_k rho_k h_k h_k^H + C_z`
//! * `A = sqrt(2/pi) Diag(C_y)^{-1/2}` (kept as its diagonal)
//! * `C_r = 2/pi (asin(Re N) + j asin(Im N))` with `N = Diag(C_y)^{-1/2} C_y Diag(C_y)^{-1/2}`
//! * `C_q = C_r - A C_y A`
//!
//! `C_r` has a unit diagonal because `asin(1) = pi/2`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitize_from_lower, HermitianFactor};
use crate::scenario::ChannelSet;

/// Largest `|argument| - 1` that is silently clamped before `asin`.
pub const ASIN_CLAMP_TOL: f64 = 1e-12;
/// SINDR reported when `x` lies within this distance of 1.
pub const X_CAP_TOL: f64 = 1e-9;
pub const SINDR_CAP: f64 = 1e12;

/// UE transmit powers and per-BS noise levels, both in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub powers: Vec<f64>,
    pub noise_levels: Vec<f64>,
}

impl OperatingPoint {
    pub fn new(powers: Vec<f64>, noise_levels: Vec<f64>) -> Self {
        OperatingPoint { powers, noise_levels }
    }

    /// Every BS at the same noise level.
    pub fn uniform_noise(powers: Vec<f64>, num_bs: usize, noise: f64) -> Self {
        OperatingPoint::new(powers, vec![noise; num_bs])
    }

    pub fn validate(&self, channels: &ChannelSet) -> Result<()> {
        if self.powers.len() != channels.num_ues() {
            return Err(Error::invalid(format!(
                "{} powers for {} UEs",
                self.powers.len(),
                channels.num_ues()
            )));
        }
        if self.noise_levels.len() != channels.num_bs() {
            return Err(Error::invalid(format!(
                "{} noise levels for {} BSs",
                self.noise_levels.len(),
                channels.num_bs()
            )));
        }
        if let Some(p) = self.powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("UE power must be finite and >= 0, got {p}")));
        }
        if let Some(s) = self.noise_levels.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("noise level must be finite and > 0, got {s}")));
        }
        Ok(())
    }

    /// Joint rescaling `(c rho, c sigma^2)`.
    pub fn scaled(&self, c: f64) -> Self {
        OperatingPoint::new(
            self.powers.iter().map(|p| p * c).collect(),
            self.noise_levels.iter().map(|s| s * c).collect(),
        )
    }

    pub fn with_power(&self, k: usize, power: f64) -> Self {
        let mut next = self.clone();
        next.powers[k] = power;
        next
    }
}

#[derive(Debug, Clone)]
pub struct SystemStatistics {
    pub c_y: DMatrix<Complex64>,
    pub a_diag: DVector<f64>,
    pub c_r: DMatrix<Complex64>,
    pub c_q: DMatrix<Complex64>,
}

impl SystemStatistics {
    pub fn dim(&self) -> usize {
        self.a_diag.len()
    }

    /// Entry `(i, j)` of `Diag(C_y)^{-1/2} C_y Diag(C_y)^{-1/2}`.
    pub fn normalized_cy(&self, i: usize, j: usize) -> Complex64 {
        self.c_y[(i, j)] / (self.c_y[(i, i)].re * self.c_y[(j, j)].re).sqrt()
    }

    pub fn factor_cr(&self) -> Result<HermitianFactor> {
        HermitianFactor::new(&self.c_r)
    }
}

/// MMSE combiners, column `k` is `w_k`.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    pub w: DMatrix<Complex64>,
}

fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// 1-bit quantizer applied separately to the in-phase and quadrature parts.
/// Zero maps to `+1`.
pub fn quantize(a: Complex64) -> Complex64 {
    Complex64::new(FRAC_1_SQRT_2 * sgn(a.re), FRAC_1_SQRT_2 * sgn(a.im))
}

pub fn quantize_1bit(samples: &[Complex64]) -> Vec<Complex64> {
    samples.iter().copied().map(quantize).collect()
}

fn checked_asin(v: f64) -> Result<f64> {
    if v.abs() > 1.0 + ASIN_CLAMP_TOL || v.is_nan() {
        return Err(Error::consistency(format!("arcsin argument {v} outside [-1, 1]")));
    }
    Ok(v.clamp(-1.0, 1.0).asin())
}

/// `C_y` for the given operating point, exactly Hermitian.
pub fn input_covariance(channels: &ChannelSet, point: &OperatingPoint) -> Result<DMatrix<Complex64>> {
    point.validate(channels)?;
    let n = channels.dim();
    let mut weighted = channels.h.clone();
    for (k, p) in point.powers.iter().enumerate() {
        weighted.column_mut(k).scale_mut(p.sqrt());
    }
    let mut c_y = &weighted * weighted.adjoint();
    hermitize_from_lower(&mut c_y);
    for i in 0..n {
        c_y[(i, i)].re += point.noise_levels[channels.bs_of_row(i)];
    }
    Ok(c_y)
}

/// Applies the arcsin law to `C_y`.
pub fn arcsin_law(c_y: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = c_y.nrows();
    let inv_sd: Vec<f64> = (0..n).map(|i| 1.0 / c_y[(i, i)].re.sqrt()).collect();
    let mut c_r = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        c_r[(j, j)] = Complex64::new(1.0, 0.0);
        for i in (j + 1)..n {
            let u = c_y[(i, j)] * (inv_sd[i] * inv_sd[j]);
            c_r[(i, j)] = Complex64::new(FRAC_2_PI * checked_asin(u.re)?, FRAC_2_PI * checked_asin(u.im)?);
        }
    }
    hermitize_from_lower(&mut c_r);
    Ok(c_r)
}

pub fn bussgang_gain(c_y: &DMatrix<Complex64>) -> DVector<f64> {
    let scale = FRAC_2_PI.sqrt();
    DVector::from_iterator(c_y.nrows(), (0..c_y.nrows()).map(|i| scale / c_y[(i, i)].re.sqrt()))
}

pub fn compute_statistics(channels: &ChannelSet, point: &OperatingPoint) -> Result<SystemStatistics> {
    let c_y = input_covariance(channels, point)?;
    let a_diag = bussgang_gain(&c_y);
    let c_r = arcsin_law(&c_y)?;
    let n = c_y.nrows();
    let mut c_q = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        for i in j..n {
            c_q[(i, j)] = c_r[(i, j)] - c_y[(i, j)] * (a_diag[i] * a_diag[j]);
        }
    }
    hermitize_from_lower(&mut c_q);
    Ok(SystemStatistics { c_y, a_diag, c_r, c_q })
}

/// `A h_k` for every UE, as columns.
pub fn effective_channels(channels: &ChannelSet, a_diag: &DVector<f64>) -> DMatrix<Complex64> {
    let mut ah = channels.h.clone();
    for (i, mut row) in ah.row_iter_mut().enumerate() {
        row.scale_mut(a_diag[i]);
    }
    ah
}

/// Maps `x = rho_k h_k^H A C_r^{-1} A h_k` to `x / (1 - x)`.
pub fn sindr_from_x(x: f64) -> Result<f64> {
    if x.is_nan() || x < -X_CAP_TOL {
        return Err(Error::consistency(format!("quadratic form x = {x} is negative")));
    }
    if x >= 1.0 + X_CAP_TOL {
        return Err(Error::consistency(format!("quadratic form x = {x} exceeds 1")));
    }
    let x = x.max(0.0);
    if x >= 1.0 - X_CAP_TOL {
        return Ok(SINDR_CAP);
    }
    Ok(x / (1.0 - x))
}

/// `h_k^H A C_r^{-1} A h_k` for all UEs (without the `rho_k` factor).
pub fn constraint_gains(channels: &ChannelSet, stats: &SystemStatistics, factor: &HermitianFactor) -> Vec<f64> {
    let ah = effective_channels(channels, &stats.a_diag);
    let solved = factor.solve(&ah);
    (0..channels.num_ues())
        .map(|k| ah.column(k).dotc(&solved.column(k)).re)
        .collect()
}

pub fn mmse_combiners(channels: &ChannelSet, point: &OperatingPoint, stats: &SystemStatistics) -> Result<CombinerSet> {
    point.validate(channels)?;
    let factor = stats.factor_cr()?;
    let mut rhs = effective_channels(channels, &stats.a_diag);
    for (k, p) in point.powers.iter().enumerate() {
        rhs.column_mut(k).scale_mut(p.sqrt());
    }
    Ok(CombinerSet { w: factor.solve(&rhs) })
}

/// SINDR of UE `k` for an arbitrary combiner, from the interference,
/// AWGN and distortion terms.
pub fn sindr_general(
    k: usize,
    w: &DVector<Complex64>,
    channels: &ChannelSet,
    point: &OperatingPoint,
    stats: &SystemStatistics,
) -> Result<f64> {
    point.validate(channels)?;
    if w.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::invalid("combiner must be nonzero"));
    }
    let ah = effective_channels(channels, &stats.a_diag);
    let mut numerator = 0.0;
    let mut interference = 0.0;
    for kb in 0..channels.num_ues() {
        let g = w.dotc(&ah.column(kb)).norm_sqr() * point.powers[kb];
        if kb == k {
            numerator = g;
        } else {
            interference += g;
        }
    }
    let noise: f64 = w
        .iter()
        .enumerate()
        .map(|(i, wi)| wi.norm_sqr() * stats.a_diag[i].powi(2) * point.noise_levels[channels.bs_of_row(i)])
        .sum();
    let distortion = w.dotc(&(&stats.c_q * w)).re;
    let denominator = interference + noise + distortion;
    if !(denominator > 0.0) {
        return Err(Error::consistency(format!(
            "SINDR denominator {denominator} is not positive"
        )));
    }
    Ok(numerator / denominator)
}

/// `x_k = rho_k h_k^H A C_r^{-1} A h_k` for every UE.
pub fn quadratic_forms(channels: &ChannelSet, point: &OperatingPoint, stats: &SystemStatistics) -> Result<Vec<f64>> {
    point.validate(channels)?;
    let factor = stats.factor_cr()?;
    let gains = constraint_gains(channels, stats, &factor);
    Ok(gains.iter().zip(&point.powers).map(|(g, p)| g * p).collect())
}

fn checked_x(k: usize, channels: &ChannelSet, point: &OperatingPoint, stats: &SystemStatistics) -> Result<f64> {
    if k >= channels.num_ues() {
        return Err(Error::invalid(format!("UE index {k} out of range")));
    }
    let x = quadratic_forms(channels, point, stats)?[k];
    sindr_from_x(x)?;
    Ok(x.clamp(0.0, 1.0))
}

/// Closed-form SINDR of UE `k` under MMSE combining, `x / (1 - x)`.
pub fn sindr_closed_form(
    k: usize,
    channels: &ChannelSet,
    point: &OperatingPoint,
    stats: &SystemStatistics,
) -> Result<f64> {
    sindr_from_x(checked_x(k, channels, point, stats)?)
}

/// MSE of UE `k` under MMSE combining, `1 - x`.
pub fn mse(k: usize, channels: &ChannelSet, point: &OperatingPoint, stats: &SystemStatistics) -> Result<f64> {
    Ok(1.0 - checked_x(k, channels, point, stats)?)
}

/// MSE `E|w^H r - d_k|^2` of an arbitrary combiner.
pub fn mse_for_combiner(
    k: usize,
    w: &DVector<Complex64>,
    channels: &ChannelSet,
    point: &OperatingPoint,
    stats: &SystemStatistics,
) -> f64 {
    let ah_k: DVector<Complex64> = channels
        .h
        .column(k)
        .component_mul(&stats.a_diag.map(|a| Complex64::new(a, 0.0)));
    let cross = w.dotc(&ah_k).re * point.powers[k].sqrt();
    w.dotc(&(&stats.c_r * w)).re - 2.0 * cross + 1.0
}

/// Per-UE `x_k` and SINDR from a single factorization of `C_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SindrEvaluation {
    pub x: Vec<f64>,
    pub sindr: Vec<f64>,
}

impl SindrEvaluation {
    pub fn min_sindr(&self) -> f64 {
        self.sindr.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates all SINDRs without forming `C_q`.
pub fn evaluate_sindr(channels: &ChannelSet, point: &OperatingPoint) -> Result<SindrEvaluation> {
    let c_y = input_covariance(channels, point)?;
    let a_diag = bussgang_gain(&c_y);
    let c_r = arcsin_law(&c_y)?;
    let factor = HermitianFactor::new(&c_r)?;
    let ah = effective_channels(channels, &a_diag);
    let solved = factor.solve(&ah);
    let mut x = Vec::with_capacity(channels.num_ues());
    let mut sindr = Vec::with_capacity(channels.num_ues());
    for k in 0..channels.num_ues() {
        let xk = point.powers[k] * ah.column(k).dotc(&solved.column(k)).re;
        sindr.push(sindr_from_x(xk)?);
        x.push(xk.clamp(0.0, 1.0));
    }
    Ok(SindrEvaluation { x, sindr })
}

/// Writes the statistics as plain text for comparison with other
/// implementations.
///
/// Layout: a `# onebit-statistics v1` line, a `B M K` line, then for each of
/// `c_y`, `a_diag`, `c_r`, `c_q` a `name rows cols` line followed by one line
/// per row (row-major) of space-separated values. Complex entries are written
/// as `re im` pairs; `a_diag` is a real `n x 1` matrix.
pub fn write_statistics_dump(path: &Path, channels: &ChannelSet, stats: &SystemStatistics) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# onebit-statistics v1");
    let _ = writeln!(
        out,
        "{} {} {}",
        channels.num_bs(),
        channels.antennas_per_bs(),
        channels.num_ues()
    );
    let n = stats.dim();
    for (name, m) in [("c_y", &stats.c_y), ("c_r", &stats.c_r), ("c_q", &stats.c_q)] {
        if name == "c_r" {
            let _ = writeln!(out, "a_diag {n} 1");
            for a in stats.a_diag.iter() {
                let _ = writeln!(out, "{a:e}");
            }
        }
        let _ = writeln!(out, "{name} {n} {n}");
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a file produced by [`write_statistics_dump`]; returns `(B, M, K)` and
/// the statistics.
pub fn read_statistics_dump(path: &Path) -> Result<((usize, usize, usize), SystemStatistics)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Config(format!("{}: malformed statistics dump ({what})", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let dims: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing header"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("header")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(bad("header"));
    }
    let mut read_block = |expect: &str| -> Result<(usize, usize, Vec<f64>)> {
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing block"))?
            .split_whitespace()
            .collect();
        if head.len() != 3 || head[0] != expect {
            return Err(bad(expect));
        }
        let rows: usize = head[1].parse().map_err(|_| bad(expect))?;
        let cols: usize = head[2].parse().map_err(|_| bad(expect))?;
        let mut vals = Vec::new();
        for _ in 0..rows {
            for t in lines.next().ok_or_else(|| bad(expect))?.split_whitespace() {
                vals.push(t.parse::<f64>().map_err(|_| bad(expect))?);
            }
        }
        Ok((rows, cols, vals))
    };
    let complex = |(rows, cols, vals): (usize, usize, Vec<f64>)| -> Result<DMatrix<Complex64>> {
        if vals.len() != 2 * rows * cols {
            return Err(bad("complex block size"));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| {
            let at = 2 * (i * cols + j);
            Complex64::new(vals[at], vals[at + 1])
        }))
    };
    let c_y = complex(read_block("c_y")?)?;
    let (_, _, a) = read_block("a_diag")?;
    let c_r = complex(read_block("c_r")?)?;
    let c_q = complex(read_block("c_q")?)?;
    Ok((
        (dims[0], dims[1], dims[2]),
        SystemStatistics {
            c_y,
            a_diag: DVector::from_vec(a),
            c_r,
            c_q,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_defect, hermitian_eigenvalues};
    use crate::testing::random_instance;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quantizer_examples() {
        let s = FRAC_1_SQRT_2;
        assert_eq!(quantize(c(1.0, 1.0)), c(s, s));
        assert_eq!(quantize(c(-0.3, 2.0)), c(-s, s));
        assert_eq!(quantize(c(0.0, -0.0)), c(s, s));
        assert_eq!(quantize(c(0.0, -1e-300)), c(s, -s));
        for a in [c(0.2, -4.0), c(-7.0, -0.1), c(3.0, 0.5)] {
            for scale in [1e-9, 0.5, 3.0, 1e12] {
                assert_eq!(quantize(a * scale), quantize(a));
            }
        }
        let out = quantize_1bit(&[c(1.0, -1.0), c(-2.0, 0.5)]);
        assert_eq!(out, vec![c(s, -s), c(-s, s)]);
    }

    #[test]
    fn noise_only_statistics() {
        let ch = random_instance(2, 3, 2, 1);
        let point = OperatingPoint::uniform_noise(vec![0.0, 0.0], 2, 1.0);
        let st = compute_statistics(&ch, &point).unwrap();
        let n = 6;
        for i in 0..n {
            for j in 0..n {
                let eye = if i == j { 1.0 } else { 0.0 };
                assert_eq!(st.c_y[(i, j)], c(eye, 0.0));
                assert_eq!(st.c_r[(i, j)], c(eye, 0.0));
                assert!((st.c_q[(i, j)] - c(eye * (1.0 - FRAC_2_PI), 0.0)).norm() < 1e-15);
            }
            assert!((st.a_diag[i] - FRAC_2_PI.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_case() {
        let g = 0.7f64;
        let h = DMatrix::from_element(1, 1, c(g.sqrt() * 0.6, g.sqrt() * 0.8));
        let ch = ChannelSet::from_parts(h, DMatrix::from_element(1, 1, g), 1, 0).unwrap();
        let (rho, s2) = (2.0, 0.3);
        let st = compute_statistics(&ch, &OperatingPoint::new(vec![rho], vec![s2])).unwrap();
        let cy = rho * g + s2;
        assert!((st.c_y[(0, 0)].re - cy).abs() < 1e-14);
        assert!((st.a_diag[0] - (2.0 / (std::f64::consts::PI * cy)).sqrt()).abs() < 1e-15);
        assert_eq!(st.c_r[(0, 0)], c(1.0, 0.0));
        assert!((st.c_q[(0, 0)].re - (1.0 - FRAC_2_PI)).abs() < 1e-14);
    }

    #[test]
    fn structural_invariants_on_random_instances() {
        for seed in 0..10 {
            let ch = random_instance(2, 4, 3, seed);
            let point = crate::testing::random_point(&ch, seed + 100);
            let st = compute_statistics(&ch, &point).unwrap();
            assert_eq!(hermitian_defect(&st.c_y), 0.0);
            assert_eq!(hermitian_defect(&st.c_r), 0.0);
            assert_eq!(hermitian_defect(&st.c_q), 0.0);
            for i in 0..st.dim() {
                assert_eq!(st.c_r[(i, i)], c(1.0, 0.0));
                let expect = FRAC_2_PI.sqrt() / st.c_y[(i, i)].re.sqrt();
                assert!((st.a_diag[i] - expect).abs() <= 1e-15 * expect);
                for j in 0..st.dim() {
                    assert!(st.c_r[(i, j)].re.abs() <= 1.0 && st.c_r[(i, j)].im.abs() <= 1.0);
                }
            }
            let eig = hermitian_eigenvalues(&st.c_q);
            let norm = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            assert!(eig.min() >= -1e-9 * norm);
        }
    }

    #[test]
    fn invalid_points_are_rejected() {
        let ch = random_instance(1, 2, 2, 3);
        let neg = OperatingPoint::new(vec![-1.0, 1.0], vec![1.0]);
        assert!(matches!(compute_statistics(&ch, &neg), Err(Error::InvalidArgument(_))));
        let zero_noise = OperatingPoint::new(vec![1.0, 1.0], vec![0.0]);
        assert!(matches!(
            compute_statistics(&ch, &zero_noise),
            Err(Error::InvalidArgument(_))
        ));
        let wrong_len = OperatingPoint::new(vec![1.0], vec![1.0]);
        assert!(compute_statistics(&ch, &wrong_len).is_err());
    }

    #[test]
    fn asin_guard() {
        assert_eq!(checked_asin(1.0 + 5e-13).unwrap(), std::f64::consts::FRAC_PI_2);
        assert!(matches!(checked_asin(1.0 + 1e-9), Err(Error::Consistency(_))));
        assert!(checked_asin(f64::NAN).is_err());
    }

    #[test]
    fn sindr_from_x_cases() {
        assert_eq!(sindr_from_x(0.0).unwrap(), 0.0);
        assert!((sindr_from_x(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sindr_from_x(1.0 - 1e-10).unwrap(), SINDR_CAP);
        assert_eq!(sindr_from_x(1.0).unwrap(), SINDR_CAP);
        assert!(sindr_from_x(1.0 + 1e-6).is_err());
        assert!(sindr_from_x(-1e-3).is_err());
    }

    #[test]
    fn combiners_solve_the_normal_equations() {
        let ch = random_instance(2, 3, 2, 4);
        let point = crate::testing::random_point(&ch, 5);
        let st = compute_statistics(&ch, &point).unwrap();
        let w = mmse_combiners(&ch, &point, &st).unwrap();
        let ah = effective_channels(&ch, &st.a_diag);
        for k in 0..2 {
            let rhs = ah.column(k) * Complex64::new(point.powers[k].sqrt(), 0.0);
            let resid = &st.c_r * w.w.column(k) - &rhs;
            assert!(resid.norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn zero_power_gives_zero_combiner_and_unit_mse() {
        let ch = random_instance(2, 3, 2, 6);
        let mut point = crate::testing::random_point(&ch, 7);
        point.powers[1] = 0.0;
        let st = compute_statistics(&ch, &point).unwrap();
        let w = mmse_combiners(&ch, &point, &st).unwrap();
        assert!(w.w.column(1).iter().all(|z| z.norm() == 0.0));
        assert_eq!(sindr_closed_form(1, &ch, &point, &st).unwrap(), 0.0);
        assert_eq!(mse(1, &ch, &point, &st).unwrap(), 1.0);
    }

    #[test]
    fn matched_filter_at_identity_cr() {
        // Tiny power: C_r is the identity to first order and w_k is
        // proportional to A h_k.
        let ch = random_instance(1, 4, 1, 8);
        let point = OperatingPoint::new(vec![1e-14], vec![1.0]);
        let st = compute_statistics(&ch, &point).unwrap();
        let w = mmse_combiners(&ch, &point, &st).unwrap();
        let ah = effective_channels(&ch, &st.a_diag);
        let ratio = w.w[(0, 0)] / ah[(0, 0)];
        for i in 0..4 {
            assert!((w.w[(i, 0)] - ah[(i, 0)] * ratio).norm() <= 1e-9 * w.w[(i, 0)].norm());
        }
    }

    #[test]
    fn general_sindr_matches_closed_form_under_mmse() {
        for seed in 0..5 {
            let ch = random_instance(2, 4, 3, 20 + seed);
            let point = crate::testing::random_point(&ch, 40 + seed);
            let st = compute_statistics(&ch, &point).unwrap();
            let w = mmse_combiners(&ch, &point, &st).unwrap();
            for k in 0..3 {
                let wk = w.w.column(k).into_owned();
                let general = sindr_general(k, &wk, &ch, &point, &st).unwrap();
                let closed = sindr_closed_form(k, &ch, &point, &st).unwrap();
                assert!((general / closed - 1.0).abs() < 1e-8, "{general} vs {closed}");
                let scaled = wk * Complex64::new(-2.5, 0.75);
                let again = sindr_general(k, &scaled, &ch, &point, &st).unwrap();
                assert!((again / general - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn general_sindr_edge_cases() {
        let ch = random_instance(1, 3, 1, 9);
        let point = OperatingPoint::new(vec![1.0], vec![0.5]);
        let st = compute_statistics(&ch, &point).unwrap();
        let ah = effective_channels(&ch, &st.a_diag);
        // w orthogonal to A h.
        let a = ah.column(0);
        let w = DVector::from_vec(vec![-a[1].conj(), a[0].conj(), c(0.0, 0.0)]);
        assert!(sindr_general(0, &w, &ch, &point, &st).unwrap().abs() < 1e-25);
        let zero = DVector::from_element(3, c(0.0, 0.0));
        assert!(sindr_general(0, &zero, &ch, &point, &st).is_err());
    }

    #[test]
    fn mse_identity_and_local_optimality() {
        use rand::{Rng, SeedableRng};
        let ch = random_instance(2, 3, 2, 11);
        let point = crate::testing::random_point(&ch, 12);
        let st = compute_statistics(&ch, &point).unwrap();
        let w = mmse_combiners(&ch, &point, &st).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for k in 0..2 {
            let m = mse(k, &ch, &point, &st).unwrap();
            let s = sindr_closed_form(k, &ch, &point, &st).unwrap();
            assert!(((1.0 - m) / m / s - 1.0).abs() < 1e-9);
            let wk = w.w.column(k).into_owned();
            let base = mse_for_combiner(k, &wk, &ch, &point, &st);
            assert!((base - m).abs() < 1e-10);
            for _ in 0..100 {
                let v = DVector::from_fn(6, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                let pert = &wk + v * c(1e-3, 0.0);
                assert!(mse_for_combiner(k, &pert, &ch, &point, &st) >= base);
            }
        }
    }

    #[test]
    fn evaluate_matches_individual_calls() {
        let ch = random_instance(2, 4, 3, 13);
        let point = crate::testing::random_point(&ch, 14);
        let st = compute_statistics(&ch, &point).unwrap();
        let ev = evaluate_sindr(&ch, &point).unwrap();
        for k in 0..3 {
            let s = sindr_closed_form(k, &ch, &point, &st).unwrap();
            assert!((ev.sindr[k] - s).abs() <= 1e-12 * s.max(1.0));
        }
    }

    #[test]
    fn dump_round_trip() {
        let ch = random_instance(2, 2, 2, 15);
        let point = crate::testing::random_point(&ch, 16);
        let st = compute_statistics(&ch, &point).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.txt");
        write_statistics_dump(&path, &ch, &st).unwrap();
        let (dims, back) = read_statistics_dump(&path).unwrap();
        assert_eq!(dims, (2, 2, 2));
        assert_eq!(back.c_y, st.c_y);
        assert_eq!(back.c_r, st.c_r);
        assert_eq!(back.c_q, st.c_q);
        assert_eq!(back.a_diag, st.a_diag);
    }
}
