//! Analytic derivatives of the quantized statistics with respect to the UE
//! powers, and a finite-difference harness to check them.
//!
//! `C_r(i, j)` depends on `rho_k` through the normalized covariance
//! `u_ij = C_y(i, j) / sqrt(C_y(i, i) C_y(j, j))`, so
//!
//! ```text
//! d Re C_r(i,j) / d rho_k = 2/pi / sqrt(1 - Re(u_ij)^2) * d Re(u_ij) / d rho_k
//! d u_ij / d rho_k = ( h_k(i) conj(h_k(j))
//!                      - 1/2 C_y(i,j) (|h_k(i)|^2 / C_y(i,i) + |h_k(j)|^2 / C_y(j,j)) )
//!                    / sqrt(C_y(i,i) C_y(j,j))
//! ```
//!
//! and the same with `Im` for the imaginary part. [`ArcsinArgument::Published`]
//! keeps the variant that uses `|C_r(i, j)|` inside the square root, the
//! un-conjugated product `h_k(i) h_k(j)` and `A(i,i)^2` in place of
//! `1 / C_y(i,i)`; it exists only so tests can show that it disagrees with
//! finite differences.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bussgang::{effective_channels, OperatingPoint, SystemStatistics};
use crate::error::{Error, Result};
use crate::linalg::HermitianFactor;
use crate::scenario::ChannelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcsinArgument {
    /// Normalized input covariance, the exact chain rule.
    Normalized,
    /// Literal transcription with `q_ij = C_r(i, j)`.
    Published,
}

/// Diagonal of `dA / d rho_k`.
pub fn d_bussgang_gain(k: usize, channels: &ChannelSet, stats: &SystemStatistics) -> DVector<f64> {
    let scale = -(1.0 / (2.0 * PI)).sqrt();
    DVector::from_iterator(
        stats.dim(),
        (0..stats.dim()).map(|i| {
            let cyy = stats.c_y[(i, i)].re;
            scale * cyy.powf(-1.5) * channels.h[(i, k)].norm_sqr()
        }),
    )
}

pub fn d_quantized_covariance(k: usize, channels: &ChannelSet, stats: &SystemStatistics) -> Result<DMatrix<Complex64>> {
    d_quantized_covariance_with(k, channels, stats, ArcsinArgument::Normalized)
}

pub fn d_quantized_covariance_with(
    k: usize,
    channels: &ChannelSet,
    stats: &SystemStatistics,
    form: ArcsinArgument,
) -> Result<DMatrix<Complex64>> {
    let n = stats.dim();
    let h = channels.h.column(k);
    let diag: Vec<f64> = (0..n).map(|i| stats.c_y[(i, i)].re).collect();
    let mut d = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        for i in (j + 1)..n {
            let cy = stats.c_y[(i, j)];
            let inv_sd = 1.0 / (diag[i] * diag[j]).sqrt();
            let (re, im) = match form {
                ArcsinArgument::Normalized => {
                    let u = cy * inv_sd;
                    let g = h[i] * h[j].conj();
                    let w = 0.5 * (h[i].norm_sqr() / diag[i] + h[j].norm_sqr() / diag[j]);
                    let du_re = inv_sd * (g.re - cy.re * w);
                    let du_im = inv_sd * (g.im - cy.im * w);
                    let s_re = 1.0 - u.re * u.re;
                    let s_im = 1.0 - u.im * u.im;
                    if !(s_re > 0.0) || !(s_im > 0.0) {
                        return Err(Error::SingularDerivative { row: i, col: j });
                    }
                    (FRAC_2_PI * du_re / s_re.sqrt(), FRAC_2_PI * du_im / s_im.sqrt())
                }
                ArcsinArgument::Published => {
                    let (ai, aj) = (stats.a_diag[i], stats.a_diag[j]);
                    let q = stats.c_r[(i, j)];
                    let s = 1.0 - q.norm_sqr();
                    if !(s > 0.0) {
                        return Err(Error::SingularDerivative { row: i, col: j });
                    }
                    let g = h[i] * h[j];
                    let w = 0.5 * (h[i].norm_sqr() * ai * ai + h[j].norm_sqr() * aj * aj);
                    let f = ai * aj / s.sqrt();
                    (f * (g.re - cy.re * w), f * (g.im - cy.im * w))
                }
            };
            d[(i, j)] = Complex64::new(re, im);
            d[(j, i)] = Complex64::new(re, -im);
        }
    }
    Ok(d)
}

/// Per-UE derivative objects shared by the constraint and Lagrangian
/// gradients.
#[derive(Debug, Clone)]
pub struct DerivativePieces {
    /// Columns `C_r^{-1} A h_k`.
    pub solved: DMatrix<Complex64>,
    /// `h_k^H A C_r^{-1} A h_k` without the power factor.
    pub gains: Vec<f64>,
    pub d_a: Vec<DVector<f64>>,
    pub d_cr: Vec<DMatrix<Complex64>>,
}

impl DerivativePieces {
    pub fn compute(channels: &ChannelSet, stats: &SystemStatistics) -> Result<Self> {
        let factor = HermitianFactor::new(&stats.c_r)?;
        let ah = effective_channels(channels, &stats.a_diag);
        let solved = factor.solve(&ah);
        let gains = (0..channels.num_ues())
            .map(|k| ah.column(k).dotc(&solved.column(k)).re)
            .collect();
        let d_a = (0..channels.num_ues())
            .map(|k| d_bussgang_gain(k, channels, stats))
            .collect();
        let d_cr = (0..channels.num_ues())
            .map(|k| d_quantized_covariance(k, channels, stats))
            .collect::<Result<_>>()?;
        Ok(DerivativePieces {
            solved,
            gains,
            d_a,
            d_cr,
        })
    }
}

/// `d (h_kb^H A C_r^{-1} A h_kb) / d rho_k`.
pub fn d_constraint(kb: usize, k: usize, channels: &ChannelSet, pieces: &DerivativePieces) -> f64 {
    let v = pieces.solved.column(kb);
    let h = channels.h.column(kb);
    let da = &pieces.d_a[k];
    let first: Complex64 = (0..v.len()).map(|i| (h[i] * da[i]).conj() * v[i]).sum();
    let second = v.dotc(&(&pieces.d_cr[k] * v)).re;
    2.0 * first.re - second
}

#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub d_a_drho: Vec<DVector<f64>>,
    pub d_cr_drho: Vec<DMatrix<Complex64>>,
    /// Entry `(kb, k)` is `d (h_kb^H A C_r^{-1} A h_kb) / d rho_k`.
    pub d_constraint_drho: DMatrix<f64>,
    pub d_l_drho: Vec<f64>,
}

impl GradientBundle {
    pub fn compute(
        channels: &ChannelSet,
        point: &OperatingPoint,
        stats: &SystemStatistics,
        duals: &[f64],
    ) -> Result<Self> {
        let pieces = DerivativePieces::compute(channels, stats)?;
        let d_constraint = constraint_jacobian(channels, &pieces);
        let d_l = assemble_lagrangian_gradient(point, duals, &pieces.gains, &d_constraint)?;
        Ok(GradientBundle {
            d_a_drho: pieces.d_a,
            d_cr_drho: pieces.d_cr,
            d_constraint_drho: d_constraint,
            d_l_drho: d_l,
        })
    }
}

pub fn constraint_jacobian(channels: &ChannelSet, pieces: &DerivativePieces) -> DMatrix<f64> {
    let nk = channels.num_ues();
    DMatrix::from_fn(nk, nk, |kb, k| d_constraint(kb, k, channels, pieces))
}

fn assemble_lagrangian_gradient(
    point: &OperatingPoint,
    duals: &[f64],
    gains: &[f64],
    d_constraint: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let nk = gains.len();
    if duals.len() != nk {
        return Err(Error::invalid(format!("{} duals for {nk} UEs", duals.len())));
    }
    if let Some(m) = duals.iter().find(|m| !(**m >= 0.0)) {
        return Err(Error::invalid(format!("dual variables must be >= 0, got {m}")));
    }
    Ok((0..nk)
        .map(|k| {
            let coupling: f64 = (0..nk)
                .map(|kb| duals[kb] * point.powers[kb] * d_constraint[(kb, k)])
                .sum();
            1.0 - duals[k] * gains[k] - coupling
        })
        .collect())
}

/// Gradient of `sum_k rho_k - mu_k (rho_k h_k^H A C_r^{-1} A h_k - t_k)`
/// with respect to the powers.
pub fn lagrangian_gradient(
    point: &OperatingPoint,
    duals: &[f64],
    channels: &ChannelSet,
    stats: &SystemStatistics,
) -> Result<Vec<f64>> {
    let pieces = DerivativePieces::compute(channels, stats)?;
    let jac = constraint_jacobian(channels, &pieces);
    assemble_lagrangian_gradient(point, duals, &pieces.gains, &jac)
}

/// Value of the Lagrangian for constraint thresholds `t_k`.
pub fn lagrangian_value(powers: &[f64], x: &[f64], duals: &[f64], thresholds: &[f64]) -> f64 {
    powers
        .iter()
        .zip(x)
        .zip(duals.iter().zip(thresholds))
        .map(|((p, xk), (m, t))| p - m * (xk - t))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub analytic: f64,
    pub numeric: f64,
    pub step: f64,
    pub one_sided: bool,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl FdReport {
    /// Passes if the error is within `rel` of the analytic value or below the
    /// absolute floor.
    pub fn passes(&self, rel: f64, abs_floor: f64) -> bool {
        self.abs_error <= (rel * self.analytic.abs()).max(abs_floor)
    }
}

pub fn fd_step(power: f64) -> f64 {
    (1e-6 * power).max(1e-9)
}

/// Compares `analytic` with a finite difference of `f` in power `k`.
///
/// Central difference with step `max(1e-6 rho_k, 1e-9)`; forward difference
/// when the backward point would leave `rho_k >= 0`.
pub fn finite_difference_check<F>(f: F, powers: &[f64], k: usize, analytic: f64) -> Result<FdReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let step = fd_step(powers[k]);
    let mut shifted = powers.to_vec();
    let one_sided = powers[k] - step < 0.0;
    let numeric = if one_sided {
        let f0 = f(powers)?;
        shifted[k] = powers[k] + step;
        (f(&shifted)? - f0) / step
    } else {
        shifted[k] = powers[k] + step;
        let fp = f(&shifted)?;
        shifted[k] = powers[k] - step;
        let fm = f(&shifted)?;
        (fp - fm) / (2.0 * step)
    };
    let abs_error = (numeric - analytic).abs();
    let scale = numeric.abs().max(analytic.abs());
    let rel_error = if scale > 0.0 { abs_error / scale } else { 0.0 };
    Ok(FdReport {
        analytic,
        numeric,
        step,
        one_sided,
        abs_error,
        rel_error,
    })
}
