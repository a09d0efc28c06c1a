//! Per-subcarrier digital precoding on the effective channel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analog::AnalogPrecoder;
use crate::error::{Error, Result};

/// Effective channel `h̄ = Aᴴ h`, so that `h̄ᴴ = hᴴ A`.
pub fn effective_channel(h: &[Complex64], analog: &AnalogPrecoder) -> Result<DVector<Complex64>> {
    Ok(DVector::from_vec(analog.project(h)?))
}

/// Digital power budget `P_t / N_sub` implied by `AᴴA = N_sub I`.
pub fn digital_power_budget(total_power: f64, elements_per_panel: usize) -> f64 {
    total_power / elements_per_panel as f64
}

/// `‖A D‖_F²` evaluated from the block-diagonal structure of `A`.
pub fn transmit_power(analog: &AnalogPrecoder, d: &DMatrix<Complex64>) -> f64 {
    (0..analog.num_panels())
        .map(|p| {
            let col: f64 = analog.column(p).iter().map(|a| a.norm_sqr()).sum();
            col * d.row(p).iter().map(|x| x.norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// SINR of every user, `|h̄_kᴴ d_k|² / (Σ_{i≠k} |h̄_kᴴ d_i|² + σ²)`.
pub fn sinr(channels: &[DVector<Complex64>], d: &DMatrix<Complex64>, noise: f64) -> Vec<f64> {
    channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let powers: Vec<f64> = d.column_iter().map(|col| h.dotc(&col).norm_sqr()).collect();
            let total: f64 = powers.iter().sum();
            powers[k] / (total - powers[k] + noise)
        })
        .collect()
}

/// `Σ_k log2(1 + γ_k)` for one subcarrier.
pub fn sum_rate(channels: &[DVector<Complex64>], d: &DMatrix<Complex64>, noise: f64) -> f64 {
    sinr(channels, d, noise).iter().map(|g| (1.0 + g).log2()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Relative change of the sum rate below which iteration stops.
    pub tol: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl WmmseConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!("wmmse.tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutcome {
    /// `N_RF × K` precoder.
    pub precoder: DMatrix<Complex64>,
    /// Sum rate of the initial point and after every iteration.
    pub history: Vec<f64>,
}

fn scale_to_budget(d: &mut DMatrix<Complex64>, power: f64) {
    let current = d.norm_squared();
    if current > power {
        *d *= Complex64::from((power / current).sqrt());
    }
}

/// Matched filter with equal power per user and `‖D‖_F² = power`.
pub fn matched_filter(channels: &[DVector<Complex64>], n_rf: usize, power: f64) -> DMatrix<Complex64> {
    let k = channels.len();
    let mut d = DMatrix::zeros(n_rf, k);
    for (j, h) in channels.iter().enumerate() {
        let norm = h.norm();
        if norm > 0.0 {
            d.set_column(j, &(h * Complex64::from((power / k as f64).sqrt() / norm)));
        }
    }
    d
}

/// Zero forcing with water-filled user powers and `‖D‖_F² = power`.
/// `None` when there are more users than chains or the channels are
/// linearly dependent.
pub fn zero_forcing(channels: &[DVector<Complex64>], n_rf: usize, power: f64, noise: f64) -> Option<DMatrix<Complex64>> {
    let k = channels.len();
    if k == 0 || k > n_rf || !(noise > 0.0) {
        return None;
    }
    let h = DMatrix::from_columns(channels);
    let gram = h.adjoint() * &h;
    let v = &h * gram.cholesky()?.inverse();
    let cost: Vec<f64> = v.column_iter().map(|c| c.norm_squared()).collect();
    if cost.iter().any(|c| !c.is_finite()) {
        return None;
    }
    // Levels q_k = c_k p_k = (mu - c_k σ²)^+ with Σ q_k = power.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]));
    let mut level = 0.0;
    let mut floor_sum = 0.0;
    for (m, &j) in order.iter().enumerate() {
        floor_sum += cost[j] * noise;
        let candidate = (power + floor_sum) / (m + 1) as f64;
        if candidate <= cost[j] * noise {
            break;
        }
        level = candidate;
    }
    let mut d = DMatrix::zeros(n_rf, k);
    for (j, c) in cost.iter().enumerate() {
        let p = (level - c * noise).max(0.0) / c;
        d.set_column(j, &(v.column(j) * Complex64::from(p.sqrt())));
    }
    scale_to_budget(&mut d, power);
    Some(d)
}

/// One precoder update: `d_k = w_k u_k (M + μI)⁻¹ h̄_k` with the smallest
/// `μ ≥ 0` meeting `‖D‖_F² ≤ power`.
fn precoder_step(
    channels: &[DVector<Complex64>],
    u: &[Complex64],
    w: &[f64],
    n_rf: usize,
    power: f64,
) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(n_rf, n_rf);
    let mut rhs = DMatrix::<Complex64>::zeros(n_rf, channels.len());
    for (k, h) in channels.iter().enumerate() {
        m += h * h.adjoint() * Complex64::from(w[k] * u[k].norm_sqr());
        rhs.set_column(k, &(h * (u[k] * w[k])));
    }
    let eig = m.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let null = 1e-12 * lambda_max;
    let projected = eig.eigenvectors.adjoint() * &rhs;
    let weights: Vec<f64> = projected.row_iter().map(|r| r.norm_squared()).collect();
    let live: Vec<bool> = eig.eigenvalues.iter().map(|&l| l > null).collect();
    let power_at = |mu: f64| -> f64 {
        (0..n_rf)
            .filter(|&j| live[j])
            .map(|j| weights[j] / (eig.eigenvalues[j] + mu).powi(2))
            .sum()
    };
    let mu = if power_at(0.0) <= power {
        0.0
    } else {
        let mut hi = lambda_max.max(f64::MIN_POSITIVE);
        while power_at(hi) > power {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power_at(mid) > power {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut scaled = projected;
    for (j, &alive) in live.iter().enumerate() {
        let s = if alive { 1.0 / (eig.eigenvalues[j] + mu) } else { 0.0 };
        scaled.row_mut(j).scale_mut(s);
    }
    let mut d = &eig.eigenvectors * scaled;
    scale_to_budget(&mut d, power);
    d
}

/// Sum-rate maximization on one subcarrier by WMMSE.
///
/// `channels[k]` is `h̄_k` (length `N_RF`), `power` the digital budget
/// `P_t / N_sub`, `noise` the noise variance `σ²`. Iteration starts from
/// the matched filter and, when it exists, from water-filled zero forcing;
/// the run ending at the higher sum rate is returned. A step that would
/// lower the sum rate ends a run and is discarded.
pub fn wmmse(channels: &[DVector<Complex64>], power: f64, noise: f64, cfg: &WmmseConfig) -> WmmseOutcome {
    let n_rf = channels.first().map_or(0, |h| h.len());
    let mut best = wmmse_from(channels, matched_filter(channels, n_rf, power), power, noise, cfg);
    if let Some(d) = zero_forcing(channels, n_rf, power, noise) {
        let other = wmmse_from(channels, d, power, noise, cfg);
        if other.history.last() > best.history.last() {
            best = other;
        }
    }
    best
}

fn wmmse_from(
    channels: &[DVector<Complex64>],
    mut d: DMatrix<Complex64>,
    power: f64,
    noise: f64,
    cfg: &WmmseConfig,
) -> WmmseOutcome {
    let n_rf = d.nrows();
    let mut rate = sum_rate(channels, &d, noise);
    let mut history = vec![rate];
    for _ in 0..cfg.max_iters {
        let mut u = Vec::with_capacity(channels.len());
        let mut w = Vec::with_capacity(channels.len());
        for h in channels {
            let received: Vec<Complex64> = d.column_iter().map(|col| h.dotc(&col)).collect();
            let total: f64 = received.iter().map(|r| r.norm_sqr()).sum::<f64>() + noise;
            let k = u.len();
            let uk = received[k] / total;
            let mse = 1.0 - (uk.conj() * received[k]).re;
            u.push(uk);
            w.push(if mse > 0.0 { 1.0 / mse } else { 1.0 });
        }
        let next = precoder_step(channels, &u, &w, n_rf, power);
        let next_rate = sum_rate(channels, &next, noise);
        if next_rate < rate {
            break;
        }
        let change = (next_rate - rate) / rate.abs().max(f64::MIN_POSITIVE);
        d = next;
        rate = next_rate;
        history.push(rate);
        if change < cfg.tol {
            break;
        }
    }
    WmmseOutcome { precoder: d, history }
}

/// Digital precoders `D_l` for every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalPrecoder {
    pub matrices: Vec<DMatrix<Complex64>>,
}

impl DigitalPrecoder {
    /// Solve every subcarrier independently; `channels[l][k]` is `h̄_{l,k}`.
    pub fn wmmse(channels: &[Vec<DVector<Complex64>>], power: f64, noise: f64, cfg: &WmmseConfig) -> Self {
        let matrices = channels
            .par_iter()
            .map(|c| wmmse(c, power, noise, cfg).precoder)
            .collect();
        Self { matrices }
    }

    pub fn sinr(&self, channels: &[Vec<DVector<Complex64>>], noise: f64) -> Vec<Vec<f64>> {
        channels
            .iter()
            .zip(&self.matrices)
            .map(|(c, d)| sinr(c, d, noise))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// `γ[l][k]`.
    pub sinr: Vec<Vec<f64>>,
    /// Per-user rate including the CP factor; sums to `total`.
    pub per_user: Vec<f64>,
    pub total: f64,
    /// `Σ_k Σ_l log2(1 + γ)` without the CP factor.
    pub cp_free: f64,
}

/// `R = (1/(L+L_CP)) Σ_k Σ_l log2(1 + γ_{l,k})`.
pub fn spectral_efficiency(sinr: &[Vec<f64>], subcarriers: usize, cyclic_prefix: usize) -> RateReport {
    let users = sinr.first().map_or(0, Vec::len);
    let factor = 1.0 / (subcarriers + cyclic_prefix) as f64;
    let raw: Vec<f64> = (0..users)
        .map(|k| sinr.iter().map(|g| (1.0 + g[k]).log2()).sum())
        .collect();
    let cp_free: f64 = raw.iter().sum();
    RateReport {
        sinr: sinr.to_vec(),
        per_user: raw.iter().map(|r| r * factor).collect(),
        total: cp_free * factor,
        cp_free,
    }
}
