//! Iterative waterfilling for the per-user rate weights `Λ`.
//!
//! Each pass treats the users as parallel Gaussian channels with gains
//! `δ_k² = P·d_k² / E_se`, waterfills `Σλ_k² = 1` over them, then refreshes
//! `E_se` for the new generator `V⁻¹Λ`. Inside the loop `E_se` is the sphere
//! lower bound, which keeps the iteration deterministic; a Monte-Carlo
//! estimate is taken once the weights have settled.

use crate::error::{Error, Result};
use crate::linalg::{dvq_decompose, CMatrix};
use crate::precoder::{ese_lower_bound, EseEstimate, Precoder, PrecoderConfig, DEFAULT_ESE_SAMPLES};

#[derive(Debug, Clone, PartialEq)]
pub struct Waterfill {
    /// `λ_k = √max{0, ζ − 1/δ_k²}`.
    pub lambda: Vec<f64>,
    /// Water level `ζ`.
    pub zeta: f64,
}

/// Solves `λ_k² = max{0, ζ − 1/δ_k²}` with `Σ λ_k² = 1`.
pub fn waterfill_once(delta_sq: &[f64]) -> Result<Waterfill> {
    if delta_sq.is_empty() {
        return Err(Error::Domain("waterfilling needs at least one channel".into()));
    }
    if let Some(bad) = delta_sq.iter().find(|&&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::Domain(format!("channel gains must be positive, got {bad}")));
    }
    let mut floors: Vec<f64> = delta_sq.iter().map(|d| 1.0 / d).collect();
    floors.sort_by(f64::total_cmp);

    // Largest active set whose level clears its own highest floor.
    let mut zeta = f64::NAN;
    let mut prefix: f64 = floors.iter().sum();
    for m in (1..=floors.len()).rev() {
        let level = (1.0 + prefix) / m as f64;
        if level > floors[m - 1] {
            zeta = level;
            break;
        }
        prefix -= floors[m - 1];
    }
    debug_assert!(zeta.is_finite(), "the strongest channel is always active");

    let lambda = delta_sq.iter().map(|d| (zeta - 1.0 / d).max(0.0).sqrt()).collect();
    Ok(Waterfill { lambda, zeta })
}

#[derive(Debug, Clone, Copy)]
pub struct AllocOptions {
    pub max_iters: usize,
    /// Convergence threshold on `max_k |Δλ_k|`.
    pub tol: f64,
    /// Samples for the final Monte-Carlo E_se.
    pub ese_samples: usize,
    pub seed: u64,
}

impl Default for AllocOptions {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-6, ese_samples: DEFAULT_ESE_SAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Per-user weights, zero for switched-off users. `Σλ² = 1`.
    pub lambda: Vec<f64>,
    pub zeta: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The E_se (lower bound) that produced the final waterfilling pass.
    pub ese_bound: f64,
    /// Monte-Carlo E_se of the final precoder.
    pub ese_final: EseEstimate,
    /// Per-user gains `d_k` of `H = D·V·Q`.
    pub d: Vec<f64>,
}

impl AllocationResult {
    pub fn active_users(&self) -> Vec<usize> {
        (0..self.lambda.len()).filter(|&k| self.lambda[k] > 0.0).collect()
    }

    /// `(λ_k, d_k)` for active users, ready for the allocated sum rate.
    pub fn active_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        self.active_users().into_iter().map(|k| (self.lambda[k], self.d[k])).unzip()
    }
}

/// Sub-optimal rate allocation for a full-row-rank channel.
pub fn allocate(h: &CMatrix, snr: f64, opts: &AllocOptions) -> Result<AllocationResult> {
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("transmit SNR must be positive, got {snr}")));
    }
    if opts.max_iters == 0 {
        return Err(Error::Domain("max_iters must be at least 1".into()));
    }
    let factors = dvq_decompose(h)?;
    let k = factors.k();
    let v_inv = factors.v_inverse();

    let mut active: Vec<usize> = (0..k).collect();
    let mut ese = ese_lower_bound(&v_inv)?;
    let mut lambda = vec![1.0 / (k as f64).sqrt(); k];
    let mut zeta = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    let mut ese_used = ese;

    while iterations < opts.max_iters {
        iterations += 1;
        let delta_sq: Vec<f64> = active.iter().map(|&i| snr * factors.d[i].powi(2) / ese).collect();
        let wf = waterfill_once(&delta_sq)?;
        let mut next = vec![0.0; k];
        for (&i, &l) in active.iter().zip(&wf.lambda) {
            next[i] = l;
        }
        let change = next.iter().zip(&lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        lambda = next;
        zeta = wf.zeta;
        ese_used = ese;
        if change < opts.tol {
            converged = true;
            break;
        }
        active.retain(|&i| lambda[i] > 0.0);
        if active.is_empty() {
            return Err(Error::NoActiveUsers);
        }
        ese = ese_lower_bound(&v_inv.scale_cols(&lambda).select_cols(&active))?;
    }

    let precoder = Precoder::new(&PrecoderConfig::rate_allocated(h.clone(), lambda.clone(), snr))?;
    let ese_final = precoder.estimate_ese(opts.ese_samples, opts.seed)?;
    Ok(AllocationResult {
        lambda,
        zeta,
        iterations,
        converged,
        ese_bound: ese_used,
        ese_final,
        d: factors.d,
    })
}
