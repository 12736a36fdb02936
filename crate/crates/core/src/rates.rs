//! Sum-rate expressions for vector perturbation with uniform inputs.
//!
//! All rates are in bits per channel use. The only non-elementary quantity is
//! the modulo correction `Ω(γ) = ½·log₂(2πeγ) − H(ξ)`, where `ξ` is a real
//! Gaussian of variance `γ` folded into `[-½, ½)`. Its density
//! `f(ξ) = Σ_s φ(ξ − s)` is smooth and 1-periodic, so the periodic trapezoid
//! rule converges exponentially; the grid is refined by doubling until two
//! successive estimates agree.

use std::f64::consts::{E, LN_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{log_gram_det, CMatrix};

/// Above this `γ` the folded density is uniform to within `exp(-4π²γ)` and
/// the closed-form limit is returned.
pub const OMEGA_LARGE_GAMMA: f64 = 30.0;

/// Below this `γ` the folded mass outside the central replica underflows.
const OMEGA_SMALL_GAMMA: f64 = 1e-10;

/// Below this `γ`, `Ω ≈ exp(-1/(8γ))` is below the smallest subnormal.
const OMEGA_UNDERFLOW_GAMMA: f64 = 1.0 / (8.0 * 745.0);

/// Agreement required between successive quadrature refinements (nats).
const QUAD_TOL: f64 = 1e-13;

const MIN_POINTS: usize = 256;
const MAX_POINTS: usize = 1 << 23;

pub(crate) fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Number of Gaussian replicas on each side of the fundamental interval.
fn replicas(gamma: f64) -> i64 {
    (9.0 * gamma.sqrt()).ceil() as i64 + 2
}

/// `ln f(ξ)` for the folded Gaussian, via log-sum-exp over replicas.
fn log_folded_density(xi: f64, gamma: f64, smax: i64) -> f64 {
    let inv = 1.0 / (2.0 * gamma);
    let e0 = -(xi * xi) * inv;
    // The central replica dominates on [-½, ½].
    let tail: f64 = (-smax..=smax)
        .filter(|&s| s != 0)
        .map(|s| {
            let d = xi - s as f64;
            (-(d * d) * inv - e0).exp()
        })
        .sum();
    -0.5 * (2.0 * PI * gamma).ln() + e0 + tail.ln_1p()
}

/// Periodic trapezoid sums `(∫f, −∫f ln f)` on `n` points.
fn folded_moments(gamma: f64, n: usize) -> (f64, f64) {
    let smax = replicas(gamma);
    let h = 1.0 / n as f64;
    let (mut mass, mut ent) = (0.0, 0.0);
    for j in 0..n {
        let xi = -0.5 + j as f64 * h;
        let lf = log_folded_density(xi, gamma, smax);
        let f = lf.exp();
        mass += f;
        if f > 0.0 {
            ent -= f * lf;
        }
    }
    (mass * h, ent * h)
}

fn initial_points(gamma: f64) -> usize {
    let sigma = gamma.sqrt();
    ((4.0 / sigma).ceil() as usize).next_power_of_two().clamp(MIN_POINTS, MAX_POINTS)
}

/// `(∫f, H(ξ) in nats)` refined until successive grids agree.
fn converged_moments(gamma: f64) -> (f64, f64) {
    let mut n = initial_points(gamma);
    let mut prev = folded_moments(gamma, n);
    loop {
        n *= 2;
        let next = folded_moments(gamma, n);
        if (next.1 - prev.1).abs() <= QUAD_TOL * next.1.abs().max(1.0) || n >= MAX_POINTS {
            return next;
        }
        prev = next;
    }
}

/// Total probability mass of the folded Gaussian on `[-½, ½)`; 1 up to
/// quadrature error.
pub fn modulo_gaussian_mass(gamma: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    if gamma > OMEGA_LARGE_GAMMA {
        return Ok(1.0);
    }
    Ok(converged_moments(gamma).0)
}

/// Differential entropy `H(ξ)` of the folded Gaussian, in bits.
pub fn modulo_gaussian_entropy(gamma: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    if gamma > OMEGA_LARGE_GAMMA {
        return Ok(0.0);
    }
    if gamma < OMEGA_SMALL_GAMMA {
        return Ok(0.5 * (2.0 * PI * E * gamma).log2());
    }
    Ok(converged_moments(gamma).1 / LN_2)
}

/// Entropy of a folded Gaussian on a fixed `n`-point grid, in bits. Exposed
/// for refinement checks.
pub fn modulo_gaussian_entropy_on_grid(gamma: f64, n: usize) -> Result<f64> {
    check_positive("gamma", gamma)?;
    if n < 2 {
        return Err(Error::Domain("quadrature needs at least two points".into()));
    }
    Ok(folded_moments(gamma, n).1 / LN_2)
}

/// Modulo loss `Ω(γ)` in bits: zero as `γ → 0`, `½·log₂(2πeγ)` as `γ → ∞`.
pub fn omega(gamma: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    let gaussian = 0.5 * (2.0 * PI * E * gamma).log2();
    if gamma > OMEGA_LARGE_GAMMA {
        return Ok(gaussian);
    }
    if gamma < OMEGA_UNDERFLOW_GAMMA {
        return Ok(0.0);
    }
    Ok(omega_direct(gamma) / LN_2)
}

/// `ln(f(x)/φ(x)) = ln Σ_s exp((2xs − s²)/(2γ))`, which is never negative
/// because the `s = 0` term is 1.
fn log_fold_ratio(x: f64, gamma: f64, smax: i64) -> f64 {
    let inv = 1.0 / (2.0 * gamma);
    let centre = x.round() as i64;
    let e = |s: i64| (2.0 * x * s as f64 - (s * s) as f64) * inv;
    let top = e(centre);
    let rest: f64 = (centre - smax..=centre + smax).filter(|&s| s != centre).map(|s| (e(s) - top).exp()).sum();
    top + rest.ln_1p()
}

/// `Ω` in nats as `E[ln(f(X)/φ(X))]`, `X ~ N(0, γ)`. Writing it this way
/// avoids the cancellation in `½ln(2πeγ) − H(ξ)` when `Ω` is tiny. The
/// integrand is even, so the trapezoid rule on `[0, R]` converges spectrally.
fn omega_direct(gamma: f64) -> f64 {
    let sigma = gamma.sqrt();
    let smax = replicas(gamma);
    let reach = 1.0 + 10.0 * sigma;
    // The integrand changes over a width of about 2γ near x = ½ for small γ.
    let step = (gamma / 4.0).min(sigma / 8.0).min(1.0 / 64.0);
    let norm = 1.0 / (2.0 * PI * gamma).sqrt();
    let integral = |n: usize| {
        let h = reach / n as f64;
        let mut acc = 0.5 * log_fold_ratio(0.0, gamma, smax);
        for j in 1..=n {
            let x = j as f64 * h;
            let w = if j == n { 0.5 } else { 1.0 };
            acc += w * (-(x * x) / (2.0 * gamma)).exp() * log_fold_ratio(x, gamma, smax);
        }
        2.0 * norm * acc * h
    };
    let mut n = ((reach / step).ceil() as usize).max(MIN_POINTS);
    let mut prev = integral(n);
    loop {
        n *= 2;
        let next = integral(n);
        if (next - prev).abs() <= 1e-12 * next || n >= MAX_POINTS {
            return next;
        }
        prev = next;
    }
}

fn check_rate_args(ese: f64, snr: f64, k: usize) -> Result<()> {
    check_positive("E_se", ese)?;
    check_positive("transmit SNR", snr)?;
    if k == 0 {
        return Err(Error::Domain("need at least one user".into()));
    }
    Ok(())
}

/// Sum rate with uniform inputs and known E_se:
/// `K·log(P/K) − K·log(πe·E_se/K) + 2K·Ω(E_se/(2P))`.
pub fn sum_rate_exact(ese: f64, snr: f64, k: usize) -> Result<f64> {
    check_rate_args(ese, snr, k)?;
    Ok(sum_rate_lower(ese, snr, k)? + 2.0 * k as f64 * omega(ese / (2.0 * snr))?)
}

/// [`sum_rate_exact`] without the modulo term; reached as `P → ∞`.
pub fn sum_rate_lower(ese: f64, snr: f64, k: usize) -> Result<f64> {
    check_rate_args(ese, snr, k)?;
    let kf = k as f64;
    Ok(kf * (snr / kf).log2() - kf * (PI * E * ese / kf).log2())
}

/// High-SNR upper bound from the sphere lower bound on E_se:
/// `K·log(P/K) + log det(HH†) − K·log(Γ(K+1)^{1/K}·e/(K+1))`.
pub fn sum_rate_upper(h: &CMatrix, snr: f64) -> Result<f64> {
    check_positive("transmit SNR", snr)?;
    let k = h.rows();
    if k == 0 {
        return Err(Error::Domain("need at least one user".into()));
    }
    // Full-row-rank check shares the factorisation used for the determinant.
    crate::linalg::pseudoinverse(h)?;
    Ok(sum_rate_upper_from_log_det(log_gram_det(h), snr, k))
}

/// [`sum_rate_upper`] given `ln det(HH†)` directly.
pub fn sum_rate_upper_from_log_det(ln_det_w: f64, snr: f64, k: usize) -> f64 {
    let kf = k as f64;
    kf * (snr / kf).log2() + ln_det_w / LN_2
        - (ln_factorial(k) / LN_2 + kf * E.log2() - kf * (kf + 1.0).log2())
}

/// Exact per-user mutual information for effective gain `λ·d`.
pub fn mi_exact(lambda: f64, d: f64, ese: f64, snr: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    check_positive("d", d)?;
    check_rate_args(ese, snr, 1)?;
    let g2 = snr * lambda * lambda * d * d;
    Ok((g2 / (PI * E * ese)).log2() + 2.0 * omega(ese / (2.0 * g2))?)
}

/// Sum rate of the rate-allocated precoder, one term per active user.
pub fn sum_rate_ra(ese: f64, snr: f64, lambda: &[f64], d: &[f64]) -> Result<f64> {
    if lambda.len() != d.len() {
        return Err(Error::Dimension(format!("{} weights for {} gains", lambda.len(), d.len())));
    }
    if lambda.is_empty() {
        return Err(Error::Domain("need at least one user".into()));
    }
    lambda.iter().zip(d).map(|(&l, &dk)| mi_exact(l, dk, ese, snr)).sum()
}

fn effective_snr(lambda: f64, d: f64, ese: f64, snr: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    check_positive("d", d)?;
    check_rate_args(ese, snr, 1)?;
    Ok(snr * lambda * lambda * d * d / (PI * E * ese))
}

/// On/off approximation `max{0, log₂(Pλ²d²/(πe·E_se))}`.
pub fn mi_piecewise(lambda: f64, d: f64, ese: f64, snr: f64) -> Result<f64> {
    let s = effective_snr(lambda, d, ese, snr)?;
    Ok(if s > 1.0 { s.log2() } else { 0.0 })
}

/// Gaussian-channel proxy `log₂(1 + Pλ²d²/(πe·E_se))`.
pub fn mi_awgn(lambda: f64, d: f64, ese: f64, snr: f64) -> Result<f64> {
    Ok(effective_snr(lambda, d, ese, snr)?.ln_1p() / LN_2)
}

/// Rate-allocation objective: the on/off approximation summed over users.
pub fn r_vp_pw(lambda: &[f64], d: &[f64], ese: f64, snr: f64) -> Result<f64> {
    if lambda.len() != d.len() {
        return Err(Error::Dimension(format!("{} weights for {} gains", lambda.len(), d.len())));
    }
    lambda.iter().zip(d).map(|(&l, &dk)| mi_piecewise(l, dk, ese, snr)).sum()
}

/// All sum-rate figures for one channel realisation and E_se value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub r_exact: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    pub omega_term: f64,
    /// `E_se / (2P)`.
    pub gamma: f64,
    pub k_users: usize,
}

impl RateReport {
    pub fn evaluate(h: &CMatrix, ese: f64, snr: f64) -> Result<Self> {
        let k = h.rows();
        let gamma = ese / (2.0 * snr);
        let r_lower = sum_rate_lower(ese, snr, k)?;
        let omega_term = omega(gamma)?;
        Ok(Self {
            r_exact: r_lower + 2.0 * k as f64 * omega_term,
            r_lower,
            r_upper: sum_rate_upper(h, snr)?,
            omega_term,
            gamma,
            k_users: k,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvq_decompose;
    use crate::precoder::ese_lower_bound;
    use crate::sim::gen_channel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent route to `Ω` in nats: midpoint rule on `[-½, ½]` with
    /// replicas summed directly (no log-sum-exp, no refinement loop),
    /// following `Ω = ½ + ∫ f(ξ) ln Σ_t exp(-(ξ−t)²/(2γ)) dξ`.
    fn omega_oracle_bits(gamma: f64, n: usize) -> f64 {
        let smax = 60;
        let phi = 1.0 / (2.0 * PI * gamma).sqrt();
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            let xi = -0.5 + (j as f64 + 0.5) * h;
            let g: f64 = (-smax..=smax).map(|s| (-(xi - s as f64).powi(2) / (2.0 * gamma)).exp()).sum();
            acc += phi * g * g.ln();
        }
        (0.5 + acc * h) / LN_2
    }

    #[test]
    fn omega_agrees_with_entropy_difference() {
        for gamma in [0.02, 0.1, 0.5, 2.0, 10.0, 29.0] {
            let diff = 0.5 * (2.0 * PI * E * gamma).log2() - modulo_gaussian_entropy(gamma).unwrap();
            let direct = omega(gamma).unwrap();
            assert!((direct - diff).abs() < 1e-10, "gamma {gamma}: {direct} vs {diff}");
        }
    }

    #[test]
    fn omega_is_monotone_on_a_fine_grid() {
        let mut prev = 0.0;
        for i in 0..400 {
            let gamma = 10f64.powf(-6.0 + 7.5 * i as f64 / 399.0);
            let o = omega(gamma).unwrap();
            assert!(o >= prev, "omega drops at {gamma}: {prev} -> {o}");
            prev = o;
        }
    }

    #[test]
    fn omega_limits() {
        assert!(omega(1e-6).unwrap() < 1e-6);
        let big = omega(100.0).unwrap();
        assert!((big - 0.5 * (200.0 * PI * E).log2()).abs() < 1e-4);
        assert!(matches!(omega(0.0), Err(Error::Domain(_))));
        assert!(omega(-1.0).is_err());
    }

    #[test]
    fn omega_matches_refined_oracle() {
        for &g in &[0.05, 0.01, 0.3, 1.0, 5.0, 29.0] {
            let want = omega_oracle_bits(g, 20_480);
            let got = omega(g).unwrap();
            assert!((got - want).abs() < 1e-7, "gamma={g}: {got} vs {want}");
        }
    }

    #[test]
    fn omega_continuous_across_large_gamma_switch() {
        let below = omega(OMEGA_LARGE_GAMMA * (1.0 - 1e-9)).unwrap();
        let above = omega(OMEGA_LARGE_GAMMA * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn entropy_grid_refinement_is_stable() {
        let coarse = modulo_gaussian_entropy_on_grid(0.05, 2048).unwrap();
        let fine = modulo_gaussian_entropy_on_grid(0.05, 20_480).unwrap();
        assert!((coarse - fine).abs() < 1e-10);
        assert!((modulo_gaussian_entropy(0.05).unwrap() - fine).abs() < 1e-10);
    }

    #[test]
    fn folded_density_is_normalised() {
        for &g in &[1e-6, 1e-3, 0.05, 0.5, 3.0, 25.0, 50.0] {
            let m = modulo_gaussian_mass(g).unwrap();
            assert!((m - 1.0).abs() < 1e-8, "gamma={g}: mass {m}");
        }
    }

    #[test]
    fn omega_monotone_nonnegative() {
        let mut prev = 0.0;
        for i in 0..=90 {
            let g = 10f64.powf(-6.0 + 9.0 * i as f64 / 90.0);
            let w = omega(g).unwrap();
            assert!(w >= 0.0);
            assert!(w >= prev - 1e-12, "not monotone at gamma={g}");
            prev = w;
        }
    }

    #[test]
    fn exact_rate_example() {
        let r = sum_rate_exact(1.0 / 6.0, 100.0, 1).unwrap();
        let direct = 100f64.log2() - (PI * E / 6.0).log2() + 2.0 * omega(1.0 / 1200.0).unwrap();
        assert!((r - direct).abs() < 1e-12);
        assert!(omega(1.0 / 1200.0).unwrap() < 1e-3);
        assert!((r - 6.1346).abs() < 1e-3);
    }

    #[test]
    fn exact_rate_approaches_lower_bound() {
        let mut prev = f64::INFINITY;
        for db in [10.0, 20.0, 30.0, 40.0] {
            let p = 10f64.powf(db / 10.0);
            let gap = sum_rate_exact(0.8, p, 3).unwrap() - sum_rate_lower(0.8, p, 3).unwrap();
            assert!(gap >= 0.0 && (gap < prev || gap == 0.0));
            prev = gap;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn exact_rate_is_scale_invariant() {
        let a = sum_rate_exact(0.9, 12.0, 4).unwrap();
        let b = sum_rate_exact(0.9 * 3.3, 12.0 * 3.3, 4).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn lower_rate_examples() {
        assert!(sum_rate_lower(1.0 / 6.0, PI * E / 6.0, 1).unwrap().abs() < 1e-12);
        let r = sum_rate_lower(0.1, 10.0, 2).unwrap();
        let direct = 2.0 * 5f64.log2() - 2.0 * (PI * E * 0.05).log2();
        assert!((r - direct).abs() < 1e-12);
        assert!((r - 7.0994).abs() < 1e-3);
        assert!(sum_rate_lower(0.0, 1.0, 1).is_err());
        assert!(sum_rate_lower(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn upper_rate_examples() {
        let r = sum_rate_upper(&CMatrix::identity(1), 100.0).unwrap();
        assert!((r - (100f64.log2() - (E / 2.0).log2())).abs() < 1e-12);
        assert!((r - 6.2012).abs() < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=6 {
            let h = gen_channel(k, 6, &mut rng);
            let lb = ese_lower_bound(&crate::linalg::pseudoinverse(&h).unwrap()).unwrap();
            let via_lower = sum_rate_lower(lb, 31.0, k).unwrap();
            assert!((sum_rate_upper(&h, 31.0).unwrap() - via_lower).abs() < 1e-9);
        }
        let singular = CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(sum_rate_upper(&singular, 1.0), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn allocated_rate_reductions() {
        // One user with unit gain is the plain sum rate.
        let a = sum_rate_ra(0.3, 7.0, &[1.0], &[1.0]).unwrap();
        assert!((a - sum_rate_exact(0.3, 7.0, 1).unwrap()).abs() < 1e-12);
        // λ = d⁻¹ makes every effective gain one: standard vector perturbation.
        let d = [0.4, 1.3, 2.2, 0.9];
        let lambda: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
        let ra = sum_rate_ra(0.7, 20.0, &lambda, &d).unwrap();
        assert!((ra - sum_rate_exact(0.7, 20.0, 4).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn allocated_rate_two_users() {
        let (ese, p) = (0.1, 10.0);
        let got = sum_rate_ra(ese, p, &[1.0, 1.0], &[1.0, 2.0]).unwrap();
        let user = |g2: f64| (p * g2 / (PI * E * ese)).log2() + 2.0 * omega_oracle_bits(ese / (2.0 * p * g2), 20_480);
        let want = user(1.0) + user(4.0);
        assert!((got - want).abs() < 1e-7);
        assert!(sum_rate_ra(ese, p, &[1.0], &[1.0, 2.0]).is_err());
        assert!(sum_rate_ra(ese, p, &[0.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn piecewise_crossing() {
        let (p, ese, d) = (1.0, 0.1, 1.0);
        let lambda = (PI * E * ese / (p * d * d)).sqrt();
        assert!((lambda - 0.9241).abs() < 1e-4);
        assert!(mi_piecewise(lambda * 0.999, d, ese, p).unwrap() == 0.0);
        assert!(mi_piecewise(lambda * 1.001, d, ese, p).unwrap() > 0.0);
        let gap = mi_awgn(lambda, d, ese, p).unwrap() - mi_piecewise(lambda, d, ese, p).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_gap_peaks_near_0_2992() {
        let (p, ese, d) = (1.0, 0.1, 1.0);
        let mut worst = 0.0f64;
        for i in 0..2000 {
            let lambda = 0.01 + 2.99 * i as f64 / 1999.0;
            let gap = mi_exact(lambda, d, ese, p).unwrap() - mi_piecewise(lambda, d, ese, p).unwrap();
            assert!(gap >= -1e-12, "gap {gap} at lambda {lambda}");
            worst = worst.max(gap);
        }
        assert!((worst - 0.2992).abs() < 0.002, "max gap {worst}");
        assert!(worst <= 0.30);
    }

    #[test]
    fn piecewise_objective() {
        let d = [1.0, 1.0, 1.0];
        assert_eq!(r_vp_pw(&[0.1, 0.2, 0.3], &d, 1.0, 1.0).unwrap(), 0.0);
        let one = r_vp_pw(&[0.1, 5.0, 0.3], &d, 1.0, 1.0).unwrap();
        assert!((one - mi_piecewise(5.0, 1.0, 1.0, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn piecewise_objective_at_bound_equals_upper_when_all_users_on() {
        // With E_se at its lower bound for V⁻¹Λ, the on/off objective collapses
        // to the channel's upper bound whenever every term is positive, and
        // can only exceed it when some users are switched off.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..200 {
            let k = 1 + trial % 5;
            let h = gen_channel(k, 6, &mut rng);
            let f = dvq_decompose(&h).unwrap();
            let lambda: Vec<f64> = (0..k).map(|_| 0.3 + rng.random::<f64>()).collect();
            let snr = 10f64.powf(rng.random_range(-1.0..4.0));
            let lb = ese_lower_bound(&f.v_inverse().scale_cols(&lambda)).unwrap();
            let pw = r_vp_pw(&lambda, &f.d, lb, snr).unwrap();
            let ub = sum_rate_upper(&h, snr).unwrap();
            let all_on = lambda
                .iter()
                .zip(&f.d)
                .all(|(&l, &d)| snr * l * l * d * d / (PI * E * lb) >= 1.0);
            if all_on {
                assert!((pw - ub).abs() < 1e-8 * ub.abs().max(1.0), "{pw} vs {ub}");
            } else {
                assert!(pw >= ub - 1e-9);
            }
            // A larger (true) E_se can only lower the objective.
            assert!(r_vp_pw(&lambda, &f.d, lb * 1.2, snr).unwrap() <= pw + 1e-12);
        }
    }

    #[test]
    fn rate_report_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = gen_channel(3, 4, &mut rng);
        let rep = RateReport::evaluate(&h, 0.9, 5.0).unwrap();
        assert!(rep.r_lower <= rep.r_exact);
        assert!((rep.r_exact - rep.r_lower - 6.0 * rep.omega_term).abs() < 1e-12);
        assert!(rep.omega_term >= 0.0);
        assert!((rep.gamma - 0.09).abs() < 1e-15);
        assert_eq!(rep.k_users, 3);
    }

    proptest! {
        #[test]
        fn lower_never_exceeds_exact(ese in 1e-3f64..10.0, log_p in -2.0f64..4.0, k in 1usize..9) {
            let p = 10f64.powf(log_p);
            let ex = sum_rate_exact(ese, p, k).unwrap();
            let lo = sum_rate_lower(ese, p, k).unwrap();
            prop_assert!(lo <= ex + 1e-12);
            let w = omega(ese / (2.0 * p)).unwrap();
            prop_assert!((ex - lo - 2.0 * k as f64 * w).abs() < 1e-9);
        }
    }
}
