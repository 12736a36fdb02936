//! The vector-perturbation transmit/receive chain.
//!
//! A [`Precoder`] is built once per channel realisation. It owns the linear
//! precoding matrix `F`, the lattice generator used for the perturbation
//! search, and the per-user effective gains seen by the modulo demodulators.
//!
//! * Channel inversion: `F = H⁺`, the perturbation search runs on `F` itself.
//! * Rate allocation: with `H = D·V·Q`, `F = Q†·V⁻¹·Λ`. Since `Q†` has
//!   orthonormal columns the search runs on the square generator `V⁻¹·Λ`.
//!   Users with `λ_k = 0` are dropped from the generator.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{modulo_cube, wrap_unit, CubePoint, GaussInt, SphereEncoder};
use crate::linalg::{dvq_decompose, householder_qr, pseudoinverse, CMatrix, DvqFactors, C64};
use crate::rates::ln_factorial;
use crate::seeding::{complex_gaussian, stream};

/// Default number of data vectors per E_se estimate.
pub const DEFAULT_ESE_SAMPLES: usize = 2000;

/// Samples per independent random stream in [`Precoder::estimate_ese`].
const ESE_BLOCK: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub enum PrecoderMode {
    ChannelInverse,
    RateAllocated { lambda: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct PrecoderConfig {
    pub mode: PrecoderMode,
    pub h: CMatrix,
    /// Transmit SNR `P`, linear scale.
    pub snr: f64,
}

impl PrecoderConfig {
    pub fn channel_inverse(h: CMatrix, snr: f64) -> Self {
        Self { mode: PrecoderMode::ChannelInverse, h, snr }
    }

    pub fn rate_allocated(h: CMatrix, lambda: Vec<f64>, snr: f64) -> Self {
        Self { mode: PrecoderMode::RateAllocated { lambda }, h, snr }
    }
}

/// Monte-Carlo estimate of the expected sphere-encoded power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EseEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Output of [`Precoder::encode`].
#[derive(Debug, Clone)]
pub struct Transmission {
    /// Scaled transmit vector, length `N_T`.
    pub x: Vec<C64>,
    /// Perturbation, zero for switched-off users.
    pub p: Vec<GaussInt>,
    /// `‖F(a + p)‖²` before scaling.
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct Precoder {
    snr: f64,
    f: CMatrix,
    encoder: SphereEncoder,
    active: Vec<usize>,
    gains: Vec<f64>,
    factors: Option<DvqFactors>,
}

impl Precoder {
    pub fn new(cfg: &PrecoderConfig) -> Result<Self> {
        if !(cfg.snr > 0.0) {
            return Err(Error::Domain(format!("transmit SNR must be positive, got {}", cfg.snr)));
        }
        let k = cfg.h.rows();
        match &cfg.mode {
            PrecoderMode::ChannelInverse => {
                let f = pseudoinverse(&cfg.h)?;
                let encoder = SphereEncoder::new(&f)?;
                Ok(Self {
                    snr: cfg.snr,
                    f,
                    encoder,
                    active: (0..k).collect(),
                    gains: vec![1.0; k],
                    factors: None,
                })
            }
            PrecoderMode::RateAllocated { lambda } => {
                if lambda.len() != k {
                    return Err(Error::Dimension(format!(
                        "{} rate weights for {k} users",
                        lambda.len()
                    )));
                }
                if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                    return Err(Error::Domain("rate weights must be finite and nonnegative".into()));
                }
                let active: Vec<usize> = (0..k).filter(|&i| lambda[i] > 0.0).collect();
                if active.is_empty() {
                    return Err(Error::NoActiveUsers);
                }
                let factors = dvq_decompose(&cfg.h)?;
                let shaped = factors.v_inverse().scale_cols(lambda);
                let f = &factors.q.adjoint() * &shaped;
                let encoder = SphereEncoder::new(&shaped.select_cols(&active))?;
                let gains = lambda.iter().zip(&factors.d).map(|(l, d)| l * d).collect();
                Ok(Self { snr: cfg.snr, f, encoder, active, gains, factors: Some(factors) })
            }
        }
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// The `N_T×K` precoding matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.f
    }

    /// The lattice generator the perturbation search runs on.
    pub fn generator(&self) -> &CMatrix {
        self.encoder.generator()
    }

    /// Users carrying data (all users under channel inversion).
    pub fn active_users(&self) -> &[usize] {
        &self.active
    }

    /// Effective amplitude gain per user at the demodulator input:
    /// 1 for channel inversion, `λ_k·d_k` under rate allocation.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn factors(&self) -> Option<&DvqFactors> {
        self.factors.as_ref()
    }

    pub fn k(&self) -> usize {
        self.gains.len()
    }

    fn active_data(&self, a: &[C64]) -> Vec<C64> {
        self.active.iter().map(|&i| a[i]).collect()
    }

    /// Perturb, precode and scale one data vector: `x = √(P/E_se)·F(a + p)`.
    pub fn encode(&self, a: &CubePoint, ese: f64) -> Result<Transmission> {
        if !(ese > 0.0) {
            return Err(Error::Domain(format!("E_se must be positive, got {ese}")));
        }
        if a.len() != self.k() {
            return Err(Error::Dimension(format!("{} data symbols for {} users", a.len(), self.k())));
        }
        let res = self.encoder.search(&self.active_data(a.as_slice()));
        let mut p = vec![GaussInt::new(0, 0); self.k()];
        for (&i, &pi) in self.active.iter().zip(&res.p) {
            p[i] = pi;
        }
        let z: Vec<C64> = a
            .as_slice()
            .iter()
            .zip(&p)
            .map(|(a, p)| a + C64::new(p.re as f64, p.im as f64))
            .collect();
        let scale = (self.snr / ese).sqrt();
        let x = self.f.mul_vec(&z).into_iter().map(|s| s * scale).collect();
        Ok(Transmission { x, p, power: res.cost })
    }

    /// Sample mean of `min_q ‖G(a + q)‖²` over uniform data vectors.
    ///
    /// Samples are drawn in fixed-size blocks, each from its own stream keyed
    /// by `(seed, block)`, and block sums are combined in block order, so the
    /// estimate is identical for any thread count.
    pub fn estimate_ese(&self, samples: usize, seed: u64) -> Result<EseEstimate> {
        if samples < 100 {
            return Err(Error::Domain(format!("need at least 100 E_se samples, got {samples}")));
        }
        let k = self.active.len();
        let blocks = samples.div_ceil(ESE_BLOCK);
        let partial: Vec<(f64, f64)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(seed, &[b as u64]);
                let n = ESE_BLOCK.min(samples - b * ESE_BLOCK);
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let a = CubePoint::uniform(k, &mut rng);
                    let c = self.encoder.search(a.as_slice()).cost;
                    s += c;
                    s2 += c * c;
                }
                (s, s2)
            })
            .collect();
        let (sum, sum_sq) = neumaier_pair(&partial);
        let n = samples as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok(EseEstimate { mean, std_error: (var / n).sqrt(), samples })
    }

    /// Closed-form lower bound on E_se for this precoder's generator.
    pub fn ese_lower_bound(&self) -> Result<f64> {
        ese_lower_bound(self.generator())
    }

    /// Modulo demodulation of all received symbols.
    pub fn demodulate_all(&self, y: &[C64], ese: f64) -> Vec<C64> {
        y.iter()
            .zip(&self.gains)
            .map(|(&yk, &g)| if g > 0.0 { demodulate(yk, g, ese, self.snr) } else { C64::new(0.0, 0.0) })
            .collect()
    }
}

fn neumaier_pair(parts: &[(f64, f64)]) -> (f64, f64) {
    fn sum(it: impl Iterator<Item = f64>) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for x in it {
            let t = s + x;
            c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
            s = t;
        }
        s + c
    }
    (sum(parts.iter().map(|p| p.0)), sum(parts.iter().map(|p| p.1)))
}

/// Convenience wrapper: build the precoder and estimate its E_se.
pub fn estimate_ese(cfg: &PrecoderConfig, samples: usize, seed: u64) -> Result<EseEstimate> {
    Precoder::new(cfg)?.estimate_ese(samples, seed)
}

/// `K·Γ(K+1)^{1/K} / ((K+1)π) · det(G†G)^{1/K}` for an `m×K` generator,
/// evaluated in the log domain. This is the second moment of a sphere with
/// the volume of the lattice's Voronoi cell.
pub fn ese_lower_bound(g: &CMatrix) -> Result<f64> {
    let k = g.cols();
    if k == 0 || g.rows() < k {
        return Err(Error::SingularGenerator { index: g.rows().min(k), magnitude: 0.0 });
    }
    let r = householder_qr(g).r;
    let mut log_det = 0.0;
    for i in 0..k {
        let m = r[(i, i)].re;
        if m < crate::lattice::SINGULAR_TOL {
            return Err(Error::SingularGenerator { index: i, magnitude: m });
        }
        log_det += 2.0 * m.ln();
    }
    let kf = k as f64;
    let log_c = kf.ln() + ln_factorial(k) / kf - (kf + 1.0).ln() - std::f64::consts::PI.ln();
    Ok((log_c + log_det / kf).exp())
}

/// `â = [√(E_se / (P·gain²))·y]` reduced modulo the unit cube.
pub fn demodulate(y: C64, gain: f64, ese: f64, snr: f64) -> C64 {
    let z = y * (ese / (snr * gain * gain)).sqrt();
    C64::new(wrap_unit(z.re), wrap_unit(z.im))
}

/// Received symbols `y = H·x + n`, with `n ~ CN(0, I)` when `rng` is given.
pub fn channel_output<R: Rng + ?Sized>(h: &CMatrix, x: &[C64], rng: Option<&mut R>) -> Vec<C64> {
    let mut y = h.mul_vec(x);
    if let Some(rng) = rng {
        for yk in &mut y {
            *yk += complex_gaussian(rng);
        }
    }
    y
}

/// Received symbols after demodulation, reduced into the cube.
pub fn demodulate_vector(p: &Precoder, y: &[C64], ese: f64) -> CubePoint {
    modulo_cube(&p.demodulate_all(y, ese))
}
