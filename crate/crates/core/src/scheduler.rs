//! Greedy user selection.
//!
//! All three greedy selectors share one loop: keep the component `g_u` of
//! every candidate orthogonal to the users already chosen, pick the largest
//! `‖g_u‖²` (which is the pick that maximises `det W(S ∪ u)`), then shed.
//! They differ only in the shedding rule:
//!
//! * GRM drops users whose addition would lower the high-SNR sum-rate bound.
//! * SUS drops users that are not semi-orthogonal to the latest pick.
//! * Greedy-ZF never sheds.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, pseudoinverse, CMatrix, C64};
use crate::precoder::{estimate_ese, EseEstimate, PrecoderConfig};
use crate::rates::sum_rate_exact;
use crate::seeding::derive_seed;

/// Below this the orthogonal component is treated as zero.
pub const G_UNDERFLOW: f64 = 1e-12;

/// Largest user pool the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Vector multiplications charged per candidate per iteration.
pub const GREEDY_MULTS: u64 = 2;
pub const SUS_MULTS: u64 = 3;

#[derive(Debug, Clone)]
pub struct ChannelSet {
    users: CMatrix,
}

impl ChannelSet {
    /// One row per user.
    pub fn new(users: CMatrix) -> Result<Self> {
        if users.rows() == 0 || users.cols() == 0 {
            return Err(Error::Dimension("a channel set needs at least one user and one antenna".into()));
        }
        Ok(Self { users })
    }

    pub fn n_users(&self) -> usize {
        self.users.rows()
    }

    pub fn n_t(&self) -> usize {
        self.users.cols()
    }

    pub fn row(&self, u: usize) -> &[C64] {
        self.users.row(u)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.users
    }

    /// Channel of the listed users, in the listed order.
    pub fn subset(&self, users: &[usize]) -> CMatrix {
        self.users.select_rows(users)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    /// Chosen users in pick order.
    pub selected: Vec<usize>,
    /// Users shed at each iteration.
    pub shed_log: Vec<Vec<usize>>,
    /// `ln det W(S)` accumulated as `Σ ln ‖g_s‖²`.
    pub log_det_w: f64,
    pub vec_mults: u64,
    /// `‖g‖²` of the user picked at each iteration.
    pub per_iter_g_norms: Vec<f64>,
}

impl SelectionTrace {
    pub fn det_w(&self) -> f64 {
        self.log_det_w.exp()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Selected users in increasing index order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.selected.clone();
        s.sort_unstable();
        s
    }
}

/// `ln` of the GRM shedding threshold with `k` users already selected.
///
/// Adding a user with orthogonal component `g` changes the bound by
/// `ln(P‖g‖²) + k ln k + (k+1) ln(k+2) − (2k+2) ln(k+1) − 1` nats, so the
/// bound drops exactly when `‖g‖²` is below this level.
pub fn grm_shed_log_threshold(k: usize, snr: f64) -> f64 {
    let k_f = k as f64;
    let k_ln_k = if k == 0 { 0.0 } else { k_f * k_f.ln() };
    1.0 + (2.0 * k_f + 2.0) * (k_f + 1.0).ln() - snr.ln() - k_ln_k - (k_f + 1.0) * (k_f + 2.0).ln()
}

pub fn grm_shed_threshold(k: usize, snr: f64) -> f64 {
    grm_shed_log_threshold(k, snr).exp()
}

enum Shedding {
    None,
    Grm { snr: f64 },
    Sus { alpha: f64 },
}

fn greedy(ch: &ChannelSet, rule: Shedding, per_candidate: u64) -> SelectionTrace {
    let n_t = ch.n_t();
    let mut cand: Vec<usize> = (0..ch.n_users()).collect();
    let mut g: Vec<Vec<C64>> = (0..ch.n_users()).map(|u| ch.row(u).to_vec()).collect();
    let mut trace = SelectionTrace {
        selected: Vec::new(),
        shed_log: Vec::new(),
        log_det_w: 0.0,
        vec_mults: 0,
        per_iter_g_norms: Vec::new(),
    };

    while !cand.is_empty() && trace.selected.len() < n_t {
        trace.vec_mults += per_candidate * cand.len() as u64;
        let norms: HashMap<usize, f64> = cand.iter().map(|&u| (u, norm_sqr(&g[u]))).collect();
        // Candidates stay sorted, so the strict comparison keeps the lowest index on ties.
        let mut u_max = cand[0];
        for &u in &cand[1..] {
            if norms[&u] > norms[&u_max] {
                u_max = u;
            }
        }
        let best = norms[&u_max];

        let mut shed = Vec::new();
        if let Shedding::Grm { snr } = rule {
            // The bound only compares sets once one user is in.
            let k = trace.selected.len();
            if k >= 1 {
                let level = grm_shed_threshold(k, snr);
                shed.extend(cand.iter().copied().filter(|u| norms[u] < level));
            }
        }
        if best < G_UNDERFLOW {
            shed = cand.clone();
        }
        if shed.contains(&u_max) {
            // u_max has the largest ‖g‖², so every other candidate failed too.
            debug_assert_eq!(shed.len(), cand.len());
            trace.shed_log.push(shed);
            break;
        }
        cand.retain(|u| !shed.contains(u) && *u != u_max);
        trace.selected.push(u_max);
        trace.log_det_w += best.ln();
        trace.per_iter_g_norms.push(best);

        let gs = g[u_max].clone();
        if let Shedding::Sus { alpha } = rule {
            let hs_norm = norm_sqr(&gs);
            let before = shed.len();
            cand.retain(|&u| {
                let h = ch.row(u);
                let cos2 = inner(h, &gs).norm_sqr() / (norm_sqr(h) * hs_norm);
                if cos2 > alpha * alpha {
                    shed.push(u);
                    false
                } else {
                    true
                }
            });
            shed[before..].sort_unstable();
        }
        trace.shed_log.push(shed);

        let gs_norm = norm_sqr(&gs);
        for &u in &cand {
            let c = inner(&g[u], &gs) / gs_norm;
            for (x, s) in g[u].iter_mut().zip(&gs) {
                *x -= c * s;
            }
        }
    }
    trace
}

/// Greedy rate maximisation with bound-based shedding.
pub fn grm_select(ch: &ChannelSet, snr: f64) -> Result<SelectionTrace> {
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("transmit SNR must be positive, got {snr}")));
    }
    Ok(greedy(ch, Shedding::Grm { snr }, GREEDY_MULTS))
}

/// Semi-orthogonal user selection. The SNR does not enter the rule.
pub fn sus_select(ch: &ChannelSet, _snr: f64, alpha: f64) -> Result<SelectionTrace> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(greedy(ch, Shedding::Sus { alpha }, SUS_MULTS))
}

pub fn greedy_zf_select(ch: &ChannelSet, _snr: f64) -> SelectionTrace {
    greedy(ch, Shedding::None, GREEDY_MULTS)
}

/// `n` evenly spaced values covering `[0, 1]`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Memoised E_se and sum rate per user subset of one channel set.
///
/// `E_se` of channel inversion does not depend on the SNR, so one estimate per
/// subset serves a whole SNR sweep. Each subset gets its own random stream,
/// keyed by its bitmask.
pub struct SubsetRates<'a> {
    ch: &'a ChannelSet,
    samples: usize,
    seed: u64,
    cache: HashMap<u64, EseEstimate>,
}

impl<'a> SubsetRates<'a> {
    pub fn new(ch: &'a ChannelSet, samples: usize, seed: u64) -> Result<Self> {
        if ch.n_users() > 64 {
            return Err(Error::TooManyUsers { users: ch.n_users(), limit: 64 });
        }
        Ok(Self { ch, samples, seed, cache: HashMap::new() })
    }

    fn mask(users: &[usize]) -> u64 {
        users.iter().fold(0, |m, &u| m | 1 << u)
    }

    pub fn ese(&mut self, users: &[usize]) -> Result<EseEstimate> {
        if users.is_empty() {
            return Err(Error::NoActiveUsers);
        }
        let mask = Self::mask(users);
        if let Some(e) = self.cache.get(&mask) {
            return Ok(*e);
        }
        let mut sorted = users.to_vec();
        sorted.sort_unstable();
        let h = self.ch.subset(&sorted);
        // Unit SNR: the estimate is SNR-free.
        let est = estimate_ese(&PrecoderConfig::channel_inverse(h, 1.0), self.samples, derive_seed(self.seed, &[mask]))?;
        self.cache.insert(mask, est);
        Ok(est)
    }

    /// Exact VP sum rate of channel inversion over `users`.
    pub fn sum_rate(&mut self, users: &[usize], snr: f64) -> Result<f64> {
        let ese = self.ese(users)?;
        sum_rate_exact(ese.mean, snr, users.len())
    }

    pub fn cached_subsets(&self) -> usize {
        self.cache.len()
    }
}

#[derive(Debug, Clone)]
pub struct ExhaustiveChoice {
    /// Best subset, increasing index order.
    pub selected: Vec<usize>,
    pub sum_rate: f64,
    pub subsets_evaluated: usize,
}

/// Best subset by exact sum rate over every nonempty subset of at most `N_T` users.
pub fn exhaustive_select(rates: &mut SubsetRates<'_>, snr: f64) -> Result<ExhaustiveChoice> {
    let (u, n_t) = (rates.ch.n_users(), rates.ch.n_t());
    if u > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyUsers { users: u, limit: EXHAUSTIVE_LIMIT });
    }
    let mut best: Option<ExhaustiveChoice> = None;
    let mut evaluated = 0;
    for mask in 1u64..(1 << u) {
        if mask.count_ones() as usize > n_t {
            continue;
        }
        let users: Vec<usize> = (0..u).filter(|i| mask >> i & 1 == 1).collect();
        if pseudoinverse(&rates.ch.subset(&users)).is_err() {
            continue;
        }
        evaluated += 1;
        let r = rates.sum_rate(&users, snr)?;
        if best.as_ref().is_none_or(|b| r > b.sum_rate) {
            best = Some(ExhaustiveChoice { selected: users, sum_rate: r, subsets_evaluated: 0 });
        }
    }
    let mut best = best.ok_or(Error::NoActiveUsers)?;
    best.subsets_evaluated = evaluated;
    Ok(best)
}
