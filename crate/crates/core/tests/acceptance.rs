//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use vpbench::alloc::{allocate, waterfill_once, AllocOptions};
use vpbench::lattice::{brute_force_closest, closest_point, CubePoint, PerturbationResult};
use vpbench::linalg::{gram_det, inner, norm_sqr, ortho_component, pseudoinverse, CMatrix, C64};
use vpbench::precoder::{estimate_ese, ese_lower_bound, PrecoderConfig};
use vpbench::rates::omega;
use vpbench::scheduler::{grm_select, ChannelSet};
use vpbench::seeding::stream;
use vpbench::sim::{
    compare_rate_allocation, compare_schedulers, db_to_linear, gen_channel, linspace, run, Experiment, ExperimentConfig,
};
use vpbench::Error;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn sphere_vs_brute_force() -> Verdict {
    let start = Instant::now();
    let mut rng = stream(101, &[]);
    let mut mismatches = 0;
    for i in 0..500 {
        let k = 1 + i % 3;
        // The precoding generator of a random channel.
        let g = pseudoinverse(&gen_channel(k, k, &mut rng)).expect("random channels are invertible");
        let a = CubePoint::uniform(k, &mut rng);
        let sphere = closest_point(&g, &a).expect("nonsingular generator");
        let brute = certified_brute_force(&g, &a);
        let same = sphere.p == brute.p || (sphere.cost - brute.cost).abs() <= 1e-10 * brute.cost.max(1e-300);
        if !same {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{mismatches} mismatches in 500 instances, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn certified_brute_force(g: &CMatrix, a: &CubePoint) -> PerturbationResult {
    for r in 1.. {
        match brute_force_closest(g, a, r) {
            Ok(b) => return b,
            Err(Error::BoxTooSmall { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
    unreachable!()
}

fn ese_scalar_baseline() -> Verdict {
    let start = Instant::now();
    let est = estimate_ese(&PrecoderConfig::channel_inverse(CMatrix::identity(1), 1.0), 100_000, 7).unwrap();
    let elapsed = start.elapsed();
    let err = (est.mean - 1.0 / 6.0).abs();
    verdict(
        err <= 0.002 && elapsed < Duration::from_secs(1),
        format!("mean {:.5} (error {err:.5}), {:.3} s", est.mean, elapsed.as_secs_f64()),
    )
}

fn ese_bound_validity() -> Verdict {
    let mut rng = stream(103, &[]);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let k = 2 + i % 3;
        let h = gen_channel(k, k, &mut rng);
        let est = estimate_ese(&PrecoderConfig::channel_inverse(h.clone(), 1.0), 2000, i as u64).unwrap();
        let bound = ese_lower_bound(&pseudoinverse(&h).unwrap()).unwrap();
        let margin = (est.mean - bound + 3.0 * est.std_error) / est.std_error;
        worst = worst.min(margin);
        if margin < 0.0 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations}/200 below bound - 3 SE, tightest margin {worst:.2} SE"))
}

fn omega_limits() -> Verdict {
    let low = omega(1e-6).unwrap();
    let high = omega(100.0).unwrap();
    let limit = 0.5 * (200.0 * std::f64::consts::PI * std::f64::consts::E).log2();
    let grid: Vec<f64> = linspace(-6.0, 2.0, 60).into_iter().map(|e| 10f64.powf(e)).collect();
    let values: Vec<f64> = grid.iter().map(|&g| omega(g).unwrap()).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        low < 1e-6 && (high - limit).abs() < 1e-4 && monotone,
        format!("omega(1e-6) = {low:.2e}, |omega(100) - limit| = {:.2e}, nondecreasing: {monotone}", (high - limit).abs()),
    )
}

fn piecewise_gap() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(Experiment::Fig1);
    let table = run(&cfg).unwrap();
    let gap = table.column("gap_piecewise").unwrap();
    let max = gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    verdict(
        gap.len() == 400 && (max - 0.2992).abs() <= 0.005 && elapsed < Duration::from_secs(30),
        format!("max gap {max:.4} bits over {} points, {:.2} s", gap.len(), elapsed.as_secs_f64()),
    )
}

/// Determinant by Gaussian elimination with partial pivoting.
fn dense_det(mut m: Vec<Vec<C64>>) -> C64 {
    let n = m.len();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm())).unwrap();
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for row in col + 1..n {
            let f = m[row][col] / p;
            for j in col..n {
                let v = m[col][j];
                m[row][j] -= f * v;
            }
        }
    }
    det
}

fn gram_rows(rows: &[&[C64]]) -> Vec<Vec<C64>> {
    rows.iter().map(|a| rows.iter().map(|b| inner(a, b)).collect()).collect()
}

fn block_determinant_identity() -> Verdict {
    let mut rng = stream(106, &[]);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_t = rng.random_range(2..=8);
        let s = rng.random_range(1..n_t);
        let h = gen_channel(s + 1, n_t, &mut rng);
        let rows: Vec<&[C64]> = (0..=s).map(|i| h.row(i)).collect();
        let full = dense_det(gram_rows(&rows)).re;
        let base = dense_det(gram_rows(&rows[..s])).re;
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for r in &rows[..s] {
            basis.push(ortho_component(r, &basis).unwrap());
        }
        let resid = ortho_component(rows[s], &basis).unwrap();
        let rhs = base * norm_sqr(&resid);
        worst = worst.max((full - rhs).abs() / full.abs());
        worst = worst.max((gram_det(&h) - full).abs() / full.abs());
    }
    verdict(worst < 1e-8, format!("max relative error {worst:.2e} over 1000 instances"))
}

fn upper_bound_tightness() -> Verdict {
    let mut cfg = ExperimentConfig::preset(Experiment::SumrateSweep);
    cfg.snr_db_grid = vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    cfg.trials = 1000;
    let table = run(&cfg).unwrap();
    let snr = table.column("snr_db").unwrap();
    let exact = table.column("vp_exact").unwrap();
    let upper = table.column("vp_upper_raw").unwrap();
    let gap = |db: f64| {
        let i = snr.iter().position(|&s| s == db).unwrap();
        upper[i] - exact[i]
    };
    let (g5, g10, g20) = (gap(5.0), gap(10.0), gap(20.0));
    let ordered = g20 < g10 && g10 < g5;
    let above = snr.iter().zip(upper.iter().zip(&exact)).filter(|(s, _)| **s >= 10.0).all(|(_, (u, e))| u >= e);
    verdict(
        ordered && above,
        format!("mean UB - exact: 5 dB {g5:.4}, 10 dB {g10:.4}, 20 dB {g20:.4}; ordered: {ordered}; UB >= exact from 10 dB: {above}"),
    )
}

fn grm_user_counts() -> Verdict {
    let mean_users = |db: f64| {
        let p = db_to_linear(db);
        let total: usize = (0..1000)
            .map(|t| {
                let ch = ChannelSet::new(gen_channel(8, 8, &mut stream(108, &[t]))).unwrap();
                grm_select(&ch, p).unwrap().len()
            })
            .sum();
        total as f64 / 1000.0
    };
    let (low, high) = (mean_users(0.0), mean_users(30.0));
    verdict(
        (low - 2.333).abs() <= 0.2 && (high - 7.945).abs() <= 0.1,
        format!("mean users {low:.3} at 0 dB, {high:.3} at 30 dB"),
    )
}

fn scheduler_config(n: usize, snr_db: Vec<f64>, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Experiment::TableUsers);
    cfg.n_t = n;
    cfg.u = n;
    cfg.snr_db_grid = snr_db;
    cfg.trials = 1000;
    cfg.seed = seed;
    cfg
}

fn scheduler_criteria() -> (Verdict, Verdict) {
    // One run serves both the sum-rate ordering and the effort trend.
    let big = compare_schedulers(&scheduler_config(8, vec![0.0, 5.0, 20.0, 30.0], 109), 8, false).unwrap();
    let small = compare_schedulers(&scheduler_config(4, vec![0.0, 5.0], 110), 4, true).unwrap();

    let mut ok9 = true;
    let mut notes = Vec::new();
    for i in 0..2 {
        let (g, s) = (big.grm[i].rate, big.sus_best[i].rate);
        ok9 &= g >= s;
        notes.push(format!("{} dB GRM {g:.3} vs SUS(a={}) {s:.3}", big.snr_db[i], big.sus_alpha[i]));
    }
    let es = small.exhaustive.as_ref().unwrap();
    for i in 0..2 {
        let (gl, sl) = (es[i] - small.grm[i].rate, es[i] - small.sus_best[i].rate);
        ok9 &= gl <= sl;
        notes.push(format!("4x4 {} dB loss GRM {gl:.4} vs SUS {sl:.4}", small.snr_db[i]));
    }
    let v9 = verdict(ok9, notes.join("; "));

    let idx = [0, 2, 3];
    let grm: Vec<f64> = idx.iter().map(|&i| big.grm[i].vec_mults).collect();
    let sus: Vec<f64> = idx.iter().map(|&i| big.sus_best[i].vec_mults).collect();
    let below = grm.iter().zip(&sus).all(|(g, s)| g < s);
    let rising = grm.windows(2).all(|w| w[1] > w[0]) && sus.windows(2).all(|w| w[1] > w[0]);
    let v10 = verdict(
        below && rising,
        format!(
            "GRM {:.1}/{:.1}/{:.1} vs SUS {:.1}/{:.1}/{:.1} at 0/20/30 dB (SUS a = {}/{}/{}); GRM < SUS: {below}; increasing: {rising}",
            grm[0], grm[1], grm[2], sus[0], sus[1], sus[2], big.sus_alpha[0], big.sus_alpha[2], big.sus_alpha[3]
        ),
    );
    (v9, v10)
}

fn waterfilling() -> Verdict {
    let mut rng = stream(111, &[]);
    let mut worst_sum = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..=8);
        let delta: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let wf = waterfill_once(&delta).unwrap();
        let sum: f64 = wf.lambda.iter().map(|l| l * l).sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        for (d, l) in delta.iter().zip(&wf.lambda) {
            let floor = 1.0 / d;
            let v = if *l > 0.0 { (wf.zeta - floor - l * l).abs() } else { (wf.zeta - floor).max(0.0) };
            worst_kkt = worst_kkt.max(v);
        }
    }
    let mut converged = 0;
    for t in 0..200u64 {
        let h = gen_channel(8, 8, &mut stream(112, &[t]));
        let snr = db_to_linear(5.0 * (t % 7) as f64);
        let opts = AllocOptions { ese_samples: 200, seed: t, ..AllocOptions::default() };
        let res = allocate(&h, snr, &opts).unwrap();
        if res.converged && res.iterations <= 50 {
            converged += 1;
        }
    }
    verdict(
        worst_sum <= 1e-9 && worst_kkt <= 1e-9 && converged >= 190,
        format!("max |sum - 1| {worst_sum:.1e}, max KKT residual {worst_kkt:.1e}, {converged}/200 allocations converged"),
    )
}

fn rate_allocation_vs_selection() -> Verdict {
    let mut cfg = ExperimentConfig::preset(Experiment::RaCompare);
    cfg.snr_db_grid = vec![0.0, 10.0, 20.0, 30.0];
    cfg.trials = 200;
    cfg.seed = 113;
    let cmp = compare_rate_allocation(&cfg).unwrap();
    let low = cmp.ra[0] > cmp.plain[0] && cmp.grm[0] > cmp.plain[0];
    let gains: Vec<f64> = (1..4).map(|i| cmp.grm_ra[i] - cmp.grm[i]).collect();
    let small = gains.iter().all(|g| *g < 0.2);
    verdict(
        low && small,
        format!(
            "0 dB plain {:.3}, RA {:.3}, GRM {:.3}; GRM+RA minus GRM at 10/20/30 dB: {:.3}/{:.3}/{:.3}",
            cmp.plain[0], cmp.ra[0], cmp.grm[0], gains[0], gains[1], gains[2]
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n: u32, name: &'static str, v: Verdict| {
        println!("criterion {n:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    record(1, "sphere encoder optimality", sphere_vs_brute_force());
    record(2, "scalar E_se baseline", ese_scalar_baseline());
    record(3, "E_se lower bound validity", ese_bound_validity());
    record(4, "omega limits and monotonicity", omega_limits());
    record(5, "piecewise mutual-information gap", piecewise_gap());
    record(6, "block determinant identity", block_determinant_identity());
    record(7, "upper bound tightness trend", upper_bound_tightness());
    record(8, "GRM selected-user counts", grm_user_counts());
    let (v9, v10) = scheduler_criteria();
    record(9, "scheduler sum-rate ordering", v9);
    record(10, "scheduler effort trend", v10);
    record(11, "waterfilling and allocation convergence", waterfilling());
    record(12, "rate allocation against selection", rate_allocation_vs_selection());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of {} criteria fail: {:?}", failed.len(), results.len(), failed);
        ExitCode::FAILURE
    }
}
