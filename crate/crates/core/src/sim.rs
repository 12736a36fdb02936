//! Monte-Carlo experiment harness.
//!
//! An [`ExperimentConfig`] names one experiment plus its grid; [`run`] turns it
//! into a [`ResultTable`] with one row per SNR point (per `λ` point for the
//! mutual-information curve). Every trial draws from its own random stream, so
//! tables are identical for a given seed no matter how trials are scheduled.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rayon::prelude::*;

use crate::alloc::{allocate, AllocOptions};
use crate::error::{Error, Result};
use crate::linalg::{log_gram_det, pseudoinverse, CMatrix};
use crate::precoder::{estimate_ese, ese_lower_bound, PrecoderConfig, DEFAULT_ESE_SAMPLES};
use crate::rates::{mi_awgn, mi_exact, mi_piecewise, sum_rate_exact, sum_rate_lower, sum_rate_ra, sum_rate_upper_from_log_det};
use crate::scheduler::{
    alpha_grid, exhaustive_select, greedy_zf_select, grm_select, sus_select, ChannelSet, SubsetRates, EXHAUSTIVE_LIMIT,
};
use crate::seeding::{complex_gaussian, derive_seed, stream};

pub const CHANNEL_MODEL: &str = "iid CN(0,1) Rayleigh";

/// `k × n_t` channel with i.i.d. `CN(0, 1)` entries.
pub fn gen_channel<R: Rng + ?Sized>(k: usize, n_t: usize, rng: &mut R) -> CMatrix {
    let data = (0..k * n_t).map(|_| complex_gaussian(rng)).collect();
    CMatrix::new(k, n_t, data).expect("gaussian entries are finite")
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Compensated sum, so aggregates do not depend on accumulation order quirks.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(values: impl IntoIterator<Item = f64>, n: usize) -> f64 {
    neumaier_sum(values) / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Per-user mutual information against `λ`, with its two approximations.
    Fig1,
    /// Exact sum rate and its bounds against SNR, all users served.
    SumrateSweep,
    /// Sum-rate loss of GRM and SUS against exhaustive search.
    SchedLoss,
    /// GRM and SUS sum rate for several user-pool sizes.
    SchedVsUsers,
    /// Plain, rate-allocated, GRM-selected and GRM plus allocation.
    RaCompare,
    /// Mean number of selected users.
    TableUsers,
    /// Mean number of vector multiplications.
    TableMults,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fig1,
        Experiment::SumrateSweep,
        Experiment::SchedLoss,
        Experiment::SchedVsUsers,
        Experiment::RaCompare,
        Experiment::TableUsers,
        Experiment::TableMults,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::SumrateSweep => "sumrate_sweep",
            Experiment::SchedLoss => "sched_loss",
            Experiment::SchedVsUsers => "sched_vs_users",
            Experiment::RaCompare => "ra_compare",
            Experiment::TableUsers => "table_users",
            Experiment::TableMults => "table_mults",
        }
    }

    fn uses_sus(self) -> bool {
        matches!(self, Experiment::SchedLoss | Experiment::SchedVsUsers | Experiment::TableUsers | Experiment::TableMults)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Parameters of the single-user mutual-information curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub ese: f64,
    pub d: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for LambdaSweep {
    fn default() -> Self {
        Self { ese: 0.1, d: 1.0, lambda_min: 0.01, lambda_max: 3.0, points: 400 }
    }
}

impl LambdaSweep {
    pub fn grid(&self) -> Vec<f64> {
        linspace(self.lambda_min, self.lambda_max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_t: usize,
    /// Size of the user pool.
    pub u: usize,
    /// Pool sizes for `sched_vs_users`.
    pub user_grid: Vec<usize>,
    pub snr_db_grid: Vec<f64>,
    pub trials: usize,
    pub ese_samples: usize,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
    pub lambda_sweep: LambdaSweep,
}

impl ExperimentConfig {
    /// Defaults that reproduce the standard setup of each experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let full_grid = vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
        let mut cfg = Self {
            experiment,
            n_t: 8,
            u: 8,
            user_grid: Vec::new(),
            snr_db_grid: full_grid.clone(),
            trials: 1000,
            ese_samples: DEFAULT_ESE_SAMPLES,
            alpha_grid: alpha_grid(21),
            seed: 1,
            out_path: None,
            lambda_sweep: LambdaSweep::default(),
        };
        match experiment {
            Experiment::Fig1 => {
                cfg.snr_db_grid = vec![0.0];
                cfg.trials = 1;
            }
            Experiment::SumrateSweep => {
                cfg.n_t = 4;
                cfg.u = 4;
                cfg.snr_db_grid = (0..=8).map(|i| -10.0 + 5.0 * i as f64).collect();
            }
            Experiment::SchedLoss => {
                cfg.n_t = 4;
                cfg.u = 4;
            }
            Experiment::SchedVsUsers => {
                cfg.snr_db_grid = vec![0.0, 5.0, 10.0];
                cfg.user_grid = (1..=12).map(|i| 2 * i).collect();
                cfg.trials = 200;
            }
            Experiment::RaCompare => {
                cfg.trials = 200;
            }
            Experiment::TableUsers => {}
            Experiment::TableMults => {
                cfg.snr_db_grid = vec![0.0, 10.0, 20.0, 30.0];
            }
        }
        cfg
    }

    /// Parses `key = value` lines. `#` starts a comment; lists are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", no + 1)))?;
            pairs.push((no + 1, key.trim().to_string(), value.trim().to_string()));
        }
        let experiment = pairs
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .ok_or_else(|| Error::Config("missing 'experiment' key".into()))?
            .2
            .parse()?;
        let mut cfg = Self::preset(experiment);
        for (no, key, value) in &pairs {
            cfg.set(key, value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {no}: {msg}")),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "n_t" => self.n_t = parse_value(key, value)?,
            "users" | "u" => self.u = parse_value(key, value)?,
            "user_grid" => self.user_grid = parse_list(key, value)?,
            "snr_db" => self.snr_db_grid = parse_list(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "ese_samples" => self.ese_samples = parse_value(key, value)?,
            "alpha_grid" => self.alpha_grid = parse_list(key, value)?,
            "alpha_points" => self.alpha_grid = alpha_grid(parse_value(key, value)?),
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out_path = Some(PathBuf::from(value)),
            "fig1_ese" => self.lambda_sweep.ese = parse_value(key, value)?,
            "fig1_d" => self.lambda_sweep.d = parse_value(key, value)?,
            "lambda_min" => self.lambda_sweep.lambda_min = parse_value(key, value)?,
            "lambda_max" => self.lambda_sweep.lambda_max = parse_value(key, value)?,
            "lambda_points" => self.lambda_sweep.points = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.u == 0 || self.n_t == 0 {
            return bad("n_t and users must be at least 1".into());
        }
        if self.snr_db_grid.is_empty() {
            return bad("snr_db grid is empty".into());
        }
        if let Some(x) = self.snr_db_grid.iter().find(|x| !x.is_finite()) {
            return bad(format!("snr_db value {x} is not finite"));
        }
        if self.ese_samples < 100 {
            return bad(format!("ese_samples must be at least 100, got {}", self.ese_samples));
        }
        if self.experiment.uses_sus() {
            if self.alpha_grid.is_empty() {
                return bad("alpha grid is empty".into());
            }
            if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                return bad(format!("alpha {a} outside [0, 1]"));
            }
        }
        match self.experiment {
            Experiment::Fig1 => {
                let s = &self.lambda_sweep;
                if self.snr_db_grid.len() != 1 {
                    return bad("fig1 takes exactly one snr_db value".into());
                }
                if !(s.ese > 0.0 && s.d > 0.0) {
                    return bad("fig1_ese and fig1_d must be positive".into());
                }
                if !(s.lambda_min > 0.0 && s.lambda_max > s.lambda_min) || s.points < 2 {
                    return bad("lambda grid needs 0 < lambda_min < lambda_max and at least 2 points".into());
                }
            }
            Experiment::SumrateSweep | Experiment::RaCompare if self.u > self.n_t => {
                return bad(format!("{} serves every user, so users ({}) must not exceed n_t ({})", self.experiment, self.u, self.n_t));
            }
            Experiment::SchedLoss if self.u > EXHAUSTIVE_LIMIT => {
                return bad(format!("exhaustive search needs users <= {EXHAUSTIVE_LIMIT}, got {}", self.u));
            }
            Experiment::SchedVsUsers => {
                if self.user_grid.is_empty() || self.user_grid.contains(&0) {
                    return bad("user_grid must list positive pool sizes".into());
                }
                if self.user_grid.iter().any(|&u| u > 64) {
                    return bad("user_grid entries must not exceed 64".into());
                }
            }
            _ => {}
        }
        if self.u > 64 {
            return bad("at most 64 users are supported".into());
        }
        Ok(())
    }

    /// Canonical `key = value` text; parses back to the same config.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "n_t = {}", self.n_t);
        let _ = writeln!(s, "users = {}", self.u);
        if !self.user_grid.is_empty() {
            let g: Vec<String> = self.user_grid.iter().map(|u| u.to_string()).collect();
            let _ = writeln!(s, "user_grid = {}", g.join(","));
        }
        let _ = writeln!(s, "snr_db = {}", list(&self.snr_db_grid));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "ese_samples = {}", self.ese_samples);
        let _ = writeln!(s, "alpha_grid = {}", list(&self.alpha_grid));
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(p) = &self.out_path {
            let _ = writeln!(s, "out = {}", p.display());
        }
        let l = &self.lambda_sweep;
        let _ = writeln!(s, "fig1_ese = {}", l.ese);
        let _ = writeln!(s, "fig1_d = {}", l.d);
        let _ = writeln!(s, "lambda_min = {}", l.lambda_min);
        let _ = writeln!(s, "lambda_max = {}", l.lambda_max);
        let _ = writeln!(s, "lambda_points = {}", l.points);
        s
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v)).collect()
}

/// Rectangular table of finite values plus `#` metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new(), metadata: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension(format!("row has {} values for {} columns", row.len(), self.columns.len())));
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("column '{}' got {}", self.columns[i], row[i])));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV text. The timestamp line is the only one that varies between runs.
    pub fn to_csv(&self, timestamp: Option<u64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vpbench v{}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        if let Some(t) = timestamp {
            let _ = writeln!(s, "# generated_unix: {t}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// A gnuplot recipe plotting every column against the first.
    pub fn plot_recipe(&self, csv_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set key autotitle columnhead");
        let _ = writeln!(s, "set xlabel '{}'", self.columns[0]);
        let series: Vec<String> =
            (2..=self.columns.len()).map(|i| format!("'{csv_name}' using 1:{i} with linespoints")).collect();
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
        s
    }

    /// Writes the CSV and a `.gp` plotting recipe next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        fs::write(path, self.to_csv(Some(now)))?;
        let recipe = path.with_extension("gp");
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        fs::write(&recipe, self.plot_recipe(&name))?;
        Ok(recipe)
    }
}

/// Runs the configured experiment and writes the CSV when an output path is set.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = match cfg.experiment {
        Experiment::Fig1 => run_fig1(cfg)?,
        Experiment::SumrateSweep => run_sumrate_sweep(cfg)?,
        Experiment::RaCompare => run_ra_compare(cfg)?,
        Experiment::SchedLoss | Experiment::TableUsers | Experiment::TableMults => {
            let cmp = compare_schedulers(cfg, cfg.u, cfg.experiment == Experiment::SchedLoss)?;
            scheduler_table(cfg, &cmp)?
        }
        Experiment::SchedVsUsers => run_sched_vs_users(cfg)?,
    };
    table.metadata = vec![
        ("experiment".into(), cfg.experiment.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("channel_model".into(), CHANNEL_MODEL.into()),
    ];
    for line in cfg.to_config_text().lines() {
        table.metadata.push(("config".into(), line.to_string()));
    }
    if let Some(path) = &cfg.out_path {
        table.write(path)?;
    }
    Ok(table)
}

fn channel_for(cfg: &ExperimentConfig, trial: usize, users: usize) -> CMatrix {
    gen_channel(users, cfg.n_t, &mut stream(cfg.seed, &[trial as u64, 0, users as u64]))
}

fn run_fig1(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = &cfg.lambda_sweep;
    let snr = db_to_linear(cfg.snr_db_grid[0]);
    let mut t = ResultTable::new(
        ["lambda", "mi_exact", "mi_piecewise", "mi_awgn", "gap_piecewise", "gap_awgn"].map(String::from).to_vec(),
    );
    for lambda in s.grid() {
        let exact = mi_exact(lambda, s.d, s.ese, snr)?;
        let pw = mi_piecewise(lambda, s.d, s.ese, snr)?;
        let awgn = mi_awgn(lambda, s.d, s.ese, snr)?;
        t.push_row(vec![lambda, exact, pw, awgn, exact - pw, awgn - pw])?;
    }
    Ok(t)
}

fn run_sumrate_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let k = cfg.u;
    let per_trial: Vec<(f64, f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let h = channel_for(cfg, trial, k);
            let est = estimate_ese(&PrecoderConfig::channel_inverse(h.clone(), 1.0), cfg.ese_samples, derive_seed(cfg.seed, &[trial as u64, 1]))?;
            let bound = ese_lower_bound(&pseudoinverse(&h)?)?;
            Ok((est.mean, bound, log_gram_det(&h)))
        })
        .collect::<Result<_>>()?;

    let n = cfg.trials;
    let mut t = ResultTable::new(
        ["snr_db", "vp_exact", "vp_upper", "vp_upper_raw", "vp_lower", "ese_mean", "ese_bound_mean"]
            .map(String::from)
            .to_vec(),
    );
    let ese_mean = mean(per_trial.iter().map(|p| p.0), n);
    let bound_mean = mean(per_trial.iter().map(|p| p.1), n);
    for &db in &cfg.snr_db_grid {
        let snr = db_to_linear(db);
        let mut exact = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut upper_raw = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for &(ese, _, ln_det) in &per_trial {
            exact.push(sum_rate_exact(ese, snr, k)?);
            let ub = sum_rate_upper_from_log_det(ln_det, snr, k);
            upper.push(ub.max(0.0));
            upper_raw.push(ub);
            lower.push(sum_rate_lower(ese, snr, k)?);
        }
        t.push_row(vec![db, mean(exact, n), mean(upper, n), mean(upper_raw, n), mean(lower, n), ese_mean, bound_mean])?;
    }
    Ok(t)
}

/// Per-trial outcome of one scheduler at one SNR.
#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    rate: f64,
    users: f64,
    mults: f64,
}

/// Means over trials for every scheduler at every SNR point.
#[derive(Debug, Clone)]
pub struct SchedulerComparison {
    pub snr_db: Vec<f64>,
    pub grm: Vec<SchedulerStats>,
    pub zf: Vec<SchedulerStats>,
    /// SUS at the `α` with the highest mean sum rate for that SNR.
    pub sus_best: Vec<SchedulerStats>,
    pub sus_alpha: Vec<f64>,
    /// Mean SUS sum rate for every `(snr, α)` pair.
    pub sus_rate_by_alpha: Vec<Vec<f64>>,
    /// Mean exhaustive-search sum rate, when requested.
    pub exhaustive: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerStats {
    pub rate: f64,
    pub users: f64,
    pub vec_mults: f64,
}

struct TrialSched {
    grm: Vec<Outcome>,
    zf: Vec<Outcome>,
    /// Indexed `[snr][alpha]`.
    sus: Vec<Vec<Outcome>>,
    es: Vec<f64>,
}

fn outcome(rates: &mut SubsetRates<'_>, selected: &[usize], mults: u64, snr: f64) -> Result<Outcome> {
    Ok(Outcome { rate: rates.sum_rate(selected, snr)?, users: selected.len() as f64, mults: mults as f64 })
}

/// Runs GRM, greedy ZF, SUS over the `α` grid and optionally exhaustive search
/// on the same channels, sharing one E_se estimate per user subset.
pub fn compare_schedulers(cfg: &ExperimentConfig, users: usize, with_exhaustive: bool) -> Result<SchedulerComparison> {
    if with_exhaustive && users > EXHAUSTIVE_LIMIT {
        return Err(Error::Config(format!("exhaustive search needs users <= {EXHAUSTIVE_LIMIT}, got {users}")));
    }
    let snrs: Vec<f64> = cfg.snr_db_grid.iter().map(|&db| db_to_linear(db)).collect();
    let per_trial: Vec<TrialSched> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let ch = ChannelSet::new(channel_for(cfg, trial, users))?;
            let mut rates = SubsetRates::new(&ch, cfg.ese_samples, derive_seed(cfg.seed, &[trial as u64, 1, users as u64]))?;
            // SUS and greedy ZF ignore the SNR, so select once.
            let sus_traces =
                cfg.alpha_grid.iter().map(|&a| sus_select(&ch, 1.0, a)).collect::<Result<Vec<_>>>()?;
            let zf_trace = greedy_zf_select(&ch, 1.0);
            let mut out = TrialSched { grm: Vec::new(), zf: Vec::new(), sus: Vec::new(), es: Vec::new() };
            for &snr in &snrs {
                let g = grm_select(&ch, snr)?;
                out.grm.push(outcome(&mut rates, &g.selected, g.vec_mults, snr)?);
                out.zf.push(outcome(&mut rates, &zf_trace.selected, zf_trace.vec_mults, snr)?);
                let row = sus_traces
                    .iter()
                    .map(|s| outcome(&mut rates, &s.selected, s.vec_mults, snr))
                    .collect::<Result<Vec<_>>>()?;
                out.sus.push(row);
                if with_exhaustive {
                    out.es.push(exhaustive_select(&mut rates, snr)?.sum_rate);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let n = cfg.trials;
    let stats = |pick: &dyn Fn(&TrialSched) -> Outcome| SchedulerStats {
        rate: mean(per_trial.iter().map(|t| pick(t).rate), n),
        users: mean(per_trial.iter().map(|t| pick(t).users), n),
        vec_mults: mean(per_trial.iter().map(|t| pick(t).mults), n),
    };
    let mut cmp = SchedulerComparison {
        snr_db: cfg.snr_db_grid.clone(),
        grm: Vec::new(),
        zf: Vec::new(),
        sus_best: Vec::new(),
        sus_alpha: Vec::new(),
        sus_rate_by_alpha: Vec::new(),
        exhaustive: with_exhaustive.then(Vec::new),
    };
    for i in 0..snrs.len() {
        cmp.grm.push(stats(&|t| t.grm[i]));
        cmp.zf.push(stats(&|t| t.zf[i]));
        let by_alpha: Vec<f64> =
            (0..cfg.alpha_grid.len()).map(|a| mean(per_trial.iter().map(|t| t.sus[i][a].rate), n)).collect();
        // Strict comparison keeps the smallest α on ties.
        let best = (1..by_alpha.len()).fold(0, |b, a| if by_alpha[a] > by_alpha[b] { a } else { b });
        cmp.sus_best.push(stats(&|t| t.sus[i][best]));
        cmp.sus_alpha.push(cfg.alpha_grid[best]);
        cmp.sus_rate_by_alpha.push(by_alpha);
        if let Some(es) = cmp.exhaustive.as_mut() {
            es.push(mean(per_trial.iter().map(|t| t.es[i]), n));
        }
    }
    Ok(cmp)
}

fn scheduler_table(cfg: &ExperimentConfig, cmp: &SchedulerComparison) -> Result<ResultTable> {
    let columns: &[&str] = match cfg.experiment {
        Experiment::SchedLoss => &["snr_db", "es_rate", "grm_rate", "sus_rate", "grm_loss", "sus_loss", "sus_alpha"],
        Experiment::TableUsers => &["snr_db", "grm_users", "sus_users", "zf_users", "sus_alpha"],
        _ => &["snr_db", "grm_mults", "sus_mults", "zf_mults", "sus_alpha"],
    };
    let mut t = ResultTable::new(columns.iter().map(|c| c.to_string()).collect());
    for i in 0..cmp.snr_db.len() {
        let (g, s, z) = (cmp.grm[i], cmp.sus_best[i], cmp.zf[i]);
        let row = match cfg.experiment {
            Experiment::SchedLoss => {
                let es = cmp.exhaustive.as_ref().expect("exhaustive rates requested")[i];
                vec![cmp.snr_db[i], es, g.rate, s.rate, es - g.rate, es - s.rate, cmp.sus_alpha[i]]
            }
            Experiment::TableUsers => vec![cmp.snr_db[i], g.users, s.users, z.users, cmp.sus_alpha[i]],
            _ => vec![cmp.snr_db[i], g.vec_mults, s.vec_mults, z.vec_mults, cmp.sus_alpha[i]],
        };
        t.push_row(row)?;
    }
    Ok(t)
}

fn run_sched_vs_users(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut columns = vec!["snr_db".to_string()];
    for u in &cfg.user_grid {
        columns.push(format!("grm_u{u}"));
        columns.push(format!("sus_u{u}"));
    }
    let per_pool =
        cfg.user_grid.iter().map(|&u| compare_schedulers(cfg, u, false)).collect::<Result<Vec<_>>>()?;
    let mut t = ResultTable::new(columns);
    for (i, &db) in cfg.snr_db_grid.iter().enumerate() {
        let mut row = vec![db];
        for cmp in &per_pool {
            row.push(cmp.grm[i].rate);
            row.push(cmp.sus_best[i].rate);
        }
        t.push_row(row)?;
    }
    Ok(t)
}

/// Mean sum rates of the four precoding strategies at every SNR point.
#[derive(Debug, Clone)]
pub struct RaComparison {
    pub snr_db: Vec<f64>,
    pub plain: Vec<f64>,
    pub ra: Vec<f64>,
    pub grm: Vec<f64>,
    pub grm_ra: Vec<f64>,
    /// Fraction of allocation runs that converged.
    pub converged: f64,
}

/// Plain VP, rate allocation alone, GRM alone and GRM followed by allocation.
pub fn compare_rate_allocation(cfg: &ExperimentConfig) -> Result<RaComparison> {
    if cfg.u > cfg.n_t {
        return Err(Error::Config(format!("users ({}) must not exceed n_t ({})", cfg.u, cfg.n_t)));
    }
    let snrs: Vec<f64> = cfg.snr_db_grid.iter().map(|&db| db_to_linear(db)).collect();
    // Per trial: per SNR (plain, ra, grm, grm_ra, converged runs).
    let per_trial: Vec<Vec<[f64; 5]>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let h = channel_for(cfg, trial, cfg.u);
            let ch = ChannelSet::new(h.clone())?;
            let mut rates = SubsetRates::new(&ch, cfg.ese_samples, derive_seed(cfg.seed, &[trial as u64, 1]))?;
            let everyone: Vec<usize> = (0..cfg.u).collect();
            let mut rows = Vec::with_capacity(snrs.len());
            for (si, &snr) in snrs.iter().enumerate() {
                let opts = |tag: u64| AllocOptions {
                    ese_samples: cfg.ese_samples,
                    seed: derive_seed(cfg.seed, &[trial as u64, 2, si as u64, tag]),
                    ..AllocOptions::default()
                };
                let plain = rates.sum_rate(&everyone, snr)?;
                let full = allocate(&h, snr, &opts(0))?;
                let (l, d) = full.active_pairs();
                let ra = sum_rate_ra(full.ese_final.mean, snr, &l, &d)?;

                let g = grm_select(&ch, snr)?;
                let grm = rates.sum_rate(&g.selected, snr)?;
                let sub = allocate(&ch.subset(&g.selected), snr, &opts(1))?;
                let (l, d) = sub.active_pairs();
                let grm_ra = sum_rate_ra(sub.ese_final.mean, snr, &l, &d)?;
                let conv = (full.converged as u8 + sub.converged as u8) as f64;
                rows.push([plain, ra, grm, grm_ra, conv]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let n = cfg.trials;
    let col = |si: usize, j: usize| mean(per_trial.iter().map(|t| t[si][j]), n);
    let runs = (2 * n * snrs.len()) as f64;
    Ok(RaComparison {
        snr_db: cfg.snr_db_grid.clone(),
        plain: (0..snrs.len()).map(|s| col(s, 0)).collect(),
        ra: (0..snrs.len()).map(|s| col(s, 1)).collect(),
        grm: (0..snrs.len()).map(|s| col(s, 2)).collect(),
        grm_ra: (0..snrs.len()).map(|s| col(s, 3)).collect(),
        converged: neumaier_sum(per_trial.iter().flat_map(|t| t.iter().map(|r| r[4]))) / runs,
    })
}

fn run_ra_compare(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cmp = compare_rate_allocation(cfg)?;
    let mut t = ResultTable::new(
        ["snr_db", "vp_plain", "vp_ra", "vp_grm", "vp_grm_ra", "alloc_converged"].map(String::from).to_vec(),
    );
    for i in 0..cmp.snr_db.len() {
        t.push_row(vec![cmp.snr_db[i], cmp.plain[i], cmp.ra[i], cmp.grm[i], cmp.grm_ra[i], cmp.converged])?;
    }
    Ok(t)
}
