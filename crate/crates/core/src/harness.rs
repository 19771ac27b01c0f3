//! Experiment orchestration: config files, seeded trial batches, sweeps,
//! threshold tuning and CSV output.
//!
//! Trial `i` of a batch uses seed `base_seed + i` and shares nothing mutable
//! with other trials, so batches parallelize across trials and results are a
//! pure function of the config (apart from `wall_ms`).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench::{cws_run, make_oracle, BenchmarkKind, BenchmarkOracle, BenchmarkSpec};
use crate::error::{Error, Result};
use crate::fdt::{FdtFixedTester, FdtSequentialTester};
use crate::gpt::GptTester;
use crate::gpucb::{gpucb_run, RegretTrace, UcbConfig};
use crate::hds::{
    hds_run_with, BackgroundVector, HdsConfig, HdsOutcome, Oracle, StubTester, TesterKind,
};
use crate::par::{self, Execution};
use crate::rng::{RunSeed, Stream};

pub const THETA1_GRID: [f64; 3] = [5.0, 10.0, 20.0];
pub const THETA0_GRID: [f64; 3] = [-5.0, -10.0, -20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HdsFdt,
    HdsGpt,
    HdsFdtFixed,
    Cws,
    /// HDS with a testing block that knows the active set.
    HdsStub,
    /// No selection; GP-UCB over all coordinates.
    FullUcb,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::HdsFdt,
        Method::HdsGpt,
        Method::HdsFdtFixed,
        Method::Cws,
        Method::HdsStub,
        Method::FullUcb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::HdsFdt => "hds_fdt",
            Method::HdsGpt => "hds_gpt",
            Method::HdsFdtFixed => "hds_fdt_fixed",
            Method::Cws => "cws",
            Method::HdsStub => "hds_stub",
            Method::FullUcb => "full_ucb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

mod defaults {
    pub fn dim() -> usize {
        200
    }
    pub fn d() -> usize {
        2
    }
    pub fn noise_var() -> f64 {
        0.1
    }
    pub fn sigma_s2() -> f64 {
        1.0
    }
    pub fn bandwidth() -> f64 {
        0.1
    }
    pub fn budget() -> usize {
        2000
    }
    pub fn theta1() -> f64 {
        10.0
    }
    pub fn theta0() -> f64 {
        -10.0
    }
    pub fn fixed_pairs() -> usize {
        20
    }
    pub fn alpha() -> f64 {
        0.05
    }
    pub fn one() -> usize {
        1
    }
    pub fn offset_var() -> f64 {
        1e4
    }
    pub fn scale() -> f64 {
        1.0
    }
    pub fn delta_o() -> f64 {
        0.05
    }
    pub fn trials() -> usize {
        20
    }
    pub fn yes() -> bool {
        true
    }
}

/// One experiment: a benchmark, a selection method, optional GP-UCB, and a
/// number of seeded trials. Stored as flat JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkKind,
    pub method: Method,
    #[serde(default = "defaults::dim", alias = "D")]
    pub dim: usize,
    #[serde(default = "defaults::d")]
    pub d: usize,
    /// Fixed active set; drawn per trial when absent.
    #[serde(default)]
    pub active_dims: Option<Vec<usize>>,
    #[serde(default = "defaults::noise_var")]
    pub noise_var: f64,
    #[serde(default = "defaults::sigma_s2")]
    pub sigma_s2: f64,
    #[serde(default = "defaults::bandwidth")]
    pub bandwidth: f64,
    /// Map cost benchmarks onto `[-1, 1]`; raw negated costs otherwise.
    #[serde(default)]
    pub normalize_output: bool,
    /// Selection budget in oracle evaluations.
    #[serde(default = "defaults::budget")]
    pub budget: usize,
    /// Prior variance of an unknown constant level, marginalized by GPT.
    #[serde(default = "defaults::offset_var")]
    pub gpt_offset_var: f64,
    #[serde(default = "defaults::theta1")]
    pub theta1: f64,
    #[serde(default = "defaults::theta0")]
    pub theta0: f64,
    #[serde(default = "defaults::fixed_pairs")]
    pub fixed_pairs: usize,
    #[serde(default = "defaults::alpha")]
    pub fixed_alpha: f64,
    #[serde(default = "defaults::one")]
    pub stub_steps: usize,
    #[serde(default)]
    pub stub_error_rate: f64,
    /// Pairs per coordinate for CWS; `budget / (2 D)` when absent.
    #[serde(default)]
    pub cws_n_per_dim: Option<usize>,
    /// GP-UCB steps after selection; 0 skips optimization.
    #[serde(default)]
    pub horizon: usize,
    #[serde(default = "defaults::delta_o")]
    pub delta_o: f64,
    #[serde(default)]
    pub candidates_per_step: Option<usize>,
    /// Multiplies the GP-UCB exploration schedule.
    #[serde(default = "defaults::scale")]
    pub beta_scale: f64,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
    /// When false `wall_ms` is written as 0 so output bytes are reproducible.
    #[serde(default = "defaults::yes")]
    pub record_timing: bool,
    #[serde(default = "defaults::yes")]
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(benchmark: BenchmarkKind, method: Method) -> Self {
        ExperimentConfig {
            benchmark,
            method,
            dim: defaults::dim(),
            d: benchmark.required_d().unwrap_or_else(defaults::d),
            active_dims: None,
            noise_var: defaults::noise_var(),
            sigma_s2: defaults::sigma_s2(),
            bandwidth: defaults::bandwidth(),
            normalize_output: false,
            budget: defaults::budget(),
            gpt_offset_var: defaults::offset_var(),
            theta1: defaults::theta1(),
            theta0: defaults::theta0(),
            fixed_pairs: defaults::fixed_pairs(),
            fixed_alpha: defaults::alpha(),
            stub_steps: 1,
            stub_error_rate: 0.0,
            cws_n_per_dim: None,
            horizon: 0,
            delta_o: defaults::delta_o(),
            candidates_per_step: None,
            beta_scale: 1.0,
            trials: defaults::trials(),
            base_seed: 0,
            output_path: None,
            record_timing: true,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        if self.trials < 1 {
            return bad("trials", "must be >= 1");
        }
        if self.dim < 1 {
            return bad("dim", "must be >= 1");
        }
        if self.d > self.dim {
            return bad("d", "must not exceed D");
        }
        if let Some(req) = self.benchmark.required_d() {
            if self.d != req {
                return bad("d", &format!("{} requires d = {req}", self.benchmark));
            }
        }
        if let Some(a) = &self.active_dims {
            let set: BTreeSet<_> = a.iter().collect();
            if a.len() != self.d || set.len() != a.len() || a.iter().any(|&i| i >= self.dim) {
                return bad("active_dims", "must hold d distinct indices below D");
            }
        }
        if !(self.noise_var > 0.0) {
            return bad("noise_var", "must be > 0");
        }
        if !(self.sigma_s2 > 0.0) {
            return bad("sigma_s2", "must be > 0");
        }
        if !(self.bandwidth > 0.0 && self.bandwidth < 2.0 / 3.0) {
            return bad("bandwidth", "must be in (0, 2/3) so the 3b offset fits");
        }
        if !(self.gpt_offset_var >= 0.0 && self.gpt_offset_var.is_finite()) {
            return bad("gpt_offset_var", "must be finite and >= 0");
        }
        if !(self.theta1 > 0.0) {
            return bad("theta1", "must be > 0");
        }
        if !(self.theta0 < 0.0) {
            return bad("theta0", "must be < 0");
        }
        if self.fixed_pairs < 1 {
            return bad("fixed_pairs", "must be >= 1");
        }
        if !(self.fixed_alpha > 0.0 && self.fixed_alpha < 1.0) {
            return bad("fixed_alpha", "must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.stub_error_rate) {
            return bad("stub_error_rate", "must be in [0, 1]");
        }
        if self.cws_n_per_dim == Some(0) {
            return bad("cws_n_per_dim", "must be >= 1");
        }
        if !(self.delta_o > 0.0 && self.delta_o < 1.0) {
            return bad("delta_o", "must be in (0, 1)");
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return bad("beta_scale", "must be finite and >= 0");
        }
        if self.candidates_per_step == Some(0) {
            return bad("candidates_per_step", "must be >= 1");
        }
        if self.method == Method::FullUcb && self.horizon == 0 {
            return bad("horizon", "full_ucb needs horizon >= 1");
        }
        Ok(())
    }

    pub fn hds_config(&self) -> HdsConfig {
        let tester = match self.method {
            Method::HdsGpt => TesterKind::Gpt,
            Method::HdsFdtFixed => TesterKind::FdtFixed {
                pairs: self.fixed_pairs,
                alpha: self.fixed_alpha,
            },
            _ => TesterKind::FdtSequential,
        };
        HdsConfig {
            budget: self.budget,
            theta1: self.theta1,
            theta0: self.theta0,
            tester,
            sigma_s2: self.sigma_s2,
            bandwidth: self.bandwidth,
            noise_var: self.noise_var,
            gpt_offset_var: self.gpt_offset_var,
        }
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// Benchmark for one trial seed.
    pub fn benchmark_spec(&self, seed: RunSeed) -> Result<BenchmarkSpec> {
        let mut spec = match &self.active_dims {
            Some(a) => {
                let mut a = a.clone();
                a.sort_unstable();
                BenchmarkSpec::new(
                    self.benchmark,
                    self.dim,
                    a,
                    self.noise_var,
                    self.sigma_s2,
                    self.bandwidth,
                )?
            }
            None => BenchmarkSpec::random_active(
                self.benchmark,
                self.dim,
                self.d,
                self.noise_var,
                self.sigma_s2,
                self.bandwidth,
                seed,
            )?,
        };
        spec.normalize = self.normalize_output;
        Ok(spec)
    }
}

fn config_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let msg = e.inner().to_string();
    let named = msg.split('`').nth(1).map(str::to_owned);
    let key = if path.is_empty() || path == "." {
        named.unwrap_or_else(|| "<root>".into())
    } else {
        path
    };
    Error::config(key, msg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(config_error)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn write_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let text =
        serde_json::to_string_pretty(cfg).map_err(|e| Error::config("<root>", e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trial: usize,
    pub seed: u64,
    pub active: BTreeSet<usize>,
    pub recovered: BTreeSet<usize>,
    pub accuracy: bool,
    pub selection_samples: usize,
    pub optimization_samples: usize,
    pub regret_trace: Option<RegretTrace>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

fn select(
    cfg: &ExperimentConfig,
    spec: &BenchmarkSpec,
    oracle: &mut BenchmarkOracle,
    background: &BackgroundVector,
    seed: RunSeed,
) -> Result<BTreeSet<usize>> {
    let hds = cfg.hds_config();
    let recovered = |out: Result<HdsOutcome>| out.map(|o| o.recovered);
    match cfg.method {
        Method::HdsFdt => {
            let t = FdtSequentialTester::from_config(&hds)?;
            recovered(hds_run_with(oracle, t, &hds, seed))
        }
        Method::HdsGpt => {
            let t = GptTester::from_config(&hds)?;
            recovered(hds_run_with(oracle, t, &hds, seed))
        }
        Method::HdsFdtFixed => {
            let t = FdtFixedTester::new(cfg.fixed_pairs, cfg.fixed_alpha, &hds)?;
            recovered(hds_run_with(oracle, t, &hds, seed))
        }
        Method::HdsStub => {
            let mut t = StubTester::exact(spec.active_dims.iter().copied(), &hds);
            t.steps_to_decide = cfg.stub_steps;
            t.error_rate = cfg.stub_error_rate;
            recovered(hds_run_with(oracle, t, &hds, seed))
        }
        Method::Cws => {
            let n = cfg
                .cws_n_per_dim
                .unwrap_or_else(|| (cfg.budget / (2 * cfg.dim)).max(1));
            let mut rng = seed.stream(Stream::Baseline);
            let picked = cws_run(oracle, cfg.d, n, 3.0 * cfg.bandwidth, background, &mut rng)?;
            Ok(picked.into_iter().collect())
        }
        Method::FullUcb => Ok((0..cfg.dim).collect()),
    }
}

fn optimize(
    cfg: &ExperimentConfig,
    dims: &BTreeSet<usize>,
    oracle: &mut BenchmarkOracle,
    background: &BackgroundVector,
    seed: RunSeed,
    exec: Execution,
) -> Result<RegretTrace> {
    let mut ucb = UcbConfig::new(
        cfg.horizon,
        dims.iter().copied().collect(),
        cfg.sigma_s2,
        cfg.bandwidth,
        cfg.noise_var,
    )?;
    ucb.delta_o = cfg.delta_o;
    if let Some(n) = cfg.candidates_per_step {
        ucb.candidates_per_step = n;
    }
    ucb.beta_scale = cfg.beta_scale;
    ucb.exec = exec;
    let f_max = oracle.true_max().1;
    gpucb_run(oracle, &ucb, background, f_max, seed)
}

fn run_trial_inner(
    cfg: &ExperimentConfig,
    seed: RunSeed,
    inner: Execution,
    result: &mut RunResult,
) -> Result<()> {
    let spec = cfg.benchmark_spec(seed)?;
    result.active = spec.active_dims.iter().copied().collect();
    let mut oracle = make_oracle(&spec, seed)?;
    let background = BackgroundVector::for_seed(cfg.dim, seed);
    result.recovered = select(cfg, &spec, &mut oracle, &background, seed)?;
    result.selection_samples = if cfg.method == Method::FullUcb {
        0
    } else {
        oracle.eval_count()
    };
    result.accuracy = result.recovered == result.active;
    if cfg.horizon > 0 && !result.recovered.is_empty() {
        let trace = optimize(
            cfg,
            &result.recovered,
            &mut oracle,
            &background,
            seed,
            inner,
        )?;
        result.optimization_samples = oracle.eval_count() - result.selection_samples;
        result.error = trace.error.clone();
        result.regret_trace = Some(trace);
    }
    Ok(())
}

/// Runs one trial. Failures are recorded in [`RunResult::error`].
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, inner: Execution) -> RunResult {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let start = Instant::now();
    let mut result = RunResult {
        trial,
        seed,
        active: BTreeSet::new(),
        recovered: BTreeSet::new(),
        accuracy: false,
        selection_samples: 0,
        optimization_samples: 0,
        regret_trace: None,
        wall_ms: 0,
        error: None,
    };
    if let Err(e) = run_trial_inner(cfg, RunSeed(seed), inner, &mut result) {
        result.accuracy = false;
        result.error = Some(e.to_string());
    }
    if cfg.record_timing {
        result.wall_ms = start.elapsed().as_millis() as u64;
    }
    result
}

/// Runs all trials, in parallel across trials when enabled. Results come
/// back ordered by trial index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let exec = cfg.execution();
    let inner = if exec.is_parallel() {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    Ok(par::map_range(cfg.trials, exec, |t| {
        run_trial(cfg, t, inner)
    }))
}

/// Full-coordinate GP-UCB on the same oracles as `cfg`, for comparison with
/// select-then-optimize.
pub fn run_full_baseline(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let mut full = cfg.clone();
    full.method = Method::FullUcb;
    run_experiment(&full)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub dim: usize,
    pub d: usize,
    pub noise_var: f64,
    pub theta1: f64,
    pub theta0: f64,
    pub accuracy: u8,
    pub selection_samples: usize,
    pub optimization_samples: usize,
    pub avg_regret_final: f64,
    pub min_regret_final: f64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: [&str; 14] = [
    "trial",
    "seed",
    "method",
    "D",
    "d",
    "noise_var",
    "theta1",
    "theta0",
    "accuracy",
    "selection_samples",
    "optimization_samples",
    "avg_regret_final",
    "min_regret_final",
    "wall_ms",
];

impl ResultRow {
    pub fn from_result(r: &RunResult, cfg: &ExperimentConfig) -> Self {
        let trace = r.regret_trace.as_ref();
        ResultRow {
            trial: r.trial,
            seed: r.seed,
            method: cfg.method,
            dim: cfg.dim,
            d: cfg.d,
            noise_var: cfg.noise_var,
            theta1: cfg.theta1,
            theta0: cfg.theta0,
            accuracy: r.accuracy as u8,
            selection_samples: r.selection_samples,
            optimization_samples: r.optimization_samples,
            avg_regret_final: trace
                .and_then(RegretTrace::final_average)
                .unwrap_or(f64::NAN),
            min_regret_final: trace.and_then(RegretTrace::final_min).unwrap_or(f64::NAN),
            wall_ms: r.wall_ms,
        }
    }

    fn record(&self) -> [String; 14] {
        let f = |v: f64| format!("{v:.16e}");
        [
            self.trial.to_string(),
            self.seed.to_string(),
            self.method.to_string(),
            self.dim.to_string(),
            self.d.to_string(),
            f(self.noise_var),
            f(self.theta1),
            f(self.theta0),
            self.accuracy.to_string(),
            self.selection_samples.to_string(),
            self.optimization_samples.to_string(),
            f(self.avg_regret_final),
            f(self.min_regret_final),
            self.wall_ms.to_string(),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
            let raw = rec.get(i).unwrap_or_default();
            raw.parse()
                .map_err(|_| Error::config(CSV_HEADER[i], format!("cannot parse `{raw}`")))
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::invalid(format!(
                "expected 14 columns, got {}",
                rec.len()
            )));
        }
        Ok(ResultRow {
            trial: field(rec, 0)?,
            seed: field(rec, 1)?,
            method: rec.get(2).unwrap_or_default().parse()?,
            dim: field(rec, 3)?,
            d: field(rec, 4)?,
            noise_var: field(rec, 5)?,
            theta1: field(rec, 6)?,
            theta0: field(rec, 7)?,
            accuracy: field(rec, 8)?,
            selection_samples: field(rec, 9)?,
            optimization_samples: field(rec, 10)?,
            avg_regret_final: field(rec, 11)?,
            min_regret_final: field(rec, 12)?,
            wall_ms: field(rec, 13)?,
        })
    }
}

pub fn rows(results: &[RunResult], cfg: &ExperimentConfig) -> Vec<ResultRow> {
    results
        .iter()
        .map(|r| ResultRow::from_result(r, cfg))
        .collect()
}

pub fn write_csv_to<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(rows, fs::File::create(path)?)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::invalid("unexpected CSV header"));
    }
    r.records().map(|rec| ResultRow::parse(&rec?)).collect()
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Dim,
    SubDim,
    NoiseVar,
    Method,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D" | "dim" => Ok(SweepParam::Dim),
            "d" => Ok(SweepParam::SubDim),
            "noise_var" => Ok(SweepParam::NoiseVar),
            "method" => Ok(SweepParam::Method),
            _ => Err(Error::config("param", format!("cannot sweep `{s}`"))),
        }
    }
}

impl SweepParam {
    pub fn apply(self, cfg: &mut ExperimentConfig, value: &str) -> Result<()> {
        let parse_err = |key: &str| Error::config(key, format!("cannot parse `{value}`"));
        match self {
            SweepParam::Dim => cfg.dim = value.parse().map_err(|_| parse_err("dim"))?,
            SweepParam::SubDim => cfg.d = value.parse().map_err(|_| parse_err("d"))?,
            SweepParam::NoiseVar => {
                cfg.noise_var = value.parse().map_err(|_| parse_err("noise_var"))?
            }
            SweepParam::Method => cfg.method = value.parse()?,
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: String,
    pub trials: usize,
    pub errors: usize,
    pub mean_accuracy: f64,
    pub se_accuracy: f64,
    pub mean_samples: f64,
    pub se_samples: f64,
}

pub fn summarize(value: impl Into<String>, results: &[RunResult]) -> SummaryRow {
    let acc: Vec<f64> = results.iter().map(|r| r.accuracy as u8 as f64).collect();
    let samples: Vec<f64> = results.iter().map(|r| r.selection_samples as f64).collect();
    let (mean_accuracy, se_accuracy) = mean_stderr(&acc);
    let (mean_samples, se_samples) = mean_stderr(&samples);
    SummaryRow {
        value: value.into(),
        trials: results.len(),
        errors: results.iter().filter(|r| r.error.is_some()).count(),
        mean_accuracy,
        se_accuracy,
        mean_samples,
        se_samples,
    }
}

/// Runs the experiment once per value of `param`.
pub fn sweep(
    template: &ExperimentConfig,
    param: SweepParam,
    values: &[String],
) -> Result<Vec<SummaryRow>> {
    values
        .iter()
        .map(|v| {
            let mut cfg = template.clone();
            param.apply(&mut cfg, v)?;
            Ok(summarize(v.clone(), &run_experiment(&cfg)?))
        })
        .collect()
}

pub fn write_summary_to<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "value",
        "trials",
        "errors",
        "mean_accuracy",
        "se_accuracy",
        "mean_samples",
        "se_samples",
    ])?;
    for r in rows {
        w.write_record([
            r.value.clone(),
            r.trials.to_string(),
            r.errors.to_string(),
            format!("{:.16e}", r.mean_accuracy),
            format!("{:.16e}", r.se_accuracy),
            format!("{:.16e}", r.mean_samples),
            format!("{:.16e}", r.se_samples),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub theta1: f64,
    pub theta0: f64,
    /// `(theta1, theta0, summary)` for every grid pair, in grid order.
    pub table: Vec<(f64, f64, SummaryRow)>,
}

/// Evaluates every threshold pair on `template` and keeps the one with the
/// highest mean accuracy, breaking ties by fewer mean selection samples.
pub fn grid_search_thresholds(template: &ExperimentConfig) -> Result<ThresholdChoice> {
    let mut table = Vec::with_capacity(9);
    for t1 in THETA1_GRID {
        for t0 in THETA0_GRID {
            let mut cfg = template.clone();
            cfg.theta1 = t1;
            cfg.theta0 = t0;
            let s = summarize(format!("{t1}/{t0}"), &run_experiment(&cfg)?);
            table.push((t1, t0, s));
        }
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            b.2.mean_accuracy
                .total_cmp(&a.2.mean_accuracy)
                .then(a.2.mean_samples.total_cmp(&b.2.mean_samples))
        })
        .map(|(t1, t0, _)| (*t1, *t0))
        .expect("grid is nonempty");
    Ok(ThresholdChoice {
        theta1: best.0,
        theta0: best.1,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(BenchmarkKind::Quad, Method::HdsStub);
        cfg.dim = 4;
        cfg.d = 1;
        cfg.active_dims = Some(vec![1]);
        cfg.trials = 1;
        cfg.record_timing = false;
        cfg
    }

    #[test]
    fn stub_trial_recovers() {
        let res = run_experiment(&stub_cfg()).unwrap();
        assert_eq!(res.len(), 1);
        assert!(res[0].accuracy);
        assert_eq!(res[0].recovered, BTreeSet::from([1]));
        assert_eq!(res[0].selection_samples, 5);
        assert!(res[0].error.is_none());
    }

    #[test]
    fn trial_count_and_seeds() {
        let mut cfg = stub_cfg();
        cfg.trials = 20;
        cfg.base_seed = 100;
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.len(), 20);
        for (i, r) in res.iter().enumerate() {
            assert_eq!(r.trial, i);
            assert_eq!(r.seed, 100 + i as u64);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut cfg = ExperimentConfig::new(BenchmarkKind::Gp, Method::HdsFdt);
        cfg.dim = 10;
        cfg.trials = 4;
        cfg.horizon = 10;
        cfg.record_timing = false;
        let a = run_experiment(&cfg).unwrap();
        cfg.parallel = false;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.optimization_samples, 10);
        }
    }

    #[test]
    fn sample_accounting_matches_oracle() {
        let mut cfg = ExperimentConfig::new(BenchmarkKind::Branin, Method::Cws);
        cfg.dim = 10;
        cfg.trials = 2;
        cfg.cws_n_per_dim = Some(5);
        cfg.horizon = 3;
        for r in run_experiment(&cfg).unwrap() {
            assert_eq!(r.selection_samples, 100);
            assert_eq!(r.optimization_samples, 3);
        }
    }

    #[test]
    fn full_baseline_uses_every_coordinate() {
        let mut cfg = ExperimentConfig::new(BenchmarkKind::Quad, Method::HdsFdt);
        cfg.dim = 3;
        cfg.d = 1;
        cfg.trials = 1;
        cfg.horizon = 5;
        let r = &run_full_baseline(&cfg).unwrap()[0];
        assert_eq!(r.recovered.len(), 3);
        assert_eq!(r.selection_samples, 0);
        assert_eq!(r.optimization_samples, 5);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = stub_cfg();
        cfg.trials = 3;
        cfg.horizon = 4;
        let res = run_experiment(&cfg).unwrap();
        let rows = rows(&res, &cfg);
        let p = dir.path().join("a.csv");
        write_csv(&rows, &p).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back, rows);

        let q = dir.path().join("b.csv");
        write_csv(&self::rows(&run_experiment(&cfg).unwrap(), &cfg), &q).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());

        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("trial,seed,method,D,d,noise_var,theta1,theta0,accuracy,"));
    }

    #[test]
    fn csv_keeps_full_precision_and_nan() {
        let mut cfg = stub_cfg();
        cfg.noise_var = 0.1 + 1e-16;
        let res = run_experiment(&cfg).unwrap();
        let rows = rows(&res, &cfg);
        let mut buf = Vec::new();
        write_csv_to(&rows, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, &buf).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back[0].noise_var.to_bits(), cfg.noise_var.to_bits());
        assert!(back[0].avg_regret_final.is_nan());
    }

    #[test]
    fn config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let mut cfg = stub_cfg();
        cfg.output_path = Some("out.csv".into());
        write_config(&cfg, &p).unwrap();
        assert_eq!(read_config(&p).unwrap(), cfg);
    }

    fn config_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_key() {
        assert_eq!(config_key(r#"{"benchmark": "gp"}"#), "method");
        assert_eq!(
            config_key(r#"{"benchmark": "gp", "method": "lasso"}"#),
            "method"
        );
        assert_eq!(
            config_key(r#"{"benchmark": "gp", "method": "cws", "colour": 1}"#),
            "colour"
        );
        assert_eq!(
            config_key(r#"{"benchmark": "gp", "method": "cws", "trials": 0}"#),
            "trials"
        );
        assert_eq!(
            config_key(r#"{"benchmark": "beale", "method": "cws", "d": 3}"#),
            "d"
        );
        let cfg = parse_config(r#"{"benchmark": "gp", "method": "hds_gpt", "D": 40}"#).unwrap();
        assert_eq!(cfg.dim, 40);
        assert_eq!(cfg.budget, 2000);
    }

    #[test]
    fn sweep_shapes_and_stub_scaling() {
        let mut cfg = stub_cfg();
        cfg.active_dims = None;
        cfg.d = 2;
        cfg.trials = 5;
        let values: Vec<String> = ["8", "64", "512"].map(String::from).to_vec();
        let table = sweep(&cfg, SweepParam::Dim, &values).unwrap();
        assert_eq!(table.len(), 3);
        for (row, dim) in table.iter().zip([8usize, 64, 512]) {
            assert_eq!(row.trials, 5);
            assert_eq!(row.mean_accuracy, 1.0);
            let log = crate::fdt::ceil_log2(dim) as f64;
            assert!(row.mean_samples <= 2.0 * 2.0 * log + 1.0);
            assert!(row.mean_samples >= log);
        }
        assert!(table[2].mean_samples > table[0].mean_samples);
        assert!(sweep(&cfg, SweepParam::Dim, &["x".into()]).is_err());
    }

    #[test]
    fn threshold_grid() {
        let mut cfg = stub_cfg();
        cfg.trials = 2;
        let choice = grid_search_thresholds(&cfg).unwrap();
        assert_eq!(choice.table.len(), 9);
        // The stub decides in one step whatever the thresholds: first pair wins.
        assert_eq!((choice.theta1, choice.theta0), (5.0, -5.0));
    }

    #[test]
    fn mean_stderr_values() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
