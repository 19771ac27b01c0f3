//! Finite-difference testing.
//!
//! Under the inactive hypothesis a node's diagonal projection is constant, so
//! a finite difference `y(z) - y(z + delta)` is pure noise with variance
//! `2 sigma^2`. With one active variable and `delta = 3b` its variance is at
//! least `2 (0.95 sigma_s^2 + sigma^2)`. This module holds the sequential
//! likelihood-ratio test built on that gap, the non-sequential chi-squared
//! test with its sample-size rule, and the closed-form sample-complexity
//! calculators that accompany them.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::gp::KernelSpec;
use crate::hds::{project_point, BackgroundVector, HdsConfig, Oracle, TestingBlock};
use crate::rng::RunRng;

/// Redraws allowed when a new pair lands too close to the previous one.
pub const SPACING_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// `ceil(log2(n))`, with `ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Finite-difference variances under the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdtHypothesisVariances {
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
}

impl FdtHypothesisVariances {
    pub fn new(sigma0_sq: f64, sigma1_sq: f64) -> Result<Self> {
        if !(sigma0_sq > 0.0 && sigma0_sq < sigma1_sq) {
            return Err(Error::invalid(format!(
                "need 0 < sigma0^2 < sigma1^2, got {sigma0_sq} and {sigma1_sq}"
            )));
        }
        Ok(FdtHypothesisVariances {
            sigma0_sq,
            sigma1_sq,
        })
    }

    /// `sigma0^2 = 2 sigma^2`, `sigma1^2 = 2 (0.95 sigma_s^2 + sigma^2)`.
    pub fn from_model(sigma_s2: f64, noise_var: f64) -> Result<Self> {
        Self::new(2.0 * noise_var, 2.0 * (0.95 * sigma_s2 + noise_var))
    }

    /// Coefficient of `dy^2` in the per-pair LLR.
    pub fn quadratic_coef(&self) -> f64 {
        0.5 / self.sigma0_sq - 0.5 / self.sigma1_sq
    }

    /// `log(sigma0 / sigma1)`.
    pub fn offset(&self) -> f64 {
        0.5 * (self.sigma0_sq / self.sigma1_sq).ln()
    }
}

/// Variance of a finite difference at offset `delta` for a node holding `a`
/// active variables: `2 [(1 - exp(-a delta^2 / b^2)) sigma_s^2 + sigma^2]`.
pub fn fd_variance(a: usize, delta: f64, spec: &KernelSpec, noise_var: f64) -> f64 {
    let b2 = spec.bandwidth * spec.bandwidth;
    2.0 * ((1.0 - (-(a as f64) * delta * delta / b2).exp()) * spec.sigma_s2 + noise_var)
}

/// LLR of one finite difference: `log N(dy | 0, s1^2) - log N(dy | 0, s0^2)`.
pub fn fdt_llr_increment(dy: f64, v: &FdtHypothesisVariances) -> f64 {
    v.quadratic_coef() * dy * dy + v.offset()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FdtNodeState {
    pub llr: f64,
    pub pair_count: usize,
    pub last_z: Option<f64>,
}

/// Draws a pair start on `[-1, 1 - delta]`, redrawing up to
/// [`SPACING_ATTEMPTS`] times while it is within `spacing` of `last`.
pub fn draw_pair_start(
    delta: f64,
    spacing: f64,
    last: Option<f64>,
    rng: &mut RunRng,
) -> Result<f64> {
    let hi = 1.0 - delta;
    if !(hi > -1.0) {
        return Err(Error::invalid(format!(
            "offset {delta} leaves no room in [-1, 1]"
        )));
    }
    let mut z = rng.random_range(-1.0..=hi);
    if let Some(prev) = last {
        let mut attempts = 1;
        while (z - prev).abs() < spacing && attempts < SPACING_ATTEMPTS {
            z = rng.random_range(-1.0..=hi);
            attempts += 1;
        }
    }
    Ok(z)
}

/// One sequential FDT step on node `dims`: query `f_I(z)` and `f_I(z + delta)`
/// and accumulate the pair's LLR into `state`.
#[allow(clippy::too_many_arguments)]
pub fn fdt_step(
    dims: &[usize],
    state: &mut FdtNodeState,
    oracle: &mut dyn Oracle,
    background: &BackgroundVector,
    v: &FdtHypothesisVariances,
    delta: f64,
    budget_left: usize,
    rng: &mut RunRng,
) -> Result<f64> {
    if budget_left < 2 {
        return Err(Error::BudgetExhausted);
    }
    let z = draw_pair_start(delta, delta, state.last_z, rng)?;
    let a = project_point(dims, z, background)?;
    let b = project_point(dims, (z + delta).min(1.0), background)?;
    let dy = oracle.eval_noisy(&a) - oracle.eval_noisy(&b);
    let inc = fdt_llr_increment(dy, v);
    state.llr += inc;
    state.pair_count += 1;
    state.last_z = Some(z);
    Ok(inc)
}

/// `X_n = (1 / 2 sigma^2) sum diff_i^2`.
pub fn fdt_statistic(diffs: &[f64], noise_var: f64) -> f64 {
    diffs.iter().map(|d| d * d).sum::<f64>() / (2.0 * noise_var)
}

/// Upper `alpha` quantile of the central chi-squared law with `n` degrees of
/// freedom, found by bisection on its CDF.
pub fn fdt_threshold(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("degrees of freedom must be >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let dist = ChiSquared::new(n as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let target = 1.0 - alpha;
    let mut lo = 0.0;
    let mut hi = n as f64 + 10.0 * (2.0 * n as f64).sqrt() + 10.0;
    while dist.cdf(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `max{2, 16 (1 + sqrt(1 + c))^2 / c^2, 2 M^2 / c^2}`.
fn size_factor(c: f64, m: f64) -> f64 {
    let t = 1.0 + (1.0 + c).sqrt();
    2f64.max(16.0 * t * t / (c * c)).max(2.0 * m * m / (c * c))
}

/// Pairs needed by the non-sequential test for type I and II errors below
/// `alpha`, with `E[Delta^2] >= c` and `Delta^2 <= m`. Natural log.
///
/// `m < c` is not rejected; the bound is still well defined there.
pub fn fdt_sample_size(c: f64, m: f64, alpha: f64) -> Result<usize> {
    fdt_sample_size_with_base(c, m, alpha, LogBase::Natural)
}

pub fn fdt_sample_size_with_base(c: f64, m: f64, alpha: f64, base: LogBase) -> Result<usize> {
    check_positive("c", c)?;
    check_positive("M", m)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let n = size_factor(c, m) * base.log(2.0 / alpha);
    Ok(n.ceil() as usize)
}

/// Default envelope for `Delta^2`: `8 sigma_s^2 / (2 sigma^2)`.
pub fn default_delta_sq_bound(sigma_s2: f64, noise_var: f64) -> f64 {
    8.0 * sigma_s2 / (2.0 * noise_var)
}

/// Log bases used by [`guaranteed_test_size`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeLogs {
    /// For `B_eps` and the per-node `log(2 / alpha)` factor.
    pub analytic: LogBase,
    /// For the bracket `log 16 + log(1/eps) / ceil(log D)` of the total bound.
    pub total: LogBase,
}

impl Default for SizeLogs {
    fn default() -> Self {
        SizeLogs {
            analytic: LogBase::Natural,
            total: LogBase::Two,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedSizeBound {
    pub delta: f64,
    pub alpha: f64,
    pub b_eps: f64,
    pub a_eps: f64,
    /// Pairs per node, `A_eps log(2 / alpha)`.
    pub per_node: f64,
    pub n_eps: f64,
}

/// `A_eps = max{2, 16 (1 + sqrt(1 + B))^2 / B^2, 8 / B^2}`.
pub fn a_eps(b_eps: f64) -> f64 {
    let t = 1.0 + (1.0 + b_eps).sqrt();
    2f64.max(16.0 * t * t / (b_eps * b_eps))
        .max(8.0 / (b_eps * b_eps))
}

/// Fixed-sample-size HDS-FDT accuracy/complexity calculator.
#[allow(clippy::too_many_arguments)]
pub fn guaranteed_test_size(
    epsilon: f64,
    dim: usize,
    d: usize,
    bandwidth: f64,
    sigma_s2: f64,
    c1: f64,
    c2: f64,
    logs: SizeLogs,
) -> Result<FixedSizeBound> {
    check_positive("epsilon", epsilon)?;
    check_positive("bandwidth", bandwidth)?;
    check_positive("sigma_s2", sigma_s2)?;
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    if dim < 2 || d == 0 {
        return Err(Error::invalid("need D >= 2 and d >= 1"));
    }
    let depth = ceil_log2(dim) as f64;
    let delta = epsilon / (6.0 * d as f64 * depth);
    let alpha = (epsilon / (2.0 * dim as f64)).powf(depth);
    if !(alpha < 0.25) {
        return Err(Error::invalid(format!(
            "alpha = (eps/2D)^ceil(log D) = {alpha} violates alpha < 1/4"
        )));
    }
    let b_max = 2.0 / logs.analytic.log(1.0 / delta).powi(2);
    if !(bandwidth <= b_max) {
        return Err(Error::invalid(format!(
            "bandwidth {bandwidth} violates b <= 2 / log(1/delta)^2 = {b_max}"
        )));
    }
    let log_term = logs.analytic.log(4.0 * c1 / (bandwidth * delta));
    if !(log_term > 0.0) {
        return Err(Error::invalid("log(4 c1 / (b delta)) must be positive"));
    }
    let b_eps = sigma_s2 * bandwidth * bandwidth / (4096.0 * c2 * c2 * log_term);
    let a = a_eps(b_eps);
    let per_node = a * logs.analytic.log(2.0 / alpha);
    let n_eps =
        a * d as f64 * depth * (logs.total.log(16.0) + logs.total.log(1.0 / epsilon) / depth);
    Ok(FixedSizeBound {
        delta,
        alpha,
        b_eps,
        a_eps: a,
        per_node,
        n_eps,
    })
}

/// Expected-sample-complexity bound of HDS:
/// `2 (1 - alpha) / (1 - 2 alpha) * d * ceil(log2 D) * t_max`.
pub fn expected_samples_bound(alpha: f64, d: usize, dim: usize, t_max: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must be in [0, 1/2), got {alpha}"
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("D must be >= 1"));
    }
    Ok(2.0 * (1.0 - alpha) / (1.0 - 2.0 * alpha) * d as f64 * ceil_log2(dim) as f64 * t_max)
}

/// Sequential FDT as an HDS testing block.
#[derive(Debug, Clone)]
pub struct FdtSequentialTester {
    pub variances: FdtHypothesisVariances,
    pub delta: f64,
}

impl FdtSequentialTester {
    pub fn from_config(cfg: &HdsConfig) -> Result<Self> {
        Ok(FdtSequentialTester {
            variances: FdtHypothesisVariances::from_model(cfg.sigma_s2, cfg.noise_var)?,
            delta: 3.0 * cfg.bandwidth,
        })
    }
}

impl TestingBlock for FdtSequentialTester {
    type State = FdtNodeState;

    fn evals_per_step(&self) -> usize {
        2
    }

    fn init(&self, _dims: &[usize]) -> Result<FdtNodeState> {
        Ok(FdtNodeState::default())
    }

    fn priority(&self, llr: f64, _state: &FdtNodeState) -> f64 {
        llr
    }

    fn step(
        &self,
        dims: &[usize],
        state: &mut FdtNodeState,
        oracle: &mut dyn Oracle,
        background: &BackgroundVector,
        budget_left: usize,
        rng: &mut RunRng,
    ) -> Result<f64> {
        fdt_step(
            dims,
            state,
            oracle,
            background,
            &self.variances,
            self.delta,
            budget_left,
            rng,
        )
    }
}

/// Non-sequential chi-squared test as an HDS testing block. Each step
/// queries one pair of independent uniform points; after `pairs` pairs the
/// node is decided in one jump to `theta1` or `theta0`.
#[derive(Debug, Clone)]
pub struct FdtFixedTester {
    pub pairs: usize,
    pub threshold: f64,
    pub noise_var: f64,
    pub theta1: f64,
    pub theta0: f64,
}

impl FdtFixedTester {
    pub fn new(pairs: usize, alpha: f64, cfg: &HdsConfig) -> Result<Self> {
        Ok(FdtFixedTester {
            pairs,
            threshold: fdt_threshold(pairs, alpha)?,
            noise_var: cfg.noise_var,
            theta1: cfg.theta1,
            theta0: cfg.theta0,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct FdtFixedState {
    pub diffs: Vec<f64>,
}

impl TestingBlock for FdtFixedTester {
    type State = FdtFixedState;

    fn evals_per_step(&self) -> usize {
        2
    }

    fn init(&self, _dims: &[usize]) -> Result<FdtFixedState> {
        Ok(FdtFixedState::default())
    }

    fn priority(&self, llr: f64, _state: &FdtFixedState) -> f64 {
        llr
    }

    fn step(
        &self,
        dims: &[usize],
        state: &mut FdtFixedState,
        oracle: &mut dyn Oracle,
        background: &BackgroundVector,
        budget_left: usize,
        rng: &mut RunRng,
    ) -> Result<f64> {
        if budget_left < 2 {
            return Err(Error::BudgetExhausted);
        }
        let z1 = rng.random_range(-1.0..=1.0);
        let z2 = rng.random_range(-1.0..=1.0);
        let a = project_point(dims, z1, background)?;
        let b = project_point(dims, z2, background)?;
        state
            .diffs
            .push(oracle.eval_noisy(&a) - oracle.eval_noisy(&b));
        if state.diffs.len() < self.pairs {
            return Ok(0.0);
        }
        let x = fdt_statistic(&state.diffs, self.noise_var);
        Ok(if x > self.threshold {
            self.theta1
        } else {
            self.theta0
        })
    }
}
