//! GP sequential likelihood-ratio testing.
//!
//! A node's diagonal projection is a one-dimensional GP whose kernel is
//! `sigma_s^2 exp(-a (z - z')^2 / b^2)` with `a` the number of active
//! variables in the node. The test compares `a = 0` (a constant function plus
//! noise) against `a = 1`, conditioning both posteriors on the same history,
//! so correlation between samples is modelled rather than assumed away.
//! Sampling locations maximize an upper confidence bound on the next LLR
//! increment.

use crate::error::{Error, Result};
use crate::gp::{KernelSpec, Posterior, PosteriorMoments, PredictionCache};
use crate::hds::{project_point, BackgroundVector, HdsConfig, Oracle, TestingBlock};
use crate::par::Execution;
use crate::rng::RunRng;

/// Candidate locations on the diagonal.
pub const GRID_POINTS: usize = 101;

/// Maximum observations per node.
pub const HISTORY_CAP: usize = 500;

const DEGENERATE_REL: f64 = 1e-12;

/// `log N(y | mu1, s1^2) - log N(y | mu0, s0^2)`.
pub fn gpt_llr_increment(y: f64, m0: &PosteriorMoments, m1: &PosteriorMoments) -> f64 {
    let r0 = y - m0.mean;
    let r1 = y - m1.mean;
    0.5 * (m0.variance / m1.variance).ln() - r1 * r1 / (2.0 * m1.variance)
        + r0 * r0 / (2.0 * m0.variance)
}

/// `KL(N(mu1, s1^2) || N(mu0, s0^2))`.
pub fn gaussian_kl(m1: &PosteriorMoments, m0: &PosteriorMoments) -> f64 {
    let dm = m1.mean - m0.mean;
    0.5 * (m0.variance / m1.variance).ln() + (m1.variance + dm * dm) / (2.0 * m0.variance) - 0.5
}

/// Law of the next LLR increment when `y ~ N(mu1, s1^2)`:
/// `w2 * chi2(1, lambda) + w0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrPredictiveMoments {
    pub w2: f64,
    pub w0: f64,
    pub lambda: f64,
    pub mean: f64,
    pub var: f64,
}

pub fn llr_predictive_moments(
    m0: &PosteriorMoments,
    m1: &PosteriorMoments,
) -> LlrPredictiveMoments {
    let (s0, s1) = (m0.variance, m1.variance);
    let dm = m1.mean - m0.mean;
    let gap = s1 - s0;
    if gap.abs() <= DEGENERATE_REL * s0.max(s1) {
        // Equal variances: the LLR is linear in y and exactly Gaussian.
        let mean = dm * dm / (2.0 * s0);
        return LlrPredictiveMoments {
            w2: 0.0,
            w0: mean,
            lambda: 0.0,
            mean,
            var: dm * dm * s1 / (s0 * s0),
        };
    }
    let w2 = 0.5 * (s1 / s0 - 1.0);
    let lambda = s1 * dm * dm / (gap * gap);
    let w0 = 0.5 * (s0 / s1).ln() - dm * dm / (2.0 * gap);
    LlrPredictiveMoments {
        w2,
        w0,
        lambda,
        mean: w2 * (1.0 + lambda) + w0,
        var: 2.0 * w2 * w2 * (1.0 + 2.0 * lambda),
    }
}

/// `E[LLR] + sqrt(V[LLR])` for the next sample.
pub fn ucb_index(m0: &PosteriorMoments, m1: &PosteriorMoments) -> f64 {
    let m = llr_predictive_moments(m0, m1);
    m.mean + m.var.max(0.0).sqrt()
}

/// Per-node GPT state: both hypothesis posteriors over the same history.
#[derive(Debug, Clone)]
pub struct GptNodeState {
    pub llr: f64,
    pub posterior_h0: Posterior,
    pub posterior_h1: Posterior,
    pub history: Vec<(f64, f64)>,
    cache_h0: PredictionCache,
    cache_h1: PredictionCache,
    best: usize,
    best_index: f64,
}

impl GptNodeState {
    /// Grid position and value of the current largest index.
    pub fn best(&self) -> (usize, f64) {
        (self.best, self.best_index)
    }

    /// Index at every grid point.
    pub fn indices(&self) -> Vec<f64> {
        let noise = self.posterior_h0.noise_var();
        (0..self.cache_h0.len())
            .map(|i| {
                ucb_index(
                    &self.cache_h0.moments(i, noise),
                    &self.cache_h1.moments(i, noise),
                )
            })
            .collect()
    }

    fn refresh(&mut self) {
        self.cache_h0.sync(&self.posterior_h0);
        self.cache_h1.sync(&self.posterior_h1);
        let (best, best_index) =
            self.indices()
                .into_iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                );
        self.best = best;
        self.best_index = best_index;
    }
}

#[derive(Debug, Clone)]
pub struct GptTester {
    pub sigma_s2: f64,
    pub bandwidth: f64,
    pub noise_var: f64,
    /// Added to both hypothesis kernels; see [`KernelSpec::offset_var`].
    pub offset_var: f64,
    grid: Vec<Vec<f64>>,
    exec: Execution,
}

impl GptTester {
    pub fn new(sigma_s2: f64, bandwidth: f64, noise_var: f64) -> Result<Self> {
        if !(sigma_s2 > 0.0 && bandwidth > 0.0 && noise_var > 0.0) {
            return Err(Error::invalid("GPT parameters must be positive"));
        }
        let grid = (0..GRID_POINTS)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (GRID_POINTS - 1) as f64])
            .collect();
        Ok(GptTester {
            sigma_s2,
            bandwidth,
            noise_var,
            offset_var: 0.0,
            grid,
            exec: Execution::Sequential,
        })
    }

    pub fn from_config(cfg: &HdsConfig) -> Result<Self> {
        Self::new(cfg.sigma_s2, cfg.bandwidth, cfg.noise_var)?.with_offset_var(cfg.gpt_offset_var)
    }

    pub fn with_offset_var(mut self, offset_var: f64) -> Result<Self> {
        if !(offset_var >= 0.0 && offset_var.is_finite()) {
            return Err(Error::invalid("offset_var must be finite and >= 0"));
        }
        self.offset_var = offset_var;
        Ok(self)
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        self.grid[i][0]
    }

    pub fn new_state(&self) -> Result<GptNodeState> {
        let k0 = KernelSpec::projected(self.sigma_s2, self.bandwidth, 0)?
            .with_offset_var(self.offset_var)?;
        let k1 = KernelSpec::projected(self.sigma_s2, self.bandwidth, 1)?
            .with_offset_var(self.offset_var)?;
        let mut state = GptNodeState {
            llr: 0.0,
            cache_h0: PredictionCache::new(self.grid.clone(), &k0, self.exec),
            cache_h1: PredictionCache::new(self.grid.clone(), &k1, self.exec),
            posterior_h0: Posterior::new(k0, self.noise_var)?,
            posterior_h1: Posterior::new(k1, self.noise_var)?,
            history: Vec::new(),
            best: 0,
            best_index: 0.0,
        };
        state.refresh();
        Ok(state)
    }
}

/// One GPT step: sample the grid point with the largest index, update both
/// posteriors and accumulate the LLR.
pub fn gpt_step(
    tester: &GptTester,
    dims: &[usize],
    state: &mut GptNodeState,
    oracle: &mut dyn Oracle,
    background: &BackgroundVector,
    budget_left: usize,
) -> Result<f64> {
    if budget_left < 1 {
        return Err(Error::BudgetExhausted);
    }
    if state.history.len() >= HISTORY_CAP {
        return Err(Error::numerical(format!(
            "GPT node history exceeds {HISTORY_CAP} observations"
        )));
    }
    let idx = state.best;
    let z = tester.grid_point(idx);
    let y = oracle.eval_noisy(&project_point(dims, z, background)?);
    let noise = tester.noise_var;
    let m0 = state.cache_h0.moments(idx, noise);
    let m1 = state.cache_h1.moments(idx, noise);
    let inc = gpt_llr_increment(y, &m0, &m1);
    state.posterior_h0.extend(vec![z], y)?;
    state.posterior_h1.extend(vec![z], y)?;
    state.history.push((z, y));
    state.llr += inc;
    state.refresh();
    Ok(inc)
}

impl TestingBlock for GptTester {
    type State = GptNodeState;

    fn evals_per_step(&self) -> usize {
        1
    }

    fn init(&self, _dims: &[usize]) -> Result<GptNodeState> {
        self.new_state()
    }

    fn priority(&self, _llr: f64, state: &GptNodeState) -> f64 {
        state.best_index
    }

    fn step(
        &self,
        dims: &[usize],
        state: &mut GptNodeState,
        oracle: &mut dyn Oracle,
        background: &BackgroundVector,
        budget_left: usize,
        _rng: &mut RunRng,
    ) -> Result<f64> {
        gpt_step(self, dims, state, oracle, background, budget_left)
    }
}
