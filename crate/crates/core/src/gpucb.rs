//! GP-UCB maximization over a subset of coordinates, with regret accounting.
//!
//! Coordinates outside `dims` stay at the background vector. The candidate
//! set is fixed for the whole run so predictive moments can be maintained
//! incrementally.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{KernelSpec, Posterior, PredictionCache};
use crate::hds::{BackgroundVector, Oracle};
use crate::par::Execution;
use crate::rng::{RunSeed, Stream};

/// Grid resolution per axis when at most two coordinates are optimized.
pub const GRID_PER_AXIS: usize = 201;

#[derive(Debug, Clone, PartialEq)]
pub struct UcbConfig {
    pub horizon: usize,
    pub delta_o: f64,
    pub dims: Vec<usize>,
    /// Kernel over the optimized coordinates only.
    pub spec: KernelSpec,
    pub noise_var: f64,
    /// Random candidates used when more than two coordinates are optimized.
    pub candidates_per_step: usize,
    /// Multiplies `beta_t`; 1 uses the schedule as is.
    pub beta_scale: f64,
    pub exec: Execution,
}

impl UcbConfig {
    pub fn new(
        horizon: usize,
        dims: Vec<usize>,
        sigma_s2: f64,
        bandwidth: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let d = dims.len();
        let cfg = UcbConfig {
            horizon,
            delta_o: 0.05,
            spec: KernelSpec::dense(sigma_s2, bandwidth, d)?,
            candidates_per_step: 1000 * d.max(1),
            dims,
            noise_var,
            beta_scale: 1.0,
            exec: Execution::Parallel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !(self.delta_o > 0.0 && self.delta_o < 1.0) {
            return Err(Error::invalid("delta_o must be in (0, 1)"));
        }
        if self.dims.is_empty() {
            return Err(Error::invalid("GP-UCB needs at least one dimension"));
        }
        if self.spec.active_dims != (0..self.dims.len()).collect::<Vec<_>>() {
            return Err(Error::invalid(
                "kernel must act on the optimized coordinates",
            ));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::invalid("noise_var must be >= 0"));
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::invalid("beta_scale must be finite and >= 0"));
        }
        if self.dims.len() > 2 && self.candidates_per_step == 0 {
            return Err(Error::invalid("candidates_per_step must be >= 1"));
        }
        self.spec.validate()
    }
}

/// Exploration weight at step `t` for `d` optimized coordinates.
pub fn beta_t(t: usize, d: usize, cfg: &UcbConfig) -> f64 {
    let t = t.max(1) as f64;
    let d_f = d as f64;
    let delta = cfg.delta_o;
    let sigma_s = cfg.spec.sigma_s2.sqrt();
    let first = 2.0 * (t * t * 2.0 * PI * PI / (3.0 * delta)).ln();
    let inner = 2.0 * t * t * d_f * sigma_s / cfg.spec.bandwidth * (4.0 * d_f / delta).ln().sqrt();
    first + 2.0 * d_f * inner.ln()
}

/// Index of the candidate maximizing `mu + sqrt(beta) sigma`, where `sigma`
/// is the noise-free posterior standard deviation. Candidates are expected in
/// lexicographic order so the first maximizer is the smallest.
pub fn ucb_acquire(cache: &PredictionCache, noise_var: f64, beta: f64) -> Result<usize> {
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta must be >= 0"));
    }
    let root = beta.sqrt();
    let mut best = None::<(usize, f64)>;
    for i in 0..cache.len() {
        let m = cache.moments(i, noise_var);
        let v = m.mean + root * m.latent_variance(noise_var).sqrt();
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("empty candidate set"))
}

/// Candidate set over `[-1, 1]^d` in lexicographic order.
pub fn candidate_points(cfg: &UcbConfig, seed: RunSeed) -> Vec<Vec<f64>> {
    let d = cfg.dims.len();
    let axis = |i: usize| -1.0 + 2.0 * i as f64 / (GRID_PER_AXIS - 1) as f64;
    let mut pts: Vec<Vec<f64>> = match d {
        1 => (0..GRID_PER_AXIS).map(|i| vec![axis(i)]).collect(),
        2 => (0..GRID_PER_AXIS * GRID_PER_AXIS)
            .map(|k| vec![axis(k / GRID_PER_AXIS), axis(k % GRID_PER_AXIS)])
            .collect(),
        _ => {
            let mut rng = seed.stream(Stream::Candidates);
            (0..cfg.candidates_per_step)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect()
        }
    };
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pts
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub min_regret: Vec<f64>,
    /// Set when the run stopped early on a numerical failure.
    pub error: Option<String>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    fn push(&mut self, r: f64) {
        let cum = self.cumulative.last().copied().unwrap_or(0.0) + r;
        let min = self
            .min_regret
            .last()
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(r);
        self.instantaneous.push(r);
        self.cumulative.push(cum);
        self.min_regret.push(min);
    }

    /// `R_t / t` for `t` in `1..=len`.
    pub fn average_at(&self, t: usize) -> Option<f64> {
        (t >= 1).then(|| self.cumulative.get(t - 1).map(|c| c / t as f64))?
    }

    pub fn final_average(&self) -> Option<f64> {
        self.average_at(self.len())
    }

    pub fn final_min(&self) -> Option<f64> {
        self.min_regret.last().copied()
    }
}

/// Runs GP-UCB for `cfg.horizon` steps. Regret is measured against
/// `f_max`, normally the oracle's global maximum.
pub fn gpucb_run(
    oracle: &mut dyn Oracle,
    cfg: &UcbConfig,
    background: &BackgroundVector,
    f_max: f64,
    seed: RunSeed,
) -> Result<RegretTrace> {
    cfg.validate()?;
    if background.len() != oracle.dim() {
        return Err(Error::invalid(
            "background length differs from oracle dimension",
        ));
    }
    if let Some(&i) = cfg.dims.iter().find(|&&i| i >= oracle.dim()) {
        return Err(Error::invalid(format!("dimension {i} out of range")));
    }
    let d = cfg.dims.len();
    let mut cache = PredictionCache::new(candidate_points(cfg, seed), &cfg.spec, cfg.exec);
    let mut post = Posterior::new(cfg.spec.clone(), cfg.noise_var)?;
    let mut trace = RegretTrace::default();
    let mut x = background.values().to_vec();
    for t in 1..=cfg.horizon {
        let idx = ucb_acquire(&cache, cfg.noise_var, cfg.beta_scale * beta_t(t, d, cfg))?;
        let z = cache.point(idx).to_vec();
        for (&i, &v) in cfg.dims.iter().zip(&z) {
            x[i] = v;
        }
        let y = oracle.eval_noisy(&x);
        trace.push(f_max - oracle.eval_true(&x));
        if let Err(e) = post.extend(z, y) {
            trace.error = Some(e.to_string());
            break;
        }
        cache.sync(&post);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hds::tests::FnOracle;

    fn cfg(horizon: usize, dims: Vec<usize>) -> UcbConfig {
        UcbConfig::new(horizon, dims, 1.0, 0.1, 0.01).unwrap()
    }

    #[test]
    fn beta_examples() {
        let c = cfg(10, vec![0, 1]);
        let b1 = 2.0 * (2.0 * PI * PI / 0.15f64).ln() + 4.0 * (40.0 * 160f64.ln().sqrt()).ln();
        assert!((beta_t(1, 2, &c) - b1).abs() < 1e-12);
        assert!((beta_t(1, 2, &c) - 27.764).abs() < 1e-3);
        assert!((beta_t(2, 2, &c) - 36.082).abs() < 1e-3);
        let mut prev = 0.0;
        for t in 1..200 {
            let b = beta_t(t, 2, &c);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn config_validation() {
        assert!(UcbConfig::new(0, vec![0], 1.0, 0.1, 0.1).is_err());
        assert!(UcbConfig::new(5, vec![], 1.0, 0.1, 0.1).is_err());
        let mut c = cfg(5, vec![0]);
        c.delta_o = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_posterior_picks_smallest_candidate() {
        let c = cfg(1, vec![0, 1]);
        let cache = PredictionCache::new(candidate_points(&c, RunSeed(0)), &c.spec, c.exec);
        let i = ucb_acquire(&cache, c.noise_var, 4.0).unwrap();
        assert_eq!(i, 0);
        assert_eq!(cache.point(0), &[-1.0, -1.0]);
        assert!(ucb_acquire(&cache, c.noise_var, -1.0).is_err());
    }

    #[test]
    fn acquisition_follows_mean_and_large_observation() {
        let c = cfg(1, vec![0]);
        let pts = candidate_points(&c, RunSeed(0));
        let mut cache = PredictionCache::new(pts.clone(), &c.spec, c.exec);
        let mut post = Posterior::new(c.spec.clone(), c.noise_var).unwrap();
        post.extend(vec![0.3], 5.0).unwrap();
        post.extend(vec![-0.6], 1.0).unwrap();
        cache.sync(&post);

        // Pure exploitation picks the exhaustive arg-max of the mean.
        let i = ucb_acquire(&cache, c.noise_var, 0.0).unwrap();
        let scan = (0..pts.len())
            .max_by(|&a, &b| {
                let ma = post.moments(&pts[a]).mean;
                let mb = post.moments(&pts[b]).mean;
                ma.total_cmp(&mb).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(i, scan);
        let step = 2.0 / (GRID_PER_AXIS - 1) as f64;
        assert!((pts[i][0] - 0.3).abs() <= step + 1e-12);

        let i = ucb_acquire(&cache, c.noise_var, 0.1).unwrap();
        assert!((pts[i][0] - 0.3).abs() <= step + 1e-12);
    }

    #[test]
    fn random_candidates_are_sorted_and_seeded() {
        let c = cfg(1, vec![0, 1, 2]);
        let a = candidate_points(&c, RunSeed(3));
        assert_eq!(a.len(), 3000);
        assert_eq!(a, candidate_points(&c, RunSeed(3)));
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_step_and_constant_function() {
        let bg = BackgroundVector::new(vec![0.0; 3]).unwrap();
        let mut o = FnOracle::new(3, 0.01, |x: &[f64]| -(x[1] - 0.2).powi(2));
        let tr = gpucb_run(&mut o, &cfg(1, vec![1]), &bg, 0.0, RunSeed(1)).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.cumulative[0], tr.instantaneous[0]);
        assert_eq!(o.eval_count(), 1);

        let mut o = FnOracle::new(3, 0.01, |_: &[f64]| 2.5);
        let tr = gpucb_run(&mut o, &cfg(20, vec![0, 2]), &bg, 2.5, RunSeed(1)).unwrap();
        assert!(tr.instantaneous.iter().all(|&r| r == 0.0));
        assert!(tr.error.is_none());
    }

    #[test]
    fn trace_invariants_and_determinism() {
        let bg = BackgroundVector::new(vec![0.5; 4]).unwrap();
        let f = |x: &[f64]| (3.0 * x[0]).sin() + (2.0 * x[2]).cos();
        let run = || {
            let mut o = FnOracle::new(4, 0.1, f);
            gpucb_run(&mut o, &cfg(40, vec![0, 2]), &bg, 2.0, RunSeed(8)).unwrap()
        };
        let tr = run();
        assert_eq!(tr, run());
        assert!(tr.cumulative.windows(2).all(|w| w[1] >= w[0]));
        assert!(tr.min_regret.windows(2).all(|w| w[1] <= w[0]));
        for t in 1..=tr.len() {
            assert!(tr.average_at(t).unwrap() >= tr.min_regret[t - 1] - 1e-12);
        }
    }

    #[test]
    fn quadratic_regret_is_sublinear() {
        let bg = BackgroundVector::new(vec![0.0; 2]).unwrap();
        let x_star = 0.37;
        let mut o = FnOracle::new(2, 0.01, move |x: &[f64]| -100.0 * (x[0] - x_star).powi(2));
        let tr = gpucb_run(&mut o, &cfg(100, vec![0]), &bg, 0.0, RunSeed(2)).unwrap();
        let (a10, a100) = (tr.average_at(10).unwrap(), tr.average_at(100).unwrap());
        assert!(a100 < 0.2 * a10, "{a100} vs {a10}");
    }
}
