//! Hierarchical diagonal sampling.
//!
//! The variable set is bisected recursively. Each node `I` is probed through
//! its one-dimensional diagonal projection `f_I(z) = f(x_I(z))`, where
//! coordinates in `I` are set to `z` and all others to a fixed background
//! vector. A pluggable [`TestingBlock`] accumulates a log-likelihood ratio per
//! node; crossing `theta1` marks the node active (split it, or emit it when
//! it is a singleton), crossing `theta0` prunes its whole subtree.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RunRng, RunSeed, Stream};

/// A noisy black-box function on `[-1, 1]^D`.
pub trait Oracle {
    fn dim(&self) -> usize;

    fn noise_var(&self) -> f64;

    /// Noise-free value; used only for scoring.
    fn eval_true(&self, x: &[f64]) -> f64;

    /// `f(x) + eps` with `eps ~ N(0, noise_var)`. Every call counts.
    fn eval_noisy(&mut self, x: &[f64]) -> f64;

    fn eval_count(&self) -> usize;
}

/// Coordinates used outside the tested node during projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundVector(Vec<f64>);

impl BackgroundVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid("background values must lie in [-1, 1]"));
        }
        Ok(BackgroundVector(values))
    }

    /// Uniform draw from `[-1, 1]^dim`.
    pub fn draw<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        BackgroundVector((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    pub fn for_seed(dim: usize, seed: RunSeed) -> Self {
        Self::draw(dim, &mut seed.stream(Stream::Background))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `x_I(z)`: coordinates in `dims` set to `z`, the rest from `background`.
pub fn project_point(dims: &[usize], z: f64, background: &BackgroundVector) -> Result<Vec<f64>> {
    if dims.is_empty() {
        return Err(Error::invalid("cannot project through an empty node"));
    }
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::invalid(format!(
            "projection coordinate {z} outside [-1, 1]"
        )));
    }
    let mut x = background.values().to_vec();
    for &i in dims {
        let slot = x
            .get_mut(i)
            .ok_or_else(|| Error::invalid(format!("dimension {i} out of range")))?;
        *slot = z;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Undetermined,
    Active,
    Inactive,
}

#[derive(Debug, Clone)]
pub struct Node<S> {
    pub dims: Vec<usize>,
    pub depth: usize,
    pub state: NodeState,
    pub llr: f64,
    pub samples_used: usize,
    pub tester: S,
}

/// Index-order halving: the first `ceil(n/2)` dimensions go left.
pub fn split_dims(dims: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if dims.len() < 2 {
        return Err(Error::invalid(
            "cannot split a node with fewer than two dimensions",
        ));
    }
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    let right = sorted.split_off(sorted.len().div_ceil(2));
    Ok((sorted, right))
}

/// A sequential test deciding whether a node contains an active variable.
pub trait TestingBlock {
    type State;

    /// Oracle evaluations consumed by one [`TestingBlock::step`].
    fn evals_per_step(&self) -> usize;

    /// Fresh per-node state.
    fn init(&self, dims: &[usize]) -> Result<Self::State>;

    /// Node-selection index; larger is sampled first.
    fn priority(&self, llr: f64, state: &Self::State) -> f64;

    /// Takes one sampling step and returns the LLR increment. Must return
    /// [`Error::BudgetExhausted`] without touching the oracle when
    /// `budget_left < evals_per_step()`.
    fn step(
        &self,
        dims: &[usize],
        state: &mut Self::State,
        oracle: &mut dyn Oracle,
        background: &BackgroundVector,
        budget_left: usize,
        rng: &mut RunRng,
    ) -> Result<f64>;
}

/// Which testing block HDS uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TesterKind {
    /// Sequential finite-difference likelihood-ratio test.
    FdtSequential,
    /// Non-sequential chi-squared test with `pairs` pairs at level `alpha`.
    FdtFixed { pairs: usize, alpha: f64 },
    /// GP sequential likelihood-ratio test.
    Gpt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdsConfig {
    pub budget: usize,
    pub theta1: f64,
    pub theta0: f64,
    pub tester: TesterKind,
    pub sigma_s2: f64,
    pub bandwidth: f64,
    pub noise_var: f64,
    /// Prior variance of an unknown constant level, marginalized by GPT.
    pub gpt_offset_var: f64,
}

impl Default for HdsConfig {
    fn default() -> Self {
        HdsConfig {
            budget: 2000,
            theta1: 10.0,
            theta0: -10.0,
            tester: TesterKind::FdtSequential,
            sigma_s2: 1.0,
            bandwidth: 0.1,
            noise_var: 0.1,
            gpt_offset_var: 1e4,
        }
    }
}

impl HdsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta0 < 0.0 && self.theta1 > 0.0) {
            return Err(Error::invalid(
                "thresholds must satisfy theta0 < 0 < theta1",
            ));
        }
        if !(self.sigma_s2 > 0.0 && self.bandwidth > 0.0 && self.noise_var > 0.0) {
            return Err(Error::invalid(
                "sigma_s2, bandwidth and noise_var must be positive",
            ));
        }
        if !(self.gpt_offset_var >= 0.0 && self.gpt_offset_var.is_finite()) {
            return Err(Error::invalid("gpt_offset_var must be finite and >= 0"));
        }
        if let TesterKind::FdtFixed { pairs, alpha } = self.tester {
            if pairs == 0 || !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid(
                    "fixed FDT needs pairs >= 1 and alpha in (0, 1)",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    TreeEmpty,
}

/// Summary of one node after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub dims: Vec<usize>,
    pub depth: usize,
    pub state: NodeState,
    pub llr: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdsOutcome {
    pub recovered: BTreeSet<usize>,
    pub nodes: Vec<NodeRecord>,
    pub terminated_by: Termination,
    pub samples: usize,
}

impl HdsOutcome {
    /// Nodes that received at least one step.
    pub fn tested_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.samples_used > 0).count()
    }
}

/// Step-by-step HDS driver.
pub struct HdsRun<T: TestingBlock> {
    tester: T,
    budget: usize,
    theta1: f64,
    theta0: f64,
    background: BackgroundVector,
    rng: RunRng,
    nodes: Vec<Node<T::State>>,
    live: Vec<usize>,
    recovered: BTreeSet<usize>,
    samples: usize,
    dim: usize,
}

impl<T: TestingBlock> HdsRun<T> {
    pub fn new(tester: T, cfg: &HdsConfig, dim: usize, seed: RunSeed) -> Result<Self> {
        cfg.validate()?;
        let background = BackgroundVector::for_seed(dim, seed);
        Self::with_background(tester, cfg, background, seed.stream(Stream::Tester))
    }

    pub fn with_background(
        tester: T,
        cfg: &HdsConfig,
        background: BackgroundVector,
        rng: RunRng,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = background.len();
        if dim == 0 {
            return Err(Error::invalid("HDS needs at least one dimension"));
        }
        let root_dims: Vec<usize> = (0..dim).collect();
        let root = Node {
            tester: tester.init(&root_dims)?,
            dims: root_dims,
            depth: 0,
            state: NodeState::Undetermined,
            llr: 0.0,
            samples_used: 0,
        };
        Ok(HdsRun {
            tester,
            budget: cfg.budget,
            theta1: cfg.theta1,
            theta0: cfg.theta0,
            background,
            rng,
            nodes: vec![root],
            live: vec![0],
            recovered: BTreeSet::new(),
            samples: 0,
            dim,
        })
    }

    pub fn background(&self) -> &BackgroundVector {
        &self.background
    }

    pub fn nodes(&self) -> &[Node<T::State>] {
        &self.nodes
    }

    /// Indices into [`HdsRun::nodes`] of undetermined nodes.
    pub fn live(&self) -> &[usize] {
        &self.live
    }

    pub fn recovered(&self) -> &BTreeSet<usize> {
        &self.recovered
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn select(&self) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &id) in self.live.iter().enumerate() {
            let node = &self.nodes[id];
            let mut p = self.tester.priority(node.llr, &node.tester);
            if p.is_nan() {
                p = f64::NEG_INFINITY;
            }
            best = match best {
                None => Some((pos, p)),
                Some((bpos, bp)) => {
                    let incumbent = &self.nodes[self.live[bpos]].dims;
                    let better = match p.partial_cmp(&bp) {
                        Some(Ordering::Greater) => true,
                        Some(Ordering::Equal) => node.dims < *incumbent,
                        _ => false,
                    };
                    if better {
                        Some((pos, p))
                    } else {
                        Some((bpos, bp))
                    }
                }
            };
        }
        best.map(|(pos, _)| pos)
            .expect("select called on empty tree")
    }

    /// Advances by one tester step. Returns the termination cause once the
    /// run cannot continue.
    pub fn step(&mut self, oracle: &mut dyn Oracle) -> Result<Option<Termination>> {
        if self.live.is_empty() {
            return Ok(Some(Termination::TreeEmpty));
        }
        let per_step = self.tester.evals_per_step();
        let left = self.budget.saturating_sub(self.samples);
        if left < per_step {
            return Ok(Some(Termination::Budget));
        }
        let pos = self.select();
        let id = self.live[pos];
        let before = oracle.eval_count();
        let delta = {
            let node = &mut self.nodes[id];
            self.tester.step(
                &node.dims,
                &mut node.tester,
                oracle,
                &self.background,
                left,
                &mut self.rng,
            )?
        };
        let used = oracle.eval_count() - before;
        self.samples += used;
        let node = &mut self.nodes[id];
        node.samples_used += used;
        node.llr += delta;

        if node.llr >= self.theta1 {
            node.state = NodeState::Active;
            self.live.swap_remove(pos);
            if node.dims.len() == 1 {
                self.recovered.insert(node.dims[0]);
            } else {
                let (left_dims, right_dims) = split_dims(&node.dims)?;
                let depth = node.depth + 1;
                for dims in [left_dims, right_dims] {
                    let child = Node {
                        tester: self.tester.init(&dims)?,
                        dims,
                        depth,
                        state: NodeState::Undetermined,
                        llr: 0.0,
                        samples_used: 0,
                    };
                    self.live.push(self.nodes.len());
                    self.nodes.push(child);
                }
            }
        } else if node.llr <= self.theta0 {
            node.state = NodeState::Inactive;
            self.live.swap_remove(pos);
        }
        Ok(None)
    }

    pub fn run(mut self, oracle: &mut dyn Oracle) -> Result<HdsOutcome> {
        let terminated_by = loop {
            if let Some(t) = self.step(oracle)? {
                break t;
            }
        };
        Ok(self.into_outcome(terminated_by))
    }

    pub fn into_outcome(self, terminated_by: Termination) -> HdsOutcome {
        HdsOutcome {
            recovered: self.recovered,
            nodes: self
                .nodes
                .into_iter()
                .map(|n| NodeRecord {
                    dims: n.dims,
                    depth: n.depth,
                    state: n.state,
                    llr: n.llr,
                    samples_used: n.samples_used,
                })
                .collect(),
            terminated_by,
            samples: self.samples,
        }
    }
}

/// Runs HDS with a caller-supplied testing block.
pub fn hds_run_with<T: TestingBlock>(
    oracle: &mut dyn Oracle,
    tester: T,
    cfg: &HdsConfig,
    seed: RunSeed,
) -> Result<HdsOutcome> {
    HdsRun::new(tester, cfg, oracle.dim(), seed)?.run(oracle)
}

/// Runs HDS with the testing block named in `cfg.tester`.
pub fn hds_run(oracle: &mut dyn Oracle, cfg: &HdsConfig, seed: RunSeed) -> Result<HdsOutcome> {
    use crate::fdt::{FdtFixedTester, FdtSequentialTester};
    use crate::gpt::GptTester;
    match cfg.tester {
        TesterKind::FdtSequential => {
            hds_run_with(oracle, FdtSequentialTester::from_config(cfg)?, cfg, seed)
        }
        TesterKind::FdtFixed { pairs, alpha } => {
            hds_run_with(oracle, FdtFixedTester::new(pairs, alpha, cfg)?, cfg, seed)
        }
        TesterKind::Gpt => hds_run_with(oracle, GptTester::from_config(cfg)?, cfg, seed),
    }
}

/// Testing block that knows the true active set.
///
/// Each step spends one oracle evaluation at a random diagonal point. After
/// `steps_to_decide` steps it returns `theta1` if the node intersects the
/// active set and `theta0` otherwise, flipped with probability `error_rate`.
#[derive(Debug, Clone)]
pub struct StubTester {
    pub active: BTreeSet<usize>,
    pub theta1: f64,
    pub theta0: f64,
    pub steps_to_decide: usize,
    pub error_rate: f64,
}

impl StubTester {
    pub fn exact(active: impl IntoIterator<Item = usize>, cfg: &HdsConfig) -> Self {
        StubTester {
            active: active.into_iter().collect(),
            theta1: cfg.theta1,
            theta0: cfg.theta0,
            steps_to_decide: 1,
            error_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StubState {
    pub steps: usize,
    pub erred: bool,
}

impl TestingBlock for StubTester {
    type State = StubState;

    fn evals_per_step(&self) -> usize {
        1
    }

    fn init(&self, _dims: &[usize]) -> Result<StubState> {
        Ok(StubState::default())
    }

    fn priority(&self, llr: f64, _state: &StubState) -> f64 {
        llr
    }

    fn step(
        &self,
        dims: &[usize],
        state: &mut StubState,
        oracle: &mut dyn Oracle,
        background: &BackgroundVector,
        budget_left: usize,
        rng: &mut RunRng,
    ) -> Result<f64> {
        if budget_left < 1 {
            return Err(Error::BudgetExhausted);
        }
        let z = rng.random_range(-1.0..=1.0);
        oracle.eval_noisy(&project_point(dims, z, background)?);
        state.steps += 1;
        if state.steps < self.steps_to_decide.max(1) {
            return Ok(0.0);
        }
        let truth = dims.iter().any(|d| self.active.contains(d));
        let erred = self.error_rate > 0.0 && rng.random_bool(self.error_rate);
        state.erred = erred;
        Ok(if truth != erred {
            self.theta1
        } else {
            self.theta0
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Oracle over a closure with deterministic noise.
    pub struct FnOracle<F: Fn(&[f64]) -> f64> {
        pub dim: usize,
        pub noise_var: f64,
        pub f: F,
        pub count: usize,
        pub rng: RunRng,
    }

    impl<F: Fn(&[f64]) -> f64> FnOracle<F> {
        pub fn new(dim: usize, noise_var: f64, f: F) -> Self {
            FnOracle {
                dim,
                noise_var,
                f,
                count: 0,
                rng: RunRng::seed_from_u64(99),
            }
        }
    }

    impl<F: Fn(&[f64]) -> f64> Oracle for FnOracle<F> {
        fn dim(&self) -> usize {
            self.dim
        }
        fn noise_var(&self) -> f64 {
            self.noise_var
        }
        fn eval_true(&self, x: &[f64]) -> f64 {
            (self.f)(x)
        }
        fn eval_noisy(&mut self, x: &[f64]) -> f64 {
            self.count += 1;
            let e: f64 = self.rng.sample(rand_distr::StandardNormal);
            (self.f)(x) + e * self.noise_var.sqrt()
        }
        fn eval_count(&self) -> usize {
            self.count
        }
    }

    struct ConstantTester(f64);

    impl TestingBlock for ConstantTester {
        type State = ();
        fn evals_per_step(&self) -> usize {
            1
        }
        fn init(&self, _: &[usize]) -> Result<()> {
            Ok(())
        }
        fn priority(&self, llr: f64, _: &()) -> f64 {
            llr
        }
        fn step(
            &self,
            dims: &[usize],
            _: &mut (),
            oracle: &mut dyn Oracle,
            bg: &BackgroundVector,
            _: usize,
            _: &mut RunRng,
        ) -> Result<f64> {
            oracle.eval_noisy(&project_point(dims, 0.0, bg)?);
            Ok(self.0)
        }
    }

    fn stub_cfg() -> HdsConfig {
        HdsConfig {
            budget: 1000,
            ..HdsConfig::default()
        }
    }

    #[test]
    fn project_examples() {
        let bg = BackgroundVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(
            project_point(&[0, 2], 0.5, &bg).unwrap(),
            vec![0.5, 0.2, 0.5, 0.4]
        );
        assert_eq!(
            project_point(&[0, 1, 2, 3], -0.3, &bg).unwrap(),
            vec![-0.3; 4]
        );
        assert!(project_point(&[], 0.5, &bg).is_err());
        assert!(project_point(&[0], 1.5, &bg).is_err());
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_dims(&[1, 2, 3]).unwrap(), (vec![1, 2], vec![3]));
        assert_eq!(
            split_dims(&[4, 7, 9, 12]).unwrap(),
            (vec![4, 7], vec![9, 12])
        );
        assert!(split_dims(&[5]).is_err());
    }

    #[test]
    fn stub_trace_on_four_dims() {
        // Active dimension "2" in one-based numbering.
        let cfg = stub_cfg();
        let mut oracle = FnOracle::new(4, 0.1, |x: &[f64]| x[1]);
        let out =
            hds_run_with(&mut oracle, StubTester::exact([1], &cfg), &cfg, RunSeed(0)).unwrap();
        assert_eq!(out.recovered, BTreeSet::from([1]));
        let tested: Vec<Vec<usize>> = out
            .nodes
            .iter()
            .filter(|n| n.samples_used > 0)
            .map(|n| n.dims.clone())
            .collect();
        assert_eq!(
            tested,
            vec![vec![0, 1, 2, 3], vec![0, 1], vec![2, 3], vec![0], vec![1]]
        );
        assert_eq!(out.terminated_by, Termination::TreeEmpty);
        assert_eq!(out.samples, oracle.eval_count());
    }

    #[test]
    fn zero_budget_returns_nothing() {
        let cfg = HdsConfig {
            budget: 0,
            ..HdsConfig::default()
        };
        let mut oracle = FnOracle::new(4, 0.1, |x: &[f64]| x[1]);
        let out =
            hds_run_with(&mut oracle, StubTester::exact([1], &cfg), &cfg, RunSeed(0)).unwrap();
        assert!(out.recovered.is_empty());
        assert_eq!(out.terminated_by, Termination::Budget);
        assert_eq!(oracle.eval_count(), 0);
    }

    #[test]
    fn empty_active_set_prunes_root() {
        let cfg = stub_cfg();
        let mut oracle = FnOracle::new(8, 0.1, |_: &[f64]| 0.0);
        let out = hds_run_with(&mut oracle, StubTester::exact([], &cfg), &cfg, RunSeed(1)).unwrap();
        assert!(out.recovered.is_empty());
        assert_eq!(out.tested_nodes(), 1);
    }

    #[test]
    fn constant_testers() {
        let cfg = stub_cfg();
        let mut oracle = FnOracle::new(5, 0.1, |_: &[f64]| 0.0);
        let out = hds_run_with(&mut oracle, ConstantTester(cfg.theta1), &cfg, RunSeed(1)).unwrap();
        assert_eq!(out.recovered, (0..5).collect());
        assert!(out
            .nodes
            .iter()
            .all(|n| n.state == NodeState::Active && n.samples_used == 1));

        let mut oracle = FnOracle::new(5, 0.1, |_: &[f64]| 0.0);
        let out = hds_run_with(&mut oracle, ConstantTester(cfg.theta0), &cfg, RunSeed(1)).unwrap();
        assert!(out.recovered.is_empty());
        assert_eq!(out.nodes.len(), 1);
    }

    #[test]
    fn budget_stops_before_partial_step() {
        let cfg = HdsConfig {
            budget: 3,
            ..HdsConfig::default()
        };
        let mut oracle = FnOracle::new(16, 0.1, |x: &[f64]| x[3]);
        let out =
            hds_run_with(&mut oracle, StubTester::exact([3], &cfg), &cfg, RunSeed(2)).unwrap();
        assert_eq!(out.terminated_by, Termination::Budget);
        assert_eq!(out.samples, 3);
        assert!(out.recovered.is_empty());
    }

    fn check_partition(run: &HdsRun<StubTester>) {
        let dim = run.dim();
        let mut seen = vec![0usize; dim];
        for &id in run.live() {
            for &d in &run.nodes()[id].dims {
                seen[d] += 1;
            }
        }
        for n in run.nodes() {
            if n.state == NodeState::Inactive {
                for &d in &n.dims {
                    seen[d] += 1;
                }
            }
        }
        for &d in run.recovered() {
            seen[d] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1), "partition broken: {seen:?}");
    }

    #[test]
    fn tree_invariants_under_noisy_stub() {
        for seed in 0..30u64 {
            let dim = 5 + (seed as usize * 7) % 60;
            let cfg = stub_cfg();
            let mut rng = RunRng::seed_from_u64(seed);
            let active: BTreeSet<usize> = (0..3).map(|_| rng.random_range(0..dim)).collect();
            let tester = StubTester {
                active: active.clone(),
                theta1: cfg.theta1,
                theta0: cfg.theta0,
                steps_to_decide: 2,
                error_rate: 0.1,
            };
            let mut oracle = FnOracle::new(dim, 0.1, |_: &[f64]| 0.0);
            let mut run = HdsRun::new(tester, &cfg, dim, RunSeed(seed)).unwrap();
            let mut emitted = BTreeSet::new();
            let max_depth = (dim as f64).log2().ceil() as usize;
            loop {
                check_partition(&run);
                assert!(emitted.is_subset(run.recovered()));
                emitted = run.recovered().clone();
                assert!(run.nodes().iter().all(|n| n.depth <= max_depth));
                if run.step(&mut oracle).unwrap().is_some() {
                    break;
                }
            }
            let used: usize = run.nodes().iter().map(|n| n.samples_used).sum();
            assert_eq!(used, oracle.eval_count());
            for n in run.nodes() {
                if n.dims.len() == 1 && n.state == NodeState::Active {
                    assert!(run.recovered().contains(&n.dims[0]));
                }
            }
        }
    }

    #[test]
    fn exact_stub_recovers_and_respects_node_count() {
        for seed in 0..40u64 {
            let mut rng = RunRng::seed_from_u64(seed);
            let dim = rng.random_range(2..300usize);
            let d = rng.random_range(0..4usize).min(dim);
            let mut active = BTreeSet::new();
            while active.len() < d {
                active.insert(rng.random_range(0..dim));
            }
            let cfg = HdsConfig {
                budget: 100_000,
                ..HdsConfig::default()
            };
            let mut oracle = FnOracle::new(dim, 0.1, |_: &[f64]| 0.0);
            let out = hds_run_with(
                &mut oracle,
                StubTester::exact(active.clone(), &cfg),
                &cfg,
                RunSeed(seed),
            )
            .unwrap();
            assert_eq!(out.recovered, active);
            let depth = (dim as f64).log2().ceil() as usize;
            assert!(out.tested_nodes() <= 2 * d * depth + 1);
        }
    }
}
