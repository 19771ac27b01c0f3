//! Benchmark landscapes embedded in `[-1, 1]^D`, their noisy oracles, the
//! coordinate-wise sampling baseline and ground-truth maxima.
//!
//! Cost functions (quad, quadmix, branin, beale) are turned into rewards by
//! the oracle so every landscape is maximized: negated by default, or mapped
//! affinely onto `[-1, 1]` with 1 at the optimum. Selection statistics are
//! sign-invariant but not scale-invariant.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{sample_gp_lattice_with, KernelSpec, LatticeFunction, MAX_LATTICE_POINTS};
use crate::hds::{BackgroundVector, Oracle};
use crate::rng::{RunRng, RunSeed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Gp,
    Quad,
    Quadmix,
    Branin,
    Beale,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 5] = [
        BenchmarkKind::Gp,
        BenchmarkKind::Quad,
        BenchmarkKind::Quadmix,
        BenchmarkKind::Branin,
        BenchmarkKind::Beale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Gp => "gp",
            BenchmarkKind::Quad => "quad",
            BenchmarkKind::Quadmix => "quadmix",
            BenchmarkKind::Branin => "branin",
            BenchmarkKind::Beale => "beale",
        }
    }

    /// Fixed intrinsic dimension, if any.
    pub fn required_d(self) -> Option<usize> {
        match self {
            BenchmarkKind::Branin | BenchmarkKind::Beale => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("name", format!("unknown benchmark `{s}`")))
    }
}

/// Fully resolved benchmark description.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub dim: usize,
    pub active_dims: Vec<usize>,
    pub noise_var: f64,
    /// Kernel of the GP landscape; its bandwidth also scales quad/quadmix.
    pub kernel: KernelSpec,
    pub lattice_resolution: usize,
    /// Map cost functions affinely onto `[-1, 1]` (1 at the optimum).
    pub normalize: bool,
}

/// Largest resolution `<= 101` whose `d`-dimensional lattice fits the cap.
pub fn default_lattice_resolution(d: usize) -> usize {
    let mut r = 101usize;
    while r > 2
        && r.checked_pow(d as u32)
            .is_none_or(|n| n > MAX_LATTICE_POINTS)
    {
        r -= 1;
    }
    r
}

impl BenchmarkSpec {
    pub fn new(
        kind: BenchmarkKind,
        dim: usize,
        active_dims: Vec<usize>,
        noise_var: f64,
        sigma_s2: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        let d = active_dims.len();
        let spec = BenchmarkSpec {
            kind,
            dim,
            kernel: KernelSpec::new(sigma_s2, bandwidth, active_dims.clone())?,
            active_dims,
            noise_var,
            lattice_resolution: default_lattice_resolution(d),
            normalize: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Picks `d` active dimensions uniformly at random.
    pub fn random_active(
        kind: BenchmarkKind,
        dim: usize,
        d: usize,
        noise_var: f64,
        sigma_s2: f64,
        bandwidth: f64,
        seed: RunSeed,
    ) -> Result<Self> {
        if d > dim {
            return Err(Error::invalid(format!("d = {d} exceeds D = {dim}")));
        }
        let mut rng = seed.stream(Stream::Function);
        let mut dims = index::sample(&mut rng, dim, d).into_vec();
        dims.sort_unstable();
        Self::new(kind, dim, dims, noise_var, sigma_s2, bandwidth)
    }

    pub fn d(&self) -> usize {
        self.active_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("D must be >= 1"));
        }
        let set: BTreeSet<usize> = self.active_dims.iter().copied().collect();
        if set.len() != self.active_dims.len() || set.iter().any(|&i| i >= self.dim) {
            return Err(Error::invalid(
                "active_dims must be distinct indices below D",
            ));
        }
        if let Some(req) = self.kind.required_d() {
            if self.d() != req {
                return Err(Error::invalid(format!("{} requires d = {req}", self.kind)));
            }
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::invalid("noise_var must be >= 0"));
        }
        self.kernel.validate()
    }
}

/// `||P (x - x*)||^2` with `P_ii = 1/b` on active dims and `1/100` elsewhere.
pub fn quad_eval(x: &[f64], x_star: &[f64], active: &[usize], bandwidth: f64) -> f64 {
    scaled_offsets(x, x_star, active, bandwidth)
        .map(|p| p * p)
        .sum()
}

fn scaled_offsets<'a>(
    x: &'a [f64],
    x_star: &'a [f64],
    active: &'a [usize],
    bandwidth: f64,
) -> impl Iterator<Item = f64> + 'a {
    x.iter().zip(x_star).enumerate().map(move |(i, (a, b))| {
        let w = if active.contains(&i) {
            1.0 / bandwidth
        } else {
            0.01
        };
        w * (a - b)
    })
}

/// `||M P (x - x*)||^2` with `M = (1 - r) I + r J`.
pub fn quadmix_eval(
    x: &[f64],
    x_star: &[f64],
    active: &[usize],
    bandwidth: f64,
    r_mix: f64,
) -> f64 {
    let p: Vec<f64> = scaled_offsets(x, x_star, active, bandwidth).collect();
    let total: f64 = p.iter().sum();
    p.iter()
        .map(|&pk| {
            let v = (1.0 - r_mix) * pk + r_mix * total;
            v * v
        })
        .sum()
}

/// Standard Branin at `x1 = 2.5 + 7.5 u1`, `x2 = 7.5 + 7.5 u2`.
pub fn branin_eval(u: [f64; 2]) -> f64 {
    let x1 = 2.5 + 7.5 * u[0];
    let x2 = 7.5 + 7.5 * u[1];
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let q = x2 - b * x1 * x1 + c * x1 - 6.0;
    q * q + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Standard Branin minimizers, mapped into `[-1, 1]^2`.
pub fn branin_minimizers() -> [[f64; 2]; 3] {
    [(-PI, 12.275), (PI, 2.275), (9.42478, 2.475)]
        .map(|(x1, x2)| [(x1 - 2.5) / 7.5, (x2 - 7.5) / 7.5])
}

/// Standard Beale at `x = 4.5 u`.
pub fn beale_eval(u: [f64; 2]) -> f64 {
    let x = 4.5 * u[0];
    let y = 4.5 * u[1];
    let a = 1.5 - x + x * y;
    let b = 2.25 - x + x * y * y;
    let c = 2.625 - x + x * y * y * y;
    a * a + b * b + c * c
}

#[derive(Debug, Clone)]
enum Landscape {
    Gp(LatticeFunction),
    Quad { x_star: Vec<f64> },
    QuadMix { x_star: Vec<f64>, r_mix: f64 },
    Branin,
    Beale,
}

/// Largest value of a two-dimensional cost on a 201 x 201 grid of `[-1, 1]^2`.
fn grid_max(f: fn([f64; 2]) -> f64) -> f64 {
    let n = 201;
    let u = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    (0..n * n)
        .map(|k| f([u(k / n), u(k % n)]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(min, max)` of a cost over the box spanned by the active coordinates,
/// with inactive coordinates at their optimum. Quadratic costs are convex so
/// their maximum sits on a vertex.
fn cost_range(landscape: &Landscape, spec: &BenchmarkSpec) -> (f64, f64) {
    let b = spec.kernel.bandwidth;
    let vertex_max = |cost: &dyn Fn(&[f64]) -> f64, x_star: &[f64]| {
        let d = spec.active_dims.len();
        (0..1usize << d)
            .map(|mask| {
                let mut x = x_star.to_vec();
                for (j, &i) in spec.active_dims.iter().enumerate() {
                    x[i] = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                }
                cost(&x)
            })
            .fold(0.0, f64::max)
    };
    match landscape {
        Landscape::Gp(_) => (-1.0, 1.0),
        Landscape::Quad { x_star } => (
            0.0,
            vertex_max(&|x| quad_eval(x, x_star, &spec.active_dims, b), x_star),
        ),
        Landscape::QuadMix { x_star, r_mix } => (
            0.0,
            vertex_max(
                &|x| quadmix_eval(x, x_star, &spec.active_dims, b, *r_mix),
                x_star,
            ),
        ),
        Landscape::Branin => (branin_eval(branin_minimizers()[0]), grid_max(branin_eval)),
        Landscape::Beale => (0.0, grid_max(beale_eval)),
    }
}

/// Noisy oracle over a benchmark landscape.
#[derive(Debug, Clone)]
pub struct BenchmarkOracle {
    spec: BenchmarkSpec,
    landscape: Landscape,
    range: (f64, f64),
    noise: RunRng,
    count: usize,
}

/// Builds the oracle for `spec`. The landscape is drawn from the run's
/// function stream and observation noise from its noise stream.
pub fn make_oracle(spec: &BenchmarkSpec, seed: RunSeed) -> Result<BenchmarkOracle> {
    spec.validate()?;
    // Skip past the draws used to pick active dimensions so the landscape
    // does not reuse them.
    let mut rng = seed.substream(Stream::Function as u64 + 100);
    let landscape = match spec.kind {
        BenchmarkKind::Gp => {
            let kernel = KernelSpec::dense(spec.kernel.sigma_s2, spec.kernel.bandwidth, spec.d())?;
            Landscape::Gp(sample_gp_lattice_with(
                &kernel,
                spec.d(),
                spec.lattice_resolution,
                &mut rng,
            )?)
        }
        BenchmarkKind::Quad => Landscape::Quad {
            x_star: (0..spec.dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect(),
        },
        BenchmarkKind::Quadmix => Landscape::QuadMix {
            x_star: (0..spec.dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect(),
            r_mix: 1.0 / spec.dim as f64,
        },
        BenchmarkKind::Branin => Landscape::Branin,
        BenchmarkKind::Beale => Landscape::Beale,
    };
    Ok(BenchmarkOracle {
        range: cost_range(&landscape, spec),
        spec: spec.clone(),
        landscape,
        noise: seed.stream(Stream::Noise),
        count: 0,
    })
}

impl BenchmarkOracle {
    pub fn spec(&self) -> &BenchmarkSpec {
        &self.spec
    }

    /// Turns a cost into the maximized value.
    fn reward(&self, cost: f64) -> f64 {
        if self.spec.normalize {
            let (lo, hi) = self.range;
            1.0 - 2.0 * (cost - lo) / (hi - lo)
        } else {
            -cost
        }
    }

    fn pair(&self, x: &[f64]) -> [f64; 2] {
        [x[self.spec.active_dims[0]], x[self.spec.active_dims[1]]]
    }

    /// Global maximum of [`Oracle::eval_true`] and a maximizer. Coordinates
    /// the landscape ignores are set to 0.
    pub fn true_max(&self) -> (Vec<f64>, f64) {
        let mut loc = vec![0.0; self.spec.dim];
        let put = |loc: &mut Vec<f64>, vals: &[f64]| {
            for (&i, &v) in self.spec.active_dims.iter().zip(vals) {
                loc[i] = v;
            }
        };
        match &self.landscape {
            Landscape::Gp(lattice) => {
                let (l, v) = lattice.max();
                put(&mut loc, &l);
                (loc, v)
            }
            Landscape::Quad { x_star } | Landscape::QuadMix { x_star, .. } => {
                (x_star.clone(), self.reward(0.0))
            }
            Landscape::Branin => {
                let u = branin_minimizers()[0];
                put(&mut loc, &u);
                (loc, self.reward(branin_eval(u)))
            }
            Landscape::Beale => {
                let u = [3.0 / 4.5, 0.5 / 4.5];
                put(&mut loc, &u);
                (loc, self.reward(beale_eval(u)))
            }
        }
    }
}

impl Oracle for BenchmarkOracle {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn noise_var(&self) -> f64 {
        self.spec.noise_var
    }

    fn eval_true(&self, x: &[f64]) -> f64 {
        let spec = &self.spec;
        match &self.landscape {
            Landscape::Gp(lattice) => {
                let sub: Vec<f64> = spec.active_dims.iter().map(|&i| x[i]).collect();
                lattice.eval(&sub)
            }
            Landscape::Quad { x_star } => self.reward(quad_eval(
                x,
                x_star,
                &spec.active_dims,
                spec.kernel.bandwidth,
            )),
            Landscape::QuadMix { x_star, r_mix } => self.reward(quadmix_eval(
                x,
                x_star,
                &spec.active_dims,
                spec.kernel.bandwidth,
                *r_mix,
            )),
            Landscape::Branin => self.reward(branin_eval(self.pair(x))),
            Landscape::Beale => self.reward(beale_eval(self.pair(x))),
        }
    }

    fn eval_noisy(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        let e: f64 = self.noise.sample(StandardNormal);
        self.eval_true(x) + e * self.spec.noise_var.sqrt()
    }

    fn eval_count(&self) -> usize {
        self.count
    }
}

/// Coordinate-wise sampling: `n_per_dim` finite differences at offset
/// `delta` along every axis, keeping the `d_out` axes with the largest mean
/// squared difference (ties go to the smaller index).
pub fn cws_run(
    oracle: &mut dyn Oracle,
    d_out: usize,
    n_per_dim: usize,
    delta: f64,
    background: &BackgroundVector,
    rng: &mut RunRng,
) -> Result<Vec<usize>> {
    if n_per_dim < 1 {
        return Err(Error::invalid("CWS needs at least one pair per dimension"));
    }
    let hi = 1.0 - delta;
    if !(delta > 0.0 && hi > -1.0) {
        return Err(Error::invalid(format!(
            "CWS offset {delta} must be in (0, 2)"
        )));
    }
    let dim = oracle.dim();
    let mut scores = Vec::with_capacity(dim);
    let mut x = background.values().to_vec();
    for i in 0..dim {
        let mut acc = 0.0;
        for _ in 0..n_per_dim {
            let z = rng.random_range(-1.0..=hi);
            x[i] = z;
            let a = oracle.eval_noisy(&x);
            x[i] = z + delta;
            let b = oracle.eval_noisy(&x);
            acc += (a - b) * (a - b);
        }
        x[i] = background.values()[i];
        scores.push((i, acc / n_per_dim as f64));
    }
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = scores.into_iter().take(d_out).map(|(i, _)| i).collect();
    picked.sort_unstable();
    Ok(picked)
}
