use crate::error::{Error, Result};
use crate::par::{self, Execution};

use super::kernel::{gram_matrix, jitter_schedule, Cholesky, KernelSpec};

/// Observed data for a GP regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub noise_var: f64,
}

impl Dataset {
    pub fn new(noise_var: f64) -> Self {
        Dataset {
            points: Vec::new(),
            responses: Vec::new(),
            noise_var,
        }
    }

    pub fn push(&mut self, point: Vec<f64>, response: f64) {
        self.points.push(point);
        self.responses.push(response);
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.responses.len() {
            return Err(Error::invalid("points and responses differ in length"));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::invalid("noise_var must be > 0"));
        }
        Ok(())
    }
}

/// Predictive moments of a noisy observation `y` at a query point.
///
/// `variance` includes the observation noise: `sigma^2 + K(x,x) - k^T (K + sigma^2 I)^-1 k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorMoments {
    /// Variance of the latent function value, with the noise removed.
    pub fn latent_variance(&self, noise_var: f64) -> f64 {
        (self.variance - noise_var).max(0.0)
    }
}

/// From-scratch posterior predictive moments at `x_query`.
pub fn posterior_moments(
    data: &Dataset,
    spec: &KernelSpec,
    x_query: &[f64],
) -> Result<PosteriorMoments> {
    data.validate()?;
    spec.validate()?;
    if x_query.len() < spec.min_input_len() {
        return Err(Error::invalid(
            "query point does not cover the active dimensions",
        ));
    }
    let prior = spec.eval(x_query, x_query);
    if data.points.is_empty() {
        return Ok(PosteriorMoments {
            mean: 0.0,
            variance: data.noise_var + prior,
        });
    }
    let gram = gram_matrix(&data.points, spec, data.noise_var)?;
    let chol = Cholesky::factor_with_jitter(&gram, spec.sigma_s2 + spec.offset_var)?;
    let k: Vec<f64> = data.points.iter().map(|p| spec.eval(x_query, p)).collect();
    let w = chol.solve_lower(&k);
    let v = chol.solve_lower(&data.responses);
    let mean = dot(&w, &v);
    let reduction = dot(&w, &w);
    Ok(PosteriorMoments {
        mean,
        variance: data.noise_var + (prior - reduction).max(0.0),
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Incrementally extended GP posterior.
///
/// Holds the Cholesky factor of `K + sigma^2 I` row by row; appending an
/// observation costs one triangular solve. When an appended pivot is not
/// positive the whole factor is rebuilt with escalated jitter and
/// `generation` is bumped so dependent caches know to rebuild.
#[derive(Debug, Clone)]
pub struct Posterior {
    spec: KernelSpec,
    noise_var: f64,
    points: Vec<Vec<f64>>,
    responses: Vec<f64>,
    rows: Vec<Vec<f64>>,
    // L^-1 y
    whitened: Vec<f64>,
    jitter: f64,
    generation: u64,
}

impl Posterior {
    pub fn new(spec: KernelSpec, noise_var: f64) -> Result<Self> {
        spec.validate()?;
        if !(noise_var >= 0.0) {
            return Err(Error::invalid("noise_var must be >= 0"));
        }
        Ok(Posterior {
            spec,
            noise_var,
            points: Vec::new(),
            responses: Vec::new(),
            rows: Vec::new(),
            whitened: Vec::new(),
            jitter: 0.0,
            generation: 0,
        })
    }

    pub fn from_dataset(data: &Dataset, spec: KernelSpec) -> Result<Self> {
        data.validate()?;
        let mut post = Posterior::new(spec, data.noise_var)?;
        for (p, &y) in data.points.iter().zip(&data.responses) {
            post.extend(p.clone(), y)?;
        }
        Ok(post)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Row `i` of the lower factor, diagonal included.
    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn whitened_responses(&self) -> &[f64] {
        &self.whitened
    }

    /// Appends one observation.
    pub fn extend(&mut self, point: Vec<f64>, response: f64) -> Result<()> {
        if point.len() < self.spec.min_input_len() {
            return Err(Error::invalid("point does not cover the active dimensions"));
        }
        if !response.is_finite() {
            return Err(Error::numerical("non-finite response"));
        }
        let k: Vec<f64> = self
            .points
            .iter()
            .map(|p| self.spec.eval(&point, p))
            .collect();
        let mut row = self.forward_solve(&k);
        let pivot = self.spec.eval(&point, &point) + self.noise_var + self.jitter - dot(&row, &row);
        self.points.push(point);
        self.responses.push(response);
        if pivot > 0.0 && pivot.is_finite() {
            let diag = pivot.sqrt();
            let w = (response - dot(&row, &self.whitened)) / diag;
            row.push(diag);
            self.rows.push(row);
            self.whitened.push(w);
            Ok(())
        } else {
            self.refactor().inspect_err(|_| {
                self.points.pop();
                self.responses.pop();
            })
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let gram = gram_matrix(&self.points, &self.spec, self.noise_var)?;
        let scale = self.spec.sigma_s2 + self.spec.offset_var;
        for jitter in jitter_schedule(scale).filter(|&j| j > self.jitter) {
            if let Some(chol) = Cholesky::try_factor(&gram, jitter) {
                let n = self.points.len();
                let l = chol.factor();
                self.rows = (0..n)
                    .map(|i| (0..=i).map(|j| l.get(i, j)).collect())
                    .collect();
                self.whitened = chol.solve_lower(&self.responses);
                self.jitter = jitter;
                self.generation += 1;
                return Ok(());
            }
        }
        Err(Error::numerical(format!(
            "posterior with {} points is not positive definite after jitter escalation",
            self.points.len()
        )))
    }

    /// Solves `L w = k` against the current factor.
    pub fn forward_solve(&self, k: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(k.len() + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let s = k[i] - dot(&row[..i], &w);
            w.push(s / row[i]);
        }
        w
    }

    pub fn moments(&self, x: &[f64]) -> PosteriorMoments {
        let prior = self.spec.eval(x, x);
        if self.points.is_empty() {
            return PosteriorMoments {
                mean: 0.0,
                variance: self.noise_var + prior,
            };
        }
        let k: Vec<f64> = self.points.iter().map(|p| self.spec.eval(x, p)).collect();
        let w = self.forward_solve(&k);
        PosteriorMoments {
            mean: dot(&w, &self.whitened),
            variance: self.noise_var + (prior - dot(&w, &w)).max(0.0),
        }
    }
}

#[derive(Debug, Clone)]
struct CachedQuery {
    point: Vec<f64>,
    prior: f64,
    // L^-1 k(x), one component per conditioned observation
    w: Vec<f64>,
    mean: f64,
    reduction: f64,
}

/// Predictive moments at a fixed set of query points, kept in step with a
/// [`Posterior`] at O(t) cost per query and appended observation.
#[derive(Debug, Clone)]
pub struct PredictionCache {
    queries: Vec<CachedQuery>,
    synced: usize,
    generation: u64,
    exec: Execution,
}

impl PredictionCache {
    pub fn new(points: Vec<Vec<f64>>, spec: &KernelSpec, exec: Execution) -> Self {
        let queries = points
            .into_iter()
            .map(|p| CachedQuery {
                prior: spec.eval(&p, &p),
                point: p,
                w: Vec::new(),
                mean: 0.0,
                reduction: 0.0,
            })
            .collect();
        PredictionCache {
            queries,
            synced: 0,
            generation: 0,
            exec,
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.queries[i].point
    }

    pub fn moments(&self, i: usize, noise_var: f64) -> PosteriorMoments {
        let q = &self.queries[i];
        PosteriorMoments {
            mean: q.mean,
            variance: noise_var + (q.prior - q.reduction).max(0.0),
        }
    }

    /// Brings every cached query up to date with `post`.
    pub fn sync(&mut self, post: &Posterior) {
        if post.generation() != self.generation || post.len() < self.synced {
            for q in &mut self.queries {
                q.w.clear();
                q.mean = 0.0;
                q.reduction = 0.0;
            }
            self.synced = 0;
            self.generation = post.generation();
        }
        let start = self.synced;
        let end = post.len();
        if start == end {
            return;
        }
        let spec = post.spec();
        par::for_each_mut(&mut self.queries, self.exec, |q| {
            for t in start..end {
                let row = post.factor_row(t);
                let k = spec.eval(&q.point, &post.points()[t]);
                let wt = (k - dot(&row[..t], &q.w)) / row[t];
                q.w.push(wt);
                q.mean += wt * post.whitened_responses()[t];
                q.reduction += wt * wt;
            }
        });
        self.synced = end;
    }
}
