use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential kernel restricted to a set of active coordinates.
///
/// `K(x, x') = sigma_s2 * exp(-sum_{i in active} (x_i - x'_i)^2 / b^2)`.
/// Coordinates outside `active_dims` never enter the sum, so an empty active
/// set yields the constant kernel `sigma_s2`.
///
/// `offset_var` adds a constant to every entry, which marginalizes an
/// unknown constant mean with that prior variance. It is 0 unless set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub sigma_s2: f64,
    pub bandwidth: f64,
    pub active_dims: Vec<usize>,
    #[serde(default)]
    pub offset_var: f64,
}

impl KernelSpec {
    pub fn new(sigma_s2: f64, bandwidth: f64, active_dims: Vec<usize>) -> Result<Self> {
        let spec = KernelSpec {
            sigma_s2,
            bandwidth,
            active_dims,
            offset_var: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Kernel over the first `n` coordinates.
    pub fn dense(sigma_s2: f64, bandwidth: f64, n: usize) -> Result<Self> {
        Self::new(sigma_s2, bandwidth, (0..n).collect())
    }

    /// One-dimensional kernel of a diagonal projection through a node that
    /// holds `active_count` active variables: `sigma_s2 * exp(-a (z - z')^2 / b^2)`.
    pub fn projected(sigma_s2: f64, bandwidth: f64, active_count: usize) -> Result<Self> {
        if active_count == 0 {
            return Self::new(sigma_s2, bandwidth, Vec::new());
        }
        Self::new(sigma_s2, bandwidth / (active_count as f64).sqrt(), vec![0])
    }

    pub fn with_offset_var(mut self, offset_var: f64) -> Result<Self> {
        self.offset_var = offset_var;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s2 > 0.0 && self.sigma_s2.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_s2 must be > 0, got {}",
                self.sigma_s2
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth must be > 0, got {}",
                self.bandwidth
            )));
        }
        if !(self.offset_var >= 0.0 && self.offset_var.is_finite()) {
            return Err(Error::invalid("offset_var must be finite and >= 0"));
        }
        let mut sorted = self.active_dims.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("active_dims contains duplicates"));
        }
        Ok(())
    }

    /// Smallest input length this kernel can be evaluated on.
    pub fn min_input_len(&self) -> usize {
        self.active_dims.iter().max().map_or(0, |&m| m + 1)
    }

    /// Unchecked evaluation for hot loops; callers guarantee input lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        let inv_b2 = 1.0 / (self.bandwidth * self.bandwidth);
        let dist2: f64 = self
            .active_dims
            .iter()
            .map(|&i| {
                let d = x[i] - x_prime[i];
                d * d
            })
            .sum();
        self.sigma_s2 * (-dist2 * inv_b2).exp() + self.offset_var
    }
}

/// Checked kernel evaluation.
pub fn se_kernel(x: &[f64], x_prime: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x_prime.len()
        )));
    }
    if x.len() < spec.min_input_len() {
        return Err(Error::invalid(format!(
            "input of length {} does not cover active dimension {}",
            x.len(),
            spec.min_input_len() - 1
        )));
    }
    Ok(spec.eval(x, x_prime))
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += v;
        }
    }
}

/// `K + noise_var * I` over `points`.
pub fn gram_matrix(points: &[Vec<f64>], spec: &KernelSpec, noise_var: f64) -> Result<Matrix> {
    if points.is_empty() {
        return Err(Error::invalid("gram_matrix needs at least one point"));
    }
    let len = points[0].len();
    if points.iter().any(|p| p.len() != len) || len < spec.min_input_len() {
        return Err(Error::invalid(
            "points have inconsistent or too short coordinates",
        ));
    }
    let n = points.len();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let k = spec.eval(&points[i], &points[j]);
            m.set(i, j, k);
            m.set(j, i, k);
        }
    }
    m.add_diagonal(noise_var);
    Ok(m)
}

/// Jitter schedule: none, then `1e-10 * scale` doubling while `<= 1e-4 * scale`.
pub(crate) fn jitter_schedule(scale: f64) -> impl Iterator<Item = f64> {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let first = 1e-10 * scale;
    let cap = 1e-4 * scale;
    std::iter::once(0.0)
        .chain(std::iter::successors(Some(first), |j| Some(j * 2.0)).take_while(move |&j| j <= cap))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// possibly of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Factorizes `a`, escalating diagonal jitter relative to `scale` on failure.
    pub fn factor_with_jitter(a: &Matrix, scale: f64) -> Result<Self> {
        for jitter in jitter_schedule(scale) {
            if let Some(c) = Self::try_factor(a, jitter) {
                return Ok(c);
            }
        }
        Err(Error::numerical(format!(
            "matrix of size {} is not positive definite even with jitter {:e}",
            a.size(),
            1e-4 * scale
        )))
    }

    /// Single factorization attempt of `a + jitter * I`.
    pub(crate) fn try_factor(a: &Matrix, jitter: f64) -> Option<Self> {
        let n = a.size();
        let mut l = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                if i == j {
                    s += jitter;
                }
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l.set(i, i, s.sqrt());
                } else {
                    l.set(i, j, s / l.get(j, j));
                }
            }
        }
        Some(Cholesky { l, jitter })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.size();
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for (k, xk) in x[..i].iter().enumerate() {
                s -= self.l.get(i, k) * xk;
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }
}
