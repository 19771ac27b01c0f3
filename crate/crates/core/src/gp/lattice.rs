use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::kernel::{gram_matrix, Cholesky, KernelSpec};

/// Largest lattice (total point count) a GP sample may be drawn on.
pub const MAX_LATTICE_POINTS: usize = 20_000;

/// A function on `[-1, 1]^dims` stored on a regular lattice and evaluated by
/// multilinear interpolation.
///
/// Values are laid out with the first coordinate varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    dims: usize,
    resolution: usize,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn from_values(dims: usize, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid("lattice resolution must be >= 2"));
        }
        let expected = checked_len(dims, resolution)
            .ok_or_else(|| Error::invalid("lattice size overflows"))?;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} lattice values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("lattice contains non-finite values"));
        }
        Ok(LatticeFunction {
            dims,
            resolution,
            values,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / (self.resolution - 1) as f64
    }

    /// Lattice location of flat index `idx`.
    pub fn location(&self, mut idx: usize) -> Vec<f64> {
        let mut loc = vec![0.0; self.dims];
        for k in (0..self.dims).rev() {
            loc[k] = self.coordinate(idx % self.resolution);
            idx /= self.resolution;
        }
        loc
    }

    /// Multilinear interpolation; coordinates are clamped into `[-1, 1]`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dims);
        let r = self.resolution;
        let mut base = 0usize;
        let mut fracs = Vec::with_capacity(self.dims);
        let mut strides = Vec::with_capacity(self.dims);
        let mut stride = 1usize;
        for k in (0..self.dims).rev() {
            let t = (x[k].clamp(-1.0, 1.0) + 1.0) * 0.5 * (r - 1) as f64;
            let i0 = (t.floor() as usize).min(r - 2);
            fracs.push(t - i0 as f64);
            strides.push(stride);
            base += i0 * stride;
            stride *= r;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dims) {
            let mut weight = 1.0;
            let mut idx = base;
            for (bit, (&f, &s)) in fracs.iter().zip(&strides).enumerate() {
                if corner & (1 << bit) != 0 {
                    weight *= f;
                    idx += s;
                } else {
                    weight *= 1.0 - f;
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[idx];
            }
        }
        acc
    }

    /// Largest lattice value and its location. Multilinear interpolation
    /// never exceeds the values at cell corners, so this is the maximum of
    /// [`LatticeFunction::eval`] over the whole cube.
    pub fn max(&self) -> (Vec<f64>, f64) {
        let (idx, &v) =
            self.values
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
        (self.location(idx), v)
    }
}

fn checked_len(dims: usize, resolution: usize) -> Option<usize> {
    (0..dims).try_fold(1usize, |acc, _| acc.checked_mul(resolution))
}

/// Draws a GP sample path with kernel `spec` (all `dims` coordinates active)
/// on a `resolution^dims` lattice. Deterministic per `seed`.
pub fn sample_gp_lattice(
    spec: &KernelSpec,
    dims: usize,
    resolution: usize,
    seed: u64,
) -> Result<LatticeFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_gp_lattice_with(spec, dims, resolution, &mut rng)
}

/// As [`sample_gp_lattice`], drawing from a caller-owned generator.
///
/// The squared-exponential kernel factorizes over coordinates, so the
/// lattice covariance is the Kronecker product of one per-axis Gram matrix;
/// its Cholesky factor is the Kronecker product of the per-axis factors and
/// is applied one axis at a time.
pub fn sample_gp_lattice_with<R: Rng + ?Sized>(
    spec: &KernelSpec,
    dims: usize,
    resolution: usize,
    rng: &mut R,
) -> Result<LatticeFunction> {
    spec.validate()?;
    if resolution < 2 {
        return Err(Error::invalid("lattice resolution must be >= 2"));
    }
    if dims == 0 {
        let v: f64 = rng.sample(StandardNormal);
        return LatticeFunction::from_values(0, resolution, vec![v * spec.sigma_s2.sqrt()]);
    }
    let total = checked_len(dims, resolution)
        .filter(|&n| n <= MAX_LATTICE_POINTS)
        .ok_or_else(|| {
            Error::invalid(format!(
                "lattice {resolution}^{dims} exceeds {MAX_LATTICE_POINTS} points"
            ))
        })?;

    let axis_kernel = KernelSpec::new(1.0, spec.bandwidth, vec![0])?;
    let axis: Vec<Vec<f64>> = (0..resolution)
        .map(|i| vec![-1.0 + 2.0 * i as f64 / (resolution - 1) as f64])
        .collect();
    let gram = gram_matrix(&axis, &axis_kernel, 0.0)?;
    let chol = Cholesky::factor_with_jitter(&gram, 1.0)?;
    let l = chol.factor();

    let mut values: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
    let mut fiber = vec![0.0; resolution];
    let mut stride = 1usize;
    for _ in 0..dims {
        let block = stride * resolution;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (i, f) in fiber.iter_mut().enumerate() {
                    *f = values[start + i * stride];
                }
                for i in 0..resolution {
                    let s: f64 = (0..=i).map(|j| l.get(i, j) * fiber[j]).sum();
                    values[start + i * stride] = s;
                }
            }
        }
        stride = block;
    }
    let scale = spec.sigma_s2.sqrt();
    let offset = if spec.offset_var > 0.0 {
        spec.offset_var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    values.iter_mut().for_each(|v| *v = *v * scale + offset);
    LatticeFunction::from_values(dims, resolution, values)
}
