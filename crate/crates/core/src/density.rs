//! Log-densities, sampleable densities and the problem definition.
//!
//! All densities are logs up to an additive constant. The one exception to
//! "constants don't matter" is evidence bookkeeping: the log-evidence of a run
//! inherits whatever constants the prior and likelihood carry, so evidences are
//! only comparable across models that share conventions.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::ensemble::CachedLogs;
use crate::error::{config, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::{standard_normal, uniform};
use crate::scalar::Real;

/// Unnormalized log-density over points of a fixed dimension.
///
/// Implementations must be deterministic and return `-inf` (never NaN) outside
/// the support. `+inf` is not a valid output.
pub trait LogDensity<T: Real>: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[T]) -> T;
}

/// A log-density that can also generate draws.
pub trait SampleableDensity<T: Real>: LogDensity<T> {
    /// Draws a point. The result always has finite `log_density`.
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<T>;
}

#[inline]
fn all_finite<T: Real>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn half_ln_two_pi<T: Real>() -> T {
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

/// `Σ_i [ −½ ln(2π v_i) − (x_i − m_i)² / (2 v_i) ]`.
pub fn log_gaussian_diag<T: Real>(x: &[T], mean: &[T], variances: &[T]) -> Result<T> {
    check_diag_params(mean, variances)?;
    if x.len() != mean.len() {
        return Err(config(format!(
            "point has dimension {} but mean has {}",
            x.len(),
            mean.len()
        )));
    }
    Ok(diag_eval(x, mean, variances))
}

fn check_diag_params<T: Real>(mean: &[T], variances: &[T]) -> Result<()> {
    if mean.len() != variances.len() {
        return Err(config(format!(
            "mean has dimension {} but variances has {}",
            mean.len(),
            variances.len()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
        return Err(config(format!("variance must be positive and finite, got {v}")));
    }
    if !all_finite(mean) {
        return Err(config("mean must be finite"));
    }
    Ok(())
}

fn diag_eval<T: Real>(x: &[T], mean: &[T], variances: &[T]) -> T {
    if !all_finite(x) {
        return T::neg_infinity();
    }
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();
    x.iter()
        .zip(mean)
        .zip(variances)
        .fold(T::zero(), |acc, ((&xi, &mi), &vi)| {
            let r = xi - mi;
            acc - half * (two_pi * vi).ln() - r * r / (T::lit(2.0) * vi)
        })
}

/// Multivariate normal log-density. Factorizes `cov` on every call; build a
/// [`Gaussian`] to reuse the factor.
pub fn log_gaussian_full<T: Real>(x: &[T], mean: &[T], cov: &Matrix<T>) -> Result<T> {
    let g = Gaussian::new(mean.to_vec(), cov.clone())?;
    if x.len() != g.dim() {
        return Err(config("point dimension does not match the Gaussian"));
    }
    Ok(g.log_density(x))
}

/// `0` inside the closed box `[lo, hi]` (or `−Σ ln(hi_i − lo_i)` when
/// `normalized`), `-inf` outside.
pub fn log_uniform_box<T: Real>(x: &[T], lo: &[T], hi: &[T], normalized: bool) -> Result<T> {
    let b = UniformBox::new(lo.to_vec(), hi.to_vec())?.normalized(normalized);
    if x.len() != b.dim() {
        return Err(config("point dimension does not match the box"));
    }
    Ok(b.log_density(x))
}

/// `log Σ_c w_c N(x; m_c, Σ_c)`.
pub fn log_gaussian_mixture<T: Real>(x: &[T], components: &[(T, Vec<T>, Matrix<T>)]) -> Result<T> {
    let m = GaussianMixture::new(
        components
            .iter()
            .map(|(w, mean, cov)| Ok((*w, Gaussian::new(mean.clone(), cov.clone())?)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    if x.len() != m.dim() {
        return Err(config("point dimension does not match the mixture"));
    }
    Ok(m.log_density(x))
}

/// Negated 3D Rosenbrock sum:
/// `−(100(y−x²)² + (1−x)² + 100(z−y²)² + (1−y)²)`.
pub fn rosenbrock3d_loglike<T: Real>(x: T, y: T, z: T) -> T {
    let hundred = T::lit(100.0);
    let one = T::one();
    let a = y - x * x;
    let b = one - x;
    let c = z - y * y;
    let d = one - y;
    -(hundred * a * a + b * b + hundred * c * c + d * d)
}

/// `mean + L z` with `z` drawn coordinate by coordinate from the stream.
pub fn draw_gaussian<T: Real>(mean: &[T], factor: &Cholesky<T>, rng: &mut dyn RngCore) -> Vec<T> {
    let z: Vec<T> = (0..mean.len()).map(|_| standard_normal(rng)).collect();
    factor
        .mul_lower(&z)
        .into_iter()
        .zip(mean)
        .map(|(v, &m)| m + v)
        .collect()
}

/// Independent-coordinate Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian<T> {
    mean: Vec<T>,
    variances: Vec<T>,
    std_devs: Vec<T>,
}

impl<T: Real> DiagGaussian<T> {
    pub fn new(mean: Vec<T>, variances: Vec<T>) -> Result<Self> {
        check_diag_params(&mean, &variances)?;
        let std_devs = variances.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            mean,
            variances,
            std_devs,
        })
    }

    /// Same mean and standard deviation in every coordinate.
    pub fn isotropic(dim: usize, mean: T, std_dev: T) -> Result<Self> {
        Self::new(vec![mean; dim], vec![std_dev * std_dev; dim])
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn to_full(&self) -> Result<Gaussian<T>> {
        Gaussian::new(self.mean.clone(), Matrix::from_diagonal(&self.variances))
    }
}

impl<T: Real> LogDensity<T> for DiagGaussian<T> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[T]) -> T {
        diag_eval(x, &self.mean, &self.variances)
    }
}

impl<T: Real> SampleableDensity<T> for DiagGaussian<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<T> {
        self.mean
            .iter()
            .zip(&self.std_devs)
            .map(|(&m, &s)| m + s * standard_normal::<T>(rng))
            .collect()
    }
}

/// Multivariate Gaussian with a cached Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    factor: Cholesky<T>,
    log_norm: T,
}

impl<T: Real> Gaussian<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(config(format!(
                "mean has dimension {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if !all_finite(&mean) {
            return Err(config("mean must be finite"));
        }
        let tol = T::lit(1e3) * T::epsilon() * cov.diagonal().iter().fold(T::one(), |m, d| m.max(d.abs()));
        if cov.max_asymmetry() > tol {
            return Err(config("covariance must be symmetric"));
        }
        let factor = Cholesky::new(&cov)?;
        let log_norm = -(T::count(mean.len()) * half_ln_two_pi::<T>()) - T::lit(0.5) * factor.log_det();
        Ok(Self {
            mean,
            cov,
            factor,
            log_norm,
        })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn factor(&self) -> &Cholesky<T> {
        &self.factor
    }
}

impl<T: Real> LogDensity<T> for Gaussian<T> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[T]) -> T {
        if !all_finite(x) {
            return T::neg_infinity();
        }
        let r: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        self.log_norm - T::lit(0.5) * self.factor.mahalanobis_sq(&r)
    }
}

impl<T: Real> SampleableDensity<T> for Gaussian<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<T> {
        draw_gaussian(&self.mean, &self.factor, rng)
    }
}

/// Uniform density on an axis-aligned box; unnormalized (0 inside) by default.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    inside: T,
}

impl<T: Real> UniformBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(config("box bounds have different dimensions"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(config("box requires finite lo < hi in every coordinate"));
        }
        Ok(Self {
            lo,
            hi,
            inside: T::zero(),
        })
    }

    /// Switches between the unnormalized (0 inside) and normalized conventions.
    pub fn normalized(mut self, normalized: bool) -> Self {
        self.inside = if normalized {
            -self
                .lo
                .iter()
                .zip(&self.hi)
                .fold(T::zero(), |acc, (&l, &h)| acc + (h - l).ln())
        } else {
            T::zero()
        };
        self
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }
}

impl<T: Real> LogDensity<T> for UniformBox<T> {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn log_density(&self, x: &[T]) -> T {
        if self.contains(x) {
            self.inside
        } else {
            T::neg_infinity()
        }
    }
}

impl<T: Real> SampleableDensity<T> for UniformBox<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * uniform::<T>(rng))
            .collect()
    }
}

/// Finite mixture of Gaussians, evaluated with a max-shifted exponential sum.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture<T> {
    log_weights: Vec<T>,
    weights: Vec<T>,
    components: Vec<Gaussian<T>>,
}

impl<T: Real> GaussianMixture<T> {
    pub fn new(components: Vec<(T, Gaussian<T>)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(config("mixture needs at least one component"));
        };
        let dim = first.1.dim();
        if components.iter().any(|(_, g)| g.dim() != dim) {
            return Err(config("mixture components have different dimensions"));
        }
        if components.iter().any(|(w, _)| !(*w > T::zero())) {
            return Err(config("mixture weights must be positive"));
        }
        let total = components.iter().fold(T::zero(), |a, (w, _)| a + *w);
        if (total - T::one()).abs() > T::lit(1e-12).max(T::lit(4.0) * T::epsilon()) {
            return Err(config(format!("mixture weights sum to {total}, expected 1")));
        }
        let (weights, components): (Vec<T>, Vec<Gaussian<T>>) = components.into_iter().unzip();
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            components,
        })
    }

    pub fn components(&self) -> impl Iterator<Item = (T, &Gaussian<T>)> {
        self.weights.iter().copied().zip(&self.components)
    }
}

impl<T: Real> LogDensity<T> for GaussianMixture<T> {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn log_density(&self, x: &[T]) -> T {
        let terms: Vec<T> = self
            .log_weights
            .iter()
            .zip(&self.components)
            .map(|(&lw, g)| lw + g.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }
}

impl<T: Real> SampleableDensity<T> for GaussianMixture<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<T> {
        let u: T = uniform(rng);
        let mut acc = T::zero();
        let mut pick = self.components.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc = acc + w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.components[pick].draw(rng)
    }
}

/// `ln Σ exp(v_i)` with the maximum factored out; `-inf` if every term is `-inf`.
pub(crate) fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s = values
        .iter()
        .filter(|v| v.is_finite())
        .fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + s.ln()
}

/// Three-parameter Rosenbrock log-likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rosenbrock3d;

impl<T: Real> LogDensity<T> for Rosenbrock3d {
    fn dim(&self) -> usize {
        3
    }

    fn log_density(&self, x: &[T]) -> T {
        if x.len() != 3 || !all_finite(x) {
            return T::neg_infinity();
        }
        rosenbrock3d_loglike(x[0], x[1], x[2])
    }
}

/// Wraps a closure as a log-density.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> fmt::Debug for FnDensity<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDensity").field("dim", &self.dim).finish()
    }
}

impl<T: Real, F: Fn(&[T]) -> T + Send + Sync> LogDensity<T> for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// Prior, likelihood and importance density of an inverse problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec<T: Real> {
    dim: usize,
    prior: Arc<dyn LogDensity<T>>,
    likelihood: Arc<dyn LogDensity<T>>,
    importance: Arc<dyn SampleableDensity<T>>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(
        prior: Arc<dyn LogDensity<T>>,
        likelihood: Arc<dyn LogDensity<T>>,
        importance: Arc<dyn SampleableDensity<T>>,
    ) -> Result<Self> {
        let dim = prior.dim();
        if dim == 0 {
            return Err(config("problem dimension must be positive"));
        }
        if likelihood.dim() != dim || importance.dim() != dim {
            return Err(config(format!(
                "density dimensions disagree: prior {dim}, likelihood {}, importance {}",
                likelihood.dim(),
                importance.dim()
            )));
        }
        Ok(Self {
            dim,
            prior,
            likelihood,
            importance,
        })
    }

    /// Classic transitional MCMC setup: the prior doubles as importance density.
    pub fn with_prior_importance(
        prior: Arc<dyn SampleableDensity<T>>,
        likelihood: Arc<dyn LogDensity<T>>,
    ) -> Result<Self> {
        let as_density: Arc<dyn LogDensity<T>> = prior.clone();
        Self::new(as_density, likelihood, prior)
    }

    /// Same prior and likelihood, different importance density.
    pub fn with_importance(&self, importance: Arc<dyn SampleableDensity<T>>) -> Result<Self> {
        Self::new(self.prior.clone(), self.likelihood.clone(), importance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prior(&self) -> &Arc<dyn LogDensity<T>> {
        &self.prior
    }

    pub fn likelihood(&self) -> &Arc<dyn LogDensity<T>> {
        &self.likelihood
    }

    pub fn importance(&self) -> &Arc<dyn SampleableDensity<T>> {
        &self.importance
    }

    /// Evaluates prior, likelihood and importance at `x`. Counts as one
    /// density evaluation.
    pub fn evaluate(&self, x: &[T]) -> Result<CachedLogs<T>> {
        let logs = CachedLogs {
            log_prior: self.prior.log_density(x),
            log_like: self.likelihood.log_density(x),
            log_importance: self.importance.log_density(x),
        };
        for (name, v) in [
            ("prior", logs.log_prior),
            ("likelihood", logs.log_like),
            ("importance", logs.log_importance),
        ] {
            if v.is_nan() || v == T::infinity() {
                return Err(Error::InvalidLogDensity(format!("{name} returned {v}")));
            }
        }
        Ok(logs)
    }
}
