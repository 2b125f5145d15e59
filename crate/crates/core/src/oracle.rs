//! Closed-form and brute-force reference values used by tests and the
//! `validate` command.

use rayon::prelude::*;

use crate::density::{log_sum_exp, Gaussian, ProblemSpec};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;

/// Gaussian with a verified SPD covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    factor: Cholesky<T>,
}

impl<T: Real> GaussianParams<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::Config("mean and covariance dimensions differ".into()));
        }
        let factor = Cholesky::new(&cov)?;
        Ok(Self { mean, cov, factor })
    }

    pub fn isotropic(dim: usize, mean: T, variance: T) -> Result<Self> {
        Self::new(vec![mean; dim], Matrix::identity(dim).scaled(variance))
    }

    pub fn diagonal(mean: Vec<T>, variances: &[T]) -> Result<Self> {
        Self::new(mean, Matrix::from_diagonal(variances))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn precision(&self) -> Matrix<T> {
        self.factor.inverse()
    }

    pub fn log_density(&self, x: &[T]) -> T {
        let r: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        let d = T::count(self.dim());
        -T::lit(0.5) * (d * (T::lit(2.0) * T::PI()).ln() + self.factor.log_det() + self.factor.mahalanobis_sq(&r))
    }

    pub fn to_density(&self) -> Result<Gaussian<T>> {
        Gaussian::new(self.mean.clone(), self.cov.clone())
    }
}

fn same_dim<T: Real>(items: &[&GaussianParams<T>]) -> Result<usize> {
    let d = items[0].dim();
    if items.iter().any(|g| g.dim() != d) {
        return Err(Error::Config("Gaussian dimensions differ".into()));
    }
    Ok(d)
}

/// Normalized `(p L)^β q^{1−β}` for Gaussian prior, likelihood (as a
/// density in the parameter) and importance density.
pub fn gaussian_tempered<T: Real>(
    beta: T,
    prior: &GaussianParams<T>,
    like: &GaussianParams<T>,
    q: &GaussianParams<T>,
) -> Result<GaussianParams<T>> {
    let d = same_dim(&[prior, like, q])?;
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::Config(format!("beta must lie in [0, 1], got {beta}")));
    }
    if beta == T::zero() {
        return Ok(q.clone());
    }
    let (lp, ll, lq) = (prior.precision(), like.precision(), q.precision());
    let rest = T::one() - beta;
    let precision = lp.add(&ll).scaled(beta).add(&lq.scaled(rest));
    let hp = lp.mul_vec(prior.mean());
    let hl = ll.mul_vec(like.mean());
    let hq = lq.mul_vec(q.mean());
    let h: Vec<T> = (0..d).map(|i| beta * (hp[i] + hl[i]) + rest * hq[i]).collect();
    let pf = Cholesky::new(&precision)
        .map_err(|e| Error::Config(format!("tempered precision is not SPD: {e}")))?;
    GaussianParams::new(pf.solve(&h), pf.inverse())
}

/// `D_KL(a ‖ b)` for multivariate Gaussians.
pub fn gaussian_kl<T: Real>(a: &GaussianParams<T>, b: &GaussianParams<T>) -> Result<T> {
    let d = same_dim(&[a, b])?;
    let bi = b.precision();
    let trace = bi.mul(a.cov()).trace();
    let delta: Vec<T> = b.mean().iter().zip(a.mean()).map(|(&x, &y)| x - y).collect();
    let quad = b.factor.mahalanobis_sq(&delta);
    let kl = T::lit(0.5) * (trace + quad - T::count(d) + b.factor.log_det() - a.factor.log_det());
    Ok(kl.max(T::zero()))
}

/// `ln ∫ N(θ; μ_p, Σ_p) N(θ; μ_L, Σ_L) dθ = ln N(μ_L; μ_p, Σ_p + Σ_L)`.
pub fn gaussian_evidence<T: Real>(prior: &GaussianParams<T>, like: &GaussianParams<T>) -> Result<T> {
    same_dim(&[prior, like])?;
    let marginal = GaussianParams::new(prior.mean().to_vec(), prior.cov().add(like.cov()))?;
    Ok(marginal.log_density(like.mean()))
}

/// Conjugate posterior of a Gaussian prior and Gaussian likelihood.
pub fn gaussian_posterior<T: Real>(prior: &GaussianParams<T>, like: &GaussianParams<T>) -> Result<GaussianParams<T>> {
    gaussian_tempered(T::one(), prior, like, prior)
}

/// Evidence and posterior of a Gaussian prior with a Gaussian-mixture likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePosterior<T> {
    pub log_evidence: T,
    /// `(posterior weight, posterior component)` per likelihood component.
    pub components: Vec<(T, GaussianParams<T>)>,
}

pub fn mixture_evidence<T: Real>(
    prior: &GaussianParams<T>,
    components: &[(T, GaussianParams<T>)],
) -> Result<MixturePosterior<T>> {
    if components.is_empty() {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    let mut log_terms = Vec::with_capacity(components.len());
    let mut posts = Vec::with_capacity(components.len());
    for (w, c) in components {
        if !(*w > T::zero()) {
            return Err(Error::Config("mixture weights must be positive".into()));
        }
        log_terms.push(w.ln() + gaussian_evidence(prior, c)?);
        posts.push(gaussian_posterior(prior, c)?);
    }
    let log_evidence = log_sum_exp(&log_terms);
    let components = log_terms
        .iter()
        .zip(posts)
        .map(|(&lt, g)| ((lt - log_evidence).exp(), g))
        .collect();
    Ok(MixturePosterior {
        log_evidence,
        components,
    })
}

/// Midpoint-rule posterior on a rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPosterior<T> {
    lo: Vec<T>,
    widths: Vec<T>,
    cells_per_dim: usize,
    /// Normalized cell masses, row-major with the last coordinate fastest.
    masses: Vec<T>,
    pub log_evidence: T,
    pub boundary_mass: T,
}

impl<T: Real> GridPosterior<T> {
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn cell_center(&self, flat: usize) -> Vec<T> {
        cell_center(&self.lo, &self.widths, self.cells_per_dim, flat)
    }

    /// Posterior mass of the cells whose centers satisfy `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[T]) -> bool) -> T {
        self.masses
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(&self.cell_center(*i)))
            .fold(T::zero(), |a, (_, &m)| a + m)
    }

    pub fn mean(&self) -> Vec<T> {
        let d = self.lo.len();
        let mut m = vec![T::zero(); d];
        for (i, &w) in self.masses.iter().enumerate() {
            let c = self.cell_center(i);
            for k in 0..d {
                m[k] = m[k] + w * c[k];
            }
        }
        m
    }
}

fn cell_center<T: Real>(lo: &[T], widths: &[T], cells: usize, mut flat: usize) -> Vec<T> {
    let d = lo.len();
    let mut idx = vec![0usize; d];
    for k in (0..d).rev() {
        idx[k] = flat % cells;
        flat /= cells;
    }
    (0..d)
        .map(|k| lo[k] + widths[k] * (T::count(idx[k]) + T::lit(0.5)))
        .collect()
}

fn on_boundary(cells: usize, d: usize, mut flat: usize) -> bool {
    for _ in 0..d {
        let i = flat % cells;
        if i == 0 || i + 1 == cells {
            return true;
        }
        flat /= cells;
    }
    false
}

/// Brute-force posterior and log-evidence of `prior · likelihood` on the box
/// `[lo, hi]` with `cells_per_dim` midpoint cells per axis (dimension ≤ 3).
///
/// Fails with [`Error::GridTooSmall`] when the outermost layer of cells holds
/// more than `1e−9` of the mass.
pub fn grid_posterior<T: Real>(
    problem: &ProblemSpec<T>,
    lo: &[T],
    hi: &[T],
    cells_per_dim: usize,
) -> Result<GridPosterior<T>> {
    let d = problem.dim();
    if d > 3 {
        return Err(Error::Config("grid oracle supports at most 3 dimensions".into()));
    }
    if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
        return Err(Error::Config("grid bounds must satisfy lo < hi in every dimension".into()));
    }
    if cells_per_dim < 3 {
        return Err(Error::Config("need at least 3 cells per dimension".into()));
    }
    let widths: Vec<T> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| (h - l) / T::count(cells_per_dim))
        .collect();
    let total = cells_per_dim.pow(d as u32);
    let prior = problem.prior();
    let like = problem.likelihood();
    let log_values: Vec<T> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = cell_center(lo, &widths, cells_per_dim, i);
            let lp = prior.log_density(&x);
            if lp == T::neg_infinity() {
                lp
            } else {
                lp + like.log_density(&x)
            }
        })
        .collect();
    let max = log_values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(Error::AllWeightsZero("posterior vanishes on every grid cell".into()));
    }
    let raw: Vec<T> = log_values.iter().map(|&v| (v - max).exp()).collect();
    let sum = pairwise_sum(&raw);
    let masses: Vec<T> = raw.iter().map(|&v| v / sum).collect();
    let boundary_mass = pairwise_sum(
        &masses
            .iter()
            .enumerate()
            .map(|(i, &m)| if on_boundary(cells_per_dim, d, i) { m } else { T::zero() })
            .collect::<Vec<_>>(),
    );
    if boundary_mass > T::lit(1e-9) {
        return Err(Error::GridTooSmall(boundary_mass.as_f64()));
    }
    let log_volume = widths.iter().fold(T::zero(), |a, &w| a + w.ln());
    Ok(GridPosterior {
        lo: lo.to_vec(),
        widths,
        cells_per_dim,
        masses,
        log_evidence: max + sum.ln() + log_volume,
        boundary_mass,
    })
}

/// Order-fixed pairwise summation.
fn pairwise_sum<T: Real>(v: &[T]) -> T {
    if v.len() <= 64 {
        return v.iter().fold(T::zero(), |a, &b| a + b);
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `D_KL(posterior ‖ p_β)` along an increasing grid of `β` values.
pub fn kl_monotonicity_trace<T: Real>(
    prior: &GaussianParams<T>,
    like: &GaussianParams<T>,
    q: &GaussianParams<T>,
    betas: &[T],
) -> Result<Vec<T>> {
    if betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("beta grid must be strictly increasing".into()));
    }
    let posterior = gaussian_tempered(T::one(), prior, like, q)?;
    betas
        .iter()
        .map(|&b| gaussian_kl(&posterior, &gaussian_tempered(b, prior, like, q)?))
        .collect()
}
