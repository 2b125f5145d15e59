//! Built-in test problems with known answers.

use std::sync::Arc;

use crate::density::{DiagGaussian, GaussianMixture, LogDensity, ProblemSpec, Rosenbrock3d, SampleableDensity};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::oracle::{gaussian_evidence, gaussian_posterior, mixture_evidence, GaussianParams};
use crate::sampler::{Prior, SequenceProblem, Truth};
use crate::scalar::Real;

/// Importance density choice for the conjugate Gaussian problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GaussImportance<T> {
    /// Importance equals the prior (classic transitional MCMC).
    Prior,
    /// Importance equals the analytic posterior.
    Posterior,
    /// Independent `N(mean, std²)` in every coordinate.
    Isotropic { mean: T, std_dev: T },
}

/// Prior `N(1, 5²)` and standard-normal likelihood in each of `dim` coordinates.
///
/// Per coordinate the posterior is `N(1/26, 25/26)` and the evidence is
/// `N(1; 0, 26)`.
pub fn gaussian_nd<T: Real>(dim: usize, importance: GaussImportance<T>) -> Result<ProblemSpec<T>> {
    let prior = Arc::new(DiagGaussian::isotropic(dim, T::one(), T::lit(5.0))?);
    let like: Arc<dyn LogDensity<T>> = Arc::new(DiagGaussian::isotropic(dim, T::zero(), T::one())?);
    match importance {
        GaussImportance::Prior => ProblemSpec::with_prior_importance(prior, like),
        GaussImportance::Posterior => {
            let (p, l) = gaussian_nd_params(dim)?;
            let post = gaussian_posterior(&p, &l)?;
            let q = DiagGaussian::new(post.mean().to_vec(), post.cov().diagonal())?;
            ProblemSpec::new(prior, like, Arc::new(q))
        }
        GaussImportance::Isotropic { mean, std_dev } => {
            ProblemSpec::new(prior, like, Arc::new(DiagGaussian::isotropic(dim, mean, std_dev)?))
        }
    }
}

/// Prior and likelihood of [`gaussian_nd`] as oracle parameters.
pub fn gaussian_nd_params<T: Real>(dim: usize) -> Result<(GaussianParams<T>, GaussianParams<T>)> {
    Ok((
        GaussianParams::isotropic(dim, T::one(), T::lit(25.0))?,
        GaussianParams::isotropic(dim, T::zero(), T::one())?,
    ))
}

pub fn gaussian_nd_truth<T: Real>(dim: usize) -> Result<Truth<T>> {
    let (p, l) = gaussian_nd_params(dim)?;
    Ok(Truth {
        mean: Some(gaussian_posterior(&p, &l)?.mean().to_vec()),
        log_evidence: Some(gaussian_evidence(&p, &l)?),
    })
}

/// The four-dimensional instance of [`gaussian_nd`].
pub fn gauss4d<T: Real>(importance: GaussImportance<T>) -> Result<ProblemSpec<T>> {
    gaussian_nd(4, importance)
}

/// Likelihood components `(weight, mean)` of the bimodal problem, unit covariance.
pub fn bimodal_components<T: Real>() -> [(T, [T; 2]); 2] {
    [
        (T::lit(0.25), [T::lit(10.0), T::zero()]),
        (T::lit(0.75), [T::zero(), T::lit(10.0)]),
    ]
}

fn bimodal_params<T: Real>() -> Result<(GaussianParams<T>, Vec<(T, GaussianParams<T>)>)> {
    let prior = GaussianParams::isotropic(2, T::zero(), T::lit(100.0))?;
    let comps = bimodal_components::<T>()
        .into_iter()
        .map(|(w, m)| Ok((w, GaussianParams::new(m.to_vec(), Matrix::identity(2))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((prior, comps))
}

/// Prior `N(0, 10² I₂)`, likelihood `0.25 N((10,0), I) + 0.75 N((0,10), I)`.
/// `importance` is `(mean, std)` of an isotropic Gaussian; `None` uses the prior.
pub fn bimodal2d<T: Real>(importance: Option<([T; 2], T)>) -> Result<ProblemSpec<T>> {
    let prior = Arc::new(DiagGaussian::isotropic(2, T::zero(), T::lit(10.0))?);
    let (_, comps) = bimodal_params::<T>()?;
    let like: Arc<dyn LogDensity<T>> = Arc::new(GaussianMixture::new(
        comps
            .into_iter()
            .map(|(w, g)| Ok((w, g.to_density()?)))
            .collect::<Result<Vec<_>>>()?,
    )?);
    match importance {
        None => ProblemSpec::with_prior_importance(prior, like),
        Some((mean, sd)) => {
            let q = DiagGaussian::new(mean.to_vec(), vec![sd * sd; 2])?;
            ProblemSpec::new(prior, like, Arc::new(q))
        }
    }
}

pub fn bimodal2d_truth<T: Real>() -> Result<Truth<T>> {
    let (prior, comps) = bimodal_params::<T>()?;
    let mp = mixture_evidence(&prior, &comps)?;
    let mut mean = vec![T::zero(); 2];
    for (w, g) in &mp.components {
        mean[0] = mean[0] + *w * g.mean()[0];
        mean[1] = mean[1] + *w * g.mean()[1];
    }
    Ok(Truth {
        mean: Some(mean),
        log_evidence: Some(mp.log_evidence),
    })
}

/// Prior `N(0, 5² I₃)` with the negated 3D Rosenbrock sum as log-likelihood.
/// With `informed` the importance density is `N((1,1,1), 2² I₃)`.
pub fn rosenbrock3d<T: Real>(informed: bool) -> Result<ProblemSpec<T>> {
    let prior = Arc::new(DiagGaussian::isotropic(3, T::zero(), T::lit(5.0))?);
    let like: Arc<dyn LogDensity<T>> = Arc::new(Rosenbrock3d);
    if informed {
        let q = DiagGaussian::isotropic(3, T::one(), T::lit(2.0))?;
        ProblemSpec::new(prior, like, Arc::new(q))
    } else {
        ProblemSpec::with_prior_importance(prior, like)
    }
}

/// `steps` 2D problems sharing the prior `N(0, 5² I₂)`; problem `t` has
/// likelihood `N((drift·t, drift·t), 0.5² I₂)`.
pub fn drifting_sequence<T: Real>(steps: usize, drift: T) -> Result<Vec<SequenceProblem<T>>> {
    let prior: Arc<dyn SampleableDensity<T>> = Arc::new(DiagGaussian::isotropic(2, T::zero(), T::lit(5.0))?);
    (0..steps)
        .map(|t| {
            let m = drift * T::count(t);
            Ok(SequenceProblem {
                prior: Prior::Sampleable(prior.clone()),
                likelihood: Arc::new(DiagGaussian::isotropic(2, m, T::lit(0.5))?) as Arc<dyn LogDensity<T>>,
            })
        })
        .collect()
}
