//! Weighted sample populations and the reductions applied to them.
//!
//! Log-weights between tempering levels `β_k → β_{k+1}` are
//! `(β_{k+1} − β_k) · (ln p + ln L − ln q)`. Points with zero prior or
//! likelihood keep a `-inf` log-weight and stay in the population with
//! probability zero, so `n` (and the `1/n` in the evidence estimator) never
//! changes within a stage.

use rayon::prelude::*;

use crate::density::ProblemSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Log prior, log likelihood and log importance density at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CachedLogs<T> {
    pub log_prior: T,
    pub log_like: T,
    pub log_importance: T,
}

impl<T: Real> CachedLogs<T> {
    /// `ln p + ln L − ln q`, the log-weight per unit of `Δβ`.
    ///
    /// Evaluated as `ln L + (ln p − ln q)` so that `q = p` yields `ln L`
    /// exactly. `-inf` when the prior or likelihood vanishes.
    pub fn log_ratio(&self) -> Result<T> {
        if self.log_prior == T::neg_infinity() || self.log_like == T::neg_infinity() {
            return Ok(T::neg_infinity());
        }
        if !self.log_importance.is_finite() {
            return Err(Error::InvalidLogDensity(format!(
                "importance log-density is {} at a point inside the posterior support",
                self.log_importance
            )));
        }
        Ok(self.log_like + (self.log_prior - self.log_importance))
    }
}

/// `n` points with their cached density values.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T> {
    dim: usize,
    points: Vec<Vec<T>>,
    logs: Vec<CachedLogs<T>>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(dim: usize, points: Vec<Vec<T>>, logs: Vec<CachedLogs<T>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config(format!(
                "ensemble needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.len() != logs.len() {
            return Err(Error::Config("points and cached logs differ in length".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Config(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("point {i} has non-finite coordinates")));
            }
        }
        for (i, l) in logs.iter().enumerate() {
            for v in [l.log_prior, l.log_like, l.log_importance] {
                if v.is_nan() || v == T::infinity() {
                    return Err(Error::InvalidLogDensity(format!("point {i} caches {v}")));
                }
            }
        }
        Ok(Self { dim, points, logs })
    }

    /// Evaluates the problem's densities at each point, data-parallel.
    pub fn from_points(problem: &ProblemSpec<T>, points: Vec<Vec<T>>) -> Result<Self> {
        let logs = points
            .par_iter()
            .map(|p| problem.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(problem.dim(), points, logs)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn logs(&self) -> &[CachedLogs<T>] {
        &self.logs
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    /// Per-point `ln p + ln L − ln q`.
    pub fn log_ratios(&self) -> Result<Vec<T>> {
        self.logs.iter().map(CachedLogs::log_ratio).collect()
    }

    /// Unweighted coordinate means.
    pub fn mean(&self) -> Vec<T> {
        let w = vec![T::one() / T::count(self.len()); self.len()];
        weighted_mean(self, &w)
    }

    /// Unweighted population covariance.
    pub fn covariance(&self) -> Matrix<T> {
        let w = vec![T::one() / T::count(self.len()); self.len()];
        weighted_cov(self, &w)
    }
}

/// Stage log-weights; at least one entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct LogWeights<T>(Vec<T>);

impl<T: Real> LogWeights<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan() || *v == T::infinity()) {
            return Err(Error::InvalidLogDensity("log-weight is NaN or +inf".into()));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(Error::AllWeightsZero(format!(
                "{} of {} log-weights are -inf",
                values.len(),
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn max_finite(&self) -> T {
        self.0
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(T::neg_infinity(), T::max)
    }
}

/// Scales per-point log-ratios by `Δβ`.
pub(crate) fn scale_ratios<T: Real>(ratios: &[T], dbeta: T) -> Result<LogWeights<T>> {
    LogWeights::new(
        ratios
            .iter()
            .map(|&r| if r == T::neg_infinity() { r } else { dbeta * r })
            .collect(),
    )
}

/// Log-weights for moving the ensemble from `beta_k` to `beta_next`.
pub fn log_weights<T: Real>(e: &Ensemble<T>, beta_k: T, beta_next: T) -> Result<LogWeights<T>> {
    if !(beta_next > beta_k) || beta_k < T::zero() || beta_next > T::one() {
        return Err(Error::Config(format!(
            "need 0 <= beta_k < beta_next <= 1, got {beta_k} and {beta_next}"
        )));
    }
    scale_ratios(&e.log_ratios()?, beta_next - beta_k)
}

/// Coefficient of variation of `exp(lw)` with population moments:
/// `κ = sqrt(n Σe^{2s} / (Σe^{s})² − 1)` for max-shifted `s`.
pub fn cov_of_weights<T: Real>(lw: &LogWeights<T>) -> T {
    let max = lw.max_finite();
    let (s1, s2) = lw
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold((T::zero(), T::zero()), |(a, b), &v| {
            let e = (v - max).exp();
            (a + e, b + e * e)
        });
    let radicand = T::count(lw.len()) * s2 / (s1 * s1) - T::one();
    radicand.max(T::zero()).sqrt()
}

/// `ln( (1/n) Σ exp(lw_l) )`, exact for constant input.
pub fn log_mean_exp<T: Real>(lw: &LogWeights<T>) -> T {
    let max = lw.max_finite();
    let s = lw
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold(T::zero(), |a, &v| a + (v - max).exp());
    max + (s / T::count(lw.len())).ln()
}

/// Weights normalized to sum to one; `-inf` entries map to exactly zero.
pub fn normalized_weights<T: Real>(lw: &LogWeights<T>) -> Vec<T> {
    let max = lw.max_finite();
    let raw: Vec<T> = lw
        .values()
        .iter()
        .map(|&v| if v.is_finite() { (v - max).exp() } else { T::zero() })
        .collect();
    let total = raw.iter().fold(T::zero(), |a, &b| a + b);
    raw.into_iter().map(|v| v / total).collect()
}

/// `Σ w_l θ_l`.
pub fn weighted_mean<T: Real>(e: &Ensemble<T>, w: &[T]) -> Vec<T> {
    assert_eq!(w.len(), e.len(), "weight vector length mismatch");
    let mut mean = vec![T::zero(); e.dim()];
    for (p, &wi) in e.points().iter().zip(w) {
        if wi == T::zero() {
            continue;
        }
        for (m, &x) in mean.iter_mut().zip(p) {
            *m = *m + wi * x;
        }
    }
    mean
}

/// `Σ w_l (θ_l − θ̄)(θ_l − θ̄)ᵀ`, without bias correction and without the
/// proposal scale factor.
pub fn weighted_cov<T: Real>(e: &Ensemble<T>, w: &[T]) -> Matrix<T> {
    let mean = weighted_mean(e, w);
    let d = e.dim();
    let mut cov = Matrix::zeros(d);
    for (p, &wi) in e.points().iter().zip(w) {
        if wi == T::zero() {
            continue;
        }
        let r: Vec<T> = p.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
        for i in 0..d {
            for j in 0..=i {
                cov[(i, j)] = cov[(i, j)] + wi * r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// `1 / Σ w_i²` for a probability vector.
pub fn effective_sample_size<T: Real>(w: &[T]) -> T {
    T::one() / w.iter().fold(T::zero(), |a, &v| a + v * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn logs(lp: f64, ll: f64, lq: f64) -> CachedLogs<f64> {
        CachedLogs {
            log_prior: lp,
            log_like: ll,
            log_importance: lq,
        }
    }

    fn line_ensemble(xs: &[f64]) -> Ensemble<f64> {
        Ensemble::new(
            1,
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|_| logs(0.0, 0.0, 0.0)).collect(),
        )
        .unwrap()
    }

    fn ensemble_with_logs(entries: &[CachedLogs<f64>]) -> Ensemble<f64> {
        Ensemble::new(
            1,
            (0..entries.len()).map(|i| vec![i as f64]).collect(),
            entries.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn log_weight_examples() {
        // importance equal to the normalized posterior: constant ratio ln Z
        let z: f64 = -2.5;
        let e = ensemble_with_logs(&[logs(-1.0, -3.0, -4.0 - z), logs(-2.0, -0.5, -2.5 - z), logs(0.0, 0.0, -z)]);
        let lw = log_weights(&e, 0.0, 1.0).unwrap();
        assert!(cov_of_weights(&lw) < 1e-12);

        let e = ensemble_with_logs(&[logs(1.0, 2.0, 1.0), logs(0.0, 0.0, 0.0)]);
        let lw = log_weights(&e, 0.25, 0.75).unwrap();
        assert_eq!(lw.values()[0], 1.0);

        // q = prior: the weight is exactly Δβ · ln L
        let e = ensemble_with_logs(&[logs(-3.7, -1.3, -3.7), logs(-0.1, -7.9, -0.1)]);
        let lw = log_weights(&e, 0.1, 0.4).unwrap();
        let db: f64 = 0.4 - 0.1;
        assert_eq!(lw.values()[0], db * -1.3);
        assert_eq!(lw.values()[1], db * -7.9);
    }

    #[test]
    fn zero_support_points() {
        let e = ensemble_with_logs(&[logs(f64::NEG_INFINITY, 0.0, 0.0), logs(0.0, -1.0, 0.0)]);
        let lw = log_weights(&e, 0.0, 0.5).unwrap();
        assert_eq!(lw.values()[0], f64::NEG_INFINITY);
        let e = ensemble_with_logs(&[logs(f64::NEG_INFINITY, 0.0, 0.0), logs(0.0, f64::NEG_INFINITY, 0.0)]);
        assert!(matches!(log_weights(&e, 0.0, 0.5), Err(Error::AllWeightsZero(_))));
    }

    #[test]
    fn cov_examples() {
        let lw = LogWeights::new(vec![0.3; 5]).unwrap();
        assert_eq!(cov_of_weights(&lw), 0.0);
        let lw = LogWeights::new(vec![0.0, 3.0f64.ln()]).unwrap();
        assert_relative_eq!(cov_of_weights(&lw), 0.5, epsilon = 1e-15);
        let lw = LogWeights::new(vec![700.0, 700.0]).unwrap();
        assert_eq!(cov_of_weights(&lw), 0.0);
        let lw = LogWeights::new(vec![1e5, 1e5 + 3.0f64.ln()]).unwrap();
        assert_relative_eq!(cov_of_weights(&lw), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn mean_exp_examples() {
        let lw = LogWeights::new(vec![-4.25; 7]).unwrap();
        assert_eq!(log_mean_exp(&lw), -4.25);
        let lw = LogWeights::new(vec![0.0, 3.0f64.ln()]).unwrap();
        assert_relative_eq!(log_mean_exp(&lw), 2.0f64.ln(), epsilon = 1e-15);
        let lw = LogWeights::new(vec![f64::NEG_INFINITY, 0.0]).unwrap();
        assert_relative_eq!(log_mean_exp(&lw), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn normalization_examples() {
        let w = normalized_weights(&LogWeights::new(vec![2.0; 4]).unwrap());
        assert_eq!(w, vec![0.25; 4]);
        let w = normalized_weights(&LogWeights::new(vec![0.0, 3.0f64.ln()]).unwrap());
        assert_relative_eq!(w[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.75, epsilon = 1e-15);
        let w = normalized_weights(&LogWeights::new(vec![f64::NEG_INFINITY, -3.0, f64::NEG_INFINITY]).unwrap());
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn moment_examples() {
        let e = line_ensemble(&[1.0, 2.0, 6.0]);
        assert_relative_eq!(weighted_mean(&e, &[1.0 / 3.0; 3])[0], 3.0, epsilon = 1e-15);
        assert_eq!(weighted_mean(&e, &[0.0, 1.0, 0.0]), vec![2.0]);
        let e = line_ensemble(&[0.0, 4.0]);
        assert_eq!(weighted_mean(&e, &[0.25, 0.75]), vec![3.0]);

        let same = line_ensemble(&[2.0, 2.0, 2.0]);
        assert_eq!(weighted_cov(&same, &[1.0 / 3.0; 3])[(0, 0)], 0.0);
        let e = line_ensemble(&[-1.0, 1.0]);
        assert_eq!(weighted_cov(&e, &[0.5, 0.5])[(0, 0)], 1.0);
        let e = line_ensemble(&[-1.0, 1.0, 5.0]);
        assert_eq!(weighted_cov(&e, &[0.0, 0.0, 1.0])[(0, 0)], 0.0);
    }

    #[test]
    fn ess_examples() {
        assert_relative_eq!(effective_sample_size(&[0.1; 10]), 10.0, epsilon = 1e-12);
        assert_eq!(effective_sample_size(&[0.0, 1.0, 0.0]), 1.0);
        assert_relative_eq!(effective_sample_size(&[0.25, 0.75]), 1.6, epsilon = 1e-15);
    }

    #[test]
    fn rejects_small_or_bad_ensembles() {
        assert!(Ensemble::new(1, vec![vec![0.0]], vec![logs(0.0, 0.0, 0.0)]).is_err());
        assert!(Ensemble::new(
            1,
            vec![vec![f64::NAN], vec![0.0]],
            vec![logs(0.0, 0.0, 0.0); 2]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn cov_is_shift_invariant(
            values in prop::collection::vec(-20.0f64..20.0, 2..200),
            shift in prop::sample::select(vec![-500.0, -137.5, 0.0, 250.0, 500.0]),
        ) {
            let base = cov_of_weights(&LogWeights::new(values.clone()).unwrap());
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let moved = cov_of_weights(&LogWeights::new(shifted).unwrap());
            prop_assert!((base - moved).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn cov_monotone_in_beta(
            ratios in prop::collection::vec(-30.0f64..5.0, 2..300),
            beta_k in 0.0f64..0.9,
            fa in 0.0f64..1.0,
            fb in 0.0f64..1.0,
        ) {
            let (lo, hi) = if fa < fb { (fa, fb) } else { (fb, fa) };
            let span = 1.0 - beta_k;
            let beta_a = beta_k + span * (0.001 + 0.999 * lo);
            let beta_b = beta_k + span * (0.001 + 0.999 * hi);
            let entries: Vec<_> = ratios.iter().map(|&r| logs(0.0, r, 0.0)).collect();
            let e = ensemble_with_logs(&entries);
            let ka = cov_of_weights(&log_weights(&e, beta_k, beta_a).unwrap());
            let kb = cov_of_weights(&log_weights(&e, beta_k, beta_b).unwrap());
            prop_assert!(ka <= kb + 1e-12 * kb.max(1.0), "{ka} > {kb}");
        }

        #[test]
        fn mean_exp_matches_direct(values in prop::collection::vec(-30.0f64..30.0, 1..100)) {
            let direct = values.iter().map(|v| v.exp()).sum::<f64>() / values.len() as f64;
            let stable = log_mean_exp(&LogWeights::new(values).unwrap()).exp();
            prop_assert!(((stable - direct) / direct).abs() < 1e-12);
        }

        #[test]
        fn weighted_cov_symmetric_psd(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..60),
            raw in prop::collection::vec(0.0f64..1.0, 60),
        ) {
            let n = pts.len();
            let e = Ensemble::new(3, pts, vec![logs(0.0, 0.0, 0.0); n]).unwrap();
            let mut w: Vec<f64> = raw[..n].to_vec();
            w[0] += 1e-3;
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let c = weighted_cov(&e, &w);
            prop_assert!(c.max_asymmetry() < 1e-14);
            prop_assert!(c.symmetric_eigenvalues()[0] > -1e-10);
        }

        #[test]
        fn normalized_weights_sum_to_one(values in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let w = normalized_weights(&LogWeights::new(values).unwrap());
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
        }
    }
}
