//! Resampling and Metropolis-Hastings mutation at a fixed tempering level.
//!
//! Stream contract (see [`crate::rng`]): resampling reads `n` uniforms from
//! the stage's `RESAMPLE` stream; chain `l` owns the stage's `CHAIN/l` stream
//! and per step consumes `d` standard normals for the proposal, then one
//! uniform only if the proposal has finite target density.

use rand::RngCore;
use rayon::prelude::*;

use crate::density::ProblemSpec;
use crate::ensemble::{weighted_cov, CachedLogs, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::{standard_normal, uniform, StreamKey, TAG_CHAIN, TAG_RESAMPLE};
use crate::scalar::Real;

/// Feedback-controlled proposal scale `γ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProposalState<T> {
    pub gamma_sq: T,
    pub target_acceptance: T,
    pub feedback_gain: T,
    pub gamma_sq_bounds: (T, T),
}

impl<T: Real> ProposalState<T> {
    pub fn new(gamma_sq: T, feedback_gain: T) -> Self {
        Self {
            gamma_sq,
            target_acceptance: T::lit(0.234),
            feedback_gain,
            gamma_sq_bounds: (T::lit(1e-8), T::lit(1e2)),
        }
    }
}

impl<T: Real> Default for ProposalState<T> {
    fn default() -> Self {
        Self::new(T::lit(0.04), T::lit(2.0))
    }
}

/// `γ² ← clamp(γ² · exp(gain · (observed − target)))`.
pub fn adapt_gamma<T: Real>(ps: &ProposalState<T>, observed_acceptance: T) -> ProposalState<T> {
    let (lo, hi) = ps.gamma_sq_bounds;
    let factor = (ps.feedback_gain * (observed_acceptance - ps.target_acceptance)).exp();
    ProposalState {
        gamma_sq: (ps.gamma_sq * factor).max(lo).min(hi),
        ..*ps
    }
}

/// Intermediate density `(p L)^β q^{1−β}` at a fixed `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemperedTarget<T> {
    beta: T,
}

impl<T: Real> TemperedTarget<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta >= T::zero() && beta <= T::one()) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `ln q + β (ln L + ln p − ln q)`, or `ln p + ln L` at `β = 1`.
    pub fn log_density(&self, l: &CachedLogs<T>) -> T {
        let ninf = T::neg_infinity();
        if l.log_prior == ninf || l.log_like == ninf {
            return ninf;
        }
        if self.beta == T::one() {
            return l.log_prior + l.log_like;
        }
        if l.log_importance == ninf {
            return ninf;
        }
        l.log_importance + self.beta * (l.log_like + (l.log_prior - l.log_importance))
    }
}

/// I.i.d. categorical draws of `n` indices with probabilities `w`.
pub fn resample_multinomial<T: Real>(w: &[T], n: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(w.len());
    let mut acc = T::zero();
    for &wi in w {
        acc = acc + wi;
        cumulative.push(acc);
    }
    let last_positive = w.iter().rposition(|&v| v > T::zero()).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = uniform::<T>(rng) * acc;
            cumulative.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect()
}

/// A regularized covariance together with its factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularized<T> {
    pub matrix: Matrix<T>,
    pub factor: Cholesky<T>,
    /// Diagonal jitter that was added; zero when the input factorized as is.
    pub jitter: T,
}

/// Adds the smallest diagonal jitter from the doubling sequence
/// `ε, 2ε, 4ε, …` (at most 40 doublings) that makes the matrix factorizable,
/// with `ε = max(1e−12, 1e−10 · trace / d)`.
pub fn regularize_cov<T: Real>(m: &Matrix<T>) -> Result<Regularized<T>> {
    if let Ok(factor) = Cholesky::new(m) {
        return Ok(Regularized {
            matrix: m.clone(),
            factor,
            jitter: T::zero(),
        });
    }
    let d = T::count(m.dim().max(1));
    let mut eps = T::lit(1e-12).max(T::lit(1e-10) * m.trace() / d);
    for _ in 0..=40 {
        let candidate = m.with_added_diagonal(eps);
        if let Ok(factor) = Cholesky::new(&candidate) {
            return Ok(Regularized {
                matrix: candidate,
                factor,
                jitter: eps,
            });
        }
        eps = eps + eps;
    }
    Err(Error::DegenerateCovariance(format!(
        "still singular after jitter up to {eps:e}"
    )))
}

/// A point with its cached density values.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle<T> {
    pub point: Vec<T>,
    pub logs: CachedLogs<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutcome<T> {
    pub end: Particle<T>,
    pub accepted: usize,
    /// Density evaluations performed (one per proposal).
    pub evaluations: usize,
}

/// Runs `steps` random-walk Metropolis-Hastings transitions with proposal
/// `N(x, L Lᵀ)` against the tempered target.
pub fn mh_chain<T: Real>(
    problem: &ProblemSpec<T>,
    start: Particle<T>,
    target: &TemperedTarget<T>,
    proposal: &Cholesky<T>,
    steps: usize,
    rng: &mut dyn RngCore,
) -> Result<ChainOutcome<T>> {
    if steps == 0 {
        return Err(Error::Config("chain length must be at least 1".into()));
    }
    let mut current = start;
    let mut current_target = target.log_density(&current.logs);
    if current_target == T::neg_infinity() {
        return Err(Error::State("chain started at a zero-density point".into()));
    }
    let d = current.point.len();
    let mut accepted = 0;
    for _ in 0..steps {
        let z: Vec<T> = (0..d).map(|_| standard_normal(rng)).collect();
        let step = proposal.mul_lower(&z);
        let candidate: Vec<T> = current.point.iter().zip(&step).map(|(&x, &s)| x + s).collect();
        let logs = problem.evaluate(&candidate)?;
        let candidate_target = target.log_density(&logs);
        if candidate_target == T::neg_infinity() || candidate.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let u: T = uniform(rng);
        if u.ln() < candidate_target - current_target {
            current = Particle {
                point: candidate,
                logs,
            };
            current_target = candidate_target;
            accepted += 1;
        }
        debug_assert!(current_target > T::neg_infinity());
    }
    Ok(ChainOutcome {
        end: current,
        accepted,
        evaluations: steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MutationOutcome<T> {
    pub ensemble: Ensemble<T>,
    /// Accepted transitions divided by `n · steps`.
    pub acceptance_rate: T,
    pub accepted: usize,
    pub evaluations: usize,
    /// `γ²` used for this stage's proposals.
    pub gamma_sq_used: T,
    /// Proposal state after adaptation (unchanged when adaptation is off).
    pub proposal: ProposalState<T>,
}

/// Resampling followed by one MH chain per resampled point.
///
/// The proposal covariance is `γ²` times the weighted ensemble covariance,
/// regularized. Chains run data-parallel; each reads only its own substream
/// below `stage_key`, so the result does not depend on the worker count.
#[allow(clippy::too_many_arguments)]
pub fn mutate_stage<T: Real>(
    problem: &ProblemSpec<T>,
    e: &Ensemble<T>,
    w: &[T],
    target: &TemperedTarget<T>,
    ps: &ProposalState<T>,
    steps: usize,
    stage_key: StreamKey,
    adapt: bool,
) -> Result<MutationOutcome<T>> {
    if w.len() != e.len() {
        return Err(Error::Config("weight vector length does not match ensemble".into()));
    }
    if steps == 0 {
        return Err(Error::Config("chain length must be at least 1".into()));
    }
    let n = e.len();
    let base = weighted_cov(e, w);
    let proposal = regularize_cov(&base.scaled(ps.gamma_sq))?;
    let picks = resample_multinomial(w, n, &mut stage_key.child(TAG_RESAMPLE).rng());
    let chain_key = stage_key.child(TAG_CHAIN);
    let outcomes = picks
        .par_iter()
        .enumerate()
        .map(|(l, &i)| {
            let start = Particle {
                point: e.point(i).to_vec(),
                logs: e.logs()[i],
            };
            mh_chain(problem, start, target, &proposal.factor, steps, &mut chain_key.child(l as u64).rng())
        })
        .collect::<Result<Vec<_>>>()?;

    let accepted: usize = outcomes.iter().map(|o| o.accepted).sum();
    let evaluations: usize = outcomes.iter().map(|o| o.evaluations).sum();
    let (points, logs): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.end.point, o.end.logs)).unzip();
    let acceptance_rate = T::count(accepted) / T::count(n * steps);
    Ok(MutationOutcome {
        ensemble: Ensemble::new(e.dim(), points, logs)?,
        acceptance_rate,
        accepted,
        evaluations,
        gamma_sq_used: ps.gamma_sq,
        proposal: if adapt { adapt_gamma(ps, acceptance_rate) } else { *ps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{DiagGaussian, FnDensity, LogDensity, SampleableDensity, UniformBox};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn adapt_examples() {
        let ps = ProposalState::<f64>::default();
        assert_eq!(adapt_gamma(&ps, 0.234).gamma_sq, 0.04);
        let shrunk = adapt_gamma(&ps, 0.0).gamma_sq / 0.04;
        assert_relative_eq!(shrunk, (-0.468f64).exp(), epsilon = 1e-15);
        assert!((shrunk - 0.626).abs() < 1e-3);

        let mut tiny = ProposalState::new(1e-8, 2.0);
        tiny = adapt_gamma(&tiny, 0.0);
        assert_eq!(tiny.gamma_sq, 1e-8);
        let mut big = ProposalState::new(100.0, 2.0);
        big = adapt_gamma(&big, 1.0);
        assert_eq!(big.gamma_sq, 100.0);
    }

    #[test]
    fn tempered_target_reduces_to_classic_ratio_for_prior_importance() {
        let logs = CachedLogs {
            log_prior: -2.3,
            log_like: -7.1,
            log_importance: -2.3,
        };
        for beta in [0.0f64, 0.1, 0.37, 0.9, 1.0] {
            let t = TemperedTarget::new(beta).unwrap().log_density(&logs);
            assert!((t - (-2.3 + beta * -7.1)).abs() < 1e-12);
        }
        let out = CachedLogs {
            log_prior: f64::NEG_INFINITY,
            log_like: 0.0,
            log_importance: 0.0,
        };
        assert_eq!(TemperedTarget::new(0.5).unwrap().log_density(&out), f64::NEG_INFINITY);
        let no_q = CachedLogs {
            log_prior: 0.0,
            log_like: 0.0,
            log_importance: f64::NEG_INFINITY,
        };
        assert_eq!(TemperedTarget::new(0.5).unwrap().log_density(&no_q), f64::NEG_INFINITY);
        assert_eq!(TemperedTarget::new(1.0).unwrap().log_density(&no_q), 0.0);
    }

    #[test]
    fn resample_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = resample_multinomial(&[0.0, 0.0, 1.0, 0.0], 50, &mut rng);
        assert!(idx.iter().all(|&i| i == 2));

        let w = vec![0.1; 10];
        let n = 100_000;
        let idx = resample_multinomial(&w, n, &mut rng);
        let mut counts = [0usize; 10];
        idx.iter().for_each(|&i| counts[i] += 1);
        let band = 3.0 * (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() <= band, "{c}");
        }

        let a = resample_multinomial(&w, 100, &mut ChaCha8Rng::seed_from_u64(9));
        let b = resample_multinomial(&w, 100, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn regularize_examples() {
        let id = Matrix::<f64>::identity(3);
        let r = regularize_cov(&id).unwrap();
        assert_eq!(r.matrix, id);
        assert_eq!(r.jitter, 0.0);

        let r = regularize_cov(&Matrix::<f64>::zeros(3)).unwrap();
        assert_eq!(r.jitter, 1e-12);
        assert_eq!(r.matrix, Matrix::identity(3).scaled(1e-12));

        let v = [1.0, -2.0, 0.5];
        let mut outer = Matrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                outer[(i, j)] = v[i] * v[j];
            }
        }
        let r = regularize_cov(&outer).unwrap();
        assert!(r.jitter > 0.0);
        let min_ev = r.matrix.symmetric_eigenvalues()[0];
        assert!(min_ev >= r.jitter * (1.0 - 1e-6), "{min_ev} vs {}", r.jitter);

        let mut nan = Matrix::<f64>::identity(2);
        nan[(0, 0)] = f64::NAN;
        assert!(matches!(regularize_cov(&nan), Err(Error::DegenerateCovariance(_))));
    }

    fn box_problem() -> ProblemSpec<f64> {
        let prior = Arc::new(UniformBox::new(vec![-1.0], vec![1.0]).unwrap());
        let like: Arc<dyn LogDensity<f64>> = Arc::new(FnDensity::new(1, |_: &[f64]| 0.0));
        ProblemSpec::with_prior_importance(prior, like).unwrap()
    }

    #[test]
    fn rejects_out_of_support_proposals() {
        let problem = box_problem();
        let start = Particle {
            point: vec![0.99],
            logs: problem.evaluate(&[0.99]).unwrap(),
        };
        // proposal std 100: nearly every proposal leaves [-1, 1]
        let factor = Cholesky::new(&Matrix::from_diagonal(&[1e4])).unwrap();
        let target = TemperedTarget::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = mh_chain(&problem, start, &target, &factor, 200, &mut rng).unwrap();
        assert!(out.accepted < 10);
        assert!(out.end.point[0].abs() <= 1.0);
        assert_eq!(out.evaluations, 200);
    }

    #[test]
    fn rejection_at_neg_infinity_consumes_no_uniform() {
        let problem = box_problem();
        let start = Particle {
            point: vec![0.0],
            logs: problem.evaluate(&[0.0]).unwrap(),
        };
        let factor = Cholesky::new(&Matrix::from_diagonal(&[1e6])).unwrap();
        let target = TemperedTarget::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let out = mh_chain(&problem, start, &target, &factor, 1, &mut rng).unwrap();
        assert_eq!(out.accepted, 0);
        let mut replay = ChaCha8Rng::seed_from_u64(77);
        let _z: f64 = standard_normal(&mut replay);
        let mut a = rng.clone();
        assert_eq!(a.next_u64(), replay.next_u64());
    }

    #[test]
    fn optimal_scaling_acceptance() {
        let prior = Arc::new(DiagGaussian::isotropic(1, 0.0, 1.0).unwrap());
        let like: Arc<dyn LogDensity<f64>> = Arc::new(FnDensity::new(1, |_: &[f64]| 0.0));
        let problem = ProblemSpec::with_prior_importance(prior, like).unwrap();
        let factor = Cholesky::new(&Matrix::from_diagonal(&[5.66 * 5.66])).unwrap();
        let target = TemperedTarget::new(1.0).unwrap();
        let start = Particle {
            point: vec![0.0],
            logs: problem.evaluate(&[0.0]).unwrap(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = mh_chain(&problem, start, &target, &factor, 100_000, &mut rng).unwrap();
        let rate = out.accepted as f64 / 1e5;
        assert!((rate - 0.234).abs() < 0.02, "{rate}");
    }

    #[test]
    fn mutation_preserves_stationary_distribution() {
        let g = Arc::new(DiagGaussian::new(vec![1.0, -2.0], vec![4.0, 0.25]).unwrap());
        let like: Arc<dyn LogDensity<f64>> = Arc::new(FnDensity::new(2, |_: &[f64]| 0.0));
        let problem = ProblemSpec::with_prior_importance(g.clone(), like).unwrap();
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| g.draw(&mut rng)).collect();
        let e = Ensemble::from_points(&problem, pts).unwrap();
        let w = vec![1.0 / n as f64; n];
        let target = TemperedTarget::new(0.0).unwrap();
        let out = mutate_stage(&problem, &e, &w, &target, &ProposalState::new(0.5, 2.0), 3, StreamKey::new(8), true).unwrap();
        let m = out.ensemble.mean();
        let c = out.ensemble.covariance();
        for (i, (mu, var)) in [(1.0, 4.0), (-2.0, 0.25)].into_iter().enumerate() {
            // resampling duplicates inflate the standard error; allow 4 SE of a sample of n/2
            let se = (var / (n as f64 / 2.0)).sqrt();
            assert!((m[i] - mu).abs() < 4.0 * se, "mean {i}: {}", m[i]);
            let se_var = var * (2.0 / (n as f64 / 2.0)).sqrt();
            assert!((c[(i, i)] - var).abs() < 4.0 * se_var, "var {i}: {}", c[(i, i)]);
        }
        assert_eq!(out.evaluations, 3 * n);
        assert_eq!(out.acceptance_rate, out.accepted as f64 / (3 * n) as f64);
        assert!(out.acceptance_rate > 0.0 && out.acceptance_rate <= 1.0);
    }

    #[test]
    fn mutation_independent_of_worker_count() {
        let g = Arc::new(DiagGaussian::isotropic(3, 0.0, 2.0).unwrap());
        let like: Arc<dyn LogDensity<f64>> = Arc::new(DiagGaussian::isotropic(3, 1.0, 1.0).unwrap());
        let problem = ProblemSpec::with_prior_importance(g.clone(), like).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pts: Vec<Vec<f64>> = (0..500).map(|_| g.draw(&mut rng)).collect();
        let e = Ensemble::from_points(&problem, pts).unwrap();
        let lw = crate::ensemble::log_weights(&e, 0.0, 0.3).unwrap();
        let w = crate::ensemble::normalized_weights(&lw);
        let target = TemperedTarget::new(0.3).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mutate_stage(&problem, &e, &w, &target, &ProposalState::default(), 2, StreamKey::new(5), true).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(8));
        assert_eq!(one, run(3));
    }

    #[test]
    fn zero_steps_rejected() {
        let problem = box_problem();
        let pts = vec![vec![0.0], vec![0.5]];
        let e = Ensemble::from_points(&problem, pts).unwrap();
        let target = TemperedTarget::new(1.0).unwrap();
        assert!(mutate_stage(&problem, &e, &[0.5, 0.5], &target, &ProposalState::default(), 0, StreamKey::new(1), true).is_err());
    }
}
