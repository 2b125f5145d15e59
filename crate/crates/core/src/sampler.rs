//! End-to-end driver: tempered importance sampling from `q` to the posterior.
//!
//! Each stage picks the next `β` from the weight CoV, records the stage
//! evidence, resamples, and mutates every resampled point with a short
//! Metropolis-Hastings chain. With `q` equal to the prior this is classic
//! transitional MCMC. There is no burn-in: the ensemble at `β = 1` is the
//! posterior sample.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::density::{Gaussian, LogDensity, ProblemSpec, SampleableDensity};
use crate::ensemble::{effective_sample_size, normalized_weights, Ensemble};
use crate::error::{Error, Result};
use crate::mutate::{mutate_stage, regularize_cov, ProposalState, TemperedTarget};
use crate::rng::{derive_seed, StreamKey, TAG_INIT, TAG_REPLICATE, TAG_SEQUENCE, TAG_STAGE};
use crate::scalar::Real;
use crate::schedule::{next_beta, stage_evidence, total_log_evidence, EvidenceAccumulator, ScheduleConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig<T> {
    /// Ensemble size.
    pub n: usize,
    pub target_cov: T,
    /// Metropolis-Hastings steps per point per stage.
    pub chain_steps: usize,
    pub seed: u64,
    pub max_stages: usize,
    pub gamma_sq_init: T,
    pub adapt: bool,
    pub feedback_gain: T,
    pub bisection_tol: T,
    pub max_bisection_iters: usize,
}

impl<T: Real> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            n: 5000,
            target_cov: T::lit(0.2),
            chain_steps: 1,
            seed: 0,
            max_stages: 1000,
            gamma_sq_init: T::lit(0.04),
            adapt: true,
            feedback_gain: T::lit(2.0),
            bisection_tol: T::lit(1e-10),
            max_bisection_iters: 200,
        }
    }
}

impl<T: Real> SamplerConfig<T> {
    pub fn schedule(&self) -> ScheduleConfig<T> {
        ScheduleConfig {
            target_cov: self.target_cov,
            bisection_tol: self.bisection_tol,
            max_bisection_iters: self.max_bisection_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.chain_steps == 0 {
            return Err(Error::Config("chain_steps must be at least 1".into()));
        }
        if self.max_stages == 0 {
            return Err(Error::Config("max_stages must be positive".into()));
        }
        if !(self.gamma_sq_init > T::zero() && self.gamma_sq_init.is_finite()) {
            return Err(Error::Config("gamma_sq_init must be positive".into()));
        }
        if !self.feedback_gain.is_finite() {
            return Err(Error::Config("feedback_gain must be finite".into()));
        }
        self.schedule().validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Diagnostics of one tempering stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageRecord<T> {
    pub stage_index: usize,
    pub beta: T,
    pub achieved_cov: T,
    pub log_stage_evidence: T,
    pub ess: T,
    pub acceptance_rate: T,
    pub gamma_sq: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<T> {
    pub final_ensemble: Ensemble<T>,
    pub log_evidence: T,
    pub stages: Vec<StageRecord<T>>,
    /// Initial fill plus one per MH proposal: `n (1 + Σ_stages N)`.
    pub total_density_evaluations: usize,
}

impl<T: Real> RunResult<T> {
    pub fn betas(&self) -> Vec<T> {
        self.stages.iter().map(|s| s.beta).collect()
    }
}

/// A failed run together with the stages completed before the failure.
#[derive(Clone, Debug, PartialEq)]
pub struct RunError<T> {
    pub error: Error,
    pub stages: Vec<StageRecord<T>>,
}

impl<T: fmt::Debug> fmt::Display for RunError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed stages)", self.error, self.stages.len())
    }
}

impl<T: fmt::Debug> std::error::Error for RunError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl<T> From<Error> for RunError<T> {
    fn from(error: Error) -> Self {
        Self {
            error,
            stages: Vec::new(),
        }
    }
}

/// Runs the sampler from `problem.importance()` to the posterior.
pub fn run_gtmcmc<T: Real>(problem: &ProblemSpec<T>, cfg: &SamplerConfig<T>) -> std::result::Result<RunResult<T>, RunError<T>> {
    cfg.validate()?;
    let root = StreamKey::new(cfg.seed);
    let init = root.child(TAG_INIT);
    let importance = problem.importance();
    let points: Vec<Vec<T>> = (0..cfg.n)
        .into_par_iter()
        .map(|l| importance.draw(&mut init.child(l as u64).rng()))
        .collect();
    let mut ensemble = Ensemble::from_points(problem, points)?;
    let mut evaluations = cfg.n;

    let schedule = cfg.schedule();
    let mut proposal = ProposalState::new(cfg.gamma_sq_init, cfg.feedback_gain);
    let mut evidence = EvidenceAccumulator::new();
    let mut stages: Vec<StageRecord<T>> = Vec::new();
    let mut beta = T::zero();
    let stage_root = root.child(TAG_STAGE);

    while beta < T::one() {
        let k = stages.len();
        let fail = |error: Error, stages: &Vec<StageRecord<T>>| RunError {
            error,
            stages: stages.clone(),
        };
        if k >= cfg.max_stages {
            return Err(fail(Error::MaxStagesExceeded(cfg.max_stages), &stages));
        }
        let step = next_beta(&ensemble, beta, &schedule).map_err(|e| fail(e, &stages))?;
        let log_s = stage_evidence(&step.log_weights);
        let w = normalized_weights(&step.log_weights);
        let ess = effective_sample_size(&w);
        let target = TemperedTarget::new(step.beta).map_err(|e| fail(e, &stages))?;
        let moved = mutate_stage(
            problem,
            &ensemble,
            &w,
            &target,
            &proposal,
            cfg.chain_steps,
            stage_root.child(k as u64),
            cfg.adapt,
        )
        .map_err(|e| fail(e, &stages))?;

        evidence.push(log_s);
        stages.push(StageRecord {
            stage_index: k,
            beta: step.beta,
            achieved_cov: step.achieved_cov,
            log_stage_evidence: log_s,
            ess,
            acceptance_rate: moved.acceptance_rate,
            gamma_sq: moved.gamma_sq_used,
        });
        evaluations += moved.evaluations;
        proposal = moved.proposal;
        ensemble = moved.ensemble;
        beta = step.beta;
    }

    let log_evidence = total_log_evidence(&evidence)?;
    Ok(RunResult {
        final_ensemble: ensemble,
        log_evidence,
        stages,
        total_density_evaluations: evaluations,
    })
}

/// Classic transitional MCMC: [`run_gtmcmc`] with the prior as importance density.
pub fn run_tmcmc<T: Real>(
    prior: Arc<dyn SampleableDensity<T>>,
    likelihood: Arc<dyn LogDensity<T>>,
    cfg: &SamplerConfig<T>,
) -> std::result::Result<RunResult<T>, RunError<T>> {
    let problem = ProblemSpec::with_prior_importance(prior, likelihood)?;
    run_gtmcmc(&problem, cfg)
}

/// Moment-matched Gaussian with covariance inflated by `inflation²`, then
/// regularized.
pub fn fit_gaussian_importance<T: Real>(e: &Ensemble<T>, inflation: T) -> Result<Gaussian<T>> {
    if !(inflation >= T::one() && inflation.is_finite()) {
        return Err(Error::Config(format!("inflation must be >= 1, got {inflation}")));
    }
    if e.len() < e.dim() + 2 {
        return Err(Error::Config(format!(
            "need at least {} points to fit a {}-dimensional Gaussian",
            e.dim() + 2,
            e.dim()
        )));
    }
    let cov = e.covariance().scaled(inflation * inflation);
    let reg = regularize_cov(&cov)?;
    Gaussian::new(e.mean(), reg.matrix)
}

/// Prior of a problem in a sequence; only the first needs to be sampleable.
#[derive(Clone, Debug)]
pub enum Prior<T: Real> {
    Sampleable(Arc<dyn SampleableDensity<T>>),
    Density(Arc<dyn LogDensity<T>>),
}

impl<T: Real> Prior<T> {
    pub fn density(&self) -> Arc<dyn LogDensity<T>> {
        match self {
            Prior::Sampleable(p) => p.clone(),
            Prior::Density(p) => p.clone(),
        }
    }

    pub fn sampler(&self) -> Option<Arc<dyn SampleableDensity<T>>> {
        match self {
            Prior::Sampleable(p) => Some(p.clone()),
            Prior::Density(_) => None,
        }
    }
}

/// One member of a sequence of related inverse problems.
#[derive(Clone, Debug)]
pub struct SequenceProblem<T: Real> {
    pub prior: Prior<T>,
    pub likelihood: Arc<dyn LogDensity<T>>,
}

#[derive(Clone, Debug)]
pub struct SequenceOutcome<T: Real> {
    pub results: Vec<RunResult<T>>,
    /// Index and error of the first failing problem; later problems are not run.
    pub failure: Option<(usize, RunError<T>)>,
}

/// Seed used for entry `index` of a sequence. Entry 0 uses the base seed.
pub fn sequence_seed(base: u64, index: usize) -> u64 {
    if index == 0 {
        base
    } else {
        derive_seed(base, TAG_SEQUENCE, index as u64)
    }
}

/// Solves a sequence of problems, seeding each one's importance density
/// with a Gaussian fitted to the previous posterior ensemble. The first
/// problem uses its prior as importance density.
pub fn run_sequence<T: Real>(
    problems: &[SequenceProblem<T>],
    cfg: &SamplerConfig<T>,
    inflation: T,
) -> Result<SequenceOutcome<T>> {
    let first = problems
        .first()
        .ok_or_else(|| Error::Config("sequence is empty".into()))?;
    let dim = first.prior.density().dim();
    if problems
        .iter()
        .any(|p| p.prior.density().dim() != dim || p.likelihood.dim() != dim)
    {
        return Err(Error::Config("all problems in a sequence must share the dimension".into()));
    }
    let first_importance = first
        .prior
        .sampler()
        .ok_or_else(|| Error::Config("the first problem in a sequence needs a sampleable prior".into()))?;
    if !(inflation >= T::one()) {
        return Err(Error::Config("inflation must be >= 1".into()));
    }

    let mut results = Vec::with_capacity(problems.len());
    let mut importance: Arc<dyn SampleableDensity<T>> = first_importance;
    for (i, p) in problems.iter().enumerate() {
        let spec = ProblemSpec::new(p.prior.density(), p.likelihood.clone(), importance.clone())?;
        let run_cfg = cfg.with_seed(sequence_seed(cfg.seed, i));
        match run_gtmcmc(&spec, &run_cfg) {
            Ok(r) => {
                if i + 1 < problems.len() {
                    match fit_gaussian_importance(&r.final_ensemble, inflation) {
                        Ok(g) => importance = Arc::new(g),
                        Err(error) => {
                            results.push(r);
                            return Ok(SequenceOutcome {
                                results,
                                failure: Some((i + 1, error.into())),
                            });
                        }
                    }
                }
                results.push(r);
            }
            Err(e) => {
                return Ok(SequenceOutcome {
                    results,
                    failure: Some((i, e)),
                })
            }
        }
    }
    Ok(SequenceOutcome {
        results,
        failure: None,
    })
}

/// Baseline for [`run_sequence`]: every problem solved independently from its
/// own prior, with the same per-entry seeds.
pub fn run_sequence_independent<T: Real>(
    problems: &[SequenceProblem<T>],
    cfg: &SamplerConfig<T>,
) -> Result<SequenceOutcome<T>> {
    let mut results = Vec::with_capacity(problems.len());
    for (i, p) in problems.iter().enumerate() {
        let prior = p
            .prior
            .sampler()
            .ok_or_else(|| Error::Config(format!("problem {i} has no sampleable prior")))?;
        match run_tmcmc(prior, p.likelihood.clone(), &cfg.with_seed(sequence_seed(cfg.seed, i))) {
            Ok(r) => results.push(r),
            Err(e) => {
                return Ok(SequenceOutcome {
                    results,
                    failure: Some((i, e)),
                })
            }
        }
    }
    Ok(SequenceOutcome {
        results,
        failure: None,
    })
}

/// Analytic reference values for replicate error metrics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Truth<T> {
    pub mean: Option<Vec<T>>,
    pub log_evidence: Option<T>,
}

/// Outcome of one successful replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord<T> {
    pub index: usize,
    pub seed: u64,
    pub stages: usize,
    pub log_evidence: T,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    pub density_evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateSummary<T> {
    pub records: Vec<ReplicateRecord<T>>,
    /// `(index, seed, error)` of failed replicates.
    pub failures: Vec<(usize, u64, Error)>,
    pub mean_stages: f64,
    pub mean_log_evidence: T,
    /// Per-dimension `sqrt(mean_r (m̂_r − m)²)`.
    pub mean_rmse: Option<Vec<T>>,
    /// Root of the dimension-averaged squared error.
    pub mean_rmse_overall: Option<T>,
    /// `RMSE(Ẑ) / Z`.
    pub evidence_nrmse: Option<T>,
}

/// Seed of replicate `index`; distinct for distinct indices.
pub fn replicate_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, TAG_REPLICATE, index as u64)
}

/// Repeats a run `replicates` times with derived seeds and aggregates error
/// statistics against `truth`. Replicate failures are recorded; the call
/// fails, with the first replicate's error, only if every replicate fails.
pub fn run_replicates<T: Real>(
    problem: &ProblemSpec<T>,
    cfg: &SamplerConfig<T>,
    replicates: usize,
    truth: &Truth<T>,
) -> Result<ReplicateSummary<T>> {
    if replicates < 2 {
        return Err(Error::Config(format!("need at least 2 replicates, got {replicates}")));
    }
    if let Some(m) = &truth.mean {
        if m.len() != problem.dim() {
            return Err(Error::Config("truth mean has the wrong dimension".into()));
        }
    }
    cfg.validate()?;
    let outcomes: Vec<_> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r);
            (r, seed, run_gtmcmc(problem, &cfg.with_seed(seed)))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, out) in outcomes {
        match out {
            Ok(run) => {
                let cov = run.final_ensemble.covariance();
                records.push(ReplicateRecord {
                    index,
                    seed,
                    stages: run.stages.len(),
                    log_evidence: run.log_evidence,
                    mean: run.final_ensemble.mean(),
                    variance: cov.diagonal(),
                    density_evaluations: run.total_density_evaluations,
                });
            }
            Err(e) => failures.push((index, seed, e.error)),
        }
    }
    if records.is_empty() {
        return Err(failures.swap_remove(0).2);
    }
    Ok(summarize_replicates(records, failures, truth))
}

pub fn summarize_replicates<T: Real>(
    records: Vec<ReplicateRecord<T>>,
    failures: Vec<(usize, u64, Error)>,
    truth: &Truth<T>,
) -> ReplicateSummary<T> {
    let r = T::count(records.len());
    let mean_stages = records.iter().map(|x| x.stages as f64).sum::<f64>() / records.len() as f64;
    let mean_log_evidence = records.iter().fold(T::zero(), |a, x| a + x.log_evidence) / r;

    let mean_rmse = truth.mean.as_ref().map(|m| {
        (0..m.len())
            .map(|i| {
                let sq = records
                    .iter()
                    .fold(T::zero(), |a, x| a + (x.mean[i] - m[i]) * (x.mean[i] - m[i]));
                (sq / r).sqrt()
            })
            .collect::<Vec<T>>()
    });
    let mean_rmse_overall = mean_rmse.as_ref().map(|v| {
        let d = T::count(v.len());
        (v.iter().fold(T::zero(), |a, &e| a + e * e) / d).sqrt()
    });
    let evidence_nrmse = truth.log_evidence.map(|lz| {
        let sq = records.iter().fold(T::zero(), |a, x| {
            let rel = (x.log_evidence - lz).exp() - T::one();
            a + rel * rel
        });
        (sq / r).sqrt()
    });
    ReplicateSummary {
        records,
        failures,
        mean_stages,
        mean_log_evidence,
        mean_rmse,
        mean_rmse_overall,
        evidence_nrmse,
    }
}

/// Searches (log-scale bisection) for a target CoV whose pilot run at
/// `cfg.seed` takes exactly `target_stages` stages, or as close as the
/// search can get.
pub fn tune_cov_for_stages<T: Real>(
    problem: &ProblemSpec<T>,
    cfg: &SamplerConfig<T>,
    target_stages: usize,
) -> std::result::Result<T, RunError<T>> {
    let stages_at = |c: T| -> std::result::Result<usize, RunError<T>> {
        let pilot = SamplerConfig {
            target_cov: c,
            ..cfg.clone()
        };
        Ok(run_gtmcmc(problem, &pilot)?.stages.len())
    };
    let mut lo = T::lit(1e-2);
    let mut hi = T::lit(50.0);
    let mut m_lo = stages_at(lo)?;
    let mut m_hi = stages_at(hi)?;
    if m_hi >= target_stages {
        return Ok(hi);
    }
    if m_lo <= target_stages {
        return Ok(lo);
    }
    for _ in 0..40 {
        let mid = (lo.ln() + (hi.ln() - lo.ln()) * T::lit(0.5)).exp();
        let m = stages_at(mid)?;
        if m == target_stages {
            return Ok(mid);
        }
        if m > target_stages {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
            m_hi = m;
        }
        if hi / lo < T::lit(1.0 + 1e-6) {
            break;
        }
    }
    Ok(if m_lo.abs_diff(target_stages) < m_hi.abs_diff(target_stages) {
        lo
    } else {
        hi
    })
}
