//! Adaptive tempering schedule and evidence bookkeeping.
//!
//! The next tempering level is the root of `κ(β) = target` on `(β_k, 1]`,
//! where `κ` is the coefficient of variation of the stage weights. `κ` is
//! non-decreasing in `β`, so plain bisection is enough. If even `β = 1`
//! stays below the target the schedule jumps straight to 1, which is also
//! how a run terminates. `κ` is always computed from the cached ensemble
//! logs; the schedule never evaluates a density.

use crate::ensemble::{cov_of_weights, log_mean_exp, scale_ratios, Ensemble, LogWeights};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleConfig<T> {
    pub target_cov: T,
    /// Bisection stops once the bracket on `β` is narrower than this.
    pub bisection_tol: T,
    pub max_bisection_iters: usize,
}

impl<T: Real> ScheduleConfig<T> {
    pub fn new(target_cov: T) -> Self {
        Self {
            target_cov,
            bisection_tol: T::lit(1e-10),
            max_bisection_iters: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_cov > T::zero() && self.target_cov.is_finite()) {
            return Err(Error::Config(format!(
                "target_cov must be positive, got {}",
                self.target_cov
            )));
        }
        if !(self.bisection_tol > T::zero() && self.bisection_tol < T::one()) {
            return Err(Error::Config("bisection_tol must lie in (0, 1)".into()));
        }
        if self.max_bisection_iters == 0 {
            return Err(Error::Config("max_bisection_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one schedule step.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaStep<T> {
    pub beta: T,
    /// Log-weights for `beta_k → beta`, reused by the caller.
    pub log_weights: LogWeights<T>,
    pub achieved_cov: T,
}

/// Chooses the next tempering level by bisection on the weight CoV.
pub fn next_beta<T: Real>(e: &Ensemble<T>, beta_k: T, cfg: &ScheduleConfig<T>) -> Result<BetaStep<T>> {
    next_beta_from(e, beta_k, cfg, T::one())
}

/// Like [`next_beta`] but starts from the bracket `(β_k, min(1, β_k + initial_step)]`
/// and doubles the step until the target is bracketed.
pub fn next_beta_from<T: Real>(
    e: &Ensemble<T>,
    beta_k: T,
    cfg: &ScheduleConfig<T>,
    initial_step: T,
) -> Result<BetaStep<T>> {
    cfg.validate()?;
    if !(beta_k >= T::zero() && beta_k < T::one()) {
        return Err(Error::Config(format!("beta_k must lie in [0, 1), got {beta_k}")));
    }
    let ratios = e.log_ratios()?;
    // surfaces AllWeightsZero before any bisection
    scale_ratios(&ratios, T::one())?;
    let kappa = |beta: T| -> Result<T> { Ok(cov_of_weights(&scale_ratios(&ratios, beta - beta_k)?)) };
    let beta = bisect_beta(beta_k, cfg, initial_step, kappa)?;
    let log_weights = scale_ratios(&ratios, beta - beta_k)?;
    let achieved_cov = cov_of_weights(&log_weights);
    Ok(BetaStep {
        beta,
        log_weights,
        achieved_cov,
    })
}

/// Root finder behind [`next_beta`], generic over the `κ(β)` evaluator.
///
/// Returns the upper end of the final bracket, so `κ(β) ≥ target` whenever
/// `β < 1`. Raises [`Error::NonMonotoneCov`] if an evaluation falls outside
/// the range spanned by the current bracket ends.
pub fn bisect_beta<T: Real>(
    beta_k: T,
    cfg: &ScheduleConfig<T>,
    initial_step: T,
    mut kappa: impl FnMut(T) -> Result<T>,
) -> Result<T> {
    let target = cfg.target_cov;
    let one = T::one();
    let kappa_one = kappa(one)?;
    if kappa_one <= target {
        return Ok(one);
    }
    // Round-off allowance: 1e-12 relative in f64, a few ulps of accumulated error in f32.
    let rel = T::lit(1e-12).max(T::lit(256.0) * T::epsilon());
    let slack = |k: T| rel * k.abs().max(one);

    let mut lo = beta_k;
    let mut k_lo = T::zero();
    let mut step = initial_step.max(cfg.bisection_tol);
    let mut hi;
    let mut k_hi;
    loop {
        hi = (beta_k + step).min(one);
        k_hi = if hi == one { kappa_one } else { kappa(hi)? };
        if k_hi + slack(k_hi) < k_lo {
            return Err(non_monotone(lo, k_lo, hi, k_hi));
        }
        if k_hi > target {
            break;
        }
        lo = hi;
        k_lo = k_hi;
        step = step + step;
    }

    let half = T::lit(0.5);
    let mut iters = 0;
    while hi - lo >= cfg.bisection_tol && iters < cfg.max_bisection_iters {
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let k_mid = kappa(mid)?;
        if k_mid + slack(k_mid) < k_lo || k_mid > k_hi + slack(k_hi) {
            return Err(non_monotone(lo, k_lo, mid, k_mid));
        }
        if k_mid > target {
            hi = mid;
            k_hi = k_mid;
        } else {
            lo = mid;
            k_lo = k_mid;
        }
        iters += 1;
    }
    Ok(hi)
}

fn non_monotone<T: Real>(a: T, ka: T, b: T, kb: T) -> Error {
    Error::NonMonotoneCov(format!("kappa({a}) = {ka} but kappa({b}) = {kb}"))
}

/// `ln S_k = ln((1/n) Σ w_l)` for one stage.
pub fn stage_evidence<T: Real>(lw: &LogWeights<T>) -> T {
    log_mean_exp(lw)
}

/// Running product of stage evidences, kept in log space.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvidenceAccumulator<T> {
    log_terms: Vec<T>,
}

impl<T: Real> EvidenceAccumulator<T> {
    pub fn new() -> Self {
        Self { log_terms: Vec::new() }
    }

    pub fn push(&mut self, log_term: T) {
        self.log_terms.push(log_term);
    }

    pub fn log_terms(&self) -> &[T] {
        &self.log_terms
    }
}

/// `Σ_j ln S_j`.
pub fn total_log_evidence<T: Real>(acc: &EvidenceAccumulator<T>) -> Result<T> {
    if acc.log_terms.is_empty() {
        return Err(Error::State("no stages recorded in evidence accumulator".into()));
    }
    Ok(acc.log_terms.iter().fold(T::zero(), |a, &b| a + b))
}
