//! Oracle property suites behind the `validate` command.

use std::fmt;

use gtmcmc::oracle::{gaussian_posterior, mixture_evidence};
use gtmcmc::problems::{bimodal2d, gauss4d, gaussian_nd_params, GaussImportance};
use gtmcmc::rng::{standard_normal, uniform, StreamKey, StreamRng};
use gtmcmc::{
    cov_of_weights, gaussian_evidence, grid_posterior, kl_monotonicity_trace, run_gtmcmc, GaussianParams, LogWeights,
    Matrix, ProblemSpec, SamplerConfig,
};

/// Relative slack allowed before a monotonicity step counts as a violation.
pub const MONOTONE_SLACK: f64 = 1e-12;
const GRID_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub violations: usize,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, {} violations; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.violations,
            self.detail
        )
    }
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub seed: u64,
    pub kl_cases: usize,
    pub cov_cases: usize,
    /// Test hook: evaluate κ on a reversed Δβ grid so the suite must fail.
    pub corrupt_kappa: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            kl_cases: 1000,
            cov_cases: 1000,
            corrupt_kappa: false,
        }
    }
}

pub fn run_suites(opts: &ValidateOptions) -> Vec<PropertyResult> {
    vec![
        kl_monotonicity(opts.seed, opts.kl_cases),
        cov_monotonicity(opts.seed, opts.cov_cases, 1000, opts.corrupt_kappa),
        conjugate_evidence(opts.seed),
        grid_vs_analytic(opts.seed),
    ]
}

fn normal(rng: &mut StreamRng) -> f64 {
    standard_normal(rng)
}

fn unif(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform::<f64>(rng)
}

/// Random SPD matrix `s·(B Bᵀ/d + 0.05 I)` with log-uniform scale `s`.
fn random_spd(rng: &mut StreamRng, d: usize) -> Matrix<f64> {
    let b: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    let s = unif(rng, -2.0, 2.0).exp();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = (0..d).map(|k| b[i][k] * b[j][k]).sum();
            m[(i, j)] = s * (dot / d as f64 + if i == j { 0.05 } else { 0.0 });
        }
    }
    m
}

fn random_gaussian(rng: &mut StreamRng, d: usize) -> GaussianParams<f64> {
    let mean = (0..d).map(|_| 3.0 * normal(rng)).collect();
    GaussianParams::new(mean, random_spd(rng, d)).expect("random SPD matrix")
}

fn beta_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|j| j as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// `D_KL(posterior ‖ p_β)` must strictly decrease in β for random Gaussian
/// prior, likelihood and importance triples.
pub fn kl_monotonicity(seed: u64, cases: usize) -> PropertyResult {
    let key = StreamKey::new(seed).child(0x4b4c);
    let betas = beta_grid();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut errors = 0;
    for c in 0..cases {
        let mut rng = key.child(c as u64).rng();
        let d = 1 + (c % 4);
        let prior = random_gaussian(&mut rng, d);
        let like = random_gaussian(&mut rng, d);
        let q = random_gaussian(&mut rng, d);
        match kl_monotonicity_trace(&prior, &like, &q, &betas) {
            Ok(kl) => {
                for w in kl.windows(2) {
                    let step = (w[1] - w[0]) / w[0].abs().max(1.0);
                    worst = worst.max(step);
                    if !(w[1] - w[0] <= MONOTONE_SLACK * w[0].abs().max(1.0)) {
                        violations += 1;
                    }
                }
            }
            Err(_) => errors += 1,
        }
    }
    PropertyResult {
        name: "kl_monotonicity",
        passed: violations == 0 && errors == 0 && cases > 0,
        cases,
        violations: violations + errors,
        detail: format!("largest relative step {worst:.3e} (must be <= {MONOTONE_SLACK:e}), {errors} oracle errors"),
    }
}

/// Random log-ratio vector: Gaussian body with random scale, occasional
/// heavy tails and a few zero-weight (−∞) entries.
fn random_ratios(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    let scale = unif(rng, -3.0, 3.0).exp();
    let shift = 10.0 * normal(rng);
    let heavy = uniform::<f64>(rng) < 0.3;
    let zero_rate = if uniform::<f64>(rng) < 0.3 { 0.05 } else { 0.0 };
    (0..n)
        .map(|_| {
            let z = normal(rng);
            if uniform::<f64>(rng) < zero_rate {
                f64::NEG_INFINITY
            } else if heavy {
                shift + scale * z * z * z
            } else {
                shift + scale * z
            }
        })
        .collect()
}

fn kappa_at(ratios: &[f64], dbeta: f64) -> f64 {
    let lw = ratios
        .iter()
        .map(|&r| if r == f64::NEG_INFINITY { r } else { dbeta * r })
        .collect();
    match LogWeights::new(lw) {
        Ok(lw) => cov_of_weights(&lw),
        Err(_) => f64::NAN,
    }
}

/// κ(Δβ) must not decrease along a Δβ grid for fixed random ensembles.
pub fn cov_monotonicity(seed: u64, cases: usize, weights: usize, corrupt: bool) -> PropertyResult {
    let key = StreamKey::new(seed).child(0x434f56);
    let grid = beta_grid();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut max_kappa: f64 = 0.0;
    for c in 0..cases {
        let mut rng = key.child(c as u64).rng();
        let ratios = random_ratios(&mut rng, weights);
        let kappas: Vec<f64> = grid
            .iter()
            .map(|&b| kappa_at(&ratios, if corrupt { 1.0 - b } else { b }))
            .collect();
        for w in kappas.windows(2) {
            let step = w[1] - w[0];
            worst = worst.min(step / w[0].abs().max(1.0));
            max_kappa = max_kappa.max(w[1]);
            if !(step >= -MONOTONE_SLACK * w[0].abs().max(1.0)) {
                violations += 1;
            }
        }
    }
    PropertyResult {
        name: "cov_monotonicity",
        passed: violations == 0 && cases > 0,
        cases,
        violations,
        detail: format!("smallest relative step {worst:.3e} (must be >= -{MONOTONE_SLACK:e}), largest kappa {max_kappa:.3e}"),
    }
}

fn grid_box(post: &GaussianParams<f64>, half_widths: f64) -> (Vec<f64>, Vec<f64>) {
    let d = post.dim();
    let sd: Vec<f64> = (0..d).map(|i| post.cov()[(i, i)].sqrt()).collect();
    let lo = (0..d).map(|i| post.mean()[i] - half_widths * sd[i]).collect();
    let hi = (0..d).map(|i| post.mean()[i] + half_widths * sd[i]).collect();
    (lo, hi)
}

fn random_conjugate(rng: &mut StreamRng, d: usize) -> (GaussianParams<f64>, GaussianParams<f64>) {
    (random_gaussian(rng, d), random_gaussian(rng, d))
}

fn conjugate_problem(prior: &GaussianParams<f64>, like: &GaussianParams<f64>) -> ProblemSpec<f64> {
    let p = prior.to_density().expect("prior");
    let l = like.to_density().expect("likelihood");
    let q = std::sync::Arc::new(p.clone());
    ProblemSpec::new(std::sync::Arc::new(p), std::sync::Arc::new(l), q).expect("problem")
}

/// Closed-form evidence against quadrature on random 1-D and 2-D pairs, and
/// against the sampler when it starts from the exact posterior.
pub fn conjugate_evidence(seed: u64) -> PropertyResult {
    let key = StreamKey::new(seed).child(0x45564944);
    let mut worst_grid: f64 = 0.0;
    let mut violations = 0;
    let mut cases = 0;
    for c in 0..12 {
        let mut rng = key.child(c).rng();
        let d = 1 + (c as usize % 2);
        let (prior, like) = random_conjugate(&mut rng, d);
        let (Ok(post), Ok(z)) = (gaussian_posterior(&prior, &like), gaussian_evidence(&prior, &like)) else {
            violations += 1;
            continue;
        };
        let (lo, hi) = grid_box(&post, 14.0);
        let cells = if d == 1 { 4001 } else { 601 };
        cases += 1;
        match grid_posterior(&conjugate_problem(&prior, &like), &lo, &hi, cells) {
            Ok(g) => {
                let err = (g.log_evidence - z).abs();
                worst_grid = worst_grid.max(err);
                if err > 1e-6 {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }

    let mut worst_run: f64 = 0.0;
    let (prior, like) = gaussian_nd_params::<f64>(4).expect("gauss4d parameters");
    let z = gaussian_evidence(&prior, &like).expect("evidence");
    let problem = gauss4d::<f64>(GaussImportance::Posterior).expect("gauss4d");
    for s in 0..4 {
        cases += 1;
        let cfg = SamplerConfig {
            n: 500,
            target_cov: 0.5,
            seed: seed.wrapping_add(s),
            ..Default::default()
        };
        match run_gtmcmc(&problem, &cfg) {
            Ok(r) => {
                let err = (r.log_evidence - z).abs();
                worst_run = worst_run.max(err);
                if err > 1e-9 || r.stages.len() != 1 {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    PropertyResult {
        name: "conjugate_evidence",
        passed: violations == 0,
        cases,
        violations,
        detail: format!(
            "max |log Z grid - log Z exact| {worst_grid:.3e} (tol 1e-6), max |log Z sampler - log Z exact| {worst_run:.3e} (tol 1e-9)"
        ),
    }
}

/// Grid posterior moments against closed-form posteriors, and grid mode
/// masses of the bimodal problem against the mixture oracle.
pub fn grid_vs_analytic(seed: u64) -> PropertyResult {
    let key = StreamKey::new(seed).child(0x47524944);
    let mut worst_mean: f64 = 0.0;
    let mut violations = 0;
    let mut cases = 0;
    for c in 0..12 {
        let mut rng = key.child(c).rng();
        let d = 1 + (c as usize % 2);
        let (prior, like) = random_conjugate(&mut rng, d);
        let Ok(post) = gaussian_posterior(&prior, &like) else {
            violations += 1;
            continue;
        };
        let (lo, hi) = grid_box(&post, 14.0);
        let cells = if d == 1 { 4001 } else { 601 };
        cases += 1;
        match grid_posterior(&conjugate_problem(&prior, &like), &lo, &hi, cells) {
            Ok(g) => {
                let m = g.mean();
                for i in 0..d {
                    let err = (m[i] - post.mean()[i]).abs() / post.cov()[(i, i)].sqrt();
                    worst_mean = worst_mean.max(err);
                    if err > 1e-6 {
                        violations += 1;
                    }
                }
            }
            Err(_) => violations += 1,
        }
    }

    cases += 1;
    let mut mass_err = f64::NAN;
    let bimodal = bimodal2d::<f64>(None).expect("bimodal2d");
    let prior = GaussianParams::isotropic(2, 0.0, 100.0).expect("prior");
    let comps = vec![
        (0.25, GaussianParams::new(vec![10.0, 0.0], Matrix::identity(2)).expect("component")),
        (0.75, GaussianParams::new(vec![0.0, 10.0], Matrix::identity(2)).expect("component")),
    ];
    match (
        grid_posterior(&bimodal, &[-20.0, -20.0], &[30.0, 30.0], 1500),
        mixture_evidence(&prior, &comps),
    ) {
        (Ok(g), Ok(mp)) => {
            let upper = g.mass_where(|x| x[1] > x[0]);
            mass_err = (upper - mp.components[1].0).abs();
            let ev_err = (g.log_evidence - mp.log_evidence).abs();
            if mass_err > 1e-6 || ev_err > 1e-6 {
                violations += 1;
            }
        }
        _ => violations += 1,
    }
    PropertyResult {
        name: "grid_vs_analytic",
        passed: violations == 0,
        cases,
        violations,
        detail: format!(
            "max |grid mean - exact mean| / sd {worst_mean:.3e} (tol 1e-6), bimodal mode-mass error {mass_err:.3e} (tol 1e-6)"
        ),
    }
}
