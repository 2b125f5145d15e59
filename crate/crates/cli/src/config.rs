//! Experiment configuration, schema `v1` (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gtmcmc::io::read_ensemble_csv;
use gtmcmc::oracle::{gaussian_evidence, gaussian_posterior, mixture_evidence};
use gtmcmc::problems::{
    bimodal2d, bimodal2d_truth, drifting_sequence, gaussian_nd, gaussian_nd_params, rosenbrock3d, GaussImportance,
};
use gtmcmc::{
    fit_gaussian_importance, DiagGaussian, Error, Gaussian, GaussianMixture, GaussianParams, LogDensity, Matrix, Prior,
    ProblemSpec, Rosenbrock3d, SampleableDensity, SamplerConfig, SequenceProblem, Truth, UniformBox,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Run,
    Replicate,
    Sequence,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Replicate => "replicate",
            Mode::Sequence => "sequence",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub mode: Mode,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub truth: Option<TruthSection>,
    #[serde(default)]
    pub sequence: SequenceSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

fn default_replicates() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Gauss4d,
    Bimodal2d,
    Rosenbrock3d,
    DriftingSequence,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub builtin: Option<Builtin>,
    pub prior: Option<DensityConfig>,
    pub likelihood: Option<DensityConfig>,
    pub importance: Option<DensityConfig>,
    /// Number of problems generated by `drifting_sequence`.
    pub steps: Option<usize>,
    /// Per-problem shift of the `drifting_sequence` likelihood mean.
    pub drift: Option<f64>,
    /// Explicit sequence members.
    pub sequence: Option<Vec<SequenceEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub likelihood: DensityConfig,
    pub prior: Option<DensityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    GaussianDiag {
        mean: Vec<f64>,
        variances: Vec<f64>,
    },
    GaussianFull {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default)]
        normalized: bool,
    },
    GaussianMixture {
        components: Vec<MixtureComponent>,
    },
    Rosenbrock3d,
    /// Importance only: the prior itself.
    Prior,
    /// Importance only: the closed-form posterior of a Gaussian prior and likelihood.
    AnalyticPosterior,
    /// Importance only: Gaussian fitted to a samples.csv file.
    Fitted {
        samples: PathBuf,
        #[serde(default = "one")]
        inflation: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub n: usize,
    pub target_cov: f64,
    pub chain_steps: usize,
    pub seed: u64,
    pub max_stages: usize,
    pub gamma_sq_init: f64,
    pub adapt: bool,
    pub feedback_gain: f64,
    pub bisection_tol: f64,
    pub max_bisection_iters: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::<f64>::default();
        Self {
            n: d.n,
            target_cov: d.target_cov,
            chain_steps: d.chain_steps,
            seed: d.seed,
            max_stages: d.max_stages,
            gamma_sq_init: d.gamma_sq_init,
            adapt: d.adapt,
            feedback_gain: d.feedback_gain,
            bisection_tol: d.bisection_tol,
            max_bisection_iters: d.max_bisection_iters,
        }
    }
}

impl SamplerSection {
    pub fn to_config(&self) -> SamplerConfig<f64> {
        SamplerConfig {
            n: self.n,
            target_cov: self.target_cov,
            chain_steps: self.chain_steps,
            seed: self.seed,
            max_stages: self.max_stages,
            gamma_sq_init: self.gamma_sq_init,
            adapt: self.adapt,
            feedback_gain: self.feedback_gain,
            bisection_tol: self.bisection_tol,
            max_bisection_iters: self.max_bisection_iters,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputSection {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub mean: Option<Vec<f64>>,
    pub log_evidence: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    None,
    Tmcmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    /// Multiplier on the standard deviations of the fitted importance density.
    pub inflation: f64,
    pub baseline: Baseline,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            inflation: 1.0,
            baseline: Baseline::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub seed: u64,
    pub kl_cases: usize,
    pub cov_cases: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            seed: 0,
            kl_cases: 1000,
            cov_cases: 1000,
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    let version: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    match version.get("schema") {
        None => return Err("missing key `schema` (expected string \"v1\")".into()),
        Some(toml::Value::String(s)) if s == SCHEMA_VERSION => {}
        Some(other) => {
            return Err(format!(
                "unsupported schema version {other} at key `schema` (expected \"{SCHEMA_VERSION}\")"
            ))
        }
    }
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    cfg.check()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Default configuration for `mode` with no problem block.
    pub fn bare(mode: Mode) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            mode,
            problem: None,
            sampler: SamplerSection::default(),
            output: OutputSection::default(),
            replicates: default_replicates(),
            truth: None,
            sequence: SequenceSection::default(),
            validate: ValidateSection::default(),
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.mode != Mode::Validate {
            let p = self
                .problem
                .as_ref()
                .ok_or_else(|| format!("missing table `problem` (required for mode \"{}\")", self.mode.name()))?;
            p.check(self.mode)?;
        }
        self.sampler
            .to_config()
            .validate()
            .map_err(|e| format!("invalid `sampler` table: {e}"))?;
        if self.mode == Mode::Replicate && self.replicates < 2 {
            return Err(format!("key `replicates` must be >= 2, got {}", self.replicates));
        }
        if !(self.sequence.inflation >= 1.0 && self.sequence.inflation.is_finite()) {
            return Err(format!(
                "key `sequence.inflation` must be a finite number >= 1, got {}",
                self.sequence.inflation
            ));
        }
        if self.output.formats.is_empty() {
            return Err("key `output.formats` must list at least one of \"csv\", \"json\"".into());
        }
        Ok(())
    }

    /// Sampler settings with an optional seed override applied.
    pub fn sampler_config(&self, seed: Option<u64>) -> SamplerConfig<f64> {
        let mut c = self.sampler.to_config();
        if let Some(s) = seed {
            c.seed = s;
        }
        c
    }
}

impl ProblemConfig {
    fn check(&self, mode: Mode) -> Result<(), String> {
        let seq_builtin = self.builtin == Some(Builtin::DriftingSequence);
        match (mode, seq_builtin || self.sequence.is_some()) {
            (Mode::Sequence, false) => {
                return Err(
                    "mode \"sequence\" needs `problem.builtin = \"drifting_sequence\"` or a `problem.sequence` list"
                        .into(),
                )
            }
            (Mode::Run | Mode::Replicate, true) => {
                return Err(format!(
                    "mode \"{}\" takes a single problem; sequence problems need mode \"sequence\"",
                    mode.name()
                ))
            }
            _ => {}
        }
        if self.builtin.is_some() {
            if self.prior.is_some() || self.likelihood.is_some() || self.sequence.is_some() {
                return Err(
                    "`problem.builtin` cannot be combined with `problem.prior`, `problem.likelihood` or `problem.sequence`"
                        .into(),
                );
            }
        } else if self.sequence.is_none() && (self.prior.is_none() || self.likelihood.is_none()) {
            return Err("`problem` needs either `builtin` or both `prior` and `likelihood`".into());
        }
        if !seq_builtin && (self.steps.is_some() || self.drift.is_some()) {
            return Err("keys `problem.steps` and `problem.drift` apply only to builtin \"drifting_sequence\"".into());
        }
        if self.sequence.is_some() || seq_builtin {
            if self.importance.is_some() {
                return Err("`problem.importance` is not used for sequences (importance densities are chained)".into());
            }
            if let Some(s) = &self.sequence {
                if s.is_empty() {
                    return Err("`problem.sequence` must not be empty".into());
                }
                if self.prior.is_none() && s[0].prior.is_none() {
                    return Err("the first sequence entry needs a `prior` (or set `problem.prior`)".into());
                }
            }
        }
        for (key, d) in [("prior", &self.prior), ("likelihood", &self.likelihood)] {
            if let Some(d) = d {
                if d.importance_only() {
                    return Err(format!("`problem.{key}.kind` = \"{}\" is only valid for `importance`", d.kind()));
                }
            }
        }
        if let Some(s) = &self.sequence {
            for (i, e) in s.iter().enumerate() {
                if e.likelihood.importance_only() || e.prior.as_ref().is_some_and(|d| d.importance_only()) {
                    return Err(format!("`problem.sequence[{i}]` uses an importance-only density kind"));
                }
            }
        }
        if let Some(DensityConfig::Fitted { inflation, .. }) = &self.importance {
            if !(*inflation >= 1.0) {
                return Err(format!("key `problem.importance.inflation` must be >= 1, got {inflation}"));
            }
        }
        Ok(())
    }
}

impl DensityConfig {
    fn kind(&self) -> &'static str {
        match self {
            DensityConfig::GaussianDiag { .. } => "gaussian_diag",
            DensityConfig::GaussianFull { .. } => "gaussian_full",
            DensityConfig::UniformBox { .. } => "uniform_box",
            DensityConfig::GaussianMixture { .. } => "gaussian_mixture",
            DensityConfig::Rosenbrock3d => "rosenbrock3d",
            DensityConfig::Prior => "prior",
            DensityConfig::AnalyticPosterior => "analytic_posterior",
            DensityConfig::Fitted { .. } => "fitted",
        }
    }

    fn importance_only(&self) -> bool {
        matches!(
            self,
            DensityConfig::Prior | DensityConfig::AnalyticPosterior | DensityConfig::Fitted { .. }
        )
    }

    /// Gaussian parameters, when the density is a Gaussian.
    fn gaussian_params(&self) -> Result<Option<GaussianParams<f64>>, Error> {
        match self {
            DensityConfig::GaussianDiag { mean, variances } => {
                Ok(Some(GaussianParams::diagonal(mean.clone(), variances)?))
            }
            DensityConfig::GaussianFull { mean, cov } => Ok(Some(GaussianParams::new(mean.clone(), matrix(cov)?)?)),
            _ => Ok(None),
        }
    }

    fn build(&self) -> Result<Arc<dyn SampleableOrNot>, Error> {
        Ok(match self {
            DensityConfig::GaussianDiag { mean, variances } => {
                Arc::new(Sampleable(Arc::new(DiagGaussian::new(mean.clone(), variances.clone())?)))
            }
            DensityConfig::GaussianFull { mean, cov } => {
                Arc::new(Sampleable(Arc::new(Gaussian::new(mean.clone(), matrix(cov)?)?)))
            }
            DensityConfig::UniformBox { lo, hi, normalized } => Arc::new(Sampleable(Arc::new(
                UniformBox::new(lo.clone(), hi.clone())?.normalized(*normalized),
            ))),
            DensityConfig::GaussianMixture { components } => {
                let comps = components
                    .iter()
                    .map(|c| Ok((c.weight, Gaussian::new(c.mean.clone(), matrix(&c.cov)?)?)))
                    .collect::<Result<Vec<_>, Error>>()?;
                Arc::new(Sampleable(Arc::new(GaussianMixture::new(comps)?)))
            }
            DensityConfig::Rosenbrock3d => Arc::new(DensityOnly(Arc::new(Rosenbrock3d))),
            DensityConfig::Prior | DensityConfig::AnalyticPosterior | DensityConfig::Fitted { .. } => {
                return Err(Error::Config(format!("density kind \"{}\" needs context", self.kind())))
            }
        })
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<Matrix<f64>, Error> {
    Matrix::from_rows(rows)
}

/// A configured density, sampleable or not.
trait SampleableOrNot: Send + Sync {
    fn density(&self) -> Arc<dyn LogDensity<f64>>;
    fn sampler(&self) -> Option<Arc<dyn SampleableDensity<f64>>>;
}

struct Sampleable(Arc<dyn SampleableDensity<f64>>);
struct DensityOnly(Arc<dyn LogDensity<f64>>);

impl SampleableOrNot for Sampleable {
    fn density(&self) -> Arc<dyn LogDensity<f64>> {
        self.0.clone()
    }
    fn sampler(&self) -> Option<Arc<dyn SampleableDensity<f64>>> {
        Some(self.0.clone())
    }
}

impl SampleableOrNot for DensityOnly {
    fn density(&self) -> Arc<dyn LogDensity<f64>> {
        self.0.clone()
    }
    fn sampler(&self) -> Option<Arc<dyn SampleableDensity<f64>>> {
        None
    }
}

/// A single inverse problem ready to run, with whatever analytic truth is known.
pub struct ResolvedProblem {
    pub spec: ProblemSpec<f64>,
    pub truth: Truth<f64>,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn fitted(base: &Path, samples: &Path, inflation: f64) -> Result<Arc<dyn SampleableDensity<f64>>, Error> {
    let path = resolve_path(base, samples);
    let file = std::fs::File::open(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let e = read_ensemble_csv::<f64, _>(file)?;
    Ok(Arc::new(fit_gaussian_importance(&e, inflation)?))
}

impl ExperimentConfig {
    fn problem_config(&self) -> Result<&ProblemConfig, Error> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::Config("missing table `problem`".into()))
    }

    /// Builds the single problem of a `run` or `replicate` configuration.
    /// `base_dir` anchors relative paths (the directory holding the config file).
    pub fn resolve_problem(&self, base_dir: &Path) -> Result<ResolvedProblem, Error> {
        let p = self.problem_config()?;
        let (spec, mut truth) = match p.builtin {
            Some(Builtin::Gauss4d) => {
                let imp = match &p.importance {
                    None | Some(DensityConfig::Prior) => Some(GaussImportance::Prior),
                    Some(DensityConfig::AnalyticPosterior) => Some(GaussImportance::Posterior),
                    Some(_) => None,
                };
                let spec = match imp {
                    Some(i) => gaussian_nd(4, i)?,
                    None => {
                        let base = gaussian_nd(4, GaussImportance::Prior)?;
                        let q = self.importance_density(base_dir, p.importance.as_ref().unwrap(), &base, None)?;
                        base.with_importance(q)?
                    }
                };
                let (prior, like) = gaussian_nd_params::<f64>(4)?;
                let truth = Truth {
                    mean: Some(gaussian_posterior(&prior, &like)?.mean().to_vec()),
                    log_evidence: Some(gaussian_evidence(&prior, &like)?),
                };
                (spec, truth)
            }
            Some(Builtin::Bimodal2d) => {
                let base = bimodal2d::<f64>(None)?;
                let spec = match &p.importance {
                    None | Some(DensityConfig::Prior) => base,
                    Some(d) => {
                        let q = self.importance_density(base_dir, d, &base, None)?;
                        base.with_importance(q)?
                    }
                };
                (spec, bimodal2d_truth()?)
            }
            Some(Builtin::Rosenbrock3d) => {
                let base = rosenbrock3d::<f64>(false)?;
                let spec = match &p.importance {
                    None | Some(DensityConfig::Prior) => base,
                    Some(d) => {
                        let q = self.importance_density(base_dir, d, &base, None)?;
                        base.with_importance(q)?
                    }
                };
                (spec, Truth::default())
            }
            Some(Builtin::DriftingSequence) => {
                return Err(Error::Config("builtin \"drifting_sequence\" is a sequence problem".into()))
            }
            None => {
                let prior_cfg = p.prior.as_ref().unwrap();
                let like_cfg = p.likelihood.as_ref().unwrap();
                let prior = prior_cfg.build()?;
                let like = like_cfg.build()?.density();
                let gp = prior_cfg.gaussian_params()?;
                let gl = like_cfg.gaussian_params()?;
                let analytic = match (&gp, &gl) {
                    (Some(a), Some(b)) => Some(gaussian_posterior(a, b)?),
                    _ => None,
                };
                let q: Arc<dyn SampleableDensity<f64>> = match p.importance.as_ref().unwrap_or(&DensityConfig::Prior) {
                    DensityConfig::Prior => prior.sampler().ok_or_else(|| {
                        Error::Config("the prior cannot be sampled; set `problem.importance`".into())
                    })?,
                    d => {
                        let tmp = ProblemSpec::new(prior.density(), like.clone(), gaussian_stub(like.dim())?)?;
                        self.importance_density(base_dir, d, &tmp, analytic.as_ref())?
                    }
                };
                let spec = ProblemSpec::new(prior.density(), like, q)?;
                let truth = match (&gp, &gl, like_cfg) {
                    (Some(a), Some(b), _) => Truth {
                        mean: Some(gaussian_posterior(a, b)?.mean().to_vec()),
                        log_evidence: Some(gaussian_evidence(a, b)?),
                    },
                    (Some(a), None, DensityConfig::GaussianMixture { components }) => {
                        let comps = components
                            .iter()
                            .map(|c| Ok((c.weight, GaussianParams::new(c.mean.clone(), matrix(&c.cov)?)?)))
                            .collect::<Result<Vec<_>, Error>>()?;
                        let total: f64 = comps.iter().map(|c| c.0).sum();
                        let comps: Vec<_> = comps.into_iter().map(|(w, g)| (w / total, g)).collect();
                        let mp = mixture_evidence(a, &comps)?;
                        let mut mean = vec![0.0; a.dim()];
                        for (w, g) in &mp.components {
                            for (m, v) in mean.iter_mut().zip(g.mean()) {
                                *m += w * v;
                            }
                        }
                        Truth {
                            mean: Some(mean),
                            log_evidence: Some(mp.log_evidence),
                        }
                    }
                    _ => Truth::default(),
                };
                (spec, truth)
            }
        };
        if let Some(t) = &self.truth {
            if t.mean.is_some() {
                truth.mean = t.mean.clone();
            }
            if t.log_evidence.is_some() {
                truth.log_evidence = t.log_evidence;
            }
        }
        if let Some(m) = &truth.mean {
            if m.len() != spec.dim() {
                return Err(Error::Config(format!(
                    "`truth.mean` has {} entries but the problem has dimension {}",
                    m.len(),
                    spec.dim()
                )));
            }
        }
        Ok(ResolvedProblem { spec, truth })
    }

    fn importance_density(
        &self,
        base_dir: &Path,
        d: &DensityConfig,
        problem: &ProblemSpec<f64>,
        analytic: Option<&GaussianParams<f64>>,
    ) -> Result<Arc<dyn SampleableDensity<f64>>, Error> {
        let q: Arc<dyn SampleableDensity<f64>> = match d {
            DensityConfig::Prior => problem.importance().clone(),
            DensityConfig::AnalyticPosterior => {
                let g = analytic.ok_or_else(|| {
                    Error::Config(
                        "importance \"analytic_posterior\" needs a Gaussian prior and likelihood (or builtin \"gauss4d\")"
                            .into(),
                    )
                })?;
                Arc::new(g.to_density()?)
            }
            DensityConfig::Fitted { samples, inflation } => fitted(base_dir, samples, *inflation)?,
            other => other
                .build()?
                .sampler()
                .ok_or_else(|| Error::Config(format!("density kind \"{}\" cannot be sampled", other.kind())))?,
        };
        if q.dim() != problem.dim() {
            return Err(Error::Config(format!(
                "importance density has dimension {} but the problem has dimension {}",
                q.dim(),
                problem.dim()
            )));
        }
        Ok(q)
    }

    /// Builds the problem list of a `sequence` configuration.
    pub fn resolve_sequence(&self) -> Result<Vec<SequenceProblem<f64>>, Error> {
        let p = self.problem_config()?;
        if p.builtin == Some(Builtin::DriftingSequence) {
            return drifting_sequence(p.steps.unwrap_or(20), p.drift.unwrap_or(0.2));
        }
        let entries = p
            .sequence
            .as_ref()
            .ok_or_else(|| Error::Config("missing `problem.sequence`".into()))?;
        let shared = p.prior.as_ref().map(|d| d.build()).transpose()?;
        entries
            .iter()
            .map(|e| {
                let prior = match (&e.prior, &shared) {
                    (Some(d), _) => d.build()?,
                    (None, Some(s)) => s.clone(),
                    (None, None) => return Err(Error::Config("sequence entry has no prior".into())),
                };
                let prior = match prior.sampler() {
                    Some(s) => Prior::Sampleable(s),
                    None => Prior::Density(prior.density()),
                };
                Ok(SequenceProblem {
                    prior,
                    likelihood: e.likelihood.build()?.density(),
                })
            })
            .collect()
    }
}

fn gaussian_stub(dim: usize) -> Result<Arc<dyn SampleableDensity<f64>>, Error> {
    Ok(Arc::new(DiagGaussian::isotropic(dim, 0.0, 1.0)?))
}
