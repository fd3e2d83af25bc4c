//! Batch experiment harness: scenario configuration, seeded replicated runs
//! over a dimension grid, estimator evaluation, CSV summaries, spectrum
//! diagnostics, and planning tables, plus the command-line front end.
//!
//! Determinism contract: a (config, master seed) pair fully determines the
//! output bytes. Experiment parameters (coefficients, eigenbases) are drawn
//! once per (scenario, p) from replicate-independent streams; replicates draw
//! only fresh designs and noise. Replicates may run in parallel; results are
//! reduced in replicate order, so scheduling cannot change the output.

use crate::datagen::{
    make_coefficients, sample_dataset, sample_orthogonal, CovarianceSpec, Dataset, SeedPolicy,
    SpectrumFamily, StreamPurpose, TaskSpec,
};
use crate::detect::fit_wtm;
use crate::error::{Error, Result};
use crate::estimators::{fit_mni, fit_pooled_mni, FittedCoefficients, TargetContext};
use crate::linalg::RealVector;
use crate::risk::{
    effective_rank_profile, excess_risk_point, free_lunch_scale, pooled_optimal_sizes,
    transfer_plan, BenignVerdict, DEFAULT_CRITICAL_INDEX_CONSTANT, DEFAULT_TAIL_COMPARABILITY,
};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// The experiment families the harness knows how to wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Scenario {
    /// Shared benign target spectrum for every task; sources differ from the
    /// target only in their coefficient contrasts.
    BenignModelShift,
    /// Benign target spectrum; each source gets its own spectrum family and a
    /// randomly drawn eigenbasis.
    BenignCovariateShift,
    /// Covariate-shift wiring with every source covariance uniformly
    /// upscaled.
    FreeLunchBenign,
    /// Isotropic covariances everywhere; the last source size is planned.
    HarmlessIsotropic,
    /// Isotropic target with uniformly upscaled isotropic sources; the last
    /// source size is planned with the scale-adjusted signal-to-noise ratio.
    FreeLunchIsotropic,
    /// Single source, isotropic, with both sample sizes chosen by the pooled
    /// sizing rule.
    PooledOptimalSizes,
}

impl Scenario {
    /// All scenario names, for error messages.
    pub const NAMES: [&'static str; 6] = [
        "BenignModelShift",
        "BenignCovariateShift",
        "FreeLunchBenign",
        "HarmlessIsotropic",
        "FreeLunchIsotropic",
        "PooledOptimalSizes",
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scenario::BenignModelShift => "BenignModelShift",
            Scenario::BenignCovariateShift => "BenignCovariateShift",
            Scenario::FreeLunchBenign => "FreeLunchBenign",
            Scenario::HarmlessIsotropic => "HarmlessIsotropic",
            Scenario::FreeLunchIsotropic => "FreeLunchIsotropic",
            Scenario::PooledOptimalSizes => "PooledOptimalSizes",
        };
        f.write_str(name)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BenignModelShift" => Ok(Scenario::BenignModelShift),
            "BenignCovariateShift" => Ok(Scenario::BenignCovariateShift),
            "FreeLunchBenign" => Ok(Scenario::FreeLunchBenign),
            "HarmlessIsotropic" => Ok(Scenario::HarmlessIsotropic),
            "FreeLunchIsotropic" => Ok(Scenario::FreeLunchIsotropic),
            "PooledOptimalSizes" => Ok(Scenario::PooledOptimalSizes),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}'; expected one of {}",
                Scenario::NAMES.join(", ")
            ))),
        }
    }
}

/// One estimator to evaluate, as selected in a config.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub enum EstimatorSelect {
    /// Target-only minimum-norm interpolator.
    Mni,
    /// Transfer interpolator from the given source task.
    Tm(usize),
    /// Pooled interpolator over the target and every source.
    PooledAll,
    /// Pooled interpolator over the target and one source.
    Pooled(usize),
    /// Cross-validation-weighted transfer ensemble.
    Wtm,
}

impl EstimatorSelect {
    /// The stable name used in CSV output.
    pub fn name(&self) -> String {
        match self {
            EstimatorSelect::Mni => "MNI".into(),
            EstimatorSelect::Tm(q) => format!("TM:{q}"),
            EstimatorSelect::PooledAll => "PooledMNI".into(),
            EstimatorSelect::Pooled(q) => format!("PooledMNI:{q}"),
            EstimatorSelect::Wtm => "WTM".into(),
        }
    }

    fn source_count(&self, total_sources: usize) -> usize {
        match self {
            EstimatorSelect::Mni => 0,
            EstimatorSelect::Tm(_) | EstimatorSelect::Pooled(_) => 1,
            EstimatorSelect::PooledAll | EstimatorSelect::Wtm => total_sources,
        }
    }
}

impl FromStr for EstimatorSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_index = |tag: &str, rest: &str| -> Result<usize> {
            let q: usize = rest.parse().map_err(|_| {
                Error::Config(format!(
                    "bad source index '{rest}' in estimator '{tag}:{rest}'"
                ))
            })?;
            if q == 0 {
                return Err(Error::Config(format!(
                    "estimator '{tag}:{rest}': source indices start at 1"
                )));
            }
            Ok(q)
        };
        match s {
            "MNI" => Ok(EstimatorSelect::Mni),
            "PooledMNI" => Ok(EstimatorSelect::PooledAll),
            "WTM" => Ok(EstimatorSelect::Wtm),
            other => {
                if let Some(rest) = other.strip_prefix("TM:") {
                    Ok(EstimatorSelect::Tm(parse_index("TM", rest)?))
                } else if let Some(rest) = other.strip_prefix("PooledMNI:") {
                    Ok(EstimatorSelect::Pooled(parse_index("PooledMNI", rest)?))
                } else {
                    Err(Error::Config(format!(
                        "unknown estimator '{other}'; expected MNI, TM:q, PooledMNI, PooledMNI:q, or WTM"
                    )))
                }
            }
        }
    }
}

impl TryFrom<String> for EstimatorSelect {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for EstimatorSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Per-task sample sizes: fixed numbers or planner-driven.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleSizes {
    /// Explicit sizes `[n0, n1, …, nQ]`.
    Explicit(Vec<usize>),
    /// Scenario-specific sizing rule (see [`resolve_auto_sizes`]).
    Auto,
}

impl<'de> Deserialize<'de> for SampleSizes {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<usize>),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::List(v) => Ok(SampleSizes::Explicit(v)),
            Raw::Word(w) if w == "auto" => Ok(SampleSizes::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "sample_sizes must be a list of counts or \"auto\", got \"{w}\""
            ))),
        }
    }
}

/// Cross-validation settings for the weighted ensemble.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CvSettings {
    /// Number of folds.
    pub k: usize,
    /// Detection tolerance.
    pub epsilon0: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            epsilon0: 0.5,
        }
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Which wiring to run.
    pub scenario: Scenario,
    /// Ambient dimensions to sweep, strictly ascending.
    pub p_grid: Vec<usize>,
    /// Per-task sample sizes or the auto rule.
    pub sample_sizes: SampleSizes,
    /// Squared norm of the shared signal vector.
    pub signal_s: f64,
    /// Per-source shift-to-signal ratios; the length sets the source count.
    pub ssr: Vec<f64>,
    /// Signal-to-noise ratio; when absent it is `signal_s / sigma_sq`.
    pub snr: Option<f64>,
    /// Noise variance shared by every task.
    pub sigma_sq: f64,
    /// Source covariance upscale factor; must be 1 except in the free-lunch
    /// scenarios, which require it above 1.
    pub alpha: f64,
    /// Independent replicates per grid point.
    pub replicates: u64,
    /// Master seed for all randomness.
    pub master_seed: u64,
    /// Estimators to evaluate.
    pub estimators: Vec<EstimatorSelect>,
    /// Fold count and tolerance for the weighted ensemble.
    pub cv: CvSettings,
    /// Run replicates on a thread pool; never changes the output bytes.
    pub parallel: bool,
}

/// Optional overrides as they appear in a config file; unset fields fall back
/// to the scenario defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    /// Scenario name; a CLI-supplied scenario takes precedence.
    pub scenario: Option<String>,
    pub p_grid: Option<Vec<usize>>,
    pub sample_sizes: Option<SampleSizes>,
    pub signal_s: Option<f64>,
    pub ssr: Option<Vec<f64>>,
    pub snr: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub alpha: Option<f64>,
    pub replicates: Option<u64>,
    pub master_seed: Option<u64>,
    pub estimators: Option<Vec<EstimatorSelect>>,
    pub cv: Option<CvSettings>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a scenario.
    pub fn scenario_default(scenario: Scenario) -> Self {
        let mut config = ExperimentConfig {
            scenario,
            p_grid: vec![100, 200, 300],
            sample_sizes: SampleSizes::Explicit(vec![25, 75, 75, 75]),
            signal_s: 500.0,
            ssr: vec![0.0, 0.3, 0.6],
            snr: None,
            sigma_sq: 1.0,
            alpha: 1.0,
            replicates: 50,
            master_seed: 17,
            estimators: vec![
                EstimatorSelect::Mni,
                EstimatorSelect::Tm(1),
                EstimatorSelect::Tm(2),
                EstimatorSelect::Tm(3),
                EstimatorSelect::Wtm,
            ],
            cv: CvSettings::default(),
            parallel: false,
        };
        match scenario {
            Scenario::BenignModelShift => {}
            Scenario::BenignCovariateShift => {
                config.ssr = vec![0.3, 0.3, 0.3];
            }
            Scenario::FreeLunchBenign => {
                config.ssr = vec![0.3, 0.3, 0.3];
                config.alpha = 8.0;
            }
            Scenario::HarmlessIsotropic | Scenario::FreeLunchIsotropic => {
                config.sample_sizes = SampleSizes::Auto;
                config.signal_s = 10.0;
                config.ssr = vec![0.4, 0.4];
                config.estimators = vec![
                    EstimatorSelect::Mni,
                    EstimatorSelect::Tm(1),
                    EstimatorSelect::Tm(2),
                ];
                if scenario == Scenario::FreeLunchIsotropic {
                    config.alpha = 8.0;
                }
            }
            Scenario::PooledOptimalSizes => {
                config.sample_sizes = SampleSizes::Auto;
                config.signal_s = 10.0;
                config.ssr = vec![0.4];
                config.estimators = vec![
                    EstimatorSelect::Mni,
                    EstimatorSelect::Tm(1),
                    EstimatorSelect::Pooled(1),
                ];
            }
        }
        config
    }

    /// Apply file-level overrides on top of these settings.
    pub fn apply(&mut self, overrides: &ConfigOverrides) {
        if let Some(v) = &overrides.p_grid {
            self.p_grid = v.clone();
        }
        if let Some(v) = &overrides.sample_sizes {
            self.sample_sizes = v.clone();
        }
        if let Some(v) = overrides.signal_s {
            self.signal_s = v;
        }
        if let Some(v) = &overrides.ssr {
            self.ssr = v.clone();
        }
        if let Some(v) = overrides.snr {
            self.snr = Some(v);
        }
        if let Some(v) = overrides.sigma_sq {
            self.sigma_sq = v;
        }
        if let Some(v) = overrides.alpha {
            self.alpha = v;
        }
        if let Some(v) = overrides.replicates {
            self.replicates = v;
        }
        if let Some(v) = overrides.master_seed {
            self.master_seed = v;
        }
        if let Some(v) = &overrides.estimators {
            self.estimators = v.clone();
        }
        if let Some(v) = &overrides.cv {
            self.cv = v.clone();
        }
    }

    /// The signal-to-noise ratio in effect: the configured value, checked for
    /// consistency, or `signal_s / sigma_sq`.
    pub fn effective_snr(&self) -> Result<f64> {
        let derived = self.signal_s / self.sigma_sq;
        match self.snr {
            None => Ok(derived),
            Some(given) => {
                if (given - derived).abs() > 1e-9 * given.abs().max(1.0) {
                    Err(Error::Config(format!(
                        "snr={given} disagrees with signal_s/sigma_sq={derived}; \
                         drop one of the redundant fields"
                    )))
                } else {
                    Ok(given)
                }
            }
        }
    }

    /// Number of source tasks Q.
    pub fn source_count(&self) -> usize {
        self.ssr.len()
    }

    /// Validate every field and cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() {
            return Err(Error::Config("p_grid must be nonempty".into()));
        }
        if self.p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("p_grid must be strictly ascending".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !self.signal_s.is_finite() || self.signal_s <= 0.0 {
            return Err(Error::Config(format!(
                "signal_s must be positive, got {}",
                self.signal_s
            )));
        }
        if !self.sigma_sq.is_finite() || self.sigma_sq <= 0.0 {
            return Err(Error::Config(format!(
                "sigma_sq must be positive, got {}",
                self.sigma_sq
            )));
        }
        if self.ssr.is_empty() {
            return Err(Error::Config("ssr must list at least one source".into()));
        }
        if self.ssr.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("ssr entries must be nonnegative".into()));
        }
        self.effective_snr()?;

        let free_lunch = matches!(
            self.scenario,
            Scenario::FreeLunchBenign | Scenario::FreeLunchIsotropic
        );
        if free_lunch && self.alpha <= 1.0 {
            return Err(Error::Config(format!(
                "{} requires alpha > 1, got {}",
                self.scenario, self.alpha
            )));
        }
        if !free_lunch && self.alpha != 1.0 {
            return Err(Error::Config(format!(
                "alpha must be 1 outside the free-lunch scenarios, got {}",
                self.alpha
            )));
        }

        match self.scenario {
            Scenario::BenignCovariateShift | Scenario::FreeLunchBenign => {
                if self.source_count() != 3 {
                    return Err(Error::Config(format!(
                        "{} wires exactly 3 sources, got {}",
                        self.scenario,
                        self.source_count()
                    )));
                }
            }
            Scenario::PooledOptimalSizes if self.source_count() != 1 => {
                return Err(Error::Config(format!(
                    "PooledOptimalSizes uses exactly 1 source, got {}",
                    self.source_count()
                )));
            }
            _ => {}
        }
        if self.sample_sizes == SampleSizes::Auto
            && matches!(
                self.scenario,
                Scenario::HarmlessIsotropic | Scenario::FreeLunchIsotropic
            )
            && self.source_count() != 2
        {
            return Err(Error::Config(format!(
                "auto sizing for {} expects exactly 2 sources, got {}",
                self.scenario,
                self.source_count()
            )));
        }

        if let SampleSizes::Explicit(sizes) = &self.sample_sizes {
            if sizes.len() != self.source_count() + 1 {
                return Err(Error::Config(format!(
                    "sample_sizes lists {} entries but 1 target + {} sources need {}",
                    sizes.len(),
                    self.source_count(),
                    self.source_count() + 1
                )));
            }
            if sizes.contains(&0) {
                return Err(Error::Config("sample sizes must be positive".into()));
            }
        }

        if self.estimators.is_empty() {
            return Err(Error::Config("estimators must be nonempty".into()));
        }
        for est in &self.estimators {
            match est {
                EstimatorSelect::Tm(q) | EstimatorSelect::Pooled(q) if *q > self.source_count() => {
                    return Err(Error::Config(format!(
                        "estimator {est} refers to source {q} but only {} sources are configured",
                        self.source_count()
                    )));
                }
                _ => {}
            }
        }
        if self.cv.k < 2 {
            return Err(Error::Config(format!(
                "cv.k must be at least 2, got {}",
                self.cv.k
            )));
        }
        if !self.cv.epsilon0.is_finite() || self.cv.epsilon0 <= 0.0 {
            return Err(Error::Config(format!(
                "cv.epsilon0 must be positive, got {}",
                self.cv.epsilon0
            )));
        }
        Ok(())
    }

    /// Stable digest of the resolved settings, for provenance columns.
    pub fn digest(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        format!("{self:?}").hash(&mut hasher);
        hasher.finish()
    }
}

/// Parse a TOML config file into overrides.
pub fn read_config_file(path: &Path) -> Result<ConfigOverrides> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Resolve sample sizes at one grid point: echo explicit sizes, or apply the
/// scenario's planning rule.
///
/// Auto rules: the isotropic scenarios fix the target and first source at 50
/// rows and plan the second source's size (using the scale-adjusted
/// signal-to-noise ratio `alpha · snr` when the sources are upscaled); the
/// pooled scenario sets both sizes from the joint sizing rule. Planner
/// infeasibility is surfaced as an error, never clamped.
pub fn resolve_auto_sizes(config: &ExperimentConfig, p: usize) -> Result<Vec<usize>> {
    match &config.sample_sizes {
        SampleSizes::Explicit(sizes) => Ok(sizes.clone()),
        SampleSizes::Auto => {
            let snr = config.effective_snr()?;
            match config.scenario {
                Scenario::HarmlessIsotropic | Scenario::FreeLunchIsotropic => {
                    let planning_snr = if config.alpha > 1.0 {
                        config.alpha * snr
                    } else {
                        snr
                    };
                    let fixed = 50usize;
                    let ssr_planned = *config.ssr.last().expect("validated nonempty");
                    let plan = transfer_plan(p, planning_snr, ssr_planned, fixed, config.signal_s)?;
                    let n_planned = plan.n_star.ok_or_else(|| {
                        Error::Domain(format!(
                            "no beneficial source size exists at p={p} \
                             (snr={planning_snr}, ssr={ssr_planned})"
                        ))
                    })?;
                    Ok(vec![fixed, fixed, n_planned])
                }
                Scenario::PooledOptimalSizes => {
                    let (n1, n0) = pooled_optimal_sizes(p, snr, config.ssr[0])?;
                    if n0 == 0 {
                        return Err(Error::Domain(format!(
                            "the pooled sizing rule gives a zero target size at p={p}; \
                             increase p or the signal-to-noise ratio"
                        )));
                    }
                    Ok(vec![n0, n1])
                }
                other => Err(Error::Config(format!(
                    "sample_sizes = \"auto\" is not defined for scenario {other}"
                ))),
            }
        }
    }
}

/// The fully wired tasks at one grid point.
pub struct ScenarioLayout {
    /// Task specs: index 0 is the target, 1..=Q the sources.
    pub tasks: Vec<TaskSpec>,
    /// Per-task sample sizes, aligned with `tasks`.
    pub sizes: Vec<usize>,
    /// Spectrum family name per task, for diagnostics.
    pub family_names: Vec<String>,
}

/// Build the task specs for a config at one grid point. Parameters come from
/// replicate-independent streams, so the layout is identical for every
/// replicate.
pub fn layout_scenario(config: &ExperimentConfig, p: usize) -> Result<ScenarioLayout> {
    let sizes = resolve_auto_sizes(config, p)?;
    let policy = SeedPolicy::new(config.master_seed);
    let q_count = config.source_count();

    for (task, &n) in sizes.iter().enumerate() {
        if n > p {
            return Err(Error::Config(format!(
                "task {task} has n={n} > p={p}; interpolation is impossible"
            )));
        }
    }
    if config.estimators.contains(&EstimatorSelect::Wtm) && sizes[0] % config.cv.k != 0 {
        return Err(Error::Config(format!(
            "the weighted ensemble needs cv.k={} to divide n0={}",
            config.cv.k, sizes[0]
        )));
    }
    for est in &config.estimators {
        let pooled_rows = match est {
            EstimatorSelect::PooledAll => Some(sizes.iter().sum::<usize>()),
            EstimatorSelect::Pooled(q) => Some(sizes[0] + sizes[*q]),
            _ => None,
        };
        if let Some(rows) = pooled_rows {
            if rows > p {
                return Err(Error::Config(format!(
                    "estimator {est} stacks {rows} rows at p={p}; interpolation is impossible"
                )));
            }
        }
    }

    let (beta, contrasts) = make_coefficients(p, config.signal_s, &config.ssr, &policy)?;

    let mut covariances: Vec<CovarianceSpec> = Vec::with_capacity(q_count + 1);
    let mut family_names: Vec<String> = Vec::with_capacity(q_count + 1);
    match config.scenario {
        Scenario::BenignModelShift => {
            let family = SpectrumFamily::target_log();
            let shared = CovarianceSpec::from_spectrum(&family, p)?;
            for _ in 0..=q_count {
                covariances.push(shared.clone());
                family_names.push(family.to_string());
            }
        }
        Scenario::BenignCovariateShift | Scenario::FreeLunchBenign => {
            let target_family = SpectrumFamily::target_log();
            covariances.push(CovarianceSpec::from_spectrum(&target_family, p)?);
            family_names.push(target_family.to_string());
            let source_families = [
                SpectrumFamily::poly_decay(),
                SpectrumFamily::SampleAdaptive { n: sizes[2] },
                SpectrumFamily::spiked_toeplitz(),
            ];
            for (q, family) in source_families.iter().enumerate() {
                let basis =
                    sample_orthogonal(p, &mut policy.stream(0, q + 1, StreamPurpose::EigenBasis));
                let mut cov = CovarianceSpec::from_spectrum(family, p)?.with_eigenvectors(basis)?;
                if config.scenario == Scenario::FreeLunchBenign {
                    cov = free_lunch_scale(&cov, config.alpha)?;
                }
                covariances.push(cov);
                family_names.push(family.to_string());
            }
        }
        Scenario::HarmlessIsotropic | Scenario::PooledOptimalSizes => {
            for _ in 0..=q_count {
                covariances.push(CovarianceSpec::isotropic(p));
                family_names.push(SpectrumFamily::Isotropic.to_string());
            }
        }
        Scenario::FreeLunchIsotropic => {
            covariances.push(CovarianceSpec::isotropic(p));
            family_names.push(SpectrumFamily::Isotropic.to_string());
            for _ in 0..q_count {
                covariances.push(free_lunch_scale(
                    &CovarianceSpec::isotropic(p),
                    config.alpha,
                )?);
                family_names.push(SpectrumFamily::Isotropic.to_string());
            }
        }
    }

    let mut tasks = Vec::with_capacity(q_count + 1);
    tasks.push(TaskSpec::new(
        0,
        beta.clone(),
        RealVector::zeros(p),
        covariances[0].clone(),
        config.sigma_sq,
    )?);
    for q in 1..=q_count {
        tasks.push(TaskSpec::new(
            q,
            beta.clone(),
            contrasts[q - 1].clone(),
            covariances[q].clone(),
            config.sigma_sq,
        )?);
    }
    Ok(ScenarioLayout {
        tasks,
        sizes,
        family_names,
    })
}

/// Fit every configured estimator on one replicate's data and return the
/// excess risk of each, in estimator order.
fn evaluate_replicate(
    layout: &ScenarioLayout,
    config: &ExperimentConfig,
    policy: &SeedPolicy,
    replicate: u64,
) -> Result<Vec<f64>> {
    let target_spec = &layout.tasks[0];
    let target_data = sample_dataset(target_spec, layout.sizes[0], policy, replicate)?;
    let source_data: Vec<Dataset> = layout.tasks[1..]
        .iter()
        .zip(&layout.sizes[1..])
        .map(|(spec, &n)| sample_dataset(spec, n, policy, replicate))
        .collect::<Result<_>>()?;

    let ctx = TargetContext::new(&target_data)?;
    let needs_source_fit: Vec<bool> = (1..=source_data.len())
        .map(|q| {
            config
                .estimators
                .iter()
                .any(|e| matches!(e, EstimatorSelect::Tm(sel) if *sel == q))
        })
        .collect();
    let source_fits: Vec<Option<FittedCoefficients>> = source_data
        .iter()
        .enumerate()
        .map(|(i, data)| {
            if needs_source_fit[i] {
                fit_mni(data).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let mut risks = Vec::with_capacity(config.estimators.len());
    for est in &config.estimators {
        let estimate = match est {
            EstimatorSelect::Mni => ctx.target_mni().estimate.clone(),
            EstimatorSelect::Tm(q) => {
                let fit = source_fits[*q - 1]
                    .as_ref()
                    .expect("fit prepared for every selected source");
                ctx.transfer(fit)?.estimate
            }
            EstimatorSelect::PooledAll => {
                let mut all: Vec<&Dataset> = vec![&target_data];
                all.extend(source_data.iter());
                fit_pooled_mni(&all)?.estimate
            }
            EstimatorSelect::Pooled(q) => {
                fit_pooled_mni(&[&target_data, &source_data[*q - 1]])?.estimate
            }
            EstimatorSelect::Wtm => {
                let (fit, _) = fit_wtm(
                    &target_data,
                    &source_data,
                    config.cv.k,
                    config.cv.epsilon0,
                    policy,
                    replicate,
                )?;
                fit.estimate
            }
        };
        risks.push(excess_risk_point(&estimate, target_spec)?);
    }
    Ok(risks)
}

/// One aggregated row of a run: an estimator at a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Scenario name.
    pub scenario: String,
    /// Ambient dimension.
    pub p: usize,
    /// Estimator name (`MNI`, `TM:q`, `PooledMNI`, `PooledMNI:q`, `WTM`).
    pub estimator: String,
    /// Target sample size used at this grid point.
    pub n0: usize,
    /// Number of source datasets the estimator had access to.
    pub n_sources: usize,
    /// Mean excess risk over the replicates.
    pub mean_excess_risk: f64,
    /// Sample standard deviation (divisor N−1); 0 for a single replicate.
    pub sd_excess_risk: f64,
    /// Number of replicates aggregated.
    pub replicates: u64,
    /// Master seed of the run.
    pub seed: u64,
}

/// Everything a run produced, plus provenance.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// One record per (p, estimator), sorted by that pair.
    pub records: Vec<RunRecord>,
    /// Digest of the resolved config.
    pub config_digest: u64,
    /// Master seed of the run.
    pub master_seed: u64,
    /// Crate version that produced the summary.
    pub version: String,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n as f64 - 1.0)).sqrt())
}

/// Run a full experiment: for each grid point, build the layout once, evaluate
/// every replicate (in parallel when configured), and aggregate per estimator.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let policy = SeedPolicy::new(config.master_seed);
    let mut records = Vec::new();
    for &p in &config.p_grid {
        let layout = layout_scenario(config, p)?;
        let per_replicate: Vec<Vec<f64>> = if config.parallel {
            (0..config.replicates)
                .into_par_iter()
                .map(|r| evaluate_replicate(&layout, config, &policy, r))
                .collect::<Result<_>>()?
        } else {
            (0..config.replicates)
                .map(|r| evaluate_replicate(&layout, config, &policy, r))
                .collect::<Result<_>>()?
        };
        if config.replicates == 1 {
            eprintln!("note: a single replicate gives no deviation estimate; sd is reported as 0");
        }
        for (i, est) in config.estimators.iter().enumerate() {
            let values: Vec<f64> = per_replicate.iter().map(|row| row[i]).collect();
            let (mean, sd) = mean_and_sd(&values);
            records.push(RunRecord {
                scenario: config.scenario.to_string(),
                p,
                estimator: est.name(),
                n0: layout.sizes[0],
                n_sources: est.source_count(config.source_count()),
                mean_excess_risk: mean,
                sd_excess_risk: sd,
                replicates: config.replicates,
                seed: config.master_seed,
            });
        }
    }
    records.sort_by(|a, b| (a.p, &a.estimator).cmp(&(b.p, &b.estimator)));
    Ok(RunSummary {
        records,
        config_digest: config.digest(),
        master_seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn float_field(v: f64) -> String {
    format!("{v:.9e}")
}

/// Write a run summary as CSV with the stable schema
/// `scenario,p,estimator,n0,n_sources,mean_excess_risk,sd_excess_risk,replicates,seed`.
/// Rows are sorted by (p, estimator); floats carry 10 significant digits.
pub fn write_summary_csv<W: std::io::Write>(summary: &RunSummary, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Config(format!("csv serialization failed: {e}"));
    out.write_record([
        "scenario",
        "p",
        "estimator",
        "n0",
        "n_sources",
        "mean_excess_risk",
        "sd_excess_risk",
        "replicates",
        "seed",
    ])
    .map_err(io_err)?;
    for r in &summary.records {
        out.write_record([
            r.scenario.as_str(),
            &r.p.to_string(),
            r.estimator.as_str(),
            &r.n0.to_string(),
            &r.n_sources.to_string(),
            &float_field(r.mean_excess_risk),
            &float_field(r.sd_excess_risk),
            &r.replicates.to_string(),
            &r.seed.to_string(),
        ])
        .map_err(io_err)?;
    }
    out.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Write a run summary to a file path ([`write_summary_csv`] with IO context).
pub fn emit_csv(summary: &RunSummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_summary_csv(summary, std::io::BufWriter::new(file))
}

/// Spectrum diagnostics for one task at one grid point.
#[derive(Debug, Clone)]
pub struct SpectrumDiagnostic {
    /// Spectrum family name.
    pub spectrum: String,
    /// Ambient dimension.
    pub p: usize,
    /// Sample size of the task.
    pub n: usize,
    /// First benignness ratio `r_0/n`.
    pub r0_over_n: f64,
    /// Critical index, when it exists.
    pub k_star: Option<usize>,
    /// `k*/n`, when the critical index exists.
    pub k_ratio: Option<f64>,
    /// `n/R_{k*}`, when the critical index exists.
    pub n_over_rk: Option<f64>,
    /// Alignment horizon.
    pub tau_star: usize,
    /// Benignness verdict.
    pub verdict: BenignVerdict,
    /// Concentration width at the default tail parameter.
    pub psi: f64,
    /// `k*/n + n/R_{k*}`, when the critical index exists.
    pub upsilon: Option<f64>,
}

fn verdict_name(v: BenignVerdict) -> &'static str {
    match v {
        BenignVerdict::Benign => "Benign",
        BenignVerdict::NotBenign => "NotBenign",
        BenignVerdict::Indeterminate => "Indeterminate",
    }
}

/// Compute effective-rank and benignness diagnostics for every task spectrum
/// a config would use, across its p-grid.
pub fn report_diagnostics(config: &ExperimentConfig) -> Result<Vec<SpectrumDiagnostic>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &p in &config.p_grid {
        let layout = layout_scenario(config, p)?;
        for (task, spec) in layout.tasks.iter().enumerate() {
            let n = layout.sizes[task];
            let eigs = spec.covariance().scaled_eigenvalues();
            let profile = effective_rank_profile(
                &eigs,
                n,
                DEFAULT_CRITICAL_INDEX_CONSTANT,
                DEFAULT_TAIL_COMPARABILITY,
            )?;
            let psi = {
                let r0 = profile.tail_rank[0];
                let ratio = (r0 + std::f64::consts::LN_2) / n as f64;
                ratio.sqrt() + ratio
            };
            let upsilon = profile
                .k_star
                .map(|k| k as f64 / n as f64 + n as f64 / profile.tail_rank_sq[k]);
            rows.push(SpectrumDiagnostic {
                spectrum: layout.family_names[task].clone(),
                p,
                n,
                r0_over_n: profile.r0_over_n(),
                k_star: profile.k_star,
                k_ratio: profile.k_ratio(),
                n_over_rk: profile.n_over_tail_rank_sq(),
                tau_star: profile.tau_star,
                verdict: profile.verdict,
                psi,
                upsilon,
            });
        }
    }
    Ok(rows)
}

/// Write diagnostics as CSV with the stable schema
/// `spectrum,p,n,r0_over_n,k_star,k_ratio,n_over_Rk,tau_star,verdict`.
pub fn write_diagnostics_csv<W: std::io::Write>(
    rows: &[SpectrumDiagnostic],
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Config(format!("csv serialization failed: {e}"));
    out.write_record([
        "spectrum",
        "p",
        "n",
        "r0_over_n",
        "k_star",
        "k_ratio",
        "n_over_Rk",
        "tau_star",
        "verdict",
    ])
    .map_err(io_err)?;
    let opt_num = |v: Option<f64>| v.map(float_field).unwrap_or_default();
    for d in rows {
        out.write_record([
            d.spectrum.as_str(),
            &d.p.to_string(),
            &d.n.to_string(),
            &float_field(d.r0_over_n),
            &d.k_star.map(|k| k.to_string()).unwrap_or_default(),
            &opt_num(d.k_ratio),
            &opt_num(d.n_over_rk),
            &d.tau_star.to_string(),
            verdict_name(d.verdict),
        ])
        .map_err(io_err)?;
    }
    out.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// One row of a planning table.
#[derive(Debug, Clone)]
pub struct PlanRow {
    /// Ambient dimension.
    pub p: usize,
    /// Signal-to-noise ratio used for planning.
    pub snr: f64,
    /// Shift-to-signal ratio.
    pub ssr: f64,
    /// Planned transfer size, when one helps.
    pub n_star: Option<usize>,
    /// Expected-risk reduction at the planned size.
    pub delta_at_n_star: Option<f64>,
    /// Whether the planned size strictly improves on target-only.
    pub positive_transfer: bool,
    /// Jointly optimal source size for pooling, when feasible.
    pub pooled_n1_star: Option<usize>,
    /// Jointly optimal target size for pooling, when feasible.
    pub pooled_n0_star: Option<usize>,
}

/// Tabulate the transfer planner and the pooled sizing rule over a p-grid.
/// Infeasible grid points get empty planning fields rather than failing the
/// whole table.
pub fn plan_table(
    p_grid: &[usize],
    snr: f64,
    ssr: f64,
    n0: usize,
    signal_s: f64,
) -> Result<Vec<PlanRow>> {
    if p_grid.is_empty() {
        return Err(Error::Config("p_grid must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let plan = transfer_plan(p, snr, ssr, n0, signal_s)?;
        let pooled = pooled_optimal_sizes(p, snr, ssr).ok();
        rows.push(PlanRow {
            p,
            snr,
            ssr,
            n_star: plan.n_star,
            delta_at_n_star: plan.delta_at_n_star,
            positive_transfer: plan.positive_transfer,
            pooled_n1_star: pooled.map(|(n1, _)| n1),
            pooled_n0_star: pooled.map(|(_, n0)| n0),
        });
    }
    Ok(rows)
}

/// Write a planning table as CSV with schema
/// `p,snr,ssr,n_star,delta_at_n_star,positive_transfer,pooled_n1_star,pooled_n0_star`.
pub fn write_plan_csv<W: std::io::Write>(rows: &[PlanRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Config(format!("csv serialization failed: {e}"));
    out.write_record([
        "p",
        "snr",
        "ssr",
        "n_star",
        "delta_at_n_star",
        "positive_transfer",
        "pooled_n1_star",
        "pooled_n0_star",
    ])
    .map_err(io_err)?;
    for r in rows {
        out.write_record([
            r.p.to_string(),
            float_field(r.snr),
            float_field(r.ssr),
            r.n_star.map(|n| n.to_string()).unwrap_or_default(),
            r.delta_at_n_star.map(float_field).unwrap_or_default(),
            r.positive_transfer.to_string(),
            r.pooled_n1_star.map(|n| n.to_string()).unwrap_or_default(),
            r.pooled_n0_star.map(|n| n.to_string()).unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    out.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Run the built-in oracle checks. Returns (name, passed) pairs; the CLI maps
/// any failure to a nonzero exit.
pub fn selftest() -> Vec<(String, bool)> {
    let mut results: Vec<(String, bool)> = Vec::new();
    let mut check = |name: &str, outcome: Result<bool>| {
        results.push((name.to_string(), outcome.unwrap_or(false)));
    };

    check("pseudoinverse identities", {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(101);
        let m =
            crate::linalg::RealMatrix::from_fn(5, 8, |_, _| rng.sample(rand_distr::StandardNormal));
        crate::linalg::pseudoinverse(&m, 0.0).map(|pinv| {
            let back = &m * &pinv * &m;
            (back - &m).norm() / m.norm() < 1e-10
        })
    });

    check("interpolation and norm minimality", {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(102);
        let design = crate::linalg::RealMatrix::from_fn(4, 11, |_, _| {
            rng.sample(rand_distr::StandardNormal)
        });
        let response = RealVector::from_fn(4, |_, _| rng.sample(rand_distr::StandardNormal));
        Dataset::new(0, design.clone(), response.clone())
            .and_then(|data| fit_mni(&data))
            .and_then(|fit| {
                let residual = (&design * &fit.estimate - &response).norm();
                let svd = crate::linalg::DesignSvd::new(&design)?;
                let mut minimal = true;
                for _ in 0..20 {
                    let v = RealVector::from_fn(11, |_, _| rng.sample(rand_distr::StandardNormal));
                    let competitor = &fit.estimate + svd.reject(&v);
                    minimal &= competitor.norm() >= fit.estimate.norm() - 1e-12;
                }
                Ok(residual < 1e-8 && minimal)
            })
    });

    check("transfer closed form vs constrained solve", {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(103);
        let mut gaussian = |n: usize, p: usize| {
            crate::linalg::RealMatrix::from_fn(n, p, |_, _| rng.sample(rand_distr::StandardNormal))
        };
        let x0 = gaussian(5, 13);
        let xq = gaussian(7, 13);
        let y0 = RealVector::from_fn(5, |i, _| (i as f64).sin());
        let yq = RealVector::from_fn(7, |i, _| (i as f64).cos());
        (|| {
            let target = Dataset::new(0, x0.clone(), y0.clone())?;
            let source = Dataset::new(1, xq, yq)?;
            let source_fit = fit_mni(&source)?;
            let tm = crate::estimators::fit_transfer_mni(&target, &source_fit)?;
            let correction =
                crate::linalg::min_norm_solve(&x0, &(&y0 - &x0 * &source_fit.estimate))?;
            let alternative = &source_fit.estimate + correction;
            Ok((tm.estimate - alternative).norm() < 1e-8)
        })()
    });

    check(
        "planner square-root anchor",
        transfer_plan(101, 101.0, 0.0, 25, 1.0).map(|plan| plan.n_star == Some(90)),
    );

    check(
        "pooled sizing reference point",
        pooled_optimal_sizes(300, 10.0, 0.1).map(|pair| pair == (199, 6)),
    );

    check("tiny run determinism", {
        let mut config = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        config.p_grid = vec![60];
        config.sample_sizes = SampleSizes::Explicit(vec![10, 15, 15]);
        config.replicates = 3;
        (|| {
            let a = run_experiment(&config)?;
            let b = run_experiment(&config)?;
            Ok(a.records == b.records)
        })()
    });

    results
}

// ---------------------------------------------------------------------------
// Command-line front end
// ---------------------------------------------------------------------------

use clap::{Args, Parser, Subcommand};

/// Batch simulations and planning tables for transfer learning with
/// minimum-norm interpolators.
#[derive(Parser, Debug)]
#[command(name = "mni-transfer", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Run a replicated experiment and emit a CSV summary.
    Run(RunArgs),
    /// Tabulate the transfer planner and pooled sizing rule.
    Plan(PlanArgs),
    /// Report spectrum and benignness diagnostics for a config.
    Diagnose(DiagnoseArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name (required unless the config file provides one).
    #[arg(long)]
    scenario: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated dimension grid override.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<usize>>,
    /// Replicate count override.
    #[arg(long)]
    replicates: Option<u64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate replicates on a thread pool (outputs are identical either way).
    #[arg(long)]
    parallel: bool,
    /// Use the full-scale dimension grid 300..=1000 step 100.
    #[arg(long)]
    full_grid: bool,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Comma-separated dimension grid.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "300,400,500,600,700,800,900,1000"
    )]
    p_grid: Vec<usize>,
    /// Signal-to-noise ratio.
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    /// Shift-to-signal ratio.
    #[arg(long, default_value_t = 0.1)]
    ssr: f64,
    /// Target sample size used for the improvement column.
    #[arg(long, default_value_t = 25)]
    n0: usize,
    /// Squared signal norm used for the improvement column.
    #[arg(long, default_value_t = 10.0)]
    signal_s: f64,
    /// Source covariance upscale; multiplies the planning snr when above 1.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name (required unless the config file provides one).
    #[arg(long)]
    scenario: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated dimension grid override.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<usize>>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_config(
    config_path: &Option<PathBuf>,
    scenario_flag: &Option<String>,
    seed: Option<u64>,
    p_grid: Option<Vec<usize>>,
    replicates: Option<u64>,
) -> Result<ExperimentConfig> {
    let overrides = match config_path {
        Some(path) => read_config_file(path)?,
        None => ConfigOverrides::default(),
    };
    let scenario = match (scenario_flag, &overrides.scenario) {
        (Some(flag), _) => flag.parse::<Scenario>()?,
        (None, Some(from_file)) => from_file.parse::<Scenario>()?,
        (None, None) => {
            return Err(Error::Config(
                "a scenario is required: pass --scenario or set one in the config file".into(),
            ))
        }
    };
    let mut config = ExperimentConfig::scenario_default(scenario);
    config.apply(&overrides);
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    if let Some(grid) = p_grid {
        config.p_grid = grid;
    }
    if let Some(reps) = replicates {
        config.replicates = reps;
    }
    Ok(config)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn std::io::Write>> {
    match path {
        None => Ok(Box::new(std::io::stdout().lock())),
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
    }
}

fn run_command(cli: Cli) -> Result<()> {
    match cli.command {
        CliCommand::Run(args) => {
            let mut config = resolve_config(
                &args.config,
                &args.scenario,
                args.seed,
                args.p_grid,
                args.replicates,
            )?;
            if args.full_grid {
                config.p_grid = (300..=1000).step_by(100).collect();
            }
            config.parallel = args.parallel;
            let summary = run_experiment(&config)?;
            eprintln!(
                "run complete: scenario={}, seed={}, config digest={:016x}, version={}",
                config.scenario, summary.master_seed, summary.config_digest, summary.version
            );
            write_summary_csv(&summary, open_out(&args.out)?)
        }
        CliCommand::Plan(args) => {
            if !args.alpha.is_finite() || args.alpha < 1.0 {
                return Err(Error::Config(format!(
                    "alpha must be at least 1, got {}",
                    args.alpha
                )));
            }
            let snr = args.snr * args.alpha;
            let rows = plan_table(&args.p_grid, snr, args.ssr, args.n0, args.signal_s)?;
            write_plan_csv(&rows, open_out(&args.out)?)
        }
        CliCommand::Diagnose(args) => {
            let config =
                resolve_config(&args.config, &args.scenario, args.seed, args.p_grid, None)?;
            let rows = report_diagnostics(&config)?;
            for d in &rows {
                let upsilon = d
                    .upsilon
                    .map(|u| format!("{u:.4}"))
                    .unwrap_or_else(|| "-".into());
                eprintln!(
                    "{} p={} n={}: r0/n={:.4}, tau*={}, psi={:.4}, upsilon={}, verdict={}",
                    d.spectrum,
                    d.p,
                    d.n,
                    d.r0_over_n,
                    d.tau_star,
                    d.psi,
                    upsilon,
                    verdict_name(d.verdict)
                );
            }
            write_diagnostics_csv(&rows, open_out(&args.out)?)
        }
        CliCommand::Selftest => {
            let results = selftest();
            let mut all_ok = true;
            let mut stdout = std::io::stdout().lock();
            for (name, ok) in &results {
                all_ok &= ok;
                let _ = writeln!(
                    stdout,
                    "selftest: {name} ... {}",
                    if *ok { "PASS" } else { "FAIL" }
                );
            }
            if all_ok {
                Ok(())
            } else {
                Err(Error::Domain("one or more selftest checks failed".into()))
            }
        }
    }
}

/// Parse CLI arguments, dispatch, and map errors to process exit codes:
/// 0 success, 2 configuration, 3 numerical, 4 IO.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn estimator_names_parse_and_print() {
        assert_eq!(
            "MNI".parse::<EstimatorSelect>().unwrap(),
            EstimatorSelect::Mni
        );
        assert_eq!(
            "TM:2".parse::<EstimatorSelect>().unwrap(),
            EstimatorSelect::Tm(2)
        );
        assert_eq!(
            "PooledMNI:1".parse::<EstimatorSelect>().unwrap(),
            EstimatorSelect::Pooled(1)
        );
        assert_eq!(
            "PooledMNI".parse::<EstimatorSelect>().unwrap(),
            EstimatorSelect::PooledAll
        );
        assert_eq!(
            "WTM".parse::<EstimatorSelect>().unwrap(),
            EstimatorSelect::Wtm
        );
        assert!("TM:0".parse::<EstimatorSelect>().is_err());
        assert!("ridge".parse::<EstimatorSelect>().is_err());
        assert_eq!(EstimatorSelect::Tm(3).name(), "TM:3");
    }

    #[test]
    fn toml_overrides_merge_onto_scenario_defaults() {
        let overrides: ConfigOverrides = toml::from_str(
            r#"
            scenario = "BenignModelShift"
            p_grid = [50, 80]
            replicates = 7
            master_seed = 99
            estimators = ["MNI", "TM:1"]
            sample_sizes = [10, 20, 20, 20]

            [cv]
            k = 5
            epsilon0 = 0.25
            "#,
        )
        .unwrap();
        let mut config = ExperimentConfig::scenario_default(
            overrides.scenario.as_deref().unwrap().parse().unwrap(),
        );
        config.apply(&overrides);
        assert_eq!(config.p_grid, vec![50, 80]);
        assert_eq!(config.replicates, 7);
        assert_eq!(config.master_seed, 99);
        assert_eq!(config.estimators.len(), 2);
        assert_eq!(config.cv.epsilon0, 0.25);
        assert_eq!(config.signal_s, 500.0, "untouched fields keep defaults");
        config.validate().unwrap();
    }

    #[test]
    fn auto_keyword_and_lists_deserialize() {
        #[derive(Deserialize)]
        struct Probe {
            sample_sizes: SampleSizes,
        }
        let auto: Probe = toml::from_str(r#"sample_sizes = "auto""#).unwrap();
        assert_eq!(auto.sample_sizes, SampleSizes::Auto);
        let given: Probe = toml::from_str("sample_sizes = [5, 6]").unwrap();
        assert_eq!(given.sample_sizes, SampleSizes::Explicit(vec![5, 6]));
        assert!(toml::from_str::<Probe>(r#"sample_sizes = "never""#).is_err());
    }

    #[test]
    fn inconsistent_snr_is_rejected() {
        let mut config = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        config.snr = Some(10.0);
        config.validate().unwrap();
        config.snr = Some(11.0);
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_is_scenario_gated() {
        let mut config = ExperimentConfig::scenario_default(Scenario::BenignModelShift);
        config.alpha = 2.0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let mut config = ExperimentConfig::scenario_default(Scenario::FreeLunchBenign);
        config.alpha = 1.0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn pooled_auto_sizes_match_the_sizing_rule() {
        let mut config = ExperimentConfig::scenario_default(Scenario::PooledOptimalSizes);
        config.ssr = vec![0.1];
        config.snr = None;
        // signal_s/sigma_sq = 10, so p=300 reproduces the published sizing.
        let sizes = resolve_auto_sizes(&config, 300).unwrap();
        assert_eq!(sizes, vec![6, 199]);
    }

    #[test]
    fn scaled_isotropic_auto_sizing_uses_the_adjusted_snr() {
        let plain = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        let scaled = ExperimentConfig::scenario_default(Scenario::FreeLunchIsotropic);
        let p = 200;
        let plain_sizes = resolve_auto_sizes(&plain, p).unwrap();
        let scaled_sizes = resolve_auto_sizes(&scaled, p).unwrap();
        assert_eq!(plain_sizes[0], 50);
        assert_eq!(scaled_sizes[0], 50);
        assert!(
            scaled_sizes[2] > plain_sizes[2],
            "a stronger effective snr plans a larger source: {} vs {}",
            scaled_sizes[2],
            plain_sizes[2]
        );
    }

    #[test]
    fn free_lunch_layout_differs_only_in_scale() {
        let mut base = ExperimentConfig::scenario_default(Scenario::BenignCovariateShift);
        base.sample_sizes = SampleSizes::Explicit(vec![15, 20, 20, 20]);
        let mut scaled = ExperimentConfig::scenario_default(Scenario::FreeLunchBenign);
        scaled.sample_sizes = base.sample_sizes.clone();
        let a = layout_scenario(&base, 60).unwrap();
        let b = layout_scenario(&scaled, 60).unwrap();
        for q in 1..=3 {
            let cov_a = a.tasks[q].covariance();
            let cov_b = b.tasks[q].covariance();
            assert_eq!(cov_a.eigenvalues(), cov_b.eigenvalues());
            assert_eq!(cov_a.eigenvectors(), cov_b.eigenvectors());
            assert_abs_diff_eq!(cov_a.scale_alpha(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(cov_b.scale_alpha(), 8.0, epsilon = 1e-15);
        }
        assert_eq!(a.tasks[0].covariance().scale_alpha(), 1.0);
        assert_eq!(b.tasks[0].covariance().scale_alpha(), 1.0);
    }

    #[test]
    fn layout_parameters_are_replicate_independent() {
        let mut config = ExperimentConfig::scenario_default(Scenario::BenignCovariateShift);
        config.sample_sizes = SampleSizes::Explicit(vec![10, 15, 15, 15]);
        let a = layout_scenario(&config, 50).unwrap();
        let b = layout_scenario(&config, 50).unwrap();
        for (ta, tb) in a.tasks.iter().zip(&b.tasks) {
            assert_eq!(ta.beta_target(), tb.beta_target());
            assert_eq!(ta.contrast(), tb.contrast());
        }
    }

    #[test]
    fn small_run_is_deterministic_and_parallel_invariant() {
        let mut config = ExperimentConfig::scenario_default(Scenario::BenignModelShift);
        config.p_grid = vec![40];
        config.sample_sizes = SampleSizes::Explicit(vec![10, 20, 20, 20]);
        config.replicates = 4;
        config.estimators = vec![
            EstimatorSelect::Mni,
            EstimatorSelect::Tm(1),
            EstimatorSelect::Wtm,
        ];
        let serial = run_experiment(&config).unwrap();
        let again = run_experiment(&config).unwrap();
        assert_eq!(serial.records, again.records);

        let mut parallel_config = config.clone();
        parallel_config.parallel = true;
        let parallel = run_experiment(&parallel_config).unwrap();
        assert_eq!(serial.records, parallel.records);
    }

    #[test]
    fn aggregation_matches_a_streaming_pass() {
        // Streaming (Welford) recomputation of the mean and deviation must
        // agree with the two-pass formulas used for the records.
        let values = [0.31, 4.2, 0.0075, 2.25, 9.1, 0.033];
        let (mean, sd) = mean_and_sd(&values);
        let mut count = 0.0;
        let mut running_mean = 0.0;
        let mut m2 = 0.0;
        for v in values {
            count += 1.0;
            let d1 = v - running_mean;
            running_mean += d1 / count;
            m2 += d1 * (v - running_mean);
        }
        assert_abs_diff_eq!(mean, running_mean, epsilon = 1e-12);
        assert_abs_diff_eq!(sd, (m2 / (count - 1.0)).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn csv_rows_are_sorted_and_round_trip() {
        let mut config = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        config.p_grid = vec![40, 60];
        config.sample_sizes = SampleSizes::Explicit(vec![10, 12, 12]);
        config.replicates = 2;
        let summary = run_experiment(&config).unwrap();
        let mut bytes = Vec::new();
        write_summary_csv(&summary, &mut bytes).unwrap();

        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(
            headers.iter().collect::<Vec<_>>(),
            vec![
                "scenario",
                "p",
                "estimator",
                "n0",
                "n_sources",
                "mean_excess_risk",
                "sd_excess_risk",
                "replicates",
                "seed"
            ]
        );
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), summary.records.len());
        let mut seen: Vec<(usize, String)> = Vec::new();
        for (row, record) in rows.iter().zip(&summary.records) {
            let p: usize = row[1].parse().unwrap();
            seen.push((p, row[2].to_string()));
            let mean: f64 = row[5].parse().unwrap();
            let rel =
                (mean - record.mean_excess_risk).abs() / record.mean_excess_risk.abs().max(1e-300);
            assert!(rel < 1e-9, "round-trip drift {rel}");
        }
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted, "rows must arrive sorted by (p, estimator)");
    }

    #[test]
    fn empty_summary_writes_header_only() {
        let summary = RunSummary {
            records: Vec::new(),
            config_digest: 0,
            master_seed: 0,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        let mut bytes = Vec::new();
        write_summary_csv(&summary, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text,
            "scenario,p,estimator,n0,n_sources,mean_excess_risk,sd_excess_risk,replicates,seed\n"
        );
    }

    #[test]
    fn single_replicate_reports_zero_deviation() {
        let mut config = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        config.p_grid = vec![30];
        config.sample_sizes = SampleSizes::Explicit(vec![5, 8, 8]);
        config.replicates = 1;
        config.estimators = vec![EstimatorSelect::Mni];
        let summary = run_experiment(&config).unwrap();
        assert_eq!(summary.records.len(), 1);
        assert_eq!(summary.records[0].sd_excess_risk, 0.0);
    }

    #[test]
    fn overfull_pooling_is_rejected_at_layout() {
        let mut config = ExperimentConfig::scenario_default(Scenario::BenignModelShift);
        config.p_grid = vec![100];
        config.estimators = vec![EstimatorSelect::PooledAll];
        // 25 + 3·75 = 250 rows cannot interpolate in dimension 100.
        assert!(matches!(
            layout_scenario(&config, 100),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn diagnostics_cover_every_task_and_flag_isotropic_as_not_benign() {
        let mut config = ExperimentConfig::scenario_default(Scenario::HarmlessIsotropic);
        config.p_grid = vec![50];
        config.sample_sizes = SampleSizes::Explicit(vec![50, 20, 20]);
        let rows = report_diagnostics(&config).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].spectrum, "Isotropic");
        // n = p makes the first ratio exactly 1.
        assert_abs_diff_eq!(rows[0].r0_over_n, 1.0, epsilon = 1e-12);
        assert_eq!(rows[0].verdict, BenignVerdict::NotBenign);
    }

    #[test]
    fn planning_table_includes_the_published_pooled_sizes() {
        let rows = plan_table(&[300], 10.0, 0.1, 25, 10.0).unwrap();
        assert_eq!(rows[0].pooled_n1_star, Some(199));
        assert_eq!(rows[0].pooled_n0_star, Some(6));
        assert!(rows[0].n_star.is_some());
    }

    #[test]
    fn selftest_checks_all_pass() {
        let results = selftest();
        for (name, ok) in &results {
            assert!(ok, "selftest check '{name}' failed");
        }
    }
}
