//! Deterministic, seed-controlled synthesis of covariance spectra, eigenbases,
//! model coefficients, and datasets.
//!
//! Every output is a pure function of its inputs and a [`SeedPolicy`] stream
//! label. A label is a (replicate, task, purpose) triple; each label selects an
//! independent counter-based ChaCha stream, so concurrent generation across
//! replicates cannot change any draw. Deterministic experiment parameters
//! (coefficients, eigenbases) use replicate-independent labels and are
//! generated once per experiment, while per-replicate randomness is confined
//! to whitened design entries and noise.

use crate::error::{Error, Result};
use crate::linalg::{RealMatrix, RealVector};
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;

/// Closed-form eigenvalue families for task covariances.
///
/// All families are scaled so that well-used parameterizations have operator
/// norm 15, except [`SpectrumFamily::Isotropic`] (identity covariance) and
/// [`SpectrumFamily::TwoLevelSpiked`] (explicit levels).
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumFamily {
    /// `15 · j⁻¹ · ln((j+1)e/2)^(−exponent)`; slowly decaying with a
    /// logarithmic correction. Benign for exponent > 1.
    TargetLog { exponent: f64 },
    /// `15 · j^(−exponent)`; polynomial decay. Benign for exponent in (0, 1).
    PolyDecay { exponent: f64 },
    /// `15 · j^(−(1 + ln(n)/n))`; polynomial decay whose exponent adapts to a
    /// reference sample size `n`.
    SampleAdaptive { n: usize },
    /// One unit spike at 15 plus a low bulk shaped by the eigenvalues of a
    /// tridiagonal correlation matrix: for j > 1 the closed form evaluates
    /// `15 · bulk_scale · (1 + c² − 2c·cos(jπ/(p+1))) / (1 + c² − 2c·cos(π/(p+1)))`
    /// with correlation `c`. The closed form is not monotone in j, so the
    /// values are sorted nonincreasing; a spectrum is defined up to ordering
    /// because the eigenbasis is assigned separately.
    SpikedToeplitz { correlation: f64, bulk_scale: f64 },
    /// All eigenvalues 1 (identity covariance).
    Isotropic,
    /// `spikes` leading eigenvalues at `spike_value`, remainder at
    /// `bulk_value`.
    TwoLevelSpiked {
        spikes: usize,
        spike_value: f64,
        bulk_value: f64,
    },
}

impl SpectrumFamily {
    /// Default logarithmic-family exponent (3/2).
    pub const DEFAULT_LOG_EXPONENT: f64 = 1.5;
    /// Default polynomial-family exponent (1/2).
    pub const DEFAULT_POLY_EXPONENT: f64 = 0.5;
    /// Default tridiagonal-bulk correlation (1/2).
    pub const DEFAULT_CORRELATION: f64 = 0.5;
    /// Default bulk scale for the spiked family (1e-5).
    pub const DEFAULT_BULK_SCALE: f64 = 1e-5;

    /// Logarithmic-decay family with the default exponent.
    pub fn target_log() -> Self {
        SpectrumFamily::TargetLog {
            exponent: Self::DEFAULT_LOG_EXPONENT,
        }
    }

    /// Polynomial-decay family with the default exponent.
    pub fn poly_decay() -> Self {
        SpectrumFamily::PolyDecay {
            exponent: Self::DEFAULT_POLY_EXPONENT,
        }
    }

    /// Spiked family with default correlation and bulk scale.
    pub fn spiked_toeplitz() -> Self {
        SpectrumFamily::SpikedToeplitz {
            correlation: Self::DEFAULT_CORRELATION,
            bulk_scale: Self::DEFAULT_BULK_SCALE,
        }
    }

    /// Whether the parameters lie in the range for which the family's
    /// single-task interpolator is known to overfit benignly (given suitable
    /// growth of p relative to n): exponent > 1 for the logarithmic family,
    /// exponent in (0, 1) for the polynomial family, correlation < 1 for the
    /// spiked family (which additionally needs p ≫ n and p·bulk_scale ≪ n at
    /// run time). Other families carry no such closed-form certificate.
    pub fn benign_parameter_range(&self) -> bool {
        match *self {
            SpectrumFamily::TargetLog { exponent } => exponent > 1.0,
            SpectrumFamily::PolyDecay { exponent } => exponent > 0.0 && exponent < 1.0,
            SpectrumFamily::SpikedToeplitz { correlation, .. } => correlation < 1.0,
            _ => false,
        }
    }
}

impl fmt::Display for SpectrumFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SpectrumFamily::TargetLog { .. } => "TargetLog",
            SpectrumFamily::PolyDecay { .. } => "PolyDecay",
            SpectrumFamily::SampleAdaptive { .. } => "SampleAdaptive",
            SpectrumFamily::SpikedToeplitz { .. } => "SpikedToeplitz",
            SpectrumFamily::Isotropic => "Isotropic",
            SpectrumFamily::TwoLevelSpiked { .. } => "TwoLevelSpiked",
        };
        f.write_str(name)
    }
}

/// Evaluate a spectrum family at dimension `p`.
///
/// The result is strictly positive and nonincreasing; parameter choices that
/// break either property are rejected with a spectrum error.
pub fn make_spectrum(family: &SpectrumFamily, p: usize) -> Result<RealVector> {
    if p == 0 {
        return Err(Error::Spectrum("dimension must be at least 1".into()));
    }
    let mut eigs: Vec<f64> = match *family {
        SpectrumFamily::TargetLog { exponent } => (1..=p)
            .map(|j| {
                let j = j as f64;
                15.0 / j * ((j + 1.0) * std::f64::consts::E / 2.0).ln().powf(-exponent)
            })
            .collect(),
        SpectrumFamily::PolyDecay { exponent } => {
            (1..=p).map(|j| 15.0 * (j as f64).powf(-exponent)).collect()
        }
        SpectrumFamily::SampleAdaptive { n } => {
            if n == 0 {
                return Err(Error::Spectrum(
                    "sample-adaptive spectrum needs a positive reference sample size".into(),
                ));
            }
            let nf = n as f64;
            let exponent = 1.0 + nf.ln() / nf;
            (1..=p).map(|j| 15.0 * (j as f64).powf(-exponent)).collect()
        }
        SpectrumFamily::SpikedToeplitz {
            correlation,
            bulk_scale,
        } => {
            let denom_angle = std::f64::consts::PI / (p as f64 + 1.0);
            let denom = 1.0 + correlation * correlation - 2.0 * correlation * denom_angle.cos();
            let mut values: Vec<f64> = Vec::with_capacity(p);
            values.push(15.0);
            for j in 2..=p {
                let angle = j as f64 * std::f64::consts::PI / (p as f64 + 1.0);
                let numer = 1.0 + correlation * correlation - 2.0 * correlation * angle.cos();
                values.push(15.0 * bulk_scale * numer / denom);
            }
            // Canonical nonincreasing presentation; ordering carries no
            // information because the eigenbasis is assigned separately.
            values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            values
        }
        SpectrumFamily::Isotropic => vec![1.0; p],
        SpectrumFamily::TwoLevelSpiked {
            spikes,
            spike_value,
            bulk_value,
        } => {
            if spikes > p {
                return Err(Error::Spectrum(format!(
                    "{spikes} spikes exceed dimension {p}"
                )));
            }
            (0..p)
                .map(|j| if j < spikes { spike_value } else { bulk_value })
                .collect()
        }
    };

    for window in eigs.windows(2) {
        if window[1] > window[0] {
            return Err(Error::Spectrum(format!(
                "{family} parameters produce a non-monotone spectrum"
            )));
        }
    }
    if eigs.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::Spectrum(format!(
            "{family} parameters produce non-positive eigenvalues"
        )));
    }
    Ok(RealVector::from_vec(std::mem::take(&mut eigs)))
}

/// A task covariance in spectral form `scale · V diag(λ) Vᵀ`.
///
/// The eigenbasis is optional; its absence means the identity basis, in which
/// case applications reduce to diagonal scaling.
#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    eigenvalues: RealVector,
    eigenvectors: Option<RealMatrix>,
    scale_alpha: f64,
}

impl CovarianceSpec {
    /// Covariance with the given positive nonincreasing eigenvalues in the
    /// identity basis, scale 1.
    pub fn from_eigenvalues(eigenvalues: RealVector) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Spectrum("eigenvalue vector must be nonempty".into()));
        }
        if eigenvalues.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Spectrum(
                "covariance eigenvalues must be positive and finite".into(),
            ));
        }
        for i in 1..eigenvalues.len() {
            if eigenvalues[i] > eigenvalues[i - 1] {
                return Err(Error::Spectrum(
                    "covariance eigenvalues must be nonincreasing".into(),
                ));
            }
        }
        Ok(CovarianceSpec {
            eigenvalues,
            eigenvectors: None,
            scale_alpha: 1.0,
        })
    }

    /// Evaluate a spectrum family and wrap it as a diagonal covariance.
    pub fn from_spectrum(family: &SpectrumFamily, p: usize) -> Result<Self> {
        Self::from_eigenvalues(make_spectrum(family, p)?)
    }

    /// Identity covariance of dimension `p`.
    pub fn isotropic(p: usize) -> Self {
        CovarianceSpec {
            eigenvalues: RealVector::from_element(p, 1.0),
            eigenvectors: None,
            scale_alpha: 1.0,
        }
    }

    /// Attach an orthogonal eigenbasis (validated to 1e-10).
    pub fn with_eigenvectors(mut self, v: RealMatrix) -> Result<Self> {
        let p = self.dim();
        if v.nrows() != p || v.ncols() != p {
            return Err(Error::Shape(format!(
                "eigenbasis must be {p}×{p}, got {}×{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let gram_defect = (v.transpose() * &v - RealMatrix::identity(p, p)).norm();
        if gram_defect > 1e-10 {
            return Err(Error::InvalidMatrix(format!(
                "eigenbasis departs from orthogonality by {gram_defect:.3e}"
            )));
        }
        self.eigenvectors = Some(v);
        Ok(self)
    }

    /// Replace the scalar multiplier applied to every eigenvalue.
    pub fn with_scale(mut self, scale_alpha: f64) -> Result<Self> {
        if !scale_alpha.is_finite() || scale_alpha <= 0.0 {
            return Err(Error::Domain(format!(
                "covariance scale must be positive, got {scale_alpha}"
            )));
        }
        self.scale_alpha = scale_alpha;
        Ok(self)
    }

    /// Ambient dimension p.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Unscaled eigenvalues λ.
    pub fn eigenvalues(&self) -> &RealVector {
        &self.eigenvalues
    }

    /// Eigenvalues with the scale applied.
    pub fn scaled_eigenvalues(&self) -> RealVector {
        &self.eigenvalues * self.scale_alpha
    }

    /// The scalar multiplier.
    pub fn scale_alpha(&self) -> f64 {
        self.scale_alpha
    }

    /// The eigenbasis, if one is attached.
    pub fn eigenvectors(&self) -> Option<&RealMatrix> {
        self.eigenvectors.as_ref()
    }

    /// Operator norm `scale · λ_1`.
    pub fn operator_norm(&self) -> f64 {
        self.scale_alpha * self.eigenvalues[0]
    }

    /// Smallest eigenvalue `scale · λ_p`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.scale_alpha * self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Σ v` without materializing the p × p matrix.
    pub fn apply(&self, v: &RealVector) -> RealVector {
        match &self.eigenvectors {
            None => {
                let mut out = v.clone();
                for i in 0..out.len() {
                    out[i] *= self.scale_alpha * self.eigenvalues[i];
                }
                out
            }
            Some(basis) => {
                let mut coords = basis.transpose() * v;
                for i in 0..coords.len() {
                    coords[i] *= self.scale_alpha * self.eigenvalues[i];
                }
                basis * coords
            }
        }
    }

    /// Quadratic form `aᵀ Σ b`.
    pub fn quadratic_form(&self, a: &RealVector, b: &RealVector) -> f64 {
        a.dot(&self.apply(b))
    }

    /// Materialized covariance matrix.
    pub fn matrix(&self) -> RealMatrix {
        let p = self.dim();
        match &self.eigenvectors {
            None => RealMatrix::from_diagonal(&self.scaled_eigenvalues()),
            Some(basis) => {
                let mut scaled = basis.clone();
                for i in 0..p {
                    let s = self.scale_alpha * self.eigenvalues[i];
                    scaled.column_mut(i).scale_mut(s);
                }
                scaled * basis.transpose()
            }
        }
    }

    /// `Z · Σ^{1/2}` for a whitened matrix `Z` (n × p), computing the square
    /// root exactly in the eigenbasis.
    pub fn sqrt_times(&self, z: &RealMatrix) -> Result<RealMatrix> {
        let p = self.dim();
        if z.ncols() != p {
            return Err(Error::Shape(format!(
                "whitened matrix has {} columns, covariance dimension is {p}",
                z.ncols()
            )));
        }
        let roots: Vec<f64> = (0..p)
            .map(|i| (self.scale_alpha * self.eigenvalues[i]).sqrt())
            .collect();
        match &self.eigenvectors {
            None => {
                let mut out = z.clone();
                for (i, &r) in roots.iter().enumerate() {
                    out.column_mut(i).scale_mut(r);
                }
                Ok(out)
            }
            Some(basis) => {
                let mut rotated = z * basis;
                for (i, &r) in roots.iter().enumerate() {
                    rotated.column_mut(i).scale_mut(r);
                }
                Ok(rotated * basis.transpose())
            }
        }
    }
}

/// Ground truth for one task: target coefficients, the contrast added by this
/// task, a covariance, and a noise level.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    task_index: usize,
    beta_target: RealVector,
    contrast: RealVector,
    covariance: CovarianceSpec,
    noise_variance: f64,
}

impl TaskSpec {
    /// Validated constructor. The contrast must be the zero vector for the
    /// target task (index 0); dimensions must agree; noise variance must be
    /// positive.
    pub fn new(
        task_index: usize,
        beta_target: RealVector,
        contrast: RealVector,
        covariance: CovarianceSpec,
        noise_variance: f64,
    ) -> Result<Self> {
        let p = covariance.dim();
        if beta_target.len() != p || contrast.len() != p {
            return Err(Error::Shape(format!(
                "coefficients ({}, {}) must match covariance dimension {p}",
                beta_target.len(),
                contrast.len()
            )));
        }
        if beta_target
            .iter()
            .chain(contrast.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidMatrix(
                "task coefficients contain non-finite entries".into(),
            ));
        }
        if !noise_variance.is_finite() || noise_variance <= 0.0 {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        if task_index == 0 && contrast.iter().any(|&v| v != 0.0) {
            return Err(Error::Domain(
                "the target task (index 0) must have a zero contrast".into(),
            ));
        }
        Ok(TaskSpec {
            task_index,
            beta_target,
            contrast,
            covariance,
            noise_variance,
        })
    }

    /// Task index: 0 is the target, 1..Q are sources.
    pub fn task_index(&self) -> usize {
        self.task_index
    }

    /// Target coefficient vector shared by all tasks.
    pub fn beta_target(&self) -> &RealVector {
        &self.beta_target
    }

    /// Contrast of this task's coefficients from the target's.
    pub fn contrast(&self) -> &RealVector {
        &self.contrast
    }

    /// The task covariance.
    pub fn covariance(&self) -> &CovarianceSpec {
        &self.covariance
    }

    /// Noise variance σ².
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// This task's regression coefficients (target plus contrast).
    pub fn coefficients(&self) -> RealVector {
        &self.beta_target + &self.contrast
    }

    /// Ambient dimension p.
    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }
}

/// One realized dataset: a design matrix and its responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    task_index: usize,
    design: RealMatrix,
    response: RealVector,
}

impl Dataset {
    /// Validated constructor: the response length must match the design rows.
    pub fn new(task_index: usize, design: RealMatrix, response: RealVector) -> Result<Self> {
        if design.nrows() != response.len() {
            return Err(Error::Shape(format!(
                "design has {} rows but response has {} entries",
                design.nrows(),
                response.len()
            )));
        }
        Ok(Dataset {
            task_index,
            design,
            response,
        })
    }

    /// Task index this dataset was drawn from.
    pub fn task_index(&self) -> usize {
        self.task_index
    }

    /// The n × p design matrix.
    pub fn design(&self) -> &RealMatrix {
        &self.design
    }

    /// The n response values.
    pub fn response(&self) -> &RealVector {
        &self.response
    }

    /// Number of rows n.
    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    /// Ambient dimension p.
    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// The sub-dataset at the given row indices, preserving their order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let design = RealMatrix::from_fn(rows.len(), self.dim(), |i, j| self.design[(rows[i], j)]);
        let response = RealVector::from_fn(rows.len(), |i, _| self.response[rows[i]]);
        Dataset {
            task_index: self.task_index,
            design,
            response,
        }
    }
}

/// What a derived random stream is used for. Distinct purposes with the same
/// (replicate, task) label still yield independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Coefficient directions; replicate-independent (use replicate 0).
    Coefficients,
    /// Covariance eigenbases; replicate-independent (use replicate 0).
    EigenBasis,
    /// Whitened design entries.
    Design,
    /// Observation noise.
    Noise,
    /// Cross-validation fold shuffling.
    Folds,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Coefficients => 1,
            StreamPurpose::EigenBasis => 2,
            StreamPurpose::Design => 3,
            StreamPurpose::Noise => 4,
            StreamPurpose::Folds => 5,
        }
    }
}

/// Master seed plus the labeling scheme that derives one independent stream
/// per (replicate, task, purpose).
///
/// Streams are counter-based: the label is packed into the ChaCha stream
/// number, so deriving a stream never consumes state from any other stream and
/// replicate-level parallelism cannot reorder draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    master_seed: u64,
}

impl SeedPolicy {
    /// Policy for a master seed.
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    /// The master seed.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The stream for a (replicate, task, purpose) label.
    ///
    /// Parameter purposes ([`StreamPurpose::Coefficients`],
    /// [`StreamPurpose::EigenBasis`]) should be called with replicate 0 so the
    /// drawn parameters are identical across replicates.
    pub fn stream(&self, replicate: u64, task: usize, purpose: StreamPurpose) -> ChaCha8Rng {
        assert!(
            replicate < (1 << 40),
            "replicate index {replicate} exceeds the stream label budget"
        );
        assert!(
            task < (1 << 16),
            "task index {task} exceeds the stream label budget"
        );
        let label = (purpose.tag() << 56) | ((task as u64) << 40) | replicate;
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(label);
        rng
    }
}

/// Distribution of the whitened design entries (unit variance each).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntryLaw {
    /// Standard Gaussian (the tested default).
    #[default]
    Gaussian,
    /// ±1 with equal probability.
    Rademacher,
    /// Uniform on [−√3, √3].
    UniformScaled,
}

fn whitened_matrix(rows: usize, cols: usize, law: EntryLaw, rng: &mut ChaCha8Rng) -> RealMatrix {
    match law {
        EntryLaw::Gaussian => RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)),
        EntryLaw::Rademacher => {
            RealMatrix::from_fn(
                rows,
                cols,
                |_, _| {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                },
            )
        }
        EntryLaw::UniformScaled => {
            let half_width = 3.0f64.sqrt();
            let dist = Uniform::new(-half_width, half_width).expect("valid uniform bounds");
            RealMatrix::from_fn(rows, cols, |_, _| rng.sample(dist))
        }
    }
}

/// A seed-deterministic orthogonal matrix: the Q factor of a seeded i.i.d.
/// Gaussian matrix, with each column's sign flipped so the triangular factor
/// has nonnegative diagonal. The sign convention removes the ± ambiguity of
/// the factorization, making the output a pure function of the stream.
pub fn sample_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    assert!(p >= 1, "orthogonal matrices need dimension at least 1");
    let g = RealMatrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..p {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

/// Draw the target coefficient vector and per-source contrasts.
///
/// Directions are independent uniform draws from the unit sphere, one stream
/// per task label; the target direction is scaled to squared norm `signal_s`
/// and the q-th contrast to squared norm `ssr[q−1] · signal_s`. All draws are
/// replicate-independent.
pub fn make_coefficients(
    p: usize,
    signal_s: f64,
    ssr: &[f64],
    policy: &SeedPolicy,
) -> Result<(RealVector, Vec<RealVector>)> {
    if !signal_s.is_finite() || signal_s <= 0.0 {
        return Err(Error::Domain(format!(
            "signal strength must be positive, got {signal_s}"
        )));
    }
    if let Some(bad) = ssr.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Domain(format!(
            "shift-to-signal ratios must be nonnegative, got {bad}"
        )));
    }
    let unit_direction = |task: usize| -> RealVector {
        let mut rng = policy.stream(0, task, StreamPurpose::Coefficients);
        let g = RealVector::from_fn(p, |_, _| rng.sample(StandardNormal));
        let norm = g.norm();
        g / norm
    };
    let beta = unit_direction(0) * signal_s.sqrt();
    let contrasts = ssr
        .iter()
        .enumerate()
        .map(|(i, &ratio)| unit_direction(i + 1) * (ratio * signal_s).sqrt())
        .collect();
    Ok((beta, contrasts))
}

/// Draw one dataset for a task: `X = Z Σ^{1/2}` with i.i.d. whitened entries
/// and `y = X(β + δ) + ε` with Gaussian noise of the task's variance.
///
/// Design entries and noise come from separate purpose streams of the same
/// (replicate, task) label, so the pair (and hence the dataset) is bit-identical
/// for identical labels.
pub fn sample_dataset(
    spec: &TaskSpec,
    n: usize,
    policy: &SeedPolicy,
    replicate: u64,
) -> Result<Dataset> {
    sample_dataset_with_law(spec, n, policy, replicate, EntryLaw::Gaussian)
}

/// [`sample_dataset`] with an explicit whitened entry law.
pub fn sample_dataset_with_law(
    spec: &TaskSpec,
    n: usize,
    policy: &SeedPolicy,
    replicate: u64,
    law: EntryLaw,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Shape("datasets need at least one row".into()));
    }
    let p = spec.dim();
    let task = spec.task_index();
    let mut design_rng = policy.stream(replicate, task, StreamPurpose::Design);
    let z = whitened_matrix(n, p, law, &mut design_rng);
    let design = spec.covariance().sqrt_times(&z)?;

    let mut noise_rng = policy.stream(replicate, task, StreamPurpose::Noise);
    let sigma = spec.noise_variance().sqrt();
    let noise = RealVector::from_fn(n, |_, _| sigma * rng_normal(&mut noise_rng));

    let response = &design * spec.coefficients() + noise;
    Dataset::new(task, design, response)
}

fn rng_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}
