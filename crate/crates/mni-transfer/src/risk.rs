//! Analytic risk engine: pointwise excess risk, exact conditional
//! bias/variance decompositions given realized designs, closed-form expected
//! risks under isotropic Gaussian designs, a transfer-size planner,
//! effective-rank and benignness diagnostics, high-probability bound terms,
//! free-lunch covariate scaling, and jointly optimal pooled sample sizes.
//!
//! Conventions: the target task has covariance Σ⁰ and coefficients β; a source
//! task differs by a contrast δ and may have its own covariance and noise
//! level. Excess risk is always measured under the target distribution,
//! `(β̂ − β)ᵀ Σ⁰ (β̂ − β)`.

use crate::datagen::{CovarianceSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::linalg::{DesignSvd, RealMatrix, RealVector};

/// What the bias/variance numbers in a [`RiskReport`] are averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Noise integrated out, designs held fixed at their realized values.
    ConditionalOnDesigns,
    /// Expectation over both noise and designs (closed forms).
    ExpectedOverDesigns,
    /// A single realized value, nothing integrated out.
    PointEstimate,
}

/// Bias/variance decomposition of an estimator's excess risk.
#[derive(Debug, Clone)]
pub struct RiskReport {
    /// Squared bias component.
    pub bias: f64,
    /// Total variance component (for transfer estimators this includes the
    /// inflation term).
    pub variance: f64,
    /// The extra variance paid for transferring from a source, 0 for
    /// target-only estimators. Always at most `variance`.
    pub variance_inflation: f64,
    /// `bias + variance`.
    pub excess_risk: f64,
    /// What the numbers are averaged over.
    pub conditioning: Conditioning,
}

impl RiskReport {
    fn assemble(
        bias: f64,
        variance: f64,
        variance_inflation: f64,
        conditioning: Conditioning,
    ) -> Self {
        RiskReport {
            bias,
            variance,
            variance_inflation,
            excess_risk: bias + variance,
            conditioning,
        }
    }
}

/// Excess risk of a realized estimate under the target distribution:
/// `(estimate − β)ᵀ Σ⁰ (estimate − β)`.
pub fn excess_risk_point(estimate: &RealVector, target: &TaskSpec) -> Result<f64> {
    if estimate.len() != target.dim() {
        return Err(Error::Shape(format!(
            "estimate has dimension {}, target task has dimension {}",
            estimate.len(),
            target.dim()
        )));
    }
    let diff = estimate - target.beta_target();
    // The quadratic form is nonnegative for a positive-definite covariance;
    // clamp rounding noise at exact zero.
    Ok(target.covariance().quadratic_form(&diff, &diff).max(0.0))
}

/// `σ² · Tr((XᵀX)† Σ)` accumulated over the nonzero singular directions of X.
fn noise_variance_through_design(
    svd: &DesignSvd,
    cov: &CovarianceSpec,
    noise_variance: f64,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..svd.rank() {
        let w = svd.row_basis().column(i).clone_owned();
        let s = svd.singular_values()[i];
        acc += cov.quadratic_form(&w, &w) / (s * s);
    }
    noise_variance * acc
}

fn check_design(design: &RealMatrix, p: usize, what: &str) -> Result<()> {
    if design.ncols() != p {
        return Err(Error::Shape(format!(
            "{what} design has {} columns, task dimension is {p}",
            design.ncols()
        )));
    }
    if design.nrows() > design.ncols() {
        return Err(Error::Shape(format!(
            "{what} design has {} rows in dimension {}; interpolation needs n ≤ p",
            design.nrows(),
            design.ncols()
        )));
    }
    Ok(())
}

/// Exact bias and variance of the target-only interpolator, conditional on
/// the realized target design with noise integrated out.
///
/// Bias is the quadratic form of β under `(I−H) Σ⁰ (I−H)` where H projects
/// onto the design row space; variance is `σ₀² Tr((XᵀX)† Σ⁰)`.
pub fn conditional_bias_variance_target(
    target_design: &RealMatrix,
    spec: &TaskSpec,
) -> Result<RiskReport> {
    check_design(target_design, spec.dim(), "target")?;
    let svd = DesignSvd::new(target_design)?;
    let rejected = svd.reject(spec.beta_target());
    let bias = spec
        .covariance()
        .quadratic_form(&rejected, &rejected)
        .max(0.0);
    let variance = noise_variance_through_design(&svd, spec.covariance(), spec.noise_variance());
    Ok(RiskReport::assemble(
        bias,
        variance,
        0.0,
        Conditioning::ConditionalOnDesigns,
    ))
}

/// Exact bias and variance of the two-step transfer interpolator, conditional
/// on both realized designs with both noise vectors integrated out.
///
/// The bias is computed term by term: the signal carried through the source
/// null space, the contrast picked up on the source row space, and the signed
/// cross term between the two, each weighted by `(I−H⁰) Σ⁰ (I−H⁰)`. The
/// variance splits into the target-only part plus the inflation
/// `σ_q² Tr((X_qᵀX_q)† (I−H⁰) Σ⁰ (I−H⁰))` paid for the transfer.
pub fn conditional_bias_variance_tm(
    target_design: &RealMatrix,
    source_design: &RealMatrix,
    spec_target: &TaskSpec,
    spec_source: &TaskSpec,
) -> Result<RiskReport> {
    let p = spec_target.dim();
    if spec_source.dim() != p {
        return Err(Error::Shape(format!(
            "source task has dimension {}, target task has dimension {p}",
            spec_source.dim()
        )));
    }
    check_design(target_design, p, "target")?;
    check_design(source_design, p, "source")?;
    let svd_target = DesignSvd::new(target_design)?;
    let svd_source = DesignSvd::new(source_design)?;
    let cov = spec_target.covariance();

    let signal_through_source = svd_source.reject(spec_target.beta_target());
    let contrast_on_source = svd_source.project(spec_source.contrast());
    let ra = svd_target.reject(&signal_through_source);
    let rb = svd_target.reject(&contrast_on_source);
    let carried_signal = cov.quadratic_form(&ra, &ra);
    let contrast = cov.quadratic_form(&rb, &rb);
    let cross = cov.quadratic_form(&rb, &ra);
    // The three terms sum to a quadratic form of (signal − contrast), so the
    // exact value is nonnegative; clamp rounding noise.
    let bias = (carried_signal + contrast - 2.0 * cross).max(0.0);

    let base_variance =
        noise_variance_through_design(&svd_target, cov, spec_target.noise_variance());
    let mut inflation_trace = 0.0;
    for i in 0..svd_source.rank() {
        let w = svd_source.row_basis().column(i).clone_owned();
        let rejected = svd_target.reject(&w);
        let s = svd_source.singular_values()[i];
        inflation_trace += cov.quadratic_form(&rejected, &rejected) / (s * s);
    }
    let inflation = spec_source.noise_variance() * inflation_trace;
    Ok(RiskReport::assemble(
        bias,
        base_variance + inflation,
        inflation,
        Conditioning::ConditionalOnDesigns,
    ))
}

/// Expected risks of the target-only and transfer interpolators under
/// isotropic Gaussian designs.
#[derive(Debug, Clone)]
pub struct IsotropicExpectedRisk {
    /// Closed-form expected risk of the target-only interpolator.
    pub target_only: RiskReport,
    /// Closed-form expected risk of the transfer interpolator.
    pub transfer: RiskReport,
}

/// Closed-form expected bias and variance under isotropic Gaussian designs
/// (identity target covariance), averaging over designs and noise.
///
/// With target size n₀, source size n_q, signal `‖β‖²`, contrast `‖δ‖²`, and
/// the two noise variances:
///
/// * target bias `((p−n₀)/p)‖β‖²`, target variance `σ₀²n₀/(p−n₀−1)`;
/// * transfer bias `((p−n₀)/p)(((p−n_q)/p)‖β‖² + (n_q/p)‖δ‖²)`;
/// * variance inflation `((p−n₀)/p)·σ_q²n_q/(p−n_q−1)`.
///
/// Requires `p > n₀+1` and `p > n_q+1` so the variance denominators are
/// positive; `n_q = 0` collapses the transfer report onto the target one.
pub fn expected_risk_isotropic(
    p: usize,
    n0: usize,
    nq: usize,
    norm_beta_sq: f64,
    norm_delta_sq: f64,
    sigma0_sq: f64,
    sigmaq_sq: f64,
) -> Result<IsotropicExpectedRisk> {
    if p <= n0 + 1 || p <= nq + 1 {
        return Err(Error::Domain(format!(
            "closed forms need p > n+1 for every sample size; got p={p}, n0={n0}, nq={nq}"
        )));
    }
    for (name, v) in [
        ("signal norm", norm_beta_sq),
        ("contrast norm", norm_delta_sq),
        ("target noise variance", sigma0_sq),
        ("source noise variance", sigmaq_sq),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let pf = p as f64;
    let n0f = n0 as f64;
    let nqf = nq as f64;
    let survive0 = (pf - n0f) / pf;

    let bias_target = survive0 * norm_beta_sq;
    let variance_target = sigma0_sq * n0f / (pf - n0f - 1.0);
    let target_only = RiskReport::assemble(
        bias_target,
        variance_target,
        0.0,
        Conditioning::ExpectedOverDesigns,
    );

    let bias_transfer = survive0 * (((pf - nqf) / pf) * norm_beta_sq + (nqf / pf) * norm_delta_sq);
    let inflation = survive0 * sigmaq_sq * nqf / (pf - nqf - 1.0);
    let transfer = RiskReport::assemble(
        bias_transfer,
        variance_target + inflation,
        inflation,
        Conditioning::ExpectedOverDesigns,
    );
    Ok(IsotropicExpectedRisk {
        target_only,
        transfer,
    })
}

/// Expected-risk reduction of transferring from a source of size `nq` versus
/// staying target-only, under isotropic designs. The target noise variance
/// cancels in the difference, so it is not a parameter; the source noise
/// variance is recovered from `snr = ‖β‖²/σ_q²`.
pub fn expected_transfer_gain(
    p: usize,
    n0: usize,
    nq: usize,
    norm_beta_sq: f64,
    ssr: f64,
    snr: f64,
) -> Result<f64> {
    if !snr.is_finite() || snr <= 0.0 {
        return Err(Error::Domain(format!(
            "signal-to-noise ratio must be positive, got {snr}"
        )));
    }
    let sigmaq_sq = norm_beta_sq / snr;
    let risks =
        expected_risk_isotropic(p, n0, nq, norm_beta_sq, ssr * norm_beta_sq, 0.0, sigmaq_sq)?;
    Ok(risks.target_only.excess_risk - risks.transfer.excess_risk)
}

/// Whether transferring from a source of size `nq` strictly improves the
/// expected risk under isotropic designs: requires the contrast to be smaller
/// than the signal (`ssr < 1`) and `snr(1−ssr) > p/(p−n_q−1)`.
pub fn positive_transfer_at(p: usize, snr: f64, ssr: f64, nq: usize) -> Result<bool> {
    if !snr.is_finite() || snr <= 0.0 || !ssr.is_finite() || ssr < 0.0 {
        return Err(Error::Domain(format!(
            "need snr > 0 and ssr ≥ 0, got snr={snr}, ssr={ssr}"
        )));
    }
    if p <= nq + 1 {
        return Err(Error::Domain(format!(
            "positive-transfer condition needs p > nq+1, got p={p}, nq={nq}"
        )));
    }
    let pf = p as f64;
    Ok(ssr < 1.0 && snr * (1.0 - ssr) > pf / (pf - nq as f64 - 1.0))
}

/// Outcome of planning the source sample size for a single-source transfer.
#[derive(Debug, Clone)]
pub struct TransferPlan {
    /// Whether the planned size strictly improves on the target-only risk.
    pub positive_transfer: bool,
    /// Best integer source size in `[1, p−2]`, absent when no size helps.
    pub n_star: Option<usize>,
    /// Unconstrained real-valued maximizer `p−1−√(p(p−1)/(snr(1−ssr)))`.
    pub n_star_real: Option<f64>,
    /// Expected-risk reduction achieved at `n_star`.
    pub delta_at_n_star: Option<f64>,
    /// `snr·(1−ssr)`, the quantity the existence condition tests.
    pub condition_lhs: f64,
    /// `p(p−1)/(p−2)²`, the existence threshold.
    pub condition_rhs: f64,
}

/// Plan the source sample size that maximizes the expected-risk reduction of
/// a transfer under isotropic designs.
///
/// A beneficial size exists iff `ssr < 1` and `snr(1−ssr) ≥ p(p−1)/(p−2)²`;
/// the real maximizer is then floored/ceiled and the better integer kept (ties
/// resolved toward the smaller size by direct evaluation).
pub fn transfer_plan(
    p: usize,
    snr: f64,
    ssr: f64,
    n0: usize,
    norm_beta_sq: f64,
) -> Result<TransferPlan> {
    if p < 3 {
        return Err(Error::Domain(format!("planning needs p ≥ 3, got {p}")));
    }
    if !snr.is_finite() || snr <= 0.0 {
        return Err(Error::Domain(format!(
            "signal-to-noise ratio must be positive, got {snr}"
        )));
    }
    if !ssr.is_finite() || ssr < 0.0 {
        return Err(Error::Domain(format!(
            "shift-to-signal ratio must be nonnegative, got {ssr}"
        )));
    }
    if !norm_beta_sq.is_finite() || norm_beta_sq <= 0.0 {
        return Err(Error::Domain(format!(
            "signal norm must be positive, got {norm_beta_sq}"
        )));
    }
    if p <= n0 + 1 {
        return Err(Error::Domain(format!(
            "planning needs p > n0+1, got p={p}, n0={n0}"
        )));
    }
    let pf = p as f64;
    let condition_lhs = snr * (1.0 - ssr);
    let condition_rhs = pf * (pf - 1.0) / ((pf - 2.0) * (pf - 2.0));
    if !(ssr < 1.0 && condition_lhs >= condition_rhs) {
        return Ok(TransferPlan {
            positive_transfer: false,
            n_star: None,
            n_star_real: None,
            delta_at_n_star: None,
            condition_lhs,
            condition_rhs,
        });
    }
    let n_real = (pf - 1.0) - (pf * (pf - 1.0) / condition_lhs).sqrt();
    let lower = (n_real.floor() as usize).clamp(1, p - 2);
    let upper = (n_real.ceil() as usize).clamp(1, p - 2);
    let mut best_n = lower;
    let mut best_gain = expected_transfer_gain(p, n0, lower, norm_beta_sq, ssr, snr)?;
    if upper != lower {
        let upper_gain = expected_transfer_gain(p, n0, upper, norm_beta_sq, ssr, snr)?;
        if upper_gain > best_gain {
            best_n = upper;
            best_gain = upper_gain;
        }
    }
    let positive = positive_transfer_at(p, snr, ssr, best_n)?;
    Ok(TransferPlan {
        positive_transfer: positive,
        n_star: Some(best_n),
        n_star_real: Some(n_real),
        delta_at_n_star: Some(best_gain.max(0.0)),
        condition_lhs,
        condition_rhs,
    })
}

/// Whether a spectrum supports vanishing interpolation risk at the given
/// sample size, per the effective-rank diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenignVerdict {
    /// All three diagnostic ratios are below the heuristic threshold.
    Benign,
    /// At least one ratio is too large.
    NotBenign,
    /// The critical index does not exist, so the ratios are undefined.
    Indeterminate,
}

/// Heuristic cutoff applied to each of the three benignness ratios. The
/// underlying characterization is asymptotic; at finite sizes this is a
/// diagnostic, not a certificate.
pub const BENIGN_RATIO_THRESHOLD: f64 = 0.5;

/// Default admissibility constant for the critical index.
pub const DEFAULT_CRITICAL_INDEX_CONSTANT: f64 = 1.0;

/// Default comparability factor for the alignment horizon.
pub const DEFAULT_TAIL_COMPARABILITY: f64 = 2.0;

/// Effective-rank sequences and benignness diagnostics of one spectrum at one
/// sample size.
#[derive(Debug, Clone)]
pub struct EffectiveRankProfile {
    /// `r_k = (Σ_{j>k} λ_j)/λ_{k+1}` for k = 0..p−2.
    pub tail_rank: RealVector,
    /// `R_k = (Σ_{j>k} λ_j)²/(Σ_{j>k} λ_j²)` for k = 0..p−2.
    pub tail_rank_sq: RealVector,
    /// Smallest k with `r_k ≥ b·n`, absent when no such k exists.
    pub k_star: Option<usize>,
    /// Smallest k with `λ_{k+1} ≤ c·λ_p`: the index after which eigenvalues
    /// are comparable to the smallest one. Always in `[0, p)`.
    pub tau_star: usize,
    /// The sample size the profile was evaluated at.
    pub n: usize,
    /// Admissibility constant b used for `k_star`.
    pub b_constant: f64,
    /// Comparability factor c used for `tau_star`.
    pub c_constant: f64,
    /// Tri-state benignness diagnostic.
    pub verdict: BenignVerdict,
}

impl EffectiveRankProfile {
    /// `r_0/n`, the first benignness ratio.
    pub fn r0_over_n(&self) -> f64 {
        self.tail_rank[0] / self.n as f64
    }

    /// `k*/n`, when the critical index exists.
    pub fn k_ratio(&self) -> Option<f64> {
        self.k_star.map(|k| k as f64 / self.n as f64)
    }

    /// `n/R_{k*}`, when the critical index exists.
    pub fn n_over_tail_rank_sq(&self) -> Option<f64> {
        self.k_star.map(|k| self.n as f64 / self.tail_rank_sq[k])
    }
}

/// Compute the effective-rank sequences, the critical index, the alignment
/// horizon, and a benignness verdict for a positive nonincreasing spectrum.
pub fn effective_rank_profile(
    eigs: &RealVector,
    n: usize,
    b: f64,
    tau_ratio_c: f64,
) -> Result<EffectiveRankProfile> {
    let p = eigs.len();
    if p < 2 {
        return Err(Error::Spectrum(
            "effective ranks need a spectrum of dimension at least 2".into(),
        ));
    }
    for i in 0..p {
        if !eigs[i].is_finite() || eigs[i] <= 0.0 {
            return Err(Error::Spectrum(
                "effective ranks need positive finite eigenvalues".into(),
            ));
        }
        if i > 0 && eigs[i] > eigs[i - 1] {
            return Err(Error::Spectrum(
                "effective ranks need a nonincreasing spectrum".into(),
            ));
        }
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if !(b.is_finite() && b >= 1.0) || !(tau_ratio_c.is_finite() && tau_ratio_c >= 1.0) {
        return Err(Error::Domain(format!(
            "constants must be at least 1, got b={b}, c={tau_ratio_c}"
        )));
    }

    // Suffix sums from the back give every tail in one pass.
    let mut tail_sum = vec![0.0; p + 1];
    let mut tail_sq = vec![0.0; p + 1];
    for i in (0..p).rev() {
        tail_sum[i] = tail_sum[i + 1] + eigs[i];
        tail_sq[i] = tail_sq[i + 1] + eigs[i] * eigs[i];
    }
    let tail_rank = RealVector::from_fn(p - 1, |k, _| tail_sum[k] / eigs[k]);
    let tail_rank_sq = RealVector::from_fn(p - 1, |k, _| tail_sum[k] * tail_sum[k] / tail_sq[k]);

    let k_star = (0..p - 1).find(|&k| tail_rank[k] >= b * n as f64);
    let smallest = eigs[p - 1];
    let tau_star = (0..p)
        .find(|&k| eigs[k] <= tau_ratio_c * smallest)
        .expect("the last eigenvalue always satisfies the comparability test");

    let verdict = match k_star {
        None => BenignVerdict::Indeterminate,
        Some(k) => {
            let nf = n as f64;
            let ratios = [tail_rank[0] / nf, k as f64 / nf, nf / tail_rank_sq[k]];
            if ratios.iter().all(|&r| r < BENIGN_RATIO_THRESHOLD) {
                BenignVerdict::Benign
            } else {
                BenignVerdict::NotBenign
            }
        }
    };

    Ok(EffectiveRankProfile {
        tail_rank,
        tail_rank_sq,
        k_star,
        tau_star,
        n,
        b_constant: b,
        c_constant: tau_ratio_c,
        verdict,
    })
}

/// Assembled high-probability bound ingredients for the transfer estimator
/// under general (sub-Gaussian, spectral) designs.
///
/// All expressions are reported with their unspecified universal constants set
/// to 1; they are scaling skeletons for comparing regimes, not certified
/// numeric bounds.
#[derive(Debug, Clone)]
pub struct BoundTerms {
    /// Concentration width `√((r₀(Σ⁰)+t)/n₀) + (r₀(Σ⁰)+t)/n₀` for the target.
    pub psi_target: f64,
    /// Concentration width for the source, same shape with (Σ_q, n_q).
    pub psi_source: f64,
    /// `k*/n_q + n_q/R_{k*}` evaluated on the source spectrum.
    pub upsilon_source: f64,
    /// Up-to-constant bias bound for the target-only interpolator.
    pub bias_target_bound: f64,
    /// Up-to-constant bias bound for the transfer interpolator.
    pub bias_transfer_bound: f64,
    /// Up-to-constant bound on the transfer variance inflation.
    pub variance_inflation_bound: f64,
    /// Smallest source eigenvalue.
    pub lambda_p_source: f64,
    /// Supplied operator-norm bound on `Σ⁰ (Σ_q)⁻¹`.
    pub c_sigma: f64,
}

fn validate_spectrum(eigs: &RealVector, what: &str) -> Result<()> {
    if eigs.is_empty() {
        return Err(Error::Spectrum(format!("{what} spectrum is empty")));
    }
    for i in 0..eigs.len() {
        if !eigs[i].is_finite() || eigs[i] <= 0.0 {
            return Err(Error::Spectrum(format!(
                "{what} spectrum must be positive and finite"
            )));
        }
        if i > 0 && eigs[i] > eigs[i - 1] {
            return Err(Error::Spectrum(format!(
                "{what} spectrum must be nonincreasing"
            )));
        }
    }
    Ok(())
}

fn concentration_width(eigs: &RealVector, n: usize, t: f64) -> f64 {
    let r0 = eigs.sum() / eigs[0];
    let ratio = (r0 + t) / n as f64;
    ratio.sqrt() + ratio
}

/// Assemble the high-probability bound terms for a transfer from one source.
///
/// `t ≥ ln 2` is the tail parameter; `c_sigma` is the caller-supplied operator
/// norm of `Σ⁰ (Σ_q)⁻¹` (exactly computable only when the two eigenbases are
/// known to align). Fails when the source spectrum admits no critical index at
/// size `n_q`, since the inflation bound is undefined there.
#[allow(clippy::too_many_arguments)]
pub fn risk_bound_terms(
    eigs_target: &RealVector,
    eigs_source: &RealVector,
    n0: usize,
    nq: usize,
    t: f64,
    norm_beta_sq: f64,
    norm_delta_sq: f64,
    sigma_q_sq: f64,
    c_sigma: f64,
) -> Result<BoundTerms> {
    validate_spectrum(eigs_target, "target")?;
    validate_spectrum(eigs_source, "source")?;
    if n0 == 0 || nq == 0 {
        return Err(Error::Domain("sample sizes must be at least 1".into()));
    }
    if !t.is_finite() || t < std::f64::consts::LN_2 {
        return Err(Error::Domain(format!(
            "tail parameter must be at least ln 2 ≈ 0.693, got {t}"
        )));
    }
    for (name, v) in [
        ("signal norm", norm_beta_sq),
        ("contrast norm", norm_delta_sq),
        ("source noise variance", sigma_q_sq),
        ("covariance comparison constant", c_sigma),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }

    let psi_target = concentration_width(eigs_target, n0, t);
    let psi_source = concentration_width(eigs_source, nq, t);

    let source_profile = effective_rank_profile(
        eigs_source,
        nq,
        DEFAULT_CRITICAL_INDEX_CONSTANT,
        DEFAULT_TAIL_COMPARABILITY,
    )?;
    let Some(k_star) = source_profile.k_star else {
        return Err(Error::Domain(format!(
            "no critical index exists for the source spectrum at n={nq}; \
             the inflation bound is undefined"
        )));
    };
    let upsilon_source =
        k_star as f64 / nq as f64 + nq as f64 / source_profile.tail_rank_sq[k_star];

    let target_op = eigs_target[0];
    let source_op = eigs_source[0];
    let lambda_p_source = eigs_source[eigs_source.len() - 1];

    let bias_target_bound = psi_target * target_op * norm_beta_sq;
    let bias_transfer_bound =
        psi_target * target_op * norm_delta_sq + psi_source * c_sigma * source_op * norm_beta_sq;
    let variance_inflation_bound =
        sigma_q_sq * upsilon_source * psi_target * target_op / lambda_p_source;

    Ok(BoundTerms {
        psi_target,
        psi_source,
        upsilon_source,
        bias_target_bound,
        bias_transfer_bound,
        variance_inflation_bound,
        lambda_p_source,
        c_sigma,
    })
}

/// Uniformly upscale a source covariance by `alpha > 1`.
///
/// With the whitened draws held fixed, this scaling leaves the conditional
/// transfer bias unchanged and divides the variance inflation by exactly
/// `alpha`: stronger source covariates are a free lunch.
pub fn free_lunch_scale(cov: &CovarianceSpec, alpha: f64) -> Result<CovarianceSpec> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::Domain(format!(
            "free-lunch scaling requires alpha > 1, got {alpha}"
        )));
    }
    cov.clone().with_scale(cov.scale_alpha() * alpha)
}

/// Jointly optimal (source, target) sample sizes for pooling one source with
/// the target under isotropic designs.
///
/// The source size is the floored transfer-planner optimum; the target size
/// then minimizes the pooled risk given that source size:
/// `n₀* = max(0, ⌊p − n₁* − √(p²/snr + n₁*·ssr)⌋)`. The pair always satisfies
/// `n₀* + n₁* < p`.
pub fn pooled_optimal_sizes(p: usize, snr: f64, ssr: f64) -> Result<(usize, usize)> {
    if p < 3 {
        return Err(Error::Domain(format!("pooled sizing needs p ≥ 3, got {p}")));
    }
    if !snr.is_finite() || snr <= 0.0 || !ssr.is_finite() || ssr < 0.0 {
        return Err(Error::Domain(format!(
            "need snr > 0 and ssr ≥ 0, got snr={snr}, ssr={ssr}"
        )));
    }
    let pf = p as f64;
    let lhs = snr * (1.0 - ssr);
    let rhs = pf * (pf - 1.0) / ((pf - 2.0) * (pf - 2.0));
    if !(ssr < 1.0 && lhs >= rhs) {
        return Err(Error::Domain(format!(
            "no beneficial source size exists at p={p}, snr={snr}, ssr={ssr}; \
             need ssr < 1 and snr(1−ssr) ≥ p(p−1)/(p−2)²"
        )));
    }
    let n1_real = (pf - 1.0) - (pf * (pf - 1.0) / lhs).sqrt();
    let n1_star = n1_real.floor() as usize;
    let inner = pf * pf / snr + n1_star as f64 * ssr;
    let n0_real = pf - n1_star as f64 - inner.sqrt();
    let n0_star = if n0_real < 0.0 {
        0
    } else {
        n0_real.floor() as usize
    };
    debug_assert!(n0_star + n1_star < p);
    Ok((n1_star, n0_star))
}
