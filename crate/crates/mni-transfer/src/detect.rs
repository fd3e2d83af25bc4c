//! Informative-source detection and the weighted transfer ensemble: K-fold
//! cross-validation losses on the target data, a threshold rule that keeps
//! sources whose transfer loss is not meaningfully worse than the target-only
//! loss, inverse-loss weights, and the final weighted combination of transfer
//! fits.
//!
//! Fold partitions are seed-deterministic; every source model is pre-trained
//! once on the full source data and only the target-side fine-tuning is refit
//! per fold complement.

use crate::datagen::{Dataset, SeedPolicy, StreamPurpose};
use crate::error::{Error, Result};
use crate::estimators::{fit_mni, EstimatorKind, FittedCoefficients, TargetContext};
use crate::linalg::RealVector;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// A deterministic partition of target rows into equal-size folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    k: usize,
    assignments: Vec<usize>,
    fold_size: usize,
}

impl FoldPartition {
    /// Build a partition from explicit per-row fold labels; every fold in
    /// `0..k` must receive the same number of rows.
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!(
                "cross-validation needs at least 2 folds, got {k}"
            )));
        }
        if !assignments.len().is_multiple_of(k) {
            return Err(Error::Divisibility {
                rows: assignments.len(),
                folds: k,
            });
        }
        let fold_size = assignments.len() / k;
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(Error::Domain(format!(
                    "fold label {a} out of range for {k} folds"
                )));
            }
            counts[a] += 1;
        }
        if counts.iter().any(|&c| c != fold_size) {
            return Err(Error::Domain(
                "fold labels must assign equally many rows to every fold".into(),
            ));
        }
        Ok(FoldPartition {
            k,
            assignments,
            fold_size,
        })
    }

    /// Number of folds K.
    pub fn fold_count(&self) -> usize {
        self.k
    }

    /// Rows per fold, `n₀/K`.
    pub fn fold_size(&self) -> usize {
        self.fold_size
    }

    /// Per-row fold labels.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Row indices held out by the given fold, ascending.
    pub fn rows_in_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Row indices outside the given fold, ascending.
    pub fn rows_outside_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Randomly partition `n0` target rows into `k` equal folds, deterministically
/// in the seed policy and replicate label.
pub fn partition_folds(
    n0: usize,
    k: usize,
    policy: &SeedPolicy,
    replicate: u64,
) -> Result<FoldPartition> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "cross-validation needs at least 2 folds, got {k}"
        )));
    }
    if !n0.is_multiple_of(k) {
        return Err(Error::Divisibility { rows: n0, folds: k });
    }
    let mut order: Vec<usize> = (0..n0).collect();
    let mut rng = policy.stream(replicate, 0, StreamPurpose::Folds);
    order.shuffle(&mut rng);
    let fold_size = n0 / k;
    let mut assignments = vec![0usize; n0];
    for (position, &row) in order.iter().enumerate() {
        assignments[row] = position / fold_size;
    }
    Ok(FoldPartition {
        k,
        assignments,
        fold_size,
    })
}

/// Which estimator a cross-validation loop refits on each fold complement.
pub enum CvRecipe<'a> {
    /// Target-only interpolator of the complement rows.
    TargetMni,
    /// Transfer interpolator fine-tuned on the complement rows against a
    /// pre-trained source model.
    TransferFromSource(&'a FittedCoefficients),
}

/// Per-fold and terminal cross-validation losses.
#[derive(Debug, Clone)]
pub struct CvLoss {
    /// Held-out squared-error loss of each fold, normalized by the fold size.
    pub per_fold: RealVector,
    /// Arithmetic mean of the per-fold losses.
    pub terminal: f64,
}

fn held_out_loss(estimate: &RealVector, target: &Dataset, rows: &[usize]) -> f64 {
    let held = target.select_rows(rows);
    let residual = held.response() - held.design() * estimate;
    residual.norm_squared() / rows.len() as f64
}

/// Cross-validate one estimator recipe over a fold partition of the target
/// data. Each fold's loss is the held-out mean squared error of the estimator
/// refit on the complementary rows; the terminal loss averages the folds.
pub fn cv_loss(recipe: &CvRecipe<'_>, target: &Dataset, folds: &FoldPartition) -> Result<CvLoss> {
    if folds.assignments().len() != target.rows() {
        return Err(Error::Shape(format!(
            "partition covers {} rows but the target has {}",
            folds.assignments().len(),
            target.rows()
        )));
    }
    let mut per_fold = RealVector::zeros(folds.fold_count());
    for fold in 0..folds.fold_count() {
        let complement = target.select_rows(&folds.rows_outside_fold(fold));
        let ctx = TargetContext::new(&complement)?;
        let estimate = match recipe {
            CvRecipe::TargetMni => ctx.target_mni().estimate.clone(),
            CvRecipe::TransferFromSource(source_fit) => ctx.transfer(source_fit)?.estimate,
        };
        per_fold[fold] = held_out_loss(&estimate, target, &folds.rows_in_fold(fold));
    }
    let terminal = per_fold.mean();
    Ok(CvLoss { per_fold, terminal })
}

/// Outcome of informative-source detection.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    /// Terminal cross-validation loss of each source's transfer fit.
    pub per_source_cv_loss: BTreeMap<usize, f64>,
    /// Terminal cross-validation loss of the target-only interpolator.
    pub target_cv_loss: f64,
    /// Sample standard deviation (divisor K−1) of the target per-fold losses.
    pub sigma_hat: f64,
    /// The detection threshold `ε₀ · max(σ̂, 0.01)`.
    pub threshold: f64,
    /// Detected source indices, ascending.
    pub detected: Vec<usize>,
    /// Inverse-loss weights over the detected sources, summing to 1; empty
    /// when nothing is detected.
    pub weights: BTreeMap<usize, f64>,
}

/// Loss floor applied before inverting weights, guarding the contrived
/// zero-loss case against infinite weights.
pub const WEIGHT_LOSS_FLOOR: f64 = 1e-12;

/// Apply the detection rule: keep sources whose transfer loss exceeds the
/// target-only loss by at most `ε₀ · max(σ̂, 0.01)`, where σ̂ is the sample
/// standard deviation of the target's per-fold losses; weight the kept
/// sources by normalized inverse loss.
pub fn detect_informative(
    source_losses: &BTreeMap<usize, f64>,
    target_per_fold: &RealVector,
    epsilon0: f64,
) -> Result<DetectionReport> {
    if !epsilon0.is_finite() || epsilon0 <= 0.0 {
        return Err(Error::Domain(format!(
            "detection tolerance must be positive, got {epsilon0}"
        )));
    }
    let k = target_per_fold.len();
    if k < 2 {
        return Err(Error::Domain(
            "the loss deviation needs at least 2 folds".into(),
        ));
    }
    if target_per_fold.iter().any(|l| !l.is_finite() || *l < 0.0)
        || source_losses.values().any(|l| !l.is_finite() || *l < 0.0)
    {
        return Err(Error::Domain(
            "cross-validation losses must be finite and nonnegative".into(),
        ));
    }
    let target_cv_loss = target_per_fold.mean();
    let sigma_hat = (target_per_fold
        .iter()
        .map(|l| (l - target_cv_loss) * (l - target_cv_loss))
        .sum::<f64>()
        / (k as f64 - 1.0))
        .sqrt();
    let threshold = epsilon0 * sigma_hat.max(0.01);

    let detected: Vec<usize> = source_losses
        .iter()
        .filter(|(_, &loss)| loss - target_cv_loss <= threshold)
        .map(|(&q, _)| q)
        .collect();

    let mut weights = BTreeMap::new();
    if !detected.is_empty() {
        let inverses: Vec<f64> = detected
            .iter()
            .map(|q| 1.0 / source_losses[q].max(WEIGHT_LOSS_FLOOR))
            .collect();
        let total: f64 = inverses.iter().sum();
        for (q, inv) in detected.iter().zip(&inverses) {
            weights.insert(*q, inv / total);
        }
    }

    Ok(DetectionReport {
        per_source_cv_loss: source_losses.clone(),
        target_cv_loss,
        sigma_hat,
        threshold,
        detected,
        weights,
    })
}

/// Fit the informative-weighted transfer ensemble.
///
/// Pre-trains one interpolator per source, cross-validates the target-only
/// fit and every transfer fit on a shared seed-deterministic fold partition,
/// detects informative sources, and returns the inverse-loss-weighted
/// combination of transfer fits refit on the full target data. When no source
/// is detected the target-only interpolator is returned unchanged.
pub fn fit_wtm(
    target: &Dataset,
    sources: &[Dataset],
    k: usize,
    epsilon0: f64,
    policy: &SeedPolicy,
    replicate: u64,
) -> Result<(FittedCoefficients, DetectionReport)> {
    if sources.is_empty() {
        return Err(Error::Domain(
            "the weighted ensemble needs at least one source".into(),
        ));
    }
    if target.task_index() != 0 {
        return Err(Error::Domain(format!(
            "the ensemble target must be task 0 data, got task {}",
            target.task_index()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for source in sources {
        if source.task_index() == 0 {
            return Err(Error::Domain(
                "source datasets must carry nonzero task indices".into(),
            ));
        }
        if !seen.insert(source.task_index()) {
            return Err(Error::Domain(format!(
                "duplicate source task index {}",
                source.task_index()
            )));
        }
    }

    let folds = partition_folds(target.rows(), k, policy, replicate)?;
    let source_fits: Vec<FittedCoefficients> =
        sources.iter().map(fit_mni).collect::<Result<_>>()?;

    // One factorization per fold complement serves every recipe.
    let mut target_per_fold = RealVector::zeros(k);
    let mut source_per_fold: Vec<RealVector> = vec![RealVector::zeros(k); sources.len()];
    for fold in 0..k {
        let complement = target.select_rows(&folds.rows_outside_fold(fold));
        let ctx = TargetContext::new(&complement)?;
        let held_rows = folds.rows_in_fold(fold);
        target_per_fold[fold] = held_out_loss(&ctx.target_mni().estimate, target, &held_rows);
        for (i, source_fit) in source_fits.iter().enumerate() {
            let estimate = ctx.transfer(source_fit)?.estimate;
            source_per_fold[i][fold] = held_out_loss(&estimate, target, &held_rows);
        }
    }
    let source_losses: BTreeMap<usize, f64> = sources
        .iter()
        .zip(&source_per_fold)
        .map(|(s, losses)| (s.task_index(), losses.mean()))
        .collect();

    let report = detect_informative(&source_losses, &target_per_fold, epsilon0)?;

    let full_ctx = TargetContext::new(target)?;
    if report.detected.is_empty() {
        let mut fit = full_ctx.target_mni().clone();
        fit.kind = EstimatorKind::WeightedTransfer;
        fit.source_tasks = Vec::new();
        return Ok((fit, report));
    }

    let fit_by_task: BTreeMap<usize, &FittedCoefficients> = sources
        .iter()
        .zip(&source_fits)
        .map(|(s, f)| (s.task_index(), f))
        .collect();
    let mut estimate = RealVector::zeros(target.dim());
    for q in &report.detected {
        let transferred = full_ctx.transfer(fit_by_task[q])?;
        estimate += transferred.estimate * report.weights[q];
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("detected_count".into(), report.detected.len() as f64);
    diagnostics.insert("threshold".into(), report.threshold);
    diagnostics.insert("coefficient_norm".into(), estimate.norm());
    let fit = FittedCoefficients {
        estimate,
        kind: EstimatorKind::WeightedTransfer,
        task_index: 0,
        source_tasks: report.detected.clone(),
        diagnostics,
    };
    Ok((fit, report))
}
