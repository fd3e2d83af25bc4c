//! Interpolating estimators for overparameterized regression: the single-task
//! minimum-ℓ2-norm interpolator, the two-step transfer interpolator, and the
//! pooled interpolator over stacked datasets.
//!
//! All fitters require at most as many rows as dimensions and verify after the
//! fact that the returned coefficients interpolate the data they were given;
//! a rank-deficient design paired with inconsistent responses is reported as
//! an error rather than silently least-squares-fitted.

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{DesignSvd, RealMatrix, RealVector};
use std::collections::BTreeMap;
use std::fmt;

/// Which estimator produced a fit. Rendered names are stable and used in CSV
/// output: `MNI`, `TM:q`, `PooledMNI`, `PooledMNI:q`, `WTM`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Minimum-norm interpolator of a single dataset.
    Mni,
    /// Two-step transfer interpolator pre-trained on the given source task.
    TransferMni { source: usize },
    /// Minimum-norm interpolator of the target data stacked with the listed
    /// source tasks' data.
    PooledMni { sources: Vec<usize> },
    /// Cross-validation-weighted ensemble of transfer interpolators.
    WeightedTransfer,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Mni => f.write_str("MNI"),
            EstimatorKind::TransferMni { source } => write!(f, "TM:{source}"),
            EstimatorKind::PooledMni { sources } => {
                if sources.len() == 1 {
                    write!(f, "PooledMNI:{}", sources[0])
                } else {
                    f.write_str("PooledMNI")
                }
            }
            EstimatorKind::WeightedTransfer => f.write_str("WTM"),
        }
    }
}

/// A fitted coefficient vector with provenance and scalar diagnostics.
#[derive(Debug, Clone)]
pub struct FittedCoefficients {
    /// Estimated coefficient vector of length p.
    pub estimate: RealVector,
    /// Which estimator produced it.
    pub kind: EstimatorKind,
    /// The task whose regression function this fit estimates; 0 for every
    /// transfer-style estimator, q for the raw interpolator of source q.
    pub task_index: usize,
    /// Auxiliary tasks whose data entered the fit, in the order used.
    pub source_tasks: Vec<usize>,
    /// Scalar diagnostics such as design rank and coefficient norm.
    pub diagnostics: BTreeMap<String, f64>,
}

fn interpolation_check(
    design: &RealMatrix,
    response: &RealVector,
    estimate: &RealVector,
    rel_tol: f64,
    what: &str,
) -> Result<()> {
    let residual = (design * estimate - response).norm();
    let budget = rel_tol * (1.0 + response.norm());
    if residual > budget {
        return Err(Error::InconsistentSystem(format!(
            "{what}: residual {residual:.3e} exceeds {budget:.3e}; \
             the system admits no interpolating solution"
        )));
    }
    Ok(())
}

fn mni_from_svd(data: &Dataset, svd: &DesignSvd) -> Result<FittedCoefficients> {
    let estimate = svd.min_norm_apply(data.response());
    interpolation_check(
        data.design(),
        data.response(),
        &estimate,
        1e-8,
        "minimum-norm interpolation",
    )?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("rank".into(), svd.rank() as f64);
    diagnostics.insert("coefficient_norm".into(), estimate.norm());
    let task = data.task_index();
    Ok(FittedCoefficients {
        estimate,
        kind: EstimatorKind::Mni,
        task_index: task,
        source_tasks: if task == 0 { Vec::new() } else { vec![task] },
        diagnostics,
    })
}

/// Fit the minimum-ℓ2-norm interpolator of one dataset.
///
/// Requires n ≤ p. Among all coefficient vectors that reproduce the responses
/// exactly, this is the unique one of smallest Euclidean norm.
pub fn fit_mni(data: &Dataset) -> Result<FittedCoefficients> {
    if data.rows() > data.dim() {
        return Err(Error::Shape(format!(
            "interpolation needs at most as many rows as dimensions, got {} rows in dimension {}",
            data.rows(),
            data.dim()
        )));
    }
    let svd = DesignSvd::new(data.design())?;
    mni_from_svd(data, &svd)
}

/// Cached target-side factorization shared by repeated transfer fits.
///
/// Fitting several transfer estimators against one target dataset reuses the
/// same design factorization and target interpolator; build this once per
/// (target dataset) and call [`TargetContext::transfer`] per source.
pub struct TargetContext {
    data: Dataset,
    svd: DesignSvd,
    target_mni: FittedCoefficients,
}

impl TargetContext {
    /// Factor the target design and fit its interpolator. The dataset must
    /// belong to task 0 and satisfy n ≤ p.
    pub fn new(target: &Dataset) -> Result<Self> {
        if target.task_index() != 0 {
            return Err(Error::Domain(format!(
                "target context requires task 0 data, got task {}",
                target.task_index()
            )));
        }
        if target.rows() > target.dim() {
            return Err(Error::Shape(format!(
                "interpolation needs at most as many rows as dimensions, got {} rows in dimension {}",
                target.rows(),
                target.dim()
            )));
        }
        let svd = DesignSvd::new(target.design())?;
        let target_mni = mni_from_svd(target, &svd)?;
        Ok(TargetContext {
            data: target.clone(),
            svd,
            target_mni,
        })
    }

    /// The target dataset.
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// The factored target design.
    pub fn design_svd(&self) -> &DesignSvd {
        &self.svd
    }

    /// The target-only interpolator.
    pub fn target_mni(&self) -> &FittedCoefficients {
        &self.target_mni
    }

    /// Two-step transfer fit against a pre-trained source interpolator: keep
    /// the target interpolator on the target row space and adopt the source
    /// model on its orthogonal complement.
    ///
    /// Equivalently, the result is the interpolator of the target data that is
    /// closest in Euclidean norm to the source model.
    pub fn transfer(&self, source_fit: &FittedCoefficients) -> Result<FittedCoefficients> {
        if source_fit.kind != EstimatorKind::Mni {
            return Err(Error::Domain(format!(
                "transfer pre-training expects a single-task interpolator, got {}",
                source_fit.kind
            )));
        }
        if source_fit.estimate.len() != self.data.dim() {
            return Err(Error::Shape(format!(
                "source model has dimension {}, target data has dimension {}",
                source_fit.estimate.len(),
                self.data.dim()
            )));
        }
        let carried = self.svd.reject(&source_fit.estimate);
        let estimate = &self.target_mni.estimate + &carried;
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("target_rank".into(), self.svd.rank() as f64);
        diagnostics.insert("coefficient_norm".into(), estimate.norm());
        diagnostics.insert("carried_norm".into(), carried.norm());
        Ok(FittedCoefficients {
            estimate,
            kind: EstimatorKind::TransferMni {
                source: source_fit.task_index,
            },
            task_index: 0,
            source_tasks: vec![source_fit.task_index],
            diagnostics,
        })
    }
}

/// Two-step transfer fit: pre-train on a source (the supplied fit), then
/// fine-tune by interpolating the target data. See [`TargetContext::transfer`];
/// this convenience wrapper factors the target design on every call.
pub fn fit_transfer_mni(
    target: &Dataset,
    source_fit: &FittedCoefficients,
) -> Result<FittedCoefficients> {
    TargetContext::new(target)?.transfer(source_fit)
}

/// Fit the minimum-norm interpolator of several stacked datasets.
///
/// Datasets are stacked in the given order (the target, when present, is
/// conventionally first). The combined row count must not exceed p, and every
/// constituent dataset must be interpolated by the pooled solution; stacked
/// systems with no common interpolator are rejected.
pub fn fit_pooled_mni(datasets: &[&Dataset]) -> Result<FittedCoefficients> {
    let Some(first) = datasets.first() else {
        return Err(Error::Shape("pooled fit needs at least one dataset".into()));
    };
    let p = first.dim();
    if let Some(bad) = datasets.iter().find(|d| d.dim() != p) {
        return Err(Error::Shape(format!(
            "pooled datasets must share one dimension, got {} and {p}",
            bad.dim()
        )));
    }
    let total_rows: usize = datasets.iter().map(|d| d.rows()).sum();
    if total_rows > p {
        return Err(Error::Shape(format!(
            "pooled row count {total_rows} exceeds dimension {p}; interpolation is impossible"
        )));
    }
    let mut design = RealMatrix::zeros(total_rows, p);
    let mut response = RealVector::zeros(total_rows);
    let mut offset = 0;
    for data in datasets {
        design
            .rows_mut(offset, data.rows())
            .copy_from(data.design());
        response
            .rows_mut(offset, data.rows())
            .copy_from(data.response());
        offset += data.rows();
    }
    let svd = DesignSvd::new(&design)?;
    let estimate = svd.min_norm_apply(&response);
    for data in datasets {
        interpolation_check(
            data.design(),
            data.response(),
            &estimate,
            1e-6,
            &format!("pooled interpolation of task {}", data.task_index()),
        )?;
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("rank".into(), svd.rank() as f64);
    diagnostics.insert("coefficient_norm".into(), estimate.norm());
    diagnostics.insert("pooled_rows".into(), total_rows as f64);
    let sources: Vec<usize> = datasets
        .iter()
        .map(|d| d.task_index())
        .filter(|&t| t != 0)
        .collect();
    Ok(FittedCoefficients {
        estimate,
        kind: EstimatorKind::PooledMni {
            sources: sources.clone(),
        },
        task_index: 0,
        source_tasks: sources,
        diagnostics,
    })
}
