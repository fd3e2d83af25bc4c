//! Transfer learning with minimum-ℓ2-norm interpolators in overparameterized
//! linear regression.
//!
//! The crate has three layers:
//!
//! * **Estimators** — the target-only minimum-norm interpolator, the two-step
//!   transfer interpolator that pre-trains on a source dataset and fine-tunes by
//!   interpolating the target, the pooled interpolator over stacked datasets,
//!   and an informative-weighted ensemble driven by K-fold cross-validation
//!   ([`estimators`], [`detect`]).
//! * **Analytic risk engine** — exact conditional bias/variance decompositions
//!   given realized designs, closed-form expected risks under isotropic Gaussian
//!   designs, a transfer-size planner, effective-rank and benignness
//!   diagnostics, high-probability bound terms, and free-lunch covariate-shift
//!   constructions ([`risk`]).
//! * **Simulation harness** — deterministic, seed-controlled synthesis of
//!   spectra, covariances, coefficients, and datasets ([`datagen`]) plus a batch
//!   experiment runner with CSV output ([`harness`]).
//!
//! Everything below the harness is a pure function of its inputs; all
//! randomness flows through [`datagen::SeedPolicy`], which derives one
//! counter-based stream per (replicate, task, purpose) label so that results
//! are byte-identical regardless of execution order or parallelism.
//!
//! ```
//! use mni_transfer::datagen::{SeedPolicy, TaskSpec, CovarianceSpec, sample_dataset};
//! use mni_transfer::estimators::{fit_mni, fit_transfer_mni};
//! use mni_transfer::risk::excess_risk_point;
//! use nalgebra::DVector;
//!
//! let p = 40;
//! let beta = DVector::from_element(p, 0.5);
//! let target = TaskSpec::new(0, beta.clone(), DVector::zeros(p), CovarianceSpec::isotropic(p), 1.0).unwrap();
//! let source = TaskSpec::new(1, beta, DVector::zeros(p), CovarianceSpec::isotropic(p), 1.0).unwrap();
//!
//! let policy = SeedPolicy::new(7);
//! let target_data = sample_dataset(&target, 10, &policy, 0).unwrap();
//! let source_data = sample_dataset(&source, 20, &policy, 0).unwrap();
//!
//! let source_fit = fit_mni(&source_data).unwrap();
//! let transferred = fit_transfer_mni(&target_data, &source_fit).unwrap();
//! let risk = excess_risk_point(&transferred.estimate, &target).unwrap();
//! assert!(risk.is_finite());
//! ```

pub mod datagen;
pub mod detect;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod risk;

pub use error::{Error, Result};
