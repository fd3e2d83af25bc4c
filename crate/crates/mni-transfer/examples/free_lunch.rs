//! Demonstrate that uniformly upscaling a source's covariance leaves the
//! transfer estimator's bias untouched while shrinking the noise it imports
//! by exactly the scale factor: stronger source features are a free lunch.

use mni_transfer::datagen::{
    make_coefficients, sample_dataset_with_law, CovarianceSpec, EntryLaw, SeedPolicy, TaskSpec,
};
use mni_transfer::linalg::RealVector;
use mni_transfer::risk::{conditional_bias_variance_tm, free_lunch_scale};

fn main() -> mni_transfer::Result<()> {
    let p = 160;
    let (n0, n1) = (25, 70);
    let alpha = 8.0;
    let policy = SeedPolicy::new(29);

    let (beta, contrasts) = make_coefficients(p, 10.0, &[0.3], &policy)?;
    let base_cov = CovarianceSpec::isotropic(p);
    let scaled_cov = free_lunch_scale(&base_cov, alpha)?;

    let target = TaskSpec::new(0, beta.clone(), RealVector::zeros(p), base_cov.clone(), 1.0)?;
    let source = TaskSpec::new(1, beta.clone(), contrasts[0].clone(), base_cov, 1.0)?;
    let source_scaled = TaskSpec::new(1, beta, contrasts[0].clone(), scaled_cov, 1.0)?;

    // The same whitened draws feed both source designs, so the only change is
    // the covariance scale.
    let target_data = sample_dataset_with_law(&target, n0, &policy, 0, EntryLaw::Gaussian)?;
    let source_data = sample_dataset_with_law(&source, n1, &policy, 0, EntryLaw::Gaussian)?;
    let source_data_scaled =
        sample_dataset_with_law(&source_scaled, n1, &policy, 0, EntryLaw::Gaussian)?;

    let plain =
        conditional_bias_variance_tm(target_data.design(), source_data.design(), &target, &source)?;
    let scaled = conditional_bias_variance_tm(
        target_data.design(),
        source_data_scaled.design(),
        &target,
        &source_scaled,
    )?;

    println!("source covariance scale alpha = {alpha}");
    println!(
        "bias:               {:.6} -> {:.6} (unchanged)",
        plain.bias, scaled.bias
    );
    println!(
        "variance inflation: {:.6} -> {:.6} (ratio {:.6}, expected {:.6})",
        plain.variance_inflation,
        scaled.variance_inflation,
        scaled.variance_inflation / plain.variance_inflation,
        1.0 / alpha
    );
    Ok(())
}
