//! Decompose the excess risk of both interpolators conditionally on the
//! drawn designs: bias, variance, and—for the transfer estimator—the variance
//! inflation carried over from source noise.

use mni_transfer::datagen::{
    make_coefficients, sample_dataset, CovarianceSpec, SeedPolicy, SpectrumFamily, TaskSpec,
};
use mni_transfer::linalg::RealVector;
use mni_transfer::risk::{conditional_bias_variance_target, conditional_bias_variance_tm};

fn main() -> mni_transfer::Result<()> {
    let p = 120;
    let (n0, n1) = (20, 60);
    let policy = SeedPolicy::new(3);

    let spectrum = SpectrumFamily::target_log();
    let covariance = CovarianceSpec::from_spectrum(&spectrum, p)?;
    let (beta, contrasts) = make_coefficients(p, 25.0, &[0.3], &policy)?;
    let target = TaskSpec::new(
        0,
        beta.clone(),
        RealVector::zeros(p),
        covariance.clone(),
        1.0,
    )?;
    let source = TaskSpec::new(1, beta, contrasts[0].clone(), covariance, 1.0)?;

    let target_data = sample_dataset(&target, n0, &policy, 0)?;
    let source_data = sample_dataset(&source, n1, &policy, 0)?;

    let own = conditional_bias_variance_target(target_data.design(), &target)?;
    println!("target-only interpolator, conditional on this design:");
    println!("  bias        = {:.4}", own.bias);
    println!("  variance    = {:.4}", own.variance);
    println!("  excess risk = {:.4}", own.excess_risk);

    let tm =
        conditional_bias_variance_tm(target_data.design(), source_data.design(), &target, &source)?;
    println!("transfer interpolator, conditional on both designs:");
    println!("  bias               = {:.4}", tm.bias);
    println!(
        "  target variance    = {:.4}",
        tm.variance - tm.variance_inflation
    );
    println!(
        "  variance inflation = {:.4} (noise imported from the source)",
        tm.variance_inflation
    );
    println!("  excess risk        = {:.4}", tm.excess_risk);
    Ok(())
}
