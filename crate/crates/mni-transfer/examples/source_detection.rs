//! Screen source tasks by cross-validation before trusting them: one source
//! shares the target's optimum, one is mildly shifted, and one is badly
//! corrupted. The weighted ensemble should keep the first two and drop the
//! third.

use mni_transfer::datagen::{
    make_coefficients, sample_dataset, CovarianceSpec, SeedPolicy, TaskSpec,
};
use mni_transfer::detect::fit_wtm;
use mni_transfer::linalg::RealVector;
use mni_transfer::risk::excess_risk_point;

fn main() -> mni_transfer::Result<()> {
    let p = 150;
    let n0 = 30;
    let policy = SeedPolicy::new(11);

    // Source 3's optimum points far away from the target's.
    let ssr = [0.0, 0.2, 25.0];
    let (beta, contrasts) = make_coefficients(p, 10.0, &ssr, &policy)?;
    let target = TaskSpec::new(
        0,
        beta.clone(),
        RealVector::zeros(p),
        CovarianceSpec::isotropic(p),
        1.0,
    )?;
    let target_data = sample_dataset(&target, n0, &policy, 0)?;

    let mut source_data = Vec::new();
    let mut sources = Vec::new();
    for (q, contrast) in contrasts.iter().enumerate() {
        let spec = TaskSpec::new(
            q + 1,
            beta.clone(),
            contrast.clone(),
            CovarianceSpec::isotropic(p),
            1.0,
        )?;
        source_data.push(sample_dataset(&spec, 90, &policy, 0)?);
        sources.push(spec);
    }

    let (fit, report) = fit_wtm(&target_data, &source_data, 5, 0.5, &policy, 0)?;
    println!(
        "per-source cross-validated loss (target's own loss = {:.3}):",
        report.target_cv_loss
    );
    for (q, loss) in &report.per_source_cv_loss {
        let status = if report.detected.contains(q) {
            "kept"
        } else {
            "dropped"
        };
        let weight = report.weights.get(q).copied().unwrap_or(0.0);
        println!("  source {q}: loss = {loss:9.3}, {status}, weight = {weight:.3}");
    }
    println!("detection threshold = {:.3}", report.threshold);

    let risk = excess_risk_point(&fit.estimate, &target)?;
    println!("ensemble excess risk on the target = {risk:.4}");
    Ok(())
}
