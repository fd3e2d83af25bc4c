//! Run a small replicated experiment through the batch harness and print the
//! CSV summary. The same config and seed always reproduce these bytes.

use mni_transfer::harness::{
    run_experiment, write_summary_csv, EstimatorSelect, ExperimentConfig, SampleSizes, Scenario,
};

fn main() -> mni_transfer::Result<()> {
    let mut config = ExperimentConfig::scenario_default(Scenario::BenignModelShift);
    config.p_grid = vec![80, 120];
    config.sample_sizes = SampleSizes::Explicit(vec![20, 60, 60, 60]);
    config.replicates = 10;
    config.master_seed = 5;
    config.estimators = vec![
        EstimatorSelect::Mni,
        EstimatorSelect::Tm(1),
        EstimatorSelect::Tm(3),
        EstimatorSelect::Wtm,
    ];
    config.parallel = true;

    let summary = run_experiment(&config)?;
    eprintln!(
        "config digest {:016x}, version {}",
        summary.config_digest, summary.version
    );
    write_summary_csv(&summary, std::io::stdout().lock())?;
    Ok(())
}
