//! Inspect covariance spectra through their effective ranks: which tails are
//! heavy enough for interpolation to be benign, where the critical index
//! falls, and how far the aligned block reaches.

use mni_transfer::datagen::{make_spectrum, SpectrumFamily};
use mni_transfer::risk::{
    effective_rank_profile, BenignVerdict, DEFAULT_CRITICAL_INDEX_CONSTANT,
    DEFAULT_TAIL_COMPARABILITY,
};

fn main() -> mni_transfer::Result<()> {
    let p = 800;
    let n = 75;
    let families = [
        SpectrumFamily::target_log(),
        SpectrumFamily::poly_decay(),
        SpectrumFamily::SampleAdaptive { n },
        SpectrumFamily::spiked_toeplitz(),
        SpectrumFamily::Isotropic,
    ];

    println!("p = {p}, n = {n}");
    println!(
        "{:>16} {:>10} {:>8} {:>10} {:>10} {:>8} {:>14}",
        "spectrum", "r0/n", "k*", "k*/n", "n/R(k*)", "tau*", "verdict"
    );
    for family in &families {
        let eigs = make_spectrum(family, p)?;
        let profile = effective_rank_profile(
            &eigs,
            n,
            DEFAULT_CRITICAL_INDEX_CONSTANT,
            DEFAULT_TAIL_COMPARABILITY,
        )?;
        let verdict = match profile.verdict {
            BenignVerdict::Benign => "Benign",
            BenignVerdict::NotBenign => "NotBenign",
            BenignVerdict::Indeterminate => "Indeterminate",
        };
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>16} {:>10.4} {:>8} {:>10} {:>10} {:>8} {:>14}",
            family.to_string(),
            profile.r0_over_n(),
            profile
                .k_star
                .map(|k| k.to_string())
                .unwrap_or_else(|| "-".into()),
            fmt_opt(profile.k_ratio()),
            fmt_opt(profile.n_over_tail_rank_sq()),
            profile.tau_star,
            verdict
        );
    }
    Ok(())
}
