//! Plan how much source data to collect under isotropic covariances. The
//! closed-form expected risks make the trade-off explicit: more source rows
//! shrink the bias the target cannot fix but import more source noise.

use mni_transfer::risk::{expected_risk_isotropic, expected_transfer_gain, transfer_plan};

fn main() -> mni_transfer::Result<()> {
    let p = 300;
    let n0 = 25;
    let signal_s = 10.0;
    let sigma_sq = 1.0;
    let snr = signal_s / sigma_sq;
    let ssr = 0.3;
    let shift_d = ssr * signal_s;

    println!("p = {p}, n0 = {n0}, snr = {snr}, ssr = {ssr}");
    println!();
    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "n1", "E[risk TM]", "E[risk MNI]", "gain"
    );
    for n1 in [0usize, 50, 100, 150, 200, 250] {
        let risks = expected_risk_isotropic(p, n0, n1, signal_s, shift_d, sigma_sq, sigma_sq)?;
        let gain = expected_transfer_gain(p, n0, n1, signal_s, ssr, snr)?;
        println!(
            "{:>6} {:>12.4} {:>12.4} {:>12.4}",
            n1, risks.transfer.excess_risk, risks.target_only.excess_risk, gain
        );
    }

    let plan = transfer_plan(p, snr, ssr, n0, signal_s)?;
    println!();
    match plan.n_star {
        Some(n_star) => println!(
            "best source size n* = {n_star} (continuous optimum {:.2}), expected gain {:.4}",
            plan.n_star_real.unwrap(),
            plan.delta_at_n_star.unwrap()
        ),
        None => println!("no source size helps at these settings"),
    }
    println!(
        "existence condition: snr·(1−ssr) = {:.2} vs threshold {:.2}",
        plan.condition_lhs, plan.condition_rhs
    );
    Ok(())
}
