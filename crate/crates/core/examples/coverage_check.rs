//! Monte Carlo check that every set keeps its coverage guarantee, even
//! when the prior points the wrong way.
//!
//! `cargo run --release --example coverage_check`

use predset::sim::{
    run_coverage_experiment, write_coverage_table, PriorSpec, SimConfig, ThetaSpec,
};
use predset::ProbabilityVector;

fn main() -> predset::Result<()> {
    let theta = ProbabilityVector::new(vec![0.35, 0.25, 0.2, 0.1, 0.06, 0.04])?;
    for (label, prior) in [
        (
            "prior agrees with theta",
            PriorSpec::OracleScaled { scale: 10.0 },
        ),
        (
            "prior reverses theta",
            PriorSpec::Adversarial { scale: 100.0 },
        ),
    ] {
        let mut results = Vec::new();
        for (n, alpha) in [(5, 0.2), (20, 0.1), (60, 0.05)] {
            let config = SimConfig {
                k: 6,
                n,
                alpha,
                replications: 20_000,
                theta: ThetaSpec::Explicit(theta.clone()),
                prior: prior.clone(),
                seed: 11,
            };
            results.push(run_coverage_experiment(&config)?);
        }
        println!("# {label}");
        write_coverage_table(&results, std::io::stdout().lock())?;
    }
    Ok(())
}
