//! Mean set size for direct, indirect and oracle-order sets in the
//! low-entropy regime, across sample sizes.
//!
//! `cargo run --release --example cardinality_sim -- [alpha] [reps]`

use predset::sim::{run_cardinality_experiment, write_cardinality_table, SimConfig};

fn main() -> predset::Result<()> {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().map_or(0.2, |a| a.parse().expect("alpha"));
    let reps: usize = args.next().map_or(1000, |a| a.parse().expect("reps"));

    let mut results = Vec::new();
    for (k, n) in [(100, 10), (100, 30), (150, 100), (150, 300), (150, 1000)] {
        results.push(run_cardinality_experiment(&SimConfig::low_entropy(
            k, n, alpha, reps, 7,
        ))?);
    }
    write_cardinality_table(&results, std::io::stdout().lock())?;
    Ok(())
}
