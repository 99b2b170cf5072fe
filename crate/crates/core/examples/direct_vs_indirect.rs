//! Prediction sets for one small sample, with and without prior information.
//!
//! `cargo run --example direct_vs_indirect`

use predset::{direct_set, indirect_set, ConcentrationVector, CountVector};

fn main() -> predset::Result<()> {
    let species = [
        "robin", "sparrow", "jay", "wren", "owl", "heron", "kite", "crane",
    ];
    // Twenty observations in a sparsely sampled area.
    let x = CountVector::new(vec![8, 5, 3, 2, 1, 1, 0, 0])?;
    // Pseudo-counts borrowed from nearby areas: herons are common around
    // here, kites are not.
    let gamma = ConcentrationVector::new(vec![6.0, 4.0, 2.0, 1.5, 0.3, 3.0, 0.05, 0.05])?;

    for alpha in [0.2, 0.1, 0.05] {
        let direct = direct_set(&x, alpha)?;
        let indirect = indirect_set(&x, &gamma, alpha)?;
        println!("alpha = {alpha}");
        println!(
            "  direct   ({:>2}): {:?}",
            direct.cardinality(),
            names(&species, direct.included())
        );
        println!(
            "  indirect ({:>2}): {:?}",
            indirect.cardinality(),
            names(&species, indirect.included())
        );
    }

    let set = indirect_set(&x, &gamma, 0.1)?;
    println!("\nper-species statistics at alpha = 0.1");
    for (i, name) in species.iter().enumerate() {
        println!(
            "  {name:<8} count {:>2}  p = {:.3}  {}",
            x.counts()[i],
            set.pvalues()[i],
            if set.contains(i) { "in" } else { "out" }
        );
    }
    Ok(())
}

fn names<'a>(labels: &[&'a str], idx: &[usize]) -> Vec<&'a str> {
    idx.iter().map(|&i| labels[i]).collect()
}
