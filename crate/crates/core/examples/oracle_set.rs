//! With the probabilities known, admitting categories from most to least
//! likely gives the smallest valid set; any other order does no better.
//!
//! `cargo run --example oracle_set`

use predset::{oracle_set, order_set_known_theta, OrderingKey, ProbabilityVector};

fn main() -> predset::Result<()> {
    let theta = ProbabilityVector::new(vec![0.42, 0.25, 0.15, 0.1, 0.05, 0.03])?;
    let alpha = 0.1;

    let oracle = oracle_set(&theta, alpha)?;
    println!(
        "oracle set {:?} (cardinality {})",
        oracle.included(),
        oracle.cardinality()
    );

    let orders: [(&str, Vec<f64>); 3] = [
        ("reverse", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        ("alphabetical-ish", vec![3.0, 6.0, 1.0, 5.0, 2.0, 4.0]),
        ("all tied", vec![0.0; 6]),
    ];
    for (label, key) in orders {
        let set = order_set_known_theta(&theta, &OrderingKey::new(key)?, alpha)?;
        println!(
            "{label:<17} {:?} (cardinality {})",
            set.included(),
            set.cardinality()
        );
        assert!(set.cardinality() >= oracle.cardinality());
    }
    Ok(())
}
