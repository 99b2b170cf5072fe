//! Empirical Bayes: estimate Dirichlet pseudo-counts from neighbouring
//! areas' tallies by maximising the Dirichlet-multinomial likelihood.
//!
//! `cargo run --example fit_prior`

use predset::eb::{loglik_gradient, marginal_loglik};
use predset::{fit_gamma, CountMatrix, OptimizerConfig};

fn main() -> predset::Result<()> {
    // Six neighbouring areas, five species.
    let neighbours = CountMatrix::from_rows(&[
        vec![30, 12, 5, 2, 0],
        vec![22, 15, 9, 1, 1],
        vec![41, 10, 3, 4, 0],
        vec![18, 19, 6, 0, 2],
        vec![27, 8, 8, 3, 0],
        vec![35, 14, 2, 1, 1],
    ])?;

    let fit = fit_gamma(&neighbours, &OptimizerConfig::default())?;
    println!("termination:   {:?}", fit.termination);
    println!("iterations:    {}", fit.iterations);
    println!("gradient norm: {:.2e}", fit.grad_norm);
    println!("log-likelihood {:.4}", fit.loglik);
    let total: f64 = fit.gamma.as_slice().iter().sum();
    println!("precision (sum of gamma): {total:.2}");
    for (k, g) in fit.gamma.as_slice().iter().enumerate() {
        println!(
            "  species {k}: gamma = {g:.3}  mean share = {:.3}",
            g / total
        );
    }

    let grad = loglik_gradient(&neighbours, &fit.gamma)?;
    let max_grad = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    println!("largest gradient entry at the optimum: {max_grad:.1e}");
    let flat = predset::ConcentrationVector::uniform(5, 1.0)?;
    println!(
        "log-likelihood at gamma = 1: {:.4}",
        marginal_loglik(&neighbours, &flat)?
    );
    Ok(())
}
