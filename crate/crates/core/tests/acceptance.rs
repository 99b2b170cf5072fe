//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    all_rank_assignments, draw_category, draw_counts, draw_dirichlet, fd_gradient, fd_jacobian,
    fixture, known_theta_cardinality, load_fixture, random_count_rows, random_simplex,
    reference_included, reference_pvalues, rel_err, run_cli, RefOrder,
};
use nalgebra::{DMatrix, DVector};
use predset::eb::{loglik_gradient, loglik_hessian, marginal_loglik, StructuredHessian};
use predset::pipeline::{analyze_all, knn_neighbors, AnalysisOptions, RATIOS_FILE};
use predset::sim::{run_cardinality_experiment, SimConfig};
use predset::{
    direct_set, fit_gamma, indirect_set, oracle_set, ConcentrationVector, CountMatrix, CountVector,
    OptimizerConfig, ProbabilityVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: whether it holds and a one-line measurement.
struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

const ALPHAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Coverage of direct, random-prior indirect and adversarial-prior indirect
/// sets over joint draws of the sample and the next observation.
fn validity() -> Outcome {
    const CONFIGS: usize = 20;
    const DRAWS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for c in 0..CONFIGS {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=30u64);
        let alpha = ALPHAS[rng.random_range(0..ALPHAS.len())];
        let theta = random_simplex(&mut rng, k);
        let random_gamma: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
        // Largest pseudo-counts on the least likely categories.
        let mut by_prob: Vec<usize> = (0..k).collect();
        by_prob.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
        let mut adversarial = vec![0.0; k];
        for (rank, &i) in by_prob.iter().enumerate() {
            adversarial[i] = 50.0 * theta[by_prob[k - 1 - rank]];
        }
        let priors = [
            ConcentrationVector::new(random_gamma).unwrap(),
            ConcentrationVector::new(adversarial).unwrap(),
        ];

        let mut hits = [0usize; 3];
        for _ in 0..DRAWS {
            let x = CountVector::new(draw_counts(&mut rng, &theta, n)).unwrap();
            let y = draw_category(&mut rng, &theta);
            hits[0] += usize::from(direct_set(&x, alpha).unwrap().contains(y));
            for (h, g) in hits[1..].iter_mut().zip(&priors) {
                *h += usize::from(indirect_set(&x, g, alpha).unwrap().contains(y));
            }
        }
        for (m, &h) in hits.iter().enumerate() {
            let cov = h as f64 / DRAWS as f64;
            let se = (cov * (1.0 - cov) / DRAWS as f64).sqrt();
            let margin = cov - (1.0 - alpha - 3.0 * se);
            worst = worst.min(margin);
            if margin < 0.0 {
                failures.push(format!(
                    "config {c} method {m}: coverage {cov:.4} at alpha {alpha}"
                ));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{CONFIGS} configs x 3 sets x {DRAWS} draws; smallest margin over 1-alpha-3se = {worst:.4}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

/// The oracle set is no larger than the known-θ set under any weak order.
fn oracle_minimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut violations = 0;
    let mut orders_checked = 0usize;
    for _ in 0..200 {
        let k = rng.random_range(1..=5);
        let theta = random_simplex(&mut rng, k);
        let alpha = rng.random_range(0.01..0.6);
        let oracle = oracle_set(&ProbabilityVector::new(theta.clone()).unwrap(), alpha)
            .unwrap()
            .cardinality();
        let best = all_rank_assignments(k)
            .iter()
            .map(|ranks| known_theta_cardinality(&theta, ranks, alpha))
            .min()
            .unwrap();
        orders_checked += k.pow(k as u32);
        if oracle > best {
            violations += 1;
        }
    }
    Outcome::new(
        violations == 0,
        format!("200 instances, {orders_checked} rank assignments; {violations} violations"),
    )
}

/// Fast set construction agrees exactly with the per-candidate brute force.
fn brute_force_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut mismatches = 0;
    for i in 0..1000 {
        let k = rng.random_range(1..=12);
        let n = rng.random_range(0..=50u64);
        let theta = random_simplex(&mut rng, k);
        let x = draw_counts(&mut rng, &theta, n);
        let gamma: Vec<f64> = (0..k)
            .map(|_| match rng.random_range(0..4) {
                0 => f64::from(rng.random_range(0..4)),
                _ => rng.random_range(0.0..15.0),
            })
            .collect();
        let alpha = if i % 2 == 0 {
            ALPHAS[i % 3]
        } else {
            rng.random_range(0.001..0.999)
        };
        let xv = CountVector::new(x.clone()).unwrap();
        let g = ConcentrationVector::new(gamma.clone()).unwrap();
        let fast = indirect_set(&xv, &g, alpha).unwrap();
        let direct = direct_set(&xv, alpha).unwrap();
        let ok = fast.included() == reference_included(&x, RefOrder::Posterior(&gamma), alpha)
            && fast.pvalues() == reference_pvalues(&x, RefOrder::Posterior(&gamma))
            && direct.included() == reference_included(&x, RefOrder::Direct, alpha)
            && direct.pvalues() == reference_pvalues(&x, RefOrder::Direct);
        if !ok {
            mismatches += 1;
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("1000 instances; {mismatches} mismatches"),
    )
}

/// A constant prior leaves the direct set unchanged.
fn uniform_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut mismatches = 0;
    for i in 0..1000 {
        let k = rng.random_range(1..=15);
        let n = rng.random_range(0..=60u64);
        let theta = random_simplex(&mut rng, k);
        let x = CountVector::new(draw_counts(&mut rng, &theta, n)).unwrap();
        let c = [0.0, 0.5, 1.0, 10.0][i % 4];
        let alpha = ALPHAS[rng.random_range(0..3)];
        let gamma = ConcentrationVector::uniform(k, c).unwrap();
        if indirect_set(&x, &gamma, alpha).unwrap() != direct_set(&x, alpha).unwrap() {
            mismatches += 1;
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("1000 instances; {mismatches} mismatches"),
    )
}

fn trend(k: usize, n: u64, seed: u64) -> f64 {
    run_cardinality_experiment(&SimConfig::low_entropy(k, n, 0.05, 2000, seed))
        .unwrap()
        .ratio_indirect_direct
}

fn trend_small_sample() -> Outcome {
    let ratio = trend(100, 10, 105);
    Outcome::new(
        ratio < 0.6,
        format!("indirect/direct mean cardinality {ratio:.4} (need < 0.6)"),
    )
}

fn trend_moderate_sample() -> Outcome {
    let ratio = trend(150, 100, 106);
    Outcome::new(
        (0.75..=0.95).contains(&ratio),
        format!("indirect/direct mean cardinality {ratio:.4} (need within [0.75, 0.95])"),
    )
}

/// Analytic derivatives, the rank-one solve and a closed-form likelihood.
fn likelihood_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let k = rng.random_range(2..=8);
        let truth: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..6.0)).collect();
        let (num_rows, n) = (rng.random_range(1..=12), rng.random_range(1..=60));
        let rows = random_count_rows(&mut rng, &truth, num_rows, n);
        let data = CountMatrix::from_rows(&rows).unwrap();
        let at: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
        let cv = |p: &[f64]| ConcentrationVector::new(p.to_vec()).unwrap();

        let g = loglik_gradient(&data, &cv(&at)).unwrap();
        let fd = fd_gradient(&|p| marginal_loglik(&data, &cv(p)).unwrap(), &at);
        worst_g = worst_g.max(rel_err(&g, &fd));

        let h: Vec<f64> = loglik_hessian(&data, &cv(&at)).unwrap().to_dense().concat();
        let jac = fd_jacobian(&|p| loglik_gradient(&data, &cv(p)).unwrap(), &at).concat();
        worst_h = worst_h.max(rel_err(&h, &jac));
    }

    let mut worst_solve = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(1..=20);
        let h = StructuredHessian {
            diag: (0..k).map(|_| -rng.random_range(0.05..50.0)).collect(),
            common: rng.random_range(0.0..5.0),
        };
        let rhs: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let Some(fast) = h.solve(&rhs) else { continue };
        let dense = DMatrix::from_fn(k, k, |i, j| h.to_dense()[i][j]);
        let want = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        let scale = want.amax().max(1.0);
        for i in 0..k {
            worst_solve = worst_solve.max((fast[i] - want[i]).abs() / scale);
        }
    }

    let beta_binomial = marginal_loglik(
        &CountMatrix::from_rows(&[vec![1, 0]]).unwrap(),
        &ConcentrationVector::new(vec![1.0, 1.0]).unwrap(),
    )
    .unwrap();
    let closed_form_err = (beta_binomial + std::f64::consts::LN_2).abs();

    Outcome::new(
        worst_g < 1e-6 && worst_h < 1e-5 && worst_solve <= 1e-10 && closed_form_err <= 1e-10,
        format!(
            "gradient rel err {worst_g:.2e} (< 1e-6), Hessian rel err {worst_h:.2e} (< 1e-5), \
             solve err {worst_solve:.2e} (<= 1e-10), closed form err {closed_form_err:.2e} (<= 1e-10)"
        ),
    )
}

/// Fit on data drawn from a known concentration vector.
fn estimator_sanity() -> Outcome {
    let truth = [8.0, 4.0, 2.0, 1.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let rows: Vec<Vec<u64>> = (0..50)
        .map(|_| {
            let theta = draw_dirichlet(&mut rng, &truth);
            draw_counts(&mut rng, &theta, 500)
        })
        .collect();
    let data = CountMatrix::from_rows(&rows).unwrap();
    let fit = fit_gamma(&data, &OptimizerConfig::default()).unwrap();
    let g = fit.gamma.as_slice();
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        idx
    };
    let truth_ll =
        marginal_loglik(&data, &ConcentrationVector::new(truth.to_vec()).unwrap()).unwrap();
    let ordered = order(g) == order(&truth);
    Outcome::new(
        fit.converged && fit.grad_norm <= 1e-8 && ordered && fit.loglik >= truth_ll,
        format!(
            "converged={} grad_norm={:.1e} (<= 1e-8), gamma_hat={:?}, order recovered={ordered}, \
             loglik {:.3} vs truth {:.3}",
            fit.converged,
            fit.grad_norm,
            g.iter()
                .map(|v| (v * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            fit.loglik,
            truth_ll
        ),
    )
}

/// Two runs of `analyze` reproduce the stored table, and an area's prior
/// ignores its own counts.
fn end_to_end_determinism() -> Outcome {
    let golden = fs::read(fixture("golden_ratios.csv")).unwrap();
    let mut identical = 0;
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, _) = run_cli(&[
            "analyze",
            "--records",
            fixture("records.csv").to_str().unwrap(),
            "--centroids",
            fixture("centroids.csv").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        if code == 0 && fs::read(dir.path().join(RATIOS_FILE)).ok().as_deref() == Some(&golden[..])
        {
            identical += 1;
        }
    }

    let ds = load_fixture();
    let graph = knn_neighbors(&ds, 5).unwrap();
    let options = AnalysisOptions::default();
    let before = analyze_all(&ds, &graph, &options).unwrap();
    let target = ds.area_index("A03").unwrap();
    let mut perturbed = ds.clone();
    perturbed
        .set_row(target, ds.row(target).iter().map(|c| c * 5 + 2).collect())
        .unwrap();
    let after = analyze_all(&perturbed, &graph, &options).unwrap();
    let unchanged = before[target].gamma == after[target].gamma;

    Outcome::new(
        identical == 2 && unchanged,
        format!("{identical}/2 runs byte-identical to golden table; own-count perturbation leaves gamma unchanged: {unchanged}"),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "coverage validity",
            budget: Some(Duration::from_secs(120)),
            check: validity,
        },
        Criterion {
            id: 2,
            name: "oracle minimality",
            budget: Some(Duration::from_secs(60)),
            check: oracle_minimality,
        },
        Criterion {
            id: 3,
            name: "brute-force equivalence",
            budget: None,
            check: brute_force_equivalence,
        },
        Criterion {
            id: 4,
            name: "uniform-prior collapse",
            budget: None,
            check: uniform_collapse,
        },
        Criterion {
            id: 5,
            name: "low-entropy trend, K=100 N=10",
            budget: Some(Duration::from_secs(120)),
            check: trend_small_sample,
        },
        Criterion {
            id: 6,
            name: "low-entropy point, K=150 N=100",
            budget: None,
            check: trend_moderate_sample,
        },
        Criterion {
            id: 7,
            name: "likelihood numerics",
            budget: None,
            check: likelihood_numerics,
        },
        Criterion {
            id: 8,
            name: "estimator sanity",
            budget: Some(Duration::from_secs(30)),
            check: estimator_sanity,
        },
        Criterion {
            id: 9,
            name: "end-to-end determinism",
            budget: None,
            check: end_to_end_determinism,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let pass = outcome.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget = c
            .budget
            .map(|b| format!(", budget {}s", b.as_secs()))
            .unwrap_or_default();
        println!(
            "[{}] criterion {}: {} -- {} ({:.2}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64(),
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
