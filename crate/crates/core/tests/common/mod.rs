//! Reference implementations used as oracles by the integration tests.
//!
//! Everything here is deliberately naive: each candidate outcome is added to
//! the sample explicitly, the full augmented vector is re-ranked, and ordering
//! keys are compared in exact rational arithmetic. Nothing is shared with the
//! library's sort-and-prefix-sum path.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

/// How the augmented sample is ranked.
pub enum RefOrder<'a> {
    /// By the augmented counts themselves.
    Direct,
    /// By augmented counts plus prior pseudo-counts.
    Posterior(&'a [f64]),
    /// By a fixed key that does not depend on the sample.
    Fixed(&'a [f64]),
}

pub fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Statistic for every candidate, as an exact fraction `numerator / (N + 1)`.
///
/// For candidate `k` the sample is augmented with one observation of `k`; the
/// statistic is the augmented mass of all categories ranked no higher than
/// `k`.
pub fn reference_numerators(x: &[u64], order: RefOrder<'_>) -> Vec<u64> {
    let k = x.len();
    (0..k)
        .map(|cand| {
            let z: Vec<u64> = (0..k).map(|l| x[l] + u64::from(l == cand)).collect();
            let key: Vec<BigRational> = match &order {
                RefOrder::Direct => z
                    .iter()
                    .map(|&c| BigRational::from_integer(BigInt::from(c)))
                    .collect(),
                RefOrder::Posterior(gamma) => z
                    .iter()
                    .zip(gamma.iter())
                    .map(|(&c, &g)| BigRational::from_integer(BigInt::from(c)) + exact(g))
                    .collect(),
                RefOrder::Fixed(o) => o.iter().map(|&v| exact(v)).collect(),
            };
            (0..k).filter(|&l| key[l] <= key[cand]).map(|l| z[l]).sum()
        })
        .collect()
}

/// Reference p-values, rounded once from the exact fraction.
pub fn reference_pvalues(x: &[u64], order: RefOrder<'_>) -> Vec<f64> {
    let denom = x.iter().sum::<u64>() + 1;
    reference_numerators(x, order)
        .into_iter()
        .map(|num| num as f64 / denom as f64)
        .collect()
}

/// Reference inclusion, decided by comparing `numerator / (N + 1)` with the
/// exact binary value of `α`.
pub fn reference_included(x: &[u64], order: RefOrder<'_>, alpha: f64) -> Vec<usize> {
    let denom = BigInt::from(x.iter().sum::<u64>() + 1);
    let a = exact(alpha);
    reference_numerators(x, order)
        .into_iter()
        .enumerate()
        .filter(|(_, num)| BigRational::new(BigInt::from(*num), denom.clone()) > a)
        .map(|(i, _)| i)
        .collect()
}

/// Known-θ set for an arbitrary weak order given as integer ranks.
pub fn known_theta_cardinality(theta: &[f64], ranks: &[usize], alpha: f64) -> usize {
    let a = exact(alpha);
    (0..theta.len())
        .filter(|&k| {
            let mass: BigRational = (0..theta.len())
                .filter(|&l| ranks[l] <= ranks[k])
                .map(|l| exact(theta[l]))
                .fold(BigRational::zero(), |acc, v| acc + v);
            mass > a
        })
        .count()
}

/// Every assignment of ranks `0..K` to `K` categories; this covers every
/// weak order (many more than once).
pub fn all_rank_assignments(k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(k as u32);
    (0..total)
        .map(|mut code| {
            (0..k)
                .map(|_| {
                    let r = code % k;
                    code /= k;
                    r
                })
                .collect()
        })
        .collect()
}

/// A random point on the simplex (normalised exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / s).collect();
    // Put any rounding residue on the largest entry so the sum is 1 to
    // within an ulp or two.
    let resid = 1.0 - p.iter().sum::<f64>();
    let imax = (0..k).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    p[imax] += resid;
    p
}

/// One categorical draw by inversion, independent of the library sampler.
pub fn draw_category<R: Rng>(rng: &mut R, theta: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in theta.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    theta
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(theta.len() - 1)
}

/// Multinomial counts from `n` independent categorical draws.
pub fn draw_counts<R: Rng>(rng: &mut R, theta: &[f64], n: u64) -> Vec<u64> {
    let mut counts = vec![0u64; theta.len()];
    for _ in 0..n {
        counts[draw_category(rng, theta)] += 1;
    }
    counts
}

/// A Gamma(shape, 1) draw via Marsaglia–Tsang, for Dirichlet sampling in
/// tests without going through the library.
pub fn draw_gamma<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random::<f64>().max(1e-300);
        return draw_gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = standard_normal(rng);
        let v = (1.0 + c * z).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = rng.random::<f64>().max(1e-300);
        if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn draw_dirichlet<R: Rng>(rng: &mut R, gamma: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = gamma.iter().map(|&a| draw_gamma(rng, a)).collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|v| v / s).collect()
}

/// Dirichlet-multinomial log-likelihood without the multinomial coefficient,
/// evaluated through the rising-factorial product form (no log-gamma).
pub fn reference_loglik(rows: &[Vec<u64>], gamma: &[f64]) -> f64 {
    let g0: f64 = gamma.iter().sum();
    rows.iter()
        .map(|row| {
            let n: u64 = row.iter().sum();
            // Γ(g+x)/Γ(g) = Π_{t<x} (g+t), summed in log space.
            let mut s = 0.0;
            for (&x, &g) in row.iter().zip(gamma) {
                for t in 0..x {
                    s += (g + t as f64).ln();
                }
            }
            for t in 0..n {
                s -= (g0 + t as f64).ln();
            }
            s
        })
        .sum()
}

/// Relative error measured in the max norm.
pub fn rel_err(approx: &[f64], reference: &[f64]) -> f64 {
    let diff = approx
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("representable")
}

/// Central-difference gradient of `f` with per-coordinate steps
/// proportional to the coordinate.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1e-3);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (up[i] - dn[i])
        })
        .collect()
}

/// Central-difference Jacobian of a vector field, row `i` holding
/// derivatives of every component with respect to coordinate `i`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1e-3);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            let (fu, fd) = (f(&up), f(&dn));
            fu.iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) / (up[i] - dn[i]))
                .collect()
        })
        .collect()
}

/// A random count matrix with over-dispersed rows drawn from a Dirichlet.
pub fn random_count_rows<R: Rng>(rng: &mut R, gamma: &[f64], rows: usize, n: u64) -> Vec<Vec<u64>> {
    (0..rows)
        .map(|_| {
            let theta = draw_dirichlet(rng, gamma);
            draw_counts(rng, &theta, n)
        })
        .collect()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// The bundled ten-area dataset with centroids attached.
pub fn load_fixture() -> predset::pipeline::ArealDataset {
    use predset::pipeline::{ingest_records, read_centroids_file, read_records_file};
    let records = read_records_file(&fixture("records.csv")).unwrap();
    let centroids = read_centroids_file(&fixture("centroids.csv")).unwrap();
    ingest_records(&records)
        .unwrap()
        .with_centroids(&centroids)
        .unwrap()
}

/// Runs the command-line entry point in-process.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<std::ffi::OsString> = std::iter::once("predset")
        .chain(args.iter().copied())
        .map(Into::into)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = predset::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}
