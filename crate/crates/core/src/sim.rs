//! Monte Carlo comparison of direct, indirect and oracle-ordered sets.
//!
//! Each replication draws `X ~ MN_K(θ, N)` and one predictand
//! `Y ~ MN_K(θ, 1)`, builds the three sets from `X`, and records their
//! cardinalities and whether they contain `Y`. Replication `r` uses its own
//! ChaCha stream derived from `(seed, r)`, so results do not depend on how
//! replications are scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eb::ConcentrationVector;
use crate::error::{Error, Result};
use crate::sets::{
    check_alpha, conformal_set, direct_set, indirect_set, CountVector, OrderingKey,
    ProbabilityVector,
};

/// Replications for full-scale runs; also the CLI default.
pub const FULL_REPLICATIONS: usize = 25_000;
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaSpec {
    /// `⌈K/4⌉` heavy categories share `1 - ε` with linearly decreasing
    /// weights; the rest share `ε` equally.
    LowEntropy {
        epsilon: f64,
    },
    Uniform,
    Explicit(ProbabilityVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorSpec {
    /// `γ = θ · scale`.
    OracleScaled {
        scale: f64,
    },
    /// `γ = c · 1`.
    Uniform {
        c: f64,
    },
    /// `θ · scale` with the probabilities assigned in reverse rank order,
    /// so the most likely category gets the smallest prior count.
    Adversarial {
        scale: f64,
    },
    Explicit(ConcentrationVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub replications: usize,
    pub theta: ThetaSpec,
    pub prior: PriorSpec,
    pub seed: u64,
}

impl SimConfig {
    /// The low-entropy regime with `γ = 10·θ`.
    pub fn low_entropy(k: usize, n: u64, alpha: f64, replications: usize, seed: u64) -> Self {
        Self {
            k,
            n,
            alpha,
            replications,
            theta: ThetaSpec::LowEntropy {
                epsilon: DEFAULT_EPSILON,
            },
            prior: PriorSpec::OracleScaled { scale: 10.0 },
            seed,
        }
    }

    pub fn theta(&self) -> Result<ProbabilityVector> {
        let theta = match &self.theta {
            ThetaSpec::LowEntropy { epsilon } => make_low_entropy_theta(self.k, *epsilon)?,
            ThetaSpec::Uniform => ProbabilityVector::uniform(self.k)?,
            ThetaSpec::Explicit(p) => p.clone(),
        };
        if theta.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: theta.len(),
            });
        }
        Ok(theta)
    }

    pub fn gamma(&self, theta: &ProbabilityVector) -> Result<ConcentrationVector> {
        let t = theta.as_slice();
        let gamma = match &self.prior {
            PriorSpec::OracleScaled { scale } => {
                check_scale(*scale)?;
                ConcentrationVector::new(t.iter().map(|p| p * scale).collect())?
            }
            PriorSpec::Uniform { c } => ConcentrationVector::uniform(self.k, *c)?,
            PriorSpec::Adversarial { scale } => {
                check_scale(*scale)?;
                let mut order: Vec<usize> = (0..t.len()).collect();
                order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
                let mut gamma = vec![0.0; t.len()];
                for (rank, &i) in order.iter().enumerate() {
                    gamma[i] = t[order[order.len() - 1 - rank]] * scale;
                }
                ConcentrationVector::new(gamma)?
            }
            PriorSpec::Explicit(g) => g.clone(),
        };
        if gamma.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: gamma.len(),
            });
        }
        Ok(gamma)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be positive"));
        }
        if self.n == 0 {
            return Err(Error::invalid("N must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be positive"));
        }
        check_alpha(self.alpha)
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "prior scale must be positive, got {scale}"
        )))
    }
}

/// Low-entropy `θ`: the first `H = ⌈K/4⌉` categories get `(1 - ε)` split
/// proportionally to `H, H-1, ..., 1`; the other `K - H` get `ε / (K - H)`.
/// For `K = 1` the single category has probability one.
pub fn make_low_entropy_theta(k: usize, epsilon: f64) -> Result<ProbabilityVector> {
    if k == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!(
            "epsilon must be in (0, 0.5), got {epsilon}"
        )));
    }
    if k == 1 {
        return ProbabilityVector::new(vec![1.0]);
    }
    let heavy = k.div_ceil(4);
    let light = k - heavy;
    let weight_sum = (heavy * (heavy + 1) / 2) as f64;
    let mut theta: Vec<f64> = (0..heavy)
        .map(|i| (1.0 - epsilon) * (heavy - i) as f64 / weight_sum)
        .collect();
    theta.extend(std::iter::repeat_n(epsilon / light as f64, light));
    ProbabilityVector::new(theta)
}

/// Draws `MN_K(θ, n)` as a chain of conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, theta: &[f64], n: u64) -> Vec<u64> {
    let mut remaining_mass: Vec<f64> = theta
        .iter()
        .rev()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    remaining_mass.reverse();

    let mut counts = vec![0u64; theta.len()];
    let mut left = n;
    for (i, &p) in theta.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == theta.len() {
            counts[i] = left;
            break;
        }
        let q = if remaining_mass[i] > 0.0 {
            (p / remaining_mass[i]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(left, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        counts[i] = draw;
        left -= draw;
    }
    counts
}

/// Draws one category index from `θ`.
pub fn sample_category<R: Rng + ?Sized>(rng: &mut R, theta: &[f64]) -> usize {
    let total: f64 = theta.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in theta.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding at the top end: last category with positive mass
    theta
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(theta.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Indirect,
    OracleOrder,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Direct, Method::Indirect, Method::OracleOrder];

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Indirect => "indirect",
            Method::OracleOrder => "oracle-order",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_cardinality: f64,
    pub sd: f64,
    pub coverage: f64,
    /// Monte Carlo standard error of `coverage`.
    pub coverage_se: f64,
    pub min_cardinality: usize,
    pub max_cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub direct: MethodSummary,
    pub indirect: MethodSummary,
    pub oracle_order: MethodSummary,
    pub ratio_indirect_direct: f64,
    pub ratio_oracle_direct: f64,
    /// Standard deviation of the per-replication indirect/direct ratio.
    pub ratio_indirect_direct_sd: f64,
    pub replications_used: usize,
}

impl SimResult {
    pub fn summary(&self, method: Method) -> &MethodSummary {
        match method {
            Method::Direct => &self.direct,
            Method::Indirect => &self.indirect,
            Method::OracleOrder => &self.oracle_order,
        }
    }

    pub fn ratio_vs_direct(&self, method: Method) -> f64 {
        match method {
            Method::Direct => 1.0,
            Method::Indirect => self.ratio_indirect_direct,
            Method::OracleOrder => self.ratio_oracle_direct,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Replication {
    cardinality: [usize; 3],
    covered: [bool; 3],
}

fn replicate(
    config: &SimConfig,
    theta: &ProbabilityVector,
    gamma: &ConcentrationVector,
    oracle_key: &OrderingKey,
    index: usize,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let x = CountVector::new(sample_multinomial(&mut rng, theta.as_slice(), config.n))?;
    let y = sample_category(&mut rng, theta.as_slice());

    let sets = [
        direct_set(&x, config.alpha)?,
        indirect_set(&x, gamma, config.alpha)?,
        conformal_set(&x, oracle_key, config.alpha)?,
    ];
    Ok(Replication {
        cardinality: sets.each_ref().map(|s| s.cardinality()),
        covered: sets.each_ref().map(|s| s.contains(y)),
    })
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn simulate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let theta = config.theta()?;
    let gamma = config.gamma(&theta)?;
    let oracle_key = OrderingKey::from(&theta);

    let reps = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, &theta, &gamma, &oracle_key, r))
        .collect::<Result<Vec<_>>>()?;

    let reps_f = reps.len() as f64;
    let summarise = |m: usize, method: Method| {
        let (mean, sd) = mean_sd(reps.iter().map(|r| r.cardinality[m] as f64));
        let coverage = reps.iter().filter(|r| r.covered[m]).count() as f64 / reps_f;
        MethodSummary {
            method,
            mean_cardinality: mean,
            sd,
            coverage,
            coverage_se: (coverage * (1.0 - coverage) / reps_f).sqrt(),
            min_cardinality: reps.iter().map(|r| r.cardinality[m]).min().unwrap_or(0),
            max_cardinality: reps.iter().map(|r| r.cardinality[m]).max().unwrap_or(0),
        }
    };
    let direct = summarise(0, Method::Direct);
    let indirect = summarise(1, Method::Indirect);
    let oracle_order = summarise(2, Method::OracleOrder);
    let (_, ratio_sd) = mean_sd(
        reps.iter()
            .map(|r| r.cardinality[1] as f64 / r.cardinality[0] as f64),
    );

    Ok(SimResult {
        k: config.k,
        n: config.n,
        alpha: config.alpha,
        ratio_indirect_direct: indirect.mean_cardinality / direct.mean_cardinality,
        ratio_oracle_direct: oracle_order.mean_cardinality / direct.mean_cardinality,
        ratio_indirect_direct_sd: ratio_sd,
        direct,
        indirect,
        oracle_order,
        replications_used: reps.len(),
    })
}

/// Expected cardinalities of the three sets and their ratios to the direct
/// set.
pub fn run_cardinality_experiment(config: &SimConfig) -> Result<SimResult> {
    simulate(config)
}

/// Empirical coverage `P(Y ∈ A(X))` of the three sets over joint draws,
/// with Monte Carlo standard errors.
pub fn run_coverage_experiment(config: &SimConfig) -> Result<SimResult> {
    simulate(config)
}

/// `method,K,N,alpha,mean_cardinality,sd,ratio_vs_direct,coverage`
pub fn write_cardinality_table<W: Write>(results: &[SimResult], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "method",
        "K",
        "N",
        "alpha",
        "mean_cardinality",
        "sd",
        "ratio_vs_direct",
        "coverage",
    ])?;
    for r in results {
        for method in Method::ALL {
            let s = r.summary(method);
            csv.write_record([
                method.name().to_string(),
                r.k.to_string(),
                r.n.to_string(),
                r.alpha.to_string(),
                format!("{:.6}", s.mean_cardinality),
                format!("{:.6}", s.sd),
                format!("{:.6}", r.ratio_vs_direct(method)),
                format!("{:.6}", s.coverage),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

/// `method,K,N,alpha,coverage,se,nominal`
pub fn write_coverage_table<W: Write>(results: &[SimResult], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["method", "K", "N", "alpha", "coverage", "se", "nominal"])?;
    for r in results {
        for method in Method::ALL {
            let s = r.summary(method);
            csv.write_record([
                method.name().to_string(),
                r.k.to_string(),
                r.n.to_string(),
                r.alpha.to_string(),
                format!("{:.6}", s.coverage),
                format!("{:.6}", s.coverage_se),
                format!("{:.6}", 1.0 - r.alpha),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}
