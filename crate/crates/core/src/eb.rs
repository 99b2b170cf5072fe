//! Empirical Bayes estimation of a Dirichlet concentration `γ`.
//!
//! Rows `x_l ~ MN_K(θ_l, N_l)` with `θ_l ~ Dirichlet_K(γ)` have the
//! Dirichlet-multinomial marginal log-likelihood
//!
//! ```text
//! ℓ(γ) = Σ_l [ ln Γ(A) - ln Γ(N_l + A) + Σ_i ( ln Γ(x_li + γ_i) - ln Γ(γ_i) ) ],   A = Σ_i γ_i
//! ```
//!
//! Its Hessian is `diag(d) + c·11ᵀ`, so each Newton step is an `O(K)`
//! Sherman–Morrison solve.
//!
//! A category that is zero in every row has no interior maximiser: `ℓ`
//! increases as its `γ_k` shrinks to zero, and the limit is the likelihood
//! with that category removed. [`fit_gamma`] pins such categories at exactly
//! zero (listed in [`FitResult::boundary`]) and optimises the rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ArealDataset, NeighborGraph};
use crate::sets::CountVector;
use crate::special::{lgamma, psi, psi1};

/// Dirichlet concentration (prior pseudo-counts). Entries are finite and
/// non-negative; the likelihood functions additionally require them positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationVector(Vec<f64>);

impl ConcentrationVector {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::invalid("concentration needs at least one category"));
        }
        if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid(format!(
                "concentration entries must be finite and non-negative, got {g}"
            )));
        }
        Ok(Self(gamma))
    }

    /// `c·1` of length `k`.
    pub fn uniform(k: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&g| g > 0.0)
    }
}

/// Count rows sharing one category set.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    rows: Vec<CountVector>,
    num_categories: usize,
}

impl CountMatrix {
    pub fn new(rows: Vec<CountVector>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("count matrix needs at least one row"))?;
        let num_categories = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != num_categories) {
            return Err(Error::DimensionMismatch {
                expected: num_categories,
                found: bad.len(),
            });
        }
        Ok(Self {
            rows,
            num_categories,
        })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| CountVector::new(r.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn rows(&self) -> &[CountVector] {
        &self.rows
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    /// Per-category totals over all rows.
    pub fn column_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.num_categories];
        for row in &self.rows {
            for (t, &c) in totals.iter_mut().zip(row.counts()) {
                *t += c;
            }
        }
        totals
    }

    fn check_gamma(&self, gamma: &ConcentrationVector) -> Result<()> {
        if gamma.len() != self.num_categories {
            return Err(Error::DimensionMismatch {
                expected: self.num_categories,
                found: gamma.len(),
            });
        }
        if !gamma.is_strictly_positive() {
            return Err(Error::invalid(
                "likelihood requires strictly positive concentration",
            ));
        }
        Ok(())
    }
}

/// The Hessian `diag(diag) + common·11ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredHessian {
    pub diag: Vec<f64>,
    pub common: f64,
}

impl StructuredHessian {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let k = self.diag.len();
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| self.common + if i == j { self.diag[i] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// `1 + c·Σ 1/d_k`, the Sherman–Morrison denominator.
    pub fn denominator(&self) -> f64 {
        1.0 + self.common * self.diag.iter().map(|d| 1.0 / d).sum::<f64>()
    }

    /// Solves `H z = rhs` by Sherman–Morrison. `None` when a diagonal entry
    /// is zero or the denominator vanishes.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        if rhs.len() != self.diag.len() || self.diag.contains(&0.0) {
            return None;
        }
        let denom = self.denominator();
        if !denom.is_finite() || denom.abs() < SINGULAR_DENOMINATOR {
            return None;
        }
        let d_inv_rhs: Vec<f64> = rhs.iter().zip(&self.diag).map(|(r, d)| r / d).collect();
        let scale = self.common * d_inv_rhs.iter().sum::<f64>() / denom;
        Some(
            d_inv_rhs
                .iter()
                .zip(&self.diag)
                .map(|(z, d)| z - scale / d)
                .collect(),
        )
    }

    /// Negative definite iff every `d_k < 0` and the denominator is positive
    /// (given `c ≥ 0`).
    fn is_negative_definite(&self) -> bool {
        self.diag.iter().all(|&d| d < 0.0)
            && self.common >= 0.0
            && self.denominator() > SINGULAR_DENOMINATOR
    }
}

const SINGULAR_DENOMINATOR: f64 = 1e-12;

/// `ℓ(γ)` for strictly positive `γ`.
pub fn marginal_loglik(data: &CountMatrix, gamma: &ConcentrationVector) -> Result<f64> {
    data.check_gamma(gamma)?;
    Ok(Reduced::full(data).loglik(gamma.as_slice()))
}

/// `∂ℓ/∂γ_k = Σ_l [ψ(A) - ψ(N_l + A) + ψ(x_lk + γ_k) - ψ(γ_k)]`.
pub fn loglik_gradient(data: &CountMatrix, gamma: &ConcentrationVector) -> Result<Vec<f64>> {
    data.check_gamma(gamma)?;
    Ok(Reduced::full(data).gradient(gamma.as_slice()))
}

/// Structured Hessian with `c = Σ_l [ψ'(A) - ψ'(N_l + A)]` and
/// `d_k = Σ_l [ψ'(x_lk + γ_k) - ψ'(γ_k)]`.
pub fn loglik_hessian(
    data: &CountMatrix,
    gamma: &ConcentrationVector,
) -> Result<StructuredHessian> {
    data.check_gamma(gamma)?;
    Ok(Reduced::full(data).hessian(gamma.as_slice()))
}

/// Optimiser settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop once the infinity norm of the gradient is at most this.
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    /// Starting point; `None` starts from all ones.
    pub initial_gamma: Option<ConcentrationVector>,
    /// Halvings of a rejected step before switching to the gradient direction.
    pub step_halving_max: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grad_tolerance: 1e-8,
            max_iterations: 200,
            initial_gamma: None,
            step_halving_max: 30,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self, k: usize) -> Result<()> {
        if self.grad_tolerance.is_nan() || self.grad_tolerance <= 0.0 {
            return Err(Error::invalid("grad_tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if let Some(init) = &self.initial_gamma {
            if init.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: init.len(),
                });
            }
            if !init.is_strictly_positive() {
                return Err(Error::invalid("initial gamma must be strictly positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step (Newton or gradient) could increase the likelihood.
    Stalled,
    /// Every row is empty, so the likelihood does not depend on `γ`.
    FlatLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub gamma: ConcentrationVector,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the gradient over the non-boundary categories.
    pub grad_norm: f64,
    pub termination: Termination,
    /// Categories absent from every row, held at `γ_k = 0`.
    pub boundary: Vec<usize>,
}

/// Maximises the marginal likelihood by Newton–Raphson with step halving.
///
/// Never fails on non-convergence: the best iterate is returned with
/// `converged = false` and the reason in `termination`.
pub fn fit_gamma(data: &CountMatrix, config: &OptimizerConfig) -> Result<FitResult> {
    let k = data.num_categories();
    config.validate(k)?;

    let totals = data.column_totals();
    let free: Vec<usize> = (0..k).filter(|&i| totals[i] > 0).collect();
    let boundary: Vec<usize> = (0..k).filter(|&i| totals[i] == 0).collect();

    let start: Vec<f64> = match &config.initial_gamma {
        Some(init) => init.as_slice().to_vec(),
        None => vec![1.0; k],
    };

    if free.is_empty() {
        return Ok(FitResult {
            gamma: ConcentrationVector(start),
            loglik: 0.0,
            iterations: 0,
            converged: false,
            grad_norm: 0.0,
            termination: Termination::FlatLikelihood,
            boundary: Vec::new(),
        });
    }

    let objective = Reduced::restricted(data, &free);
    let x0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let outcome = newton_ascent(&objective, x0, config);

    let mut gamma = vec![0.0; k];
    for (&i, &g) in free.iter().zip(&outcome.point) {
        gamma[i] = g;
    }
    Ok(FitResult {
        gamma: ConcentrationVector(gamma),
        loglik: outcome.loglik,
        iterations: outcome.iterations,
        converged: outcome.termination == Termination::Converged,
        grad_norm: outcome.grad_norm,
        termination: outcome.termination,
        boundary,
    })
}

/// Fits `γ` for one area from its neighbours' rows only; the area's own
/// counts are never read.
pub fn estimate_prior_for_area(
    area_index: usize,
    dataset: &ArealDataset,
    neighbors: &NeighborGraph,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    fit_gamma(&neighbor_matrix(area_index, dataset, neighbors)?, config)
}

pub(crate) fn neighbor_matrix(
    area_index: usize,
    dataset: &ArealDataset,
    neighbors: &NeighborGraph,
) -> Result<CountMatrix> {
    let j = dataset.num_areas();
    if area_index >= j {
        return Err(Error::invalid(format!(
            "area index {area_index} out of range for {j} areas"
        )));
    }
    let list = neighbors
        .neighbors_of(area_index)
        .ok_or_else(|| Error::invalid(format!("no neighbour list for area {area_index}")))?;
    if list.is_empty() {
        return Err(Error::invalid(format!(
            "area {} has no neighbours",
            dataset.areas()[area_index]
        )));
    }
    if list.contains(&area_index) {
        return Err(Error::invalid(format!(
            "area {} lists itself as a neighbour",
            dataset.areas()[area_index]
        )));
    }
    let rows = list
        .iter()
        .map(|&l| {
            if l >= j {
                return Err(Error::invalid(format!("neighbour index {l} out of range")));
            }
            CountVector::new(dataset.row(l).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    CountMatrix::new(rows)
}

/// The likelihood restricted to a subset of categories (all others at the
/// `γ = 0` limit, where their terms vanish).
struct Reduced {
    totals: Vec<u64>,
    /// Row-major `rows × free` counts.
    counts: Vec<Vec<u64>>,
    width: usize,
}

impl Reduced {
    fn full(data: &CountMatrix) -> Self {
        let all: Vec<usize> = (0..data.num_categories()).collect();
        Self::restricted(data, &all)
    }

    fn restricted(data: &CountMatrix, keep: &[usize]) -> Self {
        Self {
            totals: data.rows().iter().map(|r| r.total()).collect(),
            counts: data
                .rows()
                .iter()
                .map(|r| keep.iter().map(|&i| r.counts()[i]).collect())
                .collect(),
            width: keep.len(),
        }
    }

    fn loglik(&self, gamma: &[f64]) -> f64 {
        let a: f64 = gamma.iter().sum();
        let lg_a = lgamma(a);
        let lg_gamma: Vec<f64> = gamma.iter().map(|&g| lgamma(g)).collect();
        self.totals
            .iter()
            .zip(&self.counts)
            .map(|(&n, row)| {
                if n == 0 {
                    return 0.0;
                }
                let per_category: f64 = row
                    .iter()
                    .zip(gamma)
                    .zip(&lg_gamma)
                    .filter(|((&x, _), _)| x > 0)
                    .map(|((&x, &g), &lg)| lgamma(x as f64 + g) - lg)
                    .sum();
                lg_a - lgamma(n as f64 + a) + per_category
            })
            .sum()
    }

    fn gradient(&self, gamma: &[f64]) -> Vec<f64> {
        let a: f64 = gamma.iter().sum();
        let psi_a = psi(a);
        let psi_gamma: Vec<f64> = gamma.iter().map(|&g| psi(g)).collect();
        let mut common = 0.0;
        let mut grad = vec![0.0; self.width];
        for (&n, row) in self.totals.iter().zip(&self.counts) {
            if n == 0 {
                continue;
            }
            common += psi_a - psi(n as f64 + a);
            for (k, &x) in row.iter().enumerate() {
                if x > 0 {
                    grad[k] += psi(x as f64 + gamma[k]) - psi_gamma[k];
                }
            }
        }
        grad.iter_mut().for_each(|g| *g += common);
        grad
    }

    fn hessian(&self, gamma: &[f64]) -> StructuredHessian {
        let a: f64 = gamma.iter().sum();
        let psi1_a = psi1(a);
        let psi1_gamma: Vec<f64> = gamma.iter().map(|&g| psi1(g)).collect();
        let mut common = 0.0;
        let mut diag = vec![0.0; self.width];
        for (&n, row) in self.totals.iter().zip(&self.counts) {
            if n == 0 {
                continue;
            }
            common += psi1_a - psi1(n as f64 + a);
            for (k, &x) in row.iter().enumerate() {
                if x > 0 {
                    diag[k] += psi1(x as f64 + gamma[k]) - psi1_gamma[k];
                }
            }
        }
        StructuredHessian { diag, common }
    }
}

struct Ascent {
    point: Vec<f64>,
    loglik: f64,
    grad_norm: f64,
    iterations: usize,
    termination: Termination,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Accepted steps may lose at most this much likelihood (relative), which
/// absorbs rounding in `ℓ` near the optimum.
const ASCENT_SLACK: f64 = 1e-12;

fn newton_ascent(objective: &Reduced, mut point: Vec<f64>, config: &OptimizerConfig) -> Ascent {
    let mut loglik = objective.loglik(&point);
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    let mut grad = objective.gradient(&point);
    while iterations < config.max_iterations {
        if inf_norm(&grad) <= config.grad_tolerance {
            termination = Termination::Converged;
            break;
        }

        let hessian = objective.hessian(&point);
        let newton = if hessian.is_negative_definite() {
            hessian
                .solve(&grad)
                .map(|z| z.into_iter().map(|v| -v).collect::<Vec<_>>())
        } else {
            None
        };

        let floor = loglik - ASCENT_SLACK * loglik.abs().max(1.0);
        let try_direction = |direction: &[f64], initial: f64| -> Option<(Vec<f64>, f64)> {
            let mut step = initial;
            for _ in 0..=config.step_halving_max {
                let candidate: Vec<f64> = point
                    .iter()
                    .zip(direction)
                    .map(|(p, d)| p + step * d)
                    .collect();
                if candidate.iter().all(|&g| g > 0.0 && g.is_finite()) {
                    let value = objective.loglik(&candidate);
                    if value.is_finite() && value >= floor {
                        return Some((candidate, value));
                    }
                }
                step *= 0.5;
            }
            None
        };

        let accepted = newton
            .as_deref()
            .and_then(|dir| try_direction(dir, 1.0))
            .or_else(|| try_direction(&grad, 1.0 / inf_norm(&grad)));

        match accepted {
            Some((next, value)) => {
                point = next;
                loglik = value;
                iterations += 1;
                grad = objective.gradient(&point);
            }
            None => {
                termination = Termination::Stalled;
                break;
            }
        }
    }
    if termination == Termination::MaxIterations && inf_norm(&grad) <= config.grad_tolerance {
        termination = Termination::Converged;
    }

    Ascent {
        grad_norm: inf_norm(&grad),
        point,
        loglik,
        iterations,
        termination,
    }
}
