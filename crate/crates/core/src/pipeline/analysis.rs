use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::ArealDataset;
use super::neighbors::NeighborGraph;
use crate::eb::{fit_gamma, neighbor_matrix, ConcentrationVector, OptimizerConfig, Termination};
use crate::error::{Error, Result};
use crate::sets::{check_alpha, direct_set, indirect_set, CountVector, PredictionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub alpha: f64,
    pub optimizer: OptimizerConfig,
    /// Use `γ = c·1` for every area instead of fitting.
    pub uniform_prior: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            optimizer: OptimizerConfig::default(),
            uniform_prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub loglik: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborShare {
    pub area_id: String,
    pub percent: f64,
}

/// One species that is in exactly one of the two sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesComparison {
    pub species_id: String,
    pub in_direct: bool,
    pub in_indirect: bool,
    /// Share of the area's own sample, in percent.
    pub own_percent: f64,
    pub neighbor_percents: Vec<NeighborShare>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub area_id: String,
    pub n: u64,
    pub neighbors: Vec<String>,
    pub direct_included: Vec<String>,
    pub indirect_included: Vec<String>,
    pub cardinality_direct: usize,
    pub cardinality_indirect: usize,
    pub ratio: f64,
    /// Concentration used for the indirect set, one entry per species.
    pub gamma: Vec<f64>,
    /// `None` when a uniform prior was forced.
    pub fit: Option<FitDiagnostics>,
    /// The prior fit failed and the indirect set is the direct set.
    pub fallback_to_direct: bool,
    pub disagreements: Vec<SpeciesComparison>,
}

impl AreaReport {
    /// `γ̂` rounded to two decimals.
    pub fn gamma_rounded(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .map(|g| (g * 100.0).round() / 100.0)
            .collect()
    }
}

/// Builds direct and indirect sets for every area, each with a prior fitted
/// from its neighbours only.
pub fn analyze_all(
    dataset: &ArealDataset,
    graph: &NeighborGraph,
    options: &AnalysisOptions,
) -> Result<Vec<AreaReport>> {
    check_alpha(options.alpha)?;
    if graph.num_areas() != dataset.num_areas() {
        return Err(Error::DimensionMismatch {
            expected: dataset.num_areas(),
            found: graph.num_areas(),
        });
    }
    if let Some(c) = options.uniform_prior {
        ConcentrationVector::uniform(1, c)?;
    }
    (0..dataset.num_areas())
        .into_par_iter()
        .map(|j| analyze_area(j, dataset, graph, options))
        .collect()
}

fn analyze_area(
    j: usize,
    dataset: &ArealDataset,
    graph: &NeighborGraph,
    options: &AnalysisOptions,
) -> Result<AreaReport> {
    let k = dataset.num_species();
    let x = CountVector::new(dataset.row(j).to_vec())?;
    let direct = direct_set(&x, options.alpha)?;
    let neighbors = graph.neighbors_of(j).unwrap_or_default();

    let (gamma, fit) = match options.uniform_prior {
        Some(c) => (ConcentrationVector::uniform(k, c)?, None),
        None => {
            let result = fit_gamma(&neighbor_matrix(j, dataset, graph)?, &options.optimizer)?;
            let diag = FitDiagnostics {
                converged: result.converged,
                iterations: result.iterations,
                grad_norm: result.grad_norm,
                loglik: result.loglik,
                termination: result.termination,
            };
            (result.gamma, Some(diag))
        }
    };
    let fallback = fit.as_ref().is_some_and(|f| !f.converged);
    let indirect = if fallback {
        direct.clone()
    } else {
        indirect_set(&x, &gamma, options.alpha)?
    };

    let names = |set: &PredictionSet| -> Vec<String> {
        set.included()
            .iter()
            .map(|&i| dataset.species()[i].clone())
            .collect()
    };
    let percent = |area: usize, species: usize| {
        let n = dataset.total(area);
        if n == 0 {
            0.0
        } else {
            100.0 * dataset.row(area)[species] as f64 / n as f64
        }
    };
    let disagreements = (0..k)
        .filter(|&s| direct.contains(s) != indirect.contains(s))
        .map(|s| SpeciesComparison {
            species_id: dataset.species()[s].clone(),
            in_direct: direct.contains(s),
            in_indirect: indirect.contains(s),
            own_percent: percent(j, s),
            neighbor_percents: neighbors
                .iter()
                .map(|&l| NeighborShare {
                    area_id: dataset.areas()[l].clone(),
                    percent: percent(l, s),
                })
                .collect(),
            gamma: gamma.as_slice()[s],
        })
        .collect();

    Ok(AreaReport {
        area_id: dataset.areas()[j].clone(),
        n: x.total(),
        neighbors: neighbors
            .iter()
            .map(|&l| dataset.areas()[l].clone())
            .collect(),
        direct_included: names(&direct),
        indirect_included: names(&indirect),
        cardinality_direct: direct.cardinality(),
        cardinality_indirect: indirect.cardinality(),
        ratio: indirect.cardinality() as f64 / direct.cardinality() as f64,
        gamma: gamma.into_inner(),
        fit,
        fallback_to_direct: fallback,
        disagreements,
    })
}
