//! The `predset` command line.
//!
//! ```text
//! predset simulate  --K 100 --N 10 --alpha 0.05 --reps 2000 --theta low-entropy:1e-4 --prior oracle-scaled:10
//! predset coverage  --K 5 --N 20 --theta uniform --prior adversarial:10
//! predset fit-prior --counts records.csv [--rows A,B,C]
//! predset predict   --counts records.csv --area A --alpha 0.05 [--gamma gamma.csv | --uniform 1]
//! predset analyze   --records records.csv --centroids centroids.csv [--adjacency adj.csv] --k 5 --out DIR
//! ```
//!
//! Exit status is 0 on success, 1 on input errors and 2 when the prior fit
//! fails numerically. Every error is reported as a single `error: ...` line
//! on stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};
use serde::Deserialize;

use crate::eb::{fit_gamma, ConcentrationVector, CountMatrix, OptimizerConfig};
use crate::error::{Error, Result};
use crate::pipeline::{
    analyze_all, export_reports, ingest_records, knn_neighbors, read_adjacency_file,
    read_centroids_file, read_records_file, AnalysisOptions, ArealDataset, ExportFormat,
};
use crate::sets::{direct_set, indirect_set, CountVector, ProbabilityVector};
use crate::sim::{
    run_cardinality_experiment, run_coverage_experiment, write_cardinality_table,
    write_coverage_table, PriorSpec, SimConfig, ThetaSpec, FULL_REPLICATIONS,
};

pub const DEFAULT_SEED: u64 = 20_230_501;
pub const DEFAULT_ALPHA: f64 = 0.05;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "predset",
    version,
    about = "Valid prediction sets for multinomial samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct SimArgs {
    /// Number of categories.
    #[arg(long = "K")]
    k: usize,
    /// Sample size per replication.
    #[arg(long = "N")]
    n: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = FULL_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// low-entropy:EPS | uniform | explicit:p1,p2,...
    #[arg(long, default_value = "low-entropy:0.0001", value_parser = parse_theta)]
    theta: ThetaSpec,
    /// oracle-scaled:S | uniform:C | adversarial:S | explicit:g1,g2,...
    #[arg(long, default_value = "oracle-scaled:10", value_parser = parse_prior)]
    prior: PriorSpec,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            k: self.k,
            n: self.n,
            alpha: self.alpha,
            replications: self.reps,
            theta: self.theta.clone(),
            prior: self.prior.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected set cardinalities and ratios to the direct set.
    Simulate(SimArgs),
    /// Empirical coverage with Monte Carlo standard errors.
    Coverage(SimArgs),
    /// Fit a Dirichlet concentration to count rows.
    FitPrior {
        /// Records file (area_id,species_id,count).
        #[arg(long)]
        counts: PathBuf,
        /// Comma-separated area ids to use; all areas when absent.
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<String>>,
        /// Stop when the gradient's largest entry is at most this.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// One area's prediction set with per-species statistics.
    Predict {
        /// Records file (area_id,species_id,count).
        #[arg(long)]
        counts: PathBuf,
        /// Area whose counts form the sample.
        #[arg(long)]
        area: String,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Concentration file (species_id,gamma).
        #[arg(long, conflicts_with = "uniform")]
        gamma: Option<PathBuf>,
        /// Uniform concentration c.
        #[arg(long)]
        uniform: Option<f64>,
    },
    /// Full areal analysis: per-area direct and indirect sets.
    Analyze {
        /// Records file (area_id,species_id,count).
        #[arg(long)]
        records: PathBuf,
        /// Centroids file (area_id,x,y) for k-nearest-neighbour graphs.
        #[arg(long, required_unless_present = "adjacency")]
        centroids: Option<PathBuf>,
        /// Neighbour list (area_id,neighbor_id); replaces k-NN.
        #[arg(long)]
        adjacency: Option<PathBuf>,
        /// Neighbours per area for the k-NN graph.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Output directory for the tables and reports.json.
        #[arg(long)]
        out: PathBuf,
        /// Force γ = c·1 for every area instead of fitting.
        #[arg(long)]
        uniform: Option<f64>,
    },
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect()
}

fn parse_theta(s: &str) -> std::result::Result<ThetaSpec, String> {
    match s.split_once(':') {
        None if s == "uniform" => Ok(ThetaSpec::Uniform),
        Some(("low-entropy", eps)) => Ok(ThetaSpec::LowEntropy {
            epsilon: eps.parse().map_err(|e| format!("epsilon: {e}"))?,
        }),
        Some(("explicit", list)) => ProbabilityVector::new(parse_list(list)?)
            .map(ThetaSpec::Explicit)
            .map_err(|e| e.to_string()),
        _ => Err(format!("unknown theta spec '{s}'")),
    }
}

fn parse_prior(s: &str) -> std::result::Result<PriorSpec, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("prior spec '{s}' needs KIND:VALUE"))?;
    let number = || value.parse::<f64>().map_err(|e| format!("{kind}: {e}"));
    match kind {
        "oracle-scaled" => Ok(PriorSpec::OracleScaled { scale: number()? }),
        "uniform" => Ok(PriorSpec::Uniform { c: number()? }),
        "adversarial" => Ok(PriorSpec::Adversarial { scale: number()? }),
        "explicit" => ConcentrationVector::new(parse_list(value)?)
            .map(PriorSpec::Explicit)
            .map_err(|e| e.to_string()),
        _ => Err(format!("unknown prior spec '{s}'")),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// status.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let reason = rendered
                .lines()
                .next()
                .unwrap_or("error: invalid arguments")
                .trim();
            let _ = writeln!(stderr, "{reason}");
            let _ = writeln!(stderr, "{}", Cli::command().render_usage());
            return EXIT_INPUT;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            match e {
                Error::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let result = run_cardinality_experiment(&args.config())?;
            write_cardinality_table(&[result], stdout)
        }
        Command::Coverage(args) => {
            let result = run_coverage_experiment(&args.config())?;
            write_coverage_table(&[result], stdout)
        }
        Command::FitPrior {
            counts,
            rows,
            tol,
            max_iter,
        } => {
            let dataset = ingest_records(&read_records_file(&counts)?)?;
            let indices: Vec<usize> = match rows {
                Some(ids) => ids
                    .iter()
                    .map(|id| {
                        dataset
                            .area_index(id)
                            .ok_or_else(|| Error::invalid(format!("unknown area '{id}'")))
                    })
                    .collect::<Result<_>>()?,
                None => (0..dataset.num_areas()).collect(),
            };
            let matrix = CountMatrix::from_rows(
                &indices
                    .iter()
                    .map(|&j| dataset.row(j).to_vec())
                    .collect::<Vec<_>>(),
            )?;
            let config = OptimizerConfig {
                grad_tolerance: tol,
                max_iterations: max_iter,
                ..Default::default()
            };
            let fit = fit_gamma(&matrix, &config)?;
            if !fit.converged {
                return Err(Error::Numerical(format!(
                    "prior fit did not converge ({:?} after {} iterations, gradient norm {:e})",
                    fit.termination, fit.iterations, fit.grad_norm
                )));
            }
            let mut csv = csv::Writer::from_writer(stdout);
            csv.write_record(["species_id", "gamma"])?;
            for (s, g) in dataset.species().iter().zip(fit.gamma.as_slice()) {
                csv.write_record([s.as_str(), g.to_string().as_str()])?;
            }
            csv.flush().map_err(|e| Error::io("<stdout>", e))?;
            writeln!(
                stderr,
                "converged=true iterations={} grad_norm={:e} loglik={} boundary={}",
                fit.iterations,
                fit.grad_norm,
                fit.loglik,
                fit.boundary.len()
            )
            .map_err(|e| Error::io("<stderr>", e))?;
            Ok(())
        }
        Command::Predict {
            counts,
            area,
            alpha,
            gamma,
            uniform,
        } => {
            let dataset = ingest_records(&read_records_file(&counts)?)?;
            let j = dataset
                .area_index(&area)
                .ok_or_else(|| Error::invalid(format!("unknown area '{area}'")))?;
            let x = CountVector::new(dataset.row(j).to_vec())?;
            let set = match (gamma, uniform) {
                (Some(path), _) => indirect_set(&x, &read_gamma_file(&path, &dataset)?, alpha)?,
                (None, Some(c)) => {
                    indirect_set(&x, &ConcentrationVector::uniform(x.len(), c)?, alpha)?
                }
                (None, None) => direct_set(&x, alpha)?,
            };
            let mut csv = csv::Writer::from_writer(stdout);
            csv.write_record(["species_id", "count", "pvalue", "included"])?;
            for (s, species) in dataset.species().iter().enumerate() {
                csv.write_record([
                    species.clone(),
                    x.counts()[s].to_string(),
                    format!("{:.6}", set.pvalues()[s]),
                    set.contains(s).to_string(),
                ])?;
            }
            csv.flush().map_err(|e| Error::io("<stdout>", e))?;
            Ok(())
        }
        Command::Analyze {
            records,
            centroids,
            adjacency,
            k,
            alpha,
            out,
            uniform,
        } => {
            let mut dataset = ingest_records(&read_records_file(&records)?)?;
            if let Some(path) = &centroids {
                dataset = dataset.with_centroids(&read_centroids_file(path)?)?;
            }
            let graph = match &adjacency {
                Some(path) => read_adjacency_file(path, &dataset)?,
                None => knn_neighbors(&dataset, k)?,
            };
            let options = AnalysisOptions {
                alpha,
                uniform_prior: uniform,
                ..Default::default()
            };
            let reports = analyze_all(&dataset, &graph, &options)?;
            export_reports(&reports, ExportFormat::DelimitedTable, &out)?;
            export_reports(&reports, ExportFormat::StructuredJson, &out)?;
            let fallbacks = reports.iter().filter(|r| r.fallback_to_direct).count();
            writeln!(
                stdout,
                "analyzed {} areas ({} prior fits fell back to the direct set); wrote {}",
                reports.len(),
                fallbacks,
                out.display()
            )
            .map_err(|e| Error::io("<stdout>", e))?;
            Ok(())
        }
    }
}

#[derive(Debug, Deserialize)]
struct GammaRow {
    species_id: String,
    gamma: f64,
}

/// Reads `species_id,gamma` and orders it by the dataset's species.
fn read_gamma_file(path: &std::path::Path, dataset: &ArealDataset) -> Result<ConcentrationVector> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut by_species = BTreeMap::new();
    for (i, row) in csv.deserialize::<GammaRow>().enumerate() {
        let row_no = i as u64 + 1;
        let row = row.map_err(|e| Error::Record {
            row: row_no,
            message: format!("malformed gamma row: {e}"),
        })?;
        if dataset.species_index(&row.species_id).is_none() {
            return Err(Error::Record {
                row: row_no,
                message: format!("unknown species '{}'", row.species_id),
            });
        }
        by_species.insert(row.species_id, row.gamma);
    }
    let gamma = dataset
        .species()
        .iter()
        .map(|s| {
            by_species
                .get(s)
                .copied()
                .ok_or_else(|| Error::invalid(format!("gamma file has no entry for species '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    ConcentrationVector::new(gamma)
}
