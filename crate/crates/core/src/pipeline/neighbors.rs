use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::dataset::{require_headers, ArealDataset};
use crate::error::{Error, Result};

/// Per-area neighbour lists (area indices, no self-loops).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    neighbors: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn new(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let j = neighbors.len();
        for (area, list) in neighbors.iter().enumerate() {
            if list.contains(&area) {
                return Err(Error::invalid(format!("area {area} is its own neighbour")));
            }
            if let Some(bad) = list.iter().find(|&&l| l >= j) {
                return Err(Error::invalid(format!(
                    "neighbour index {bad} out of range"
                )));
            }
        }
        Ok(Self { neighbors })
    }

    pub fn neighbors_of(&self, area: usize) -> Option<&[usize]> {
        self.neighbors.get(area).map(Vec::as_slice)
    }

    pub fn num_areas(&self) -> usize {
        self.neighbors.len()
    }
}

/// The `k` areas nearest each area by Euclidean centroid distance. Equal
/// distances go to the lexicographically smaller area id.
pub fn knn_neighbors(dataset: &ArealDataset, k: usize) -> Result<NeighborGraph> {
    let centroids = dataset
        .centroids()
        .ok_or_else(|| Error::invalid("k-nearest neighbours need centroids"))?;
    let j = centroids.len();
    if k == 0 || k >= j {
        return Err(Error::invalid(format!(
            "k must be in 1..{j} for {j} areas, got {k}"
        )));
    }
    let lists = (0..j)
        .map(|a| {
            let [ax, ay] = centroids[a];
            let mut others: Vec<(f64, usize)> = (0..j)
                .filter(|&b| b != a)
                .map(|b| {
                    let [bx, by] = centroids[b];
                    ((ax - bx).powi(2) + (ay - by).powi(2), b)
                })
                .collect();
            // area indices follow area_id order
            others.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            others.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();
    NeighborGraph::new(lists)
}

#[derive(Debug, Deserialize)]
struct AdjacencyRow {
    area_id: String,
    neighbor_id: String,
}

/// Builds a graph from `area_id,neighbor_id` rows. Pairs are directed;
/// duplicates are dropped and each list is sorted.
pub fn read_adjacency<R: Read>(reader: R, dataset: &ArealDataset) -> Result<NeighborGraph> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    require_headers(&mut csv, &["area_id", "neighbor_id"])?;
    let mut lists = vec![Vec::new(); dataset.num_areas()];
    for (i, r) in csv.deserialize::<AdjacencyRow>().enumerate() {
        let row = i as u64 + 1;
        let r = r.map_err(|e| Error::Record {
            row,
            message: format!("malformed adjacency row: {e}"),
        })?;
        let lookup = |id: &str| {
            dataset.area_index(id).ok_or_else(|| Error::Record {
                row,
                message: format!("unknown area '{id}'"),
            })
        };
        let (a, b) = (lookup(&r.area_id)?, lookup(&r.neighbor_id)?);
        if a == b {
            return Err(Error::Record {
                row,
                message: format!("area '{}' listed as its own neighbour", r.area_id),
            });
        }
        lists[a].push(b);
    }
    for list in &mut lists {
        list.sort_unstable();
        list.dedup();
    }
    NeighborGraph::new(lists)
}

pub fn read_adjacency_file(path: &Path, dataset: &ArealDataset) -> Result<NeighborGraph> {
    read_adjacency(File::open(path).map_err(|e| Error::io(path, e))?, dataset)
}
