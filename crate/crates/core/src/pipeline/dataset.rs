use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `area_id,species_id,count` row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub area_id: String,
    pub species_id: String,
    pub count: u64,
}

impl ObservationRecord {
    pub fn new(area_id: impl Into<String>, species_id: impl Into<String>, count: u64) -> Self {
        Self {
            area_id: area_id.into(),
            species_id: species_id.into(),
            count,
        }
    }
}

/// Areas × species count matrix. Areas and species are sorted
/// lexicographically; every species seen anywhere has a column in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct ArealDataset {
    areas: Vec<String>,
    species: Vec<String>,
    counts: Vec<Vec<u64>>,
    centroids: Option<Vec<[f64; 2]>>,
}

impl ArealDataset {
    pub fn new(areas: Vec<String>, species: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if areas.is_empty() || species.is_empty() {
            return Err(Error::invalid(
                "dataset needs at least one area and one species",
            ));
        }
        if counts.len() != areas.len() {
            return Err(Error::DimensionMismatch {
                expected: areas.len(),
                found: counts.len(),
            });
        }
        if let Some(row) = counts.iter().find(|r| r.len() != species.len()) {
            return Err(Error::DimensionMismatch {
                expected: species.len(),
                found: row.len(),
            });
        }
        if areas.iter().collect::<BTreeSet<_>>().len() != areas.len() {
            return Err(Error::invalid("duplicate area id"));
        }
        if species.iter().collect::<BTreeSet<_>>().len() != species.len() {
            return Err(Error::invalid("duplicate species id"));
        }
        Ok(Self {
            areas,
            species,
            counts,
            centroids: None,
        })
    }

    pub fn areas(&self) -> &[String] {
        &self.areas
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn num_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn row(&self, area: usize) -> &[u64] {
        &self.counts[area]
    }

    /// Sample size `N_j` of one area.
    pub fn total(&self, area: usize) -> u64 {
        self.counts[area].iter().sum()
    }

    pub fn area_index(&self, area_id: &str) -> Option<usize> {
        self.areas
            .binary_search_by(|a| a.as_str().cmp(area_id))
            .ok()
    }

    pub fn species_index(&self, species_id: &str) -> Option<usize> {
        self.species
            .binary_search_by(|s| s.as_str().cmp(species_id))
            .ok()
    }

    pub fn centroids(&self) -> Option<&[[f64; 2]]> {
        self.centroids.as_deref()
    }

    /// Replaces one area's counts (same species order).
    pub fn set_row(&mut self, area: usize, counts: Vec<u64>) -> Result<()> {
        if counts.len() != self.species.len() {
            return Err(Error::DimensionMismatch {
                expected: self.species.len(),
                found: counts.len(),
            });
        }
        self.counts[area] = counts;
        Ok(())
    }

    /// Attaches centroids. Every area needs exactly one; centroids for
    /// unknown areas are rejected.
    pub fn with_centroids(mut self, centroids: &[CentroidRecord]) -> Result<Self> {
        let mut coords: Vec<Option<[f64; 2]>> = vec![None; self.areas.len()];
        for (i, c) in centroids.iter().enumerate() {
            let row = i as u64 + 1;
            let j = self.area_index(&c.area_id).ok_or_else(|| Error::Record {
                row,
                message: format!("centroid for unknown area '{}'", c.area_id),
            })?;
            if !(c.x.is_finite() && c.y.is_finite()) {
                return Err(Error::Record {
                    row,
                    message: "non-finite coordinate".into(),
                });
            }
            if coords[j].replace([c.x, c.y]).is_some() {
                return Err(Error::Record {
                    row,
                    message: format!("duplicate centroid for area '{}'", c.area_id),
                });
            }
        }
        let coords = coords
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                c.ok_or_else(|| {
                    Error::invalid(format!("missing centroid for area '{}'", self.areas[j]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.centroids = Some(coords);
        Ok(self)
    }
}

/// Sums records into an [`ArealDataset`]. Record errors carry the 1-based
/// record number.
pub fn ingest_records(rows: &[ObservationRecord]) -> Result<ArealDataset> {
    if rows.is_empty() {
        return Err(Error::invalid("no observation records"));
    }
    let mut table: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    let mut species: BTreeSet<&str> = BTreeSet::new();
    for (i, r) in rows.iter().enumerate() {
        let row = i as u64 + 1;
        if r.area_id.trim().is_empty() {
            return Err(Error::Record {
                row,
                message: "empty area_id".into(),
            });
        }
        if r.species_id.trim().is_empty() {
            return Err(Error::Record {
                row,
                message: "empty species_id".into(),
            });
        }
        species.insert(&r.species_id);
        let cell = table
            .entry(&r.area_id)
            .or_default()
            .entry(&r.species_id)
            .or_default();
        *cell = cell.checked_add(r.count).ok_or_else(|| Error::Record {
            row,
            message: "count overflow".into(),
        })?;
    }

    let species: Vec<&str> = species.into_iter().collect();
    let mut areas = Vec::with_capacity(table.len());
    let mut counts = Vec::with_capacity(table.len());
    for (area, cells) in table {
        areas.push(area.to_string());
        counts.push(
            species
                .iter()
                .map(|s| cells.get(s).copied().unwrap_or(0))
                .collect(),
        );
    }
    ArealDataset::new(
        areas,
        species.into_iter().map(String::from).collect(),
        counts,
    )
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    area_id: String,
    species_id: String,
    count: String,
}

/// Parses `area_id,species_id,count` CSV.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<ObservationRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    require_headers(&mut csv, &["area_id", "species_id", "count"])?;
    let mut out = Vec::new();
    for (i, raw) in csv.deserialize::<RawRecord>().enumerate() {
        let row = i as u64 + 1;
        let raw = raw.map_err(|e| Error::Record {
            row,
            message: format!("malformed record: {e}"),
        })?;
        let count: i64 = raw.count.parse().map_err(|_| Error::Record {
            row,
            message: format!("count '{}' is not an integer", raw.count),
        })?;
        if count < 0 {
            return Err(Error::Record {
                row,
                message: format!("negative count {count}"),
            });
        }
        out.push(ObservationRecord {
            area_id: raw.area_id,
            species_id: raw.species_id,
            count: count as u64,
        });
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<ObservationRecord>> {
    read_records(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// One `area_id,x,y` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidRecord {
    pub area_id: String,
    pub x: f64,
    pub y: f64,
}

pub fn read_centroids<R: Read>(reader: R) -> Result<Vec<CentroidRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    require_headers(&mut csv, &["area_id", "x", "y"])?;
    csv.deserialize::<CentroidRecord>()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Record {
                row: i as u64 + 1,
                message: format!("malformed centroid: {e}"),
            })
        })
        .collect()
}

pub fn read_centroids_file(path: &Path) -> Result<Vec<CentroidRecord>> {
    read_centroids(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub(crate) fn require_headers<R: Read>(csv: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = csv.headers()?;
    for name in expected {
        if !headers.iter().any(|h| h == *name) {
            return Err(Error::invalid(format!(
                "missing column '{name}' (expected header {})",
                expected.join(",")
            )));
        }
    }
    Ok(())
}
