//! Areal analysis: records in, per-area direct and indirect sets out.

mod analysis;
mod dataset;
mod export;
mod neighbors;

pub use analysis::{
    analyze_all, AnalysisOptions, AreaReport, FitDiagnostics, NeighborShare, SpeciesComparison,
};
pub use dataset::{
    ingest_records, read_centroids, read_centroids_file, read_records, read_records_file,
    ArealDataset, CentroidRecord, ObservationRecord,
};
pub use export::{
    export_reports, read_reports_json, write_disagreements, write_ratios, write_reports_json,
    write_sample_sizes, ExportFormat, DISAGREEMENTS_FILE, RATIOS_FILE, REPORTS_FILE,
    SAMPLE_SIZES_FILE,
};
pub use neighbors::{knn_neighbors, read_adjacency, read_adjacency_file, NeighborGraph};
