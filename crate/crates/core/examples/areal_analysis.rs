//! End to end: long-format tallies and centroids in, per-area direct and
//! indirect sets out, with each area's prior fitted from its nearest
//! neighbours only.
//!
//! `cargo run --example areal_analysis -- [records.csv centroids.csv [out_dir]]`

use std::path::{Path, PathBuf};

use predset::pipeline::{
    analyze_all, export_reports, ingest_records, knn_neighbors, read_centroids_file,
    read_records_file, AnalysisOptions, ExportFormat,
};

fn main() -> predset::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (records, centroids) = match args.as_slice() {
        [r, c, ..] => (PathBuf::from(r), PathBuf::from(c)),
        _ => (fixtures.join("records.csv"), fixtures.join("centroids.csv")),
    };
    let out = args
        .get(2)
        .map_or_else(|| std::env::temp_dir().join("predset-areal"), PathBuf::from);

    let dataset = ingest_records(&read_records_file(&records)?)?
        .with_centroids(&read_centroids_file(&centroids)?)?;
    let graph = knn_neighbors(&dataset, 5)?;
    let reports = analyze_all(&dataset, &graph, &AnalysisOptions::default())?;

    println!(
        "{:<6} {:>5} {:>7} {:>9} {:>7}",
        "area", "N", "direct", "indirect", "ratio"
    );
    for r in &reports {
        println!(
            "{:<6} {:>5} {:>7} {:>9} {:>7.3}",
            r.area_id, r.n, r.cardinality_direct, r.cardinality_indirect, r.ratio
        );
        for d in &r.disagreements {
            let side = if d.in_direct {
                "direct only"
            } else {
                "indirect only"
            };
            println!(
                "         {} ({side}; {:.1}% here, gamma {:.2})",
                d.species_id, d.own_percent, d.gamma
            );
        }
    }

    let mut written = export_reports(&reports, ExportFormat::DelimitedTable, &out)?;
    written.extend(export_reports(
        &reports,
        ExportFormat::StructuredJson,
        &out,
    )?);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
