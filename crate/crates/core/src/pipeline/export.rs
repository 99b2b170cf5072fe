use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::analysis::AreaReport;
use crate::error::{Error, Result};

pub const RATIOS_FILE: &str = "ratios.csv";
pub const SAMPLE_SIZES_FILE: &str = "sample_sizes.csv";
pub const DISAGREEMENTS_FILE: &str = "disagreements.csv";
pub const REPORTS_FILE: &str = "reports.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// `ratios.csv`, `sample_sizes.csv` and `disagreements.csv`.
    DelimitedTable,
    /// `reports.json`.
    StructuredJson,
}

/// `area_id,N,card_direct,card_indirect,ratio`
pub fn write_ratios<W: Write>(reports: &[AreaReport], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["area_id", "N", "card_direct", "card_indirect", "ratio"])?;
    for r in reports {
        csv.write_record([
            r.area_id.clone(),
            r.n.to_string(),
            r.cardinality_direct.to_string(),
            r.cardinality_indirect.to_string(),
            format!("{:.6}", r.ratio),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<ratios>", e))?;
    Ok(())
}

/// `area_id,N,log_N`; `log_N` is empty for an empty sample.
pub fn write_sample_sizes<W: Write>(reports: &[AreaReport], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["area_id", "N", "log_N"])?;
    for r in reports {
        let log_n = if r.n > 0 {
            format!("{:.6}", (r.n as f64).ln())
        } else {
            String::new()
        };
        csv.write_record([r.area_id.clone(), r.n.to_string(), log_n])?;
    }
    csv.flush().map_err(|e| Error::io("<sample sizes>", e))?;
    Ok(())
}

/// Long-format comparison of species in only one of the two sets:
/// `area_id,species_id,membership,gamma,source_area,percent`, one row for
/// the area itself and one per neighbour.
pub fn write_disagreements<W: Write>(reports: &[AreaReport], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "area_id",
        "species_id",
        "membership",
        "gamma",
        "source_area",
        "percent",
    ])?;
    for r in reports {
        for d in &r.disagreements {
            let membership = if d.in_indirect {
                "indirect_only"
            } else {
                "direct_only"
            };
            let gamma = format!("{:.2}", d.gamma);
            let own = std::iter::once((r.area_id.as_str(), d.own_percent));
            let others = d
                .neighbor_percents
                .iter()
                .map(|n| (n.area_id.as_str(), n.percent));
            for (source, pct) in own.chain(others) {
                csv.write_record([
                    r.area_id.as_str(),
                    d.species_id.as_str(),
                    membership,
                    gamma.as_str(),
                    source,
                    format!("{pct:.2}").as_str(),
                ])?;
            }
        }
    }
    csv.flush().map_err(|e| Error::io("<disagreements>", e))?;
    Ok(())
}

pub fn write_reports_json<W: Write>(reports: &[AreaReport], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, reports)?;
    out.write_all(b"\n")
        .map_err(|e| Error::io("<reports>", e))?;
    Ok(())
}

pub fn read_reports_json<R: Read>(input: R) -> Result<Vec<AreaReport>> {
    Ok(serde_json::from_reader(input)?)
}

/// Writes the files for `format` into `dir` (created if missing) and
/// returns their paths.
pub fn export_reports(
    reports: &[AreaReport],
    format: ExportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to export"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    type Writer = fn(&[AreaReport], BufWriter<File>) -> Result<()>;
    let files: &[(&str, Writer)] = match format {
        ExportFormat::DelimitedTable => &[
            (RATIOS_FILE, write_ratios),
            (SAMPLE_SIZES_FILE, write_sample_sizes),
            (DISAGREEMENTS_FILE, write_disagreements),
        ],
        ExportFormat::StructuredJson => &[(REPORTS_FILE, write_reports_json)],
    };
    files
        .iter()
        .map(|(name, write)| {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write(reports, BufWriter::new(file))?;
            Ok(path)
        })
        .collect()
}
