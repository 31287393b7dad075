//! Mean-comparison sweep: G-mean and H-mean of confusion matrices with
//! balanced entries and with geometric column-major decay, per class count.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use cgoo::objectives::confusion::{g_mean, geometric_matrix, h_mean, uniform_matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub gmean_balanced: f64,
    pub hmean_balanced: f64,
    pub gmean_geometric: f64,
    pub hmean_geometric: f64,
}

pub fn figure_means(l_max: usize, decay: f64) -> anyhow::Result<Vec<FigureRow>> {
    if l_max < 2 {
        bail!("lmax must be at least 2");
    }
    let mut rows = Vec::with_capacity(l_max - 1);
    for l in 2..=l_max {
        let balanced = uniform_matrix(l).map_err(|e| anyhow!("{e}"))?;
        let geometric = geometric_matrix(l, decay).map_err(|e| anyhow!("{e}"))?;
        rows.push(FigureRow {
            l,
            gmean_balanced: g_mean(&balanced).map_err(|e| anyhow!("{e}"))?,
            hmean_balanced: h_mean(&balanced).map_err(|e| anyhow!("{e}"))?,
            gmean_geometric: g_mean(&geometric).map_err(|e| anyhow!("{e}"))?,
            hmean_geometric: h_mean(&geometric).map_err(|e| anyhow!("{e}"))?,
        });
    }
    Ok(rows)
}

/// Serde's f64 output is the shortest decimal that round-trips, so the
/// CSV loses nothing on re-ingest.
pub fn write_figure_csv(rows: &[FigureRow], path: &Path) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_figure_csv(path: &Path) -> anyhow::Result<Vec<FigureRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_two_class_row_is_half() {
        let rows = figure_means(2, 1.0 / 3.0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].gmean_balanced - 0.5).abs() < 1e-12);
        assert!((rows[0].hmean_balanced - 0.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_hmean_dominates_gmean_up_to_ten() {
        let rows = figure_means(10, 1.0 / 3.0).unwrap();
        assert_eq!(rows.len(), 9);
        for row in &rows {
            assert!(
                row.hmean_geometric >= row.gmean_geometric - 1e-12,
                "L={}: H {} < G {}",
                row.l,
                row.hmean_geometric,
                row.gmean_geometric
            );
        }
    }

    #[test]
    fn csv_round_trips_losslessly() {
        let rows = figure_means(6, 1.0 / 3.0).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_figure_csv(&rows, file.path()).unwrap();
        let back = read_figure_csv(file.path()).unwrap();
        assert_eq!(rows, back);
    }
}
