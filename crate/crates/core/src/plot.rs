//! Scatter-plot data for 2-D layouts: a CSV table and a static SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::community::Partition;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::evaluate::ReferenceGrouping;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Paths written by [`export_plot`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn colour(c: usize) -> String {
    // golden-angle hue steps keep neighbouring ids apart
    let hue = (c as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,50%)")
}

/// Writes `<path>.csv` (`id,x,y,community,highlight`) and `<path>.svg`. Highlighted
/// documents are drawn with a black outline; `highlight` lists their grouping names.
pub fn export_plot(
    layout: &EmbeddingMatrix,
    partition: &Partition,
    highlights: &[ReferenceGrouping],
    path: impl AsRef<Path>,
) -> Result<PlotFiles> {
    if layout.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "plot layout needs 2 columns, got {}",
            layout.ncols()
        )));
    }
    let n = layout.nrows();
    if partition.assignment.len() != n {
        return Err(Error::PartitionMismatch(format!(
            "partition has {} nodes, layout has {n} rows",
            partition.assignment.len()
        )));
    }

    let mut marks: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for g in highlights {
        for id in &g.members {
            let key = layout
                .ids
                .iter()
                .find(|s| **s == id.to_string())
                .map(String::as_str);
            if let Some(key) = key {
                marks.entry(key).or_default().push(&g.name);
            } else {
                log::warn!("highlighted id {id} of {:?} is not in the layout", g.name);
            }
        }
    }

    let mut csv = String::from("id,x,y,community,highlight\n");
    for i in 0..n {
        let id = &layout.ids[i];
        let hl = marks
            .get(id.as_str())
            .map(|v| v.join(";"))
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{id},{},{},{},{hl}",
            layout.data[(i, 0)],
            layout.data[(i, 1)],
            partition.assignment[i]
        );
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..n {
        for c in 0..2 {
            lo[c] = lo[c].min(layout.data[(i, c)]);
            hi[c] = hi[c].max(layout.data[(i, c)]);
        }
    }
    let scale = |v: f64, c: usize| {
        let span = hi[c] - lo[c];
        let t = if span > 0.0 { (v - lo[c]) / span } else { 0.5 };
        let t = if c == 1 { 1.0 - t } else { t };
        MARGIN + t * (SIZE - 2.0 * MARGIN)
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for i in 0..n {
        let id = &layout.ids[i];
        let (x, y) = (scale(layout.data[(i, 0)], 0), scale(layout.data[(i, 1)], 1));
        let fill = colour(partition.assignment[i]);
        let _ = match marks.get(id.as_str()) {
            Some(names) => writeln!(
                svg,
                "<circle class=\"highlight\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"6\" fill=\"{fill}\" stroke=\"#000\" stroke-width=\"2\"><title>{id} ({})</title></circle>",
                names.join(", ")
            ),
            None => writeln!(
                svg,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{fill}\"><title>{id}</title></circle>"
            ),
        };
    }
    svg.push_str("</svg>\n");

    let path = path.as_ref();
    let files = PlotFiles {
        csv: path.with_extension("csv"),
        svg: path.with_extension("svg"),
    };
    fs::write(&files.csv, csv).map_err(|e| Error::io(&files.csv, e))?;
    fs::write(&files.svg, svg).map_err(|e| Error::io(&files.svg, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::{Method, QualityVariant};
    use crate::embedding::Provenance;
    use ndarray::Array2;

    fn fixture(cols: usize) -> (EmbeddingMatrix, Partition) {
        let ids = (1..=10).map(|h| format!("RV 1.{h}")).collect();
        let data = Array2::from_shape_fn((10, cols), |(i, j)| (i * 2 + j) as f64);
        let layout = EmbeddingMatrix::new(Provenance::Reduced, ids, data).unwrap();
        let partition = Partition {
            assignment: (0..10).map(|i| i / 5).collect(),
            quality: 0.4,
            method: Method::Leiden,
            variant: QualityVariant::Newman,
            seed: 0,
        };
        (layout, partition)
    }

    #[test]
    fn writes_one_row_and_marker_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let (layout, partition) = fixture(2);
        let refs = vec![ReferenceGrouping::new(
            "Creation",
            ["RV 1.2", "RV 1.5", "RV 1.9"]
                .iter()
                .map(|s| s.parse().unwrap())
                .collect(),
        )
        .unwrap()];
        let files = export_plot(&layout, &partition, &refs, dir.path().join("fig")).unwrap();
        let csv = fs::read_to_string(files.csv).unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.contains("RV 1.5,8,9,0,Creation"));
        let svg = fs::read_to_string(files.svg).unwrap();
        assert_eq!(svg.matches("<circle").count(), 10);
        assert_eq!(svg.matches("stroke=\"#000\"").count(), 3);
    }

    #[test]
    fn rejects_non_planar_layout() {
        let dir = tempfile::tempdir().unwrap();
        let (layout, partition) = fixture(3);
        assert!(matches!(
            export_plot(&layout, &partition, &[], dir.path().join("fig")),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
