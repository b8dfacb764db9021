//! Heatmap pattern detectors: uni-color rows, single outliers, outlier
//! islands and a checkered score.
//!
//! All detectors are row-wise. A row is split into maximal runs of equal
//! color; a run is *interior* when it touches neither the first nor the last
//! column, so its flanks exist and (by maximality) have the opposite color.
//! Interior runs of length 1 are single outliers, interior runs of length
//! 2..=ceil(cols/2) are islands. Short runs touching a boundary in a mixed
//! row are reported as uncategorized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("pattern detection needs at least one row and one column")]
    Empty,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("{labels} labels for {rows} rows or {frames} frame ids for {cols} columns")]
    Labels {
        labels: usize,
        rows: usize,
        frames: usize,
        cols: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellColor {
    Exists,
    NotExists,
}

impl CellColor {
    pub fn of(value: bool) -> Self {
        if value {
            Self::Exists
        } else {
            Self::NotExists
        }
    }

    pub fn inverted(self) -> Self {
        match self {
            Self::Exists => Self::NotExists,
            Self::NotExists => Self::Exists,
        }
    }
}

/// A maximal run of one color inside a row, in column coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub len: usize,
    pub value: bool,
}

/// Maximal equal-valued runs of a row, left to right.
pub fn runs(row: &[bool]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &v) in row.iter().enumerate() {
        match out.last_mut() {
            Some(run) if run.value == v => run.len += 1,
            _ => out.push(Run {
                start: i,
                len: 1,
                value: v,
            }),
        }
    }
    out
}

/// Longest interior run still counted as an island.
pub fn island_max_len(cols: usize) -> usize {
    cols.div_ceil(2)
}

/// Patterns of a single row in column coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RowPatterns {
    pub uni_color: Option<bool>,
    pub outliers: Vec<usize>,
    pub islands: Vec<Run>,
    pub uncategorized: Vec<Run>,
    pub transitions: usize,
}

pub fn analyze_row(row: &[bool]) -> RowPatterns {
    let cols = row.len();
    let row_runs = runs(row);
    let mut out = RowPatterns {
        transitions: row_runs.len().saturating_sub(1),
        ..Default::default()
    };
    if row_runs.len() == 1 {
        out.uni_color = Some(row_runs[0].value);
        return out;
    }
    let max_island = island_max_len(cols);
    for run in row_runs {
        let interior = run.start > 0 && run.start + run.len < cols;
        match (interior, run.len) {
            (true, 1) => out.outliers.push(run.start),
            (true, len) if len <= max_island => out.islands.push(run),
            (false, len) if len <= max_island => out.uncategorized.push(run),
            _ => {}
        }
    }
    out
}

/// Horizontal transitions over `cols - 1` possible positions; 0 for one column.
pub fn row_checkeredness<T: Scalar>(row: &[bool]) -> T {
    if row.len() < 2 {
        return T::zero();
    }
    let transitions = row.windows(2).filter(|w| w[0] != w[1]).count();
    T::from_count(transitions as u64) / T::from_count(row.len() as u64 - 1)
}

fn check_shape<R: AsRef<[bool]>>(rows: &[R]) -> Result<usize, PatternError> {
    let cols = rows.first().map_or(0, |r| r.as_ref().len());
    if cols == 0 {
        return Err(PatternError::Empty);
    }
    for (i, r) in rows.iter().enumerate() {
        if r.as_ref().len() != cols {
            return Err(PatternError::Ragged {
                row: i,
                expected: cols,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(cols)
}

/// Mean row checkeredness of a matrix.
pub fn checkeredness<T: Scalar, R: AsRef<[bool]>>(rows: &[R]) -> Result<T, PatternError> {
    check_shape(rows)?;
    let sum = rows
        .iter()
        .fold(T::zero(), |acc, r| acc + row_checkeredness::<T>(r.as_ref()));
    Ok(sum / T::from_count(rows.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniColorRow {
    pub object: String,
    pub color: CellColor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierCell {
    pub object: String,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub object: String,
    pub start_frame: usize,
    pub length: usize,
    #[serde(rename = "island_color")]
    pub color: CellColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport<T> {
    pub uni_color_rows: Vec<UniColorRow>,
    pub single_outliers: Vec<OutlierCell>,
    pub outlier_islands: Vec<RunReport>,
    pub uncategorized_runs: Vec<RunReport>,
    pub checkered_score: T,
}

/// Detects patterns on labeled rows. `frames[c]` is the frame id shown in
/// column `c`.
pub fn detect_patterns<T: Scalar, R: AsRef<[bool]>>(
    objects: &[String],
    frames: &[usize],
    rows: &[R],
) -> Result<PatternReport<T>, PatternError> {
    let cols = check_shape(rows)?;
    if objects.len() != rows.len() || frames.len() != cols {
        return Err(PatternError::Labels {
            labels: objects.len(),
            rows: rows.len(),
            frames: frames.len(),
            cols,
        });
    }
    let mut report = PatternReport {
        uni_color_rows: Vec::new(),
        single_outliers: Vec::new(),
        outlier_islands: Vec::new(),
        uncategorized_runs: Vec::new(),
        checkered_score: checkeredness(rows)?,
    };
    let to_report = |object: &String, run: Run| RunReport {
        object: object.clone(),
        start_frame: frames[run.start],
        length: run.len,
        color: CellColor::of(run.value),
    };
    for (object, row) in objects.iter().zip(rows) {
        let p = analyze_row(row.as_ref());
        if let Some(v) = p.uni_color {
            report.uni_color_rows.push(UniColorRow {
                object: object.clone(),
                color: CellColor::of(v),
            });
        }
        report.single_outliers.extend(p.outliers.iter().map(|&c| OutlierCell {
            object: object.clone(),
            frame: frames[c],
        }));
        report
            .outlier_islands
            .extend(p.islands.into_iter().map(|r| to_report(object, r)));
        report
            .uncategorized_runs
            .extend(p.uncategorized.into_iter().map(|r| to_report(object, r)));
    }
    Ok(report)
}

/// [`detect_patterns`] with rows labeled by index and columns `0..cols`.
pub fn detect_matrix<T: Scalar, R: AsRef<[bool]>>(rows: &[R]) -> Result<PatternReport<T>, PatternError> {
    let cols = check_shape(rows)?;
    let objects: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
    let frames: Vec<usize> = (0..cols).collect();
    detect_patterns(&objects, &frames, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == 'G').collect()
    }

    #[test]
    fn uniform_row_is_uni_color() {
        let p = analyze_row(&row("GGGGG"));
        assert_eq!(p.uni_color, Some(true));
        assert_eq!(row_checkeredness::<f64>(&row("GGGGG")), 0.0);
        assert_eq!(analyze_row(&row("R")).uni_color, Some(false));
    }

    #[test]
    fn single_outlier_in_middle() {
        let p = analyze_row(&row("GGRGG"));
        assert_eq!(p.outliers, vec![2]);
        assert!(p.islands.is_empty());
        assert!(p.uni_color.is_none());
    }

    #[test]
    fn island_and_alternating_rows() {
        let p = analyze_row(&row("GGRRRGG"));
        assert_eq!(
            p.islands,
            vec![Run {
                start: 2,
                len: 3,
                value: false
            }]
        );
        assert_eq!(row_checkeredness::<f64>(&row("GRGRGRG")), 1.0);
        let alt = analyze_row(&row("GRGRGRG"));
        assert_eq!(alt.outliers, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn boundary_cells_are_never_outliers() {
        let p = analyze_row(&row("RGGGG"));
        assert!(p.outliers.is_empty());
        assert_eq!(
            p.uncategorized,
            vec![Run {
                start: 0,
                len: 1,
                value: false
            }]
        );
    }

    #[test]
    fn long_interior_run_is_a_regime_change() {
        // 4 > ceil(7/2) = 4? no: equal, still an island; 5 is not
        assert_eq!(analyze_row(&row("GRRRRGG")).islands.len(), 1);
        assert!(analyze_row(&row("GRRRRRG")).islands.is_empty());
    }

    #[test]
    fn checkeredness_extremes_and_errors() {
        let uniform = vec![row("GGGG"), row("RRRR")];
        assert_eq!(checkeredness::<f64, _>(&uniform).unwrap(), 0.0);
        let alt = vec![row("GRGR"), row("RGRG")];
        assert_eq!(checkeredness::<f32, _>(&alt).unwrap(), 1.0);
        assert_eq!(checkeredness::<f64, _>(&[row("G")]).unwrap(), 0.0);
        let empty: Vec<Vec<bool>> = vec![];
        assert_eq!(checkeredness::<f64, _>(&empty), Err(PatternError::Empty));
        assert!(matches!(
            checkeredness::<f64, _>(&[row("GG"), row("G")]),
            Err(PatternError::Ragged { row: 1, .. })
        ));
    }

    #[test]
    fn labeled_report_uses_frame_ids() {
        let objects = vec!["Car".to_string()];
        let frames = vec![0, 2, 5, 7, 9];
        let r = detect_patterns::<f64, _>(&objects, &frames, &[row("GGRGG")]).unwrap();
        assert_eq!(
            r.single_outliers,
            vec![OutlierCell {
                object: "Car".into(),
                frame: 5
            }]
        );
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["checkered_score"].is_number());
    }
}
