//! Temporal pooling shared by the per-frame feature banks: column means
//! over all frames plus per-column deviations within non-overlapping
//! frame groups, averaged across groups.

use crate::error::{Error, Result};

/// Column means over a list of equal-length rows.
pub(crate) fn column_means(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = check_rows(rows)?;
    let mut out = vec![0.0; width];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    Ok(out)
}

/// Population standard deviation per column within each non-overlapping
/// group of `group` consecutive rows (a trailing partial group is
/// dropped), averaged over the groups.
pub(crate) fn grouped_column_stds(rows: &[Vec<f64>], group: usize) -> Result<Vec<f64>> {
    let width = check_rows(rows)?;
    assert!(group >= 2, "group size must be at least 2");
    let n_groups = rows.len() / group;
    if n_groups == 0 {
        return Err(Error::TooFewFrames {
            need: group,
            got: rows.len(),
        });
    }
    let mut out = vec![0.0; width];
    for g in 0..n_groups {
        let chunk = &rows[g * group..(g + 1) * group];
        for col in 0..width {
            let mean = chunk.iter().map(|r| r[col]).sum::<f64>() / group as f64;
            let var = chunk
                .iter()
                .map(|r| (r[col] - mean).powi(2))
                .sum::<f64>()
                / group as f64;
            out[col] += var.sqrt();
        }
    }
    for o in &mut out {
        *o /= n_groups as f64;
    }
    Ok(out)
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::TooFewFrames { need: 1, got: 0 });
    };
    let width = first.len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::DimensionMismatch(
            "per-frame feature rows differ in length".into(),
        ));
    }
    Ok(width)
}
