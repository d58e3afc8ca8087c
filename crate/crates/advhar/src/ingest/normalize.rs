use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::window::Window;

/// Per-channel min-max statistics fit on training subjects only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub per_channel_min: Vec<f32>,
    pub per_channel_max: Vec<f32>,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.per_channel_min.len()
    }
}

pub fn fit_minmax(training_windows: &[Window]) -> Result<NormStats> {
    let first = training_windows
        .first()
        .ok_or_else(|| Error::Data("cannot fit min-max statistics on empty input".into()))?;
    let c = first.values.ncols();
    let mut min = vec![f32::INFINITY; c];
    let mut max = vec![f32::NEG_INFINITY; c];
    for w in training_windows {
        for row in w.values.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v < min[j] {
                    min[j] = v;
                }
                if v > max[j] {
                    max[j] = v;
                }
            }
        }
    }
    Ok(NormStats {
        per_channel_min: min,
        per_channel_max: max,
    })
}

/// value' = (value - min_j) / (max_j - min_j). Constant channels map to 0.
/// Validation/test values may fall outside [0,1]; no clamping.
pub fn apply_minmax(window: &Window, stats: &NormStats) -> Result<Window> {
    let c = window.values.ncols();
    if c != stats.channels() {
        return Err(Error::Shape {
            expected: format!("{} channels", stats.channels()),
            got: format!("{c} channels"),
        });
    }
    let mut values = window.values.clone();
    for mut row in values.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let span = stats.per_channel_max[j] - stats.per_channel_min[j];
            *v = if span == 0.0 {
                0.0
            } else {
                (*v - stats.per_channel_min[j]) / span
            };
        }
    }
    Ok(Window {
        values,
        activity: window.activity,
        subject: window.subject,
    })
}
