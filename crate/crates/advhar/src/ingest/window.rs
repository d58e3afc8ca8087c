use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::parse::RecordingStream;
use crate::ingest::schema::DatasetSchema;

/// A w x c slice of sensor samples, the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Row-major (w, c) values.
    pub values: Array2<f32>,
    /// Activity label in 0..K-1.
    pub activity: usize,
    pub subject: u32,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub windows: Vec<Window>,
    pub subjects: Vec<u32>,
    pub schema: DatasetSchema,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Subset containing only the given subjects, preserving order.
    pub fn filter_subjects(&self, keep: &[u32]) -> LabeledDataset {
        let windows: Vec<Window> = self
            .windows
            .iter()
            .filter(|w| keep.contains(&w.subject))
            .cloned()
            .collect();
        let subjects: Vec<u32> = self
            .subjects
            .iter()
            .copied()
            .filter(|s| keep.contains(s))
            .collect();
        LabeledDataset {
            windows,
            subjects,
            schema: self.schema.clone(),
        }
    }
}

/// Cut a recording into fixed-size windows at stride (w - overlap).
/// Only complete windows whose w rows all share one raw activity label are
/// emitted; the window label is that activity remapped to 0..K-1.
pub fn segment_windows(recording: &RecordingStream, schema: &DatasetSchema) -> Result<Vec<Window>> {
    let w = schema.window_size;
    let c = schema.channels;
    if let Some(row) = recording.samples.first() {
        if row.len() != c {
            return Err(Error::Schema(format!(
                "recording has {} channels, schema expects {c}",
                row.len()
            )));
        }
    }
    let stride = w - schema.overlap;
    let n = recording.len();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + w <= n {
        let labels = &recording.raw_labels[start..start + w];
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            if let Some(activity) = schema.remap_label(first) {
                let mut values = Array2::<f32>::zeros((w, c));
                for (i, row) in recording.samples[start..start + w].iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        values[[i, j]] = v;
                    }
                }
                out.push(Window {
                    values,
                    activity,
                    subject: recording.subject_id,
                });
            }
        }
        start += stride;
    }
    Ok(out)
}

/// Concatenate segmented windows over all recordings, dropping excluded
/// subjects. Recordings are processed in subject-then-time order so the
/// result is deterministic.
pub fn build_labeled_dataset(
    recordings: &[RecordingStream],
    schema: &DatasetSchema,
) -> Result<LabeledDataset> {
    let mut ordered: Vec<&RecordingStream> = recordings
        .iter()
        .filter(|r| !schema.excluded_subjects.contains(&r.subject_id))
        .collect();
    ordered.sort_by_key(|r| r.subject_id);

    let mut windows = Vec::new();
    let mut subjects = BTreeSet::new();
    for rec in ordered {
        let ws = segment_windows(rec, schema)?;
        if !ws.is_empty() {
            subjects.insert(rec.subject_id);
        }
        windows.extend(ws);
    }
    if windows.is_empty() {
        return Err(Error::Data("dataset is empty after segmentation".into()));
    }
    Ok(LabeledDataset {
        windows,
        subjects: subjects.into_iter().collect(),
        schema: schema.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(w: usize, overlap: usize) -> DatasetSchema {
        let mut s = DatasetSchema::synthetic(2, w, overlap, 3);
        s.activity_labels = vec![1, 2, 3];
        s
    }

    fn recording(subject: u32, n: usize, label: i64) -> RecordingStream {
        RecordingStream {
            subject_id: subject,
            samples: (0..n).map(|i| vec![i as f32, -(i as f32)]).collect(),
            raw_labels: vec![label; n],
        }
    }

    #[test]
    fn window_starts_follow_stride() {
        let rec = recording(1, 1024, 1);
        let ws = segment_windows(&rec, &schema(512, 256)).unwrap();
        assert_eq!(ws.len(), 3);
        assert_eq!(ws[0].values[[0, 0]], 0.0);
        assert_eq!(ws[1].values[[0, 0]], 256.0);
        assert_eq!(ws[2].values[[0, 0]], 512.0);
    }

    #[test]
    fn exact_length_gives_one_window() {
        let ws = segment_windows(&recording(1, 512, 1), &schema(512, 256)).unwrap();
        assert_eq!(ws.len(), 1);
    }

    #[test]
    fn short_recording_gives_no_windows() {
        let ws = segment_windows(&recording(1, 500, 1), &schema(512, 256)).unwrap();
        assert!(ws.is_empty());
    }

    #[test]
    fn mixed_label_windows_are_discarded() {
        let mut rec = recording(1, 1024, 1);
        for l in rec.raw_labels[600..].iter_mut() {
            *l = 2;
        }
        let ws = segment_windows(&rec, &schema(512, 256)).unwrap();
        // starts 0 pure, 256 and 512 mixed
        assert_eq!(ws.len(), 1);
        for w in &ws {
            assert_eq!(w.activity, 0);
        }
    }

    #[test]
    fn brute_force_window_count_matches() {
        let sch = schema(32, 8);
        let stride = 32 - 8;
        for n in [0usize, 10, 32, 33, 55, 56, 200] {
            let ws = segment_windows(&recording(1, n, 2), &sch).unwrap();
            let expected = (0..)
                .map(|k| k * stride + 32)
                .take_while(|&end| end <= n)
                .count();
            assert_eq!(ws.len(), expected, "n={n}");
            for w in &ws {
                assert_eq!(w.activity, 1);
            }
        }
    }

    #[test]
    fn excluded_subject_dropped_from_dataset() {
        let sch = schema(32, 16);
        let mut sch = sch;
        sch.excluded_subjects = vec![9];
        let recs: Vec<RecordingStream> = (1..=9).map(|s| recording(s, 64, 1)).collect();
        let ds = build_labeled_dataset(&recs, &sch).unwrap();
        assert_eq!(ds.subjects.len(), 8);
        assert!(!ds.subjects.contains(&9));
    }

    #[test]
    fn dataset_size_sums_recordings() {
        let sch = schema(32, 16);
        let recs = vec![recording(1, 64, 1), recording(2, 32, 1), recording(3, 10, 1)];
        let ds = build_labeled_dataset(&recs, &sch).unwrap();
        assert_eq!(ds.len(), 3 + 1 + 0);
    }

    #[test]
    fn all_windows_empty_is_error() {
        let sch = schema(32, 16);
        let recs = vec![recording(1, 5, 1)];
        assert!(build_labeled_dataset(&recs, &sch).is_err());
    }
}
