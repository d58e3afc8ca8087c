use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::schema::DatasetSchema;

/// One subject's raw recording restricted to the schema's channel subset.
#[derive(Debug, Clone)]
pub struct RecordingStream {
    pub subject_id: u32,
    /// Row-major samples, each row exactly `c` channel values.
    pub samples: Vec<Vec<f32>>,
    /// Raw activity code per row (pre-remap).
    pub raw_labels: Vec<i64>,
}

impl RecordingStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn parse_field(tok: &str) -> Option<f32> {
    if tok.eq_ignore_ascii_case("nan") {
        return Some(f32::NAN);
    }
    tok.parse::<f32>().ok()
}

/// Read one raw recording file. Rows carrying an excluded raw label are
/// dropped here, before segmentation. Missing values (NaN) are
/// forward-filled within the recording; rows still missing at the head
/// are dropped.
pub fn read_raw_recording(
    path: &Path,
    subject_id: u32,
    schema: &DatasetSchema,
) -> Result<RecordingStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut samples: Vec<Vec<f32>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let max_col = schema
        .channel_columns
        .iter()
        .copied()
        .chain(std::iter::once(schema.label_column))
        .max()
        .unwrap_or(0);

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|ch: char| ch == ' ' || ch == '\t' || ch == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if fields.len() <= max_col {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no + 1,
                msg: format!(
                    "row has {} columns, schema needs at least {}",
                    fields.len(),
                    max_col + 1
                ),
            });
        }
        let label_tok = fields[schema.label_column];
        let raw_label = label_tok
            .parse::<f64>()
            .map(|v| v as i64)
            .map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no + 1,
                msg: format!("bad label field '{label_tok}'"),
            })?;
        if schema.excluded_raw_labels.contains(&raw_label) {
            continue;
        }
        let mut row = Vec::with_capacity(schema.channels);
        for &col in &schema.channel_columns {
            let v = parse_field(fields[col]).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line_no + 1,
                msg: format!("bad value '{}' in column {col}", fields[col]),
            })?;
            row.push(v);
        }
        samples.push(row);
        raw_labels.push(raw_label);
    }

    forward_fill(&mut samples, &mut raw_labels, schema.channels);

    Ok(RecordingStream {
        subject_id,
        samples,
        raw_labels,
    })
}

/// Forward-fill NaN channel values from the previous row, then drop head
/// rows that still contain NaN.
fn forward_fill(samples: &mut Vec<Vec<f32>>, raw_labels: &mut Vec<i64>, channels: usize) {
    let mut last_valid: Vec<Option<f32>> = vec![None; channels];
    for row in samples.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            if v.is_nan() {
                if let Some(prev) = last_valid[j] {
                    *v = prev;
                }
            } else {
                last_valid[j] = Some(*v);
            }
        }
    }
    let first_complete = samples
        .iter()
        .position(|row| row.iter().all(|v| !v.is_nan()))
        .unwrap_or(samples.len());
    samples.drain(..first_complete);
    raw_labels.drain(..first_complete);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn synth_schema() -> DatasetSchema {
        DatasetSchema::synthetic(2, 4, 2, 3)
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_empty_stream() {
        let f = write_temp("");
        let s = read_raw_recording(f.path(), 1, &synth_schema()).unwrap();
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn excluded_labels_are_dropped() {
        let mut schema = synth_schema();
        schema.excluded_raw_labels = vec![9];
        let mut body = String::new();
        for i in 0..100 {
            let label = if i == 10 || i == 50 { 9 } else { 0 };
            body.push_str(&format!("{}.0 {}.0 {}\n", i, i, label));
        }
        let f = write_temp(&body);
        let s = read_raw_recording(f.path(), 1, &schema).unwrap();
        assert_eq!(s.len(), 98);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let f = write_temp("1.0 2.0 0\n1.0 oops 0\n");
        let err = read_raw_recording(f.path(), 1, &synth_schema()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_row_is_schema_violation() {
        let f = write_temp("1.0 0\n");
        assert!(read_raw_recording(f.path(), 1, &synth_schema()).is_err());
    }

    #[test]
    fn nan_values_forward_filled_and_head_dropped() {
        let f = write_temp("NaN 1.0 0\n2.0 NaN 0\n3.0 4.0 0\nNaN 5.0 0\n");
        let s = read_raw_recording(f.path(), 1, &synth_schema()).unwrap();
        // first row has no fill source for channel 0 and is dropped
        assert_eq!(s.len(), 3);
        assert_eq!(s.samples[0], vec![2.0, 1.0]);
        assert_eq!(s.samples[2], vec![3.0, 5.0]);
    }

    #[test]
    fn comma_separated_rows_parse() {
        let f = write_temp("1.0,2.0,0\n");
        let s = read_raw_recording(f.path(), 1, &synth_schema()).unwrap();
        assert_eq!(s.len(), 1);
    }
}
