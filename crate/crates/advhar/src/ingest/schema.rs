use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DatasetKind {
    Pamap2,
    Mhealth,
    Realdisp,
    Synthetic,
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DatasetKind::Pamap2 => "PAMAP2",
            DatasetKind::Mhealth => "MHEALTH",
            DatasetKind::Realdisp => "REALDISP",
            DatasetKind::Synthetic => "SYNTHETIC",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PAMAP2" => Ok(DatasetKind::Pamap2),
            "MHEALTH" => Ok(DatasetKind::Mhealth),
            "REALDISP" => Ok(DatasetKind::Realdisp),
            "SYNTHETIC" => Ok(DatasetKind::Synthetic),
            other => Err(Error::Config(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Per-dataset layout: which raw file columns feed the model, where the
/// label lives, and how raw label codes map onto 0..K-1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub dataset_kind: DatasetKind,
    /// Number of sensor channels c kept after column selection.
    pub channels: usize,
    /// Window size w in samples.
    pub window_size: usize,
    /// Window overlap in samples, strictly less than window_size.
    pub overlap: usize,
    /// Raw label codes for the K activities, in class order. Index in this
    /// list is the remapped label 0..K-1.
    pub activity_labels: Vec<i64>,
    /// Subject ids dropped from the dataset entirely.
    pub excluded_subjects: Vec<u32>,
    /// Raw label codes dropped before segmentation (null/transition codes
    /// and non-protocol activities).
    pub excluded_raw_labels: Vec<i64>,
    /// Zero-based raw file column indices of the kept channels.
    pub channel_columns: Vec<usize>,
    /// Zero-based raw file column carrying the activity code.
    pub label_column: usize,
}

impl DatasetSchema {
    pub fn num_activities(&self) -> usize {
        self.activity_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.overlap >= self.window_size {
            return Err(Error::Schema(format!(
                "overlap {} must be < window size {}",
                self.overlap, self.window_size
            )));
        }
        if self.activity_labels.len() < 2 {
            return Err(Error::Schema("need at least 2 activity labels".into()));
        }
        if self.channel_columns.len() != self.channels {
            return Err(Error::Schema(format!(
                "channel_columns length {} != channels {}",
                self.channel_columns.len(),
                self.channels
            )));
        }
        Ok(())
    }

    /// Remap a raw label code to its class index, if it is a kept activity.
    pub fn remap_label(&self, raw: i64) -> Option<usize> {
        self.activity_labels.iter().position(|&l| l == raw)
    }

    /// PAMAP2: 3 IMUs (hand, chest, ankle), keeping the 16g accelerometer
    /// and gyroscope triples of each, 18 channels. Raw files have 54
    /// columns: timestamp, activity id, heart rate, then 17 per IMU
    /// (temp, acc16 x3, acc6 x3, gyro x3, mag x3, orientation x4).
    pub fn pamap2() -> Self {
        let mut cols = Vec::new();
        for imu_base in [3usize, 20, 37] {
            cols.extend((imu_base + 1)..(imu_base + 4)); // acc16
            cols.extend((imu_base + 7)..(imu_base + 10)); // gyro
        }
        DatasetSchema {
            dataset_kind: DatasetKind::Pamap2,
            channels: 18,
            window_size: 512,
            overlap: 256,
            // The twelve protocol activities, in id order:
            // lying, sitting, standing, walking, running, cycling,
            // nordic walking, ascending stairs, descending stairs,
            // vacuum cleaning, ironing, rope jumping.
            activity_labels: vec![1, 2, 3, 4, 5, 6, 7, 12, 13, 16, 17, 24],
            excluded_subjects: vec![9],
            // 0 is the transient code; 9/10/11/18..20 are optional
            // activities outside the protocol.
            excluded_raw_labels: vec![0, 9, 10, 11, 18, 19, 20],
            channel_columns: cols,
            label_column: 1,
        }
    }

    /// MHEALTH: accelerometer + gyroscope columns only (the chest unit has
    /// no gyroscope), 15 channels. Raw files have 24 columns: chest acc x3,
    /// ECG x2, ankle acc x3, ankle gyro x3, ankle mag x3, wrist acc x3,
    /// wrist gyro x3, wrist mag x3, label.
    pub fn mhealth() -> Self {
        let mut cols: Vec<usize> = vec![0, 1, 2]; // chest acc
        cols.extend(5..11); // ankle acc + gyro
        cols.extend(14..20); // wrist acc + gyro
        DatasetSchema {
            dataset_kind: DatasetKind::Mhealth,
            channels: 15,
            window_size: 512,
            overlap: 256,
            activity_labels: (1..=12).collect(),
            excluded_subjects: vec![],
            excluded_raw_labels: vec![0],
            channel_columns: cols,
            label_column: 23,
        }
    }

    /// REALDISP: 9 sensors, accelerometer + gyroscope triples of each,
    /// 54 channels. Raw files have 120 columns: 2 timestamp columns, then
    /// 13 per sensor (acc x3, gyro x3, mag x3, quaternion x4), then label.
    pub fn realdisp() -> Self {
        let mut cols = Vec::new();
        for sensor in 0..9usize {
            let base = 2 + sensor * 13;
            cols.extend(base..(base + 6));
        }
        DatasetSchema {
            dataset_kind: DatasetKind::Realdisp,
            channels: 54,
            window_size: 256,
            overlap: 128,
            activity_labels: (1..=33).collect(),
            excluded_subjects: vec![],
            excluded_raw_labels: vec![0],
            channel_columns: cols,
            label_column: 119,
        }
    }

    /// Schema for generated data: channels are already selected and labels
    /// already in 0..K-1, so the column map is the identity.
    pub fn synthetic(channels: usize, window_size: usize, overlap: usize, k: usize) -> Self {
        DatasetSchema {
            dataset_kind: DatasetKind::Synthetic,
            channels,
            window_size,
            overlap,
            activity_labels: (0..k as i64).collect(),
            excluded_subjects: vec![],
            excluded_raw_labels: vec![],
            channel_columns: (0..channels).collect(),
            label_column: channels,
        }
    }

    pub fn builtin(kind: DatasetKind) -> Result<Self> {
        match kind {
            DatasetKind::Pamap2 => Ok(Self::pamap2()),
            DatasetKind::Mhealth => Ok(Self::mhealth()),
            DatasetKind::Realdisp => Ok(Self::realdisp()),
            DatasetKind::Synthetic => Err(Error::Config(
                "synthetic schema needs explicit dimensions; use a schema file".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pamap2_schema_matches_paper() {
        let s = DatasetSchema::pamap2();
        s.validate().unwrap();
        assert_eq!(s.channels, 18);
        assert_eq!(s.window_size, 512);
        assert_eq!(s.overlap, 256);
        assert_eq!(s.num_activities(), 12);
        assert_eq!(s.excluded_subjects, vec![9]);
    }

    #[test]
    fn realdisp_schema_matches_paper() {
        let s = DatasetSchema::realdisp();
        s.validate().unwrap();
        assert_eq!(s.channels, 54);
        assert_eq!(s.window_size, 256);
        assert_eq!(s.overlap, 128);
        assert_eq!(s.num_activities(), 33);
    }

    #[test]
    fn mhealth_uses_acc_gyro_subset() {
        let s = DatasetSchema::mhealth();
        s.validate().unwrap();
        assert_eq!(s.channels, 15);
        assert_eq!(s.num_activities(), 12);
    }

    #[test]
    fn label_remap_is_dense() {
        let s = DatasetSchema::pamap2();
        assert_eq!(s.remap_label(1), Some(0));
        assert_eq!(s.remap_label(24), Some(11));
        assert_eq!(s.remap_label(0), None);
        assert_eq!(s.remap_label(9), None);
    }

    #[test]
    fn invalid_overlap_rejected() {
        let mut s = DatasetSchema::pamap2();
        s.overlap = 512;
        assert!(s.validate().is_err());
    }
}
