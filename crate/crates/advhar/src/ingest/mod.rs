//! Raw recording ingest: channel selection, windowing, and min-max
//! normalization with statistics fit on training subjects only.

pub mod format;
pub mod parse;
pub mod schema;
pub mod window;

mod normalize;

pub use format::{read_windows_file, sidecar_path, write_windows_file, WindowsSidecar};
pub use normalize::{apply_minmax, fit_minmax, NormStats};
pub use parse::{read_raw_recording, RecordingStream};
pub use schema::{DatasetKind, DatasetSchema};
pub use window::{build_labeled_dataset, segment_windows, LabeledDataset, Window};
