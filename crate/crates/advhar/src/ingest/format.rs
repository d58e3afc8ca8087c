use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::normalize::NormStats;
use crate::ingest::schema::DatasetSchema;
use crate::ingest::window::{LabeledDataset, Window};

const MAGIC: &[u8; 4] = b"AHWF";
const VERSION: u32 = 1;

/// JSON sidecar written next to a windows file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowsSidecar {
    pub schema: DatasetSchema,
    pub norm_stats: Option<NormStats>,
    /// Digest of the config that produced this artifact, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

pub fn sidecar_path(windows_path: &Path) -> PathBuf {
    let mut p = windows_path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Write the canonical intermediate windows file: header (magic, version,
/// w, c, K, M), then row-major 32-bit float windows, then per-window
/// activity byte and subject id.
pub fn write_windows_file(
    path: &Path,
    dataset: &LabeledDataset,
    norm_stats: Option<&NormStats>,
    config_digest: Option<&str>,
) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);
    let w = dataset.schema.window_size as u32;
    let c = dataset.schema.channels as u32;
    f.write_all(MAGIC).map_err(io_err)?;
    f.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
    f.write_u32::<LittleEndian>(w).map_err(io_err)?;
    f.write_u32::<LittleEndian>(c).map_err(io_err)?;
    f.write_u32::<LittleEndian>(dataset.schema.num_activities() as u32)
        .map_err(io_err)?;
    f.write_u32::<LittleEndian>(dataset.windows.len() as u32)
        .map_err(io_err)?;
    for win in &dataset.windows {
        for &v in win.values.iter() {
            f.write_f32::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    for win in &dataset.windows {
        f.write_u8(win.activity as u8).map_err(io_err)?;
        f.write_u32::<LittleEndian>(win.subject).map_err(io_err)?;
    }
    f.flush().map_err(io_err)?;

    let sidecar = WindowsSidecar {
        schema: dataset.schema.clone(),
        norm_stats: norm_stats.cloned(),
        config_digest: config_digest.map(str::to_owned),
    };
    let sp = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Data(format!("sidecar serialization: {e}")))?;
    std::fs::write(&sp, json).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

pub fn read_windows_file(path: &Path) -> Result<(LabeledDataset, WindowsSidecar)> {
    let sp = sidecar_path(path);
    let sidecar_json = std::fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    let sidecar: WindowsSidecar = serde_json::from_str(&sidecar_json)
        .map_err(|e| Error::Data(format!("sidecar parse: {e}")))?;

    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{}: not a windows file", path.display())));
    }
    let version = f.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported windows file version {version}")));
    }
    let w = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let c = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let k = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let m = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    if w != sidecar.schema.window_size
        || c != sidecar.schema.channels
        || k != sidecar.schema.num_activities()
    {
        return Err(Error::Data(
            "windows file header disagrees with sidecar schema".into(),
        ));
    }

    let mut raw = vec![0u8; m * w * c * 4];
    f.read_exact(&mut raw).map_err(io_err)?;
    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let mut mat = Array2::<f32>::zeros((w, c));
        let base = i * w * c * 4;
        for (j, v) in mat.iter_mut().enumerate() {
            let o = base + j * 4;
            *v = f32::from_le_bytes([raw[o], raw[o + 1], raw[o + 2], raw[o + 3]]);
        }
        values.push(mat);
    }
    let mut windows = Vec::with_capacity(m);
    let mut subjects = BTreeSet::new();
    for mat in values {
        let activity = f.read_u8().map_err(io_err)? as usize;
        let subject = f.read_u32::<LittleEndian>().map_err(io_err)?;
        subjects.insert(subject);
        windows.push(Window {
            values: mat,
            activity,
            subject,
        });
    }
    Ok((
        LabeledDataset {
            windows,
            subjects: subjects.into_iter().collect(),
            schema: sidecar.schema.clone(),
        },
        sidecar,
    ))
}
