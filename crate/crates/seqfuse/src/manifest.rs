//! Line-delimited feature manifests.
//!
//! Each non-empty line is one JSON object. An optional first line without an
//! `id` field is the header:
//!
//! ```text
//! {"cameras":6,"dim":32}
//! {"cameras":6,"dim":32,"blob":"manifest.jsonl.f32"}
//! ```
//!
//! Every other line is a record:
//!
//! ```text
//! {"id":"query-00007-c3-0","pid":7,"cam":3,"split":"query","feat":[0.12,-1.5],"img":"imgs/7_3.jpg"}
//! ```
//!
//! `img` is optional. When the header names a `blob`, records carry
//! `"off":N` instead of `feat`: the feature is `dim` little-endian f32 values
//! starting at float offset `N` of the blob file, which is resolved relative
//! to the manifest. Floats in `feat` are written as the shortest decimal that
//! round-trips to the same f64.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqfuse_core::data::{CameraId, Dataset, FeatureRecord, PersonId, Split};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub cameras: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    pid: PersonId,
    cam: CameraId,
    split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    off: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    img: Option<String>,
}

/// Reads a manifest into a validated dataset.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let mut header: Option<ManifestHeader> = None;
    let mut blob: Option<Vec<f32>> = None;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let mut dim: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| parse_err(lineno, e.to_string()))?;
        if value.get("id").is_none() {
            if header.is_some() || !records.is_empty() {
                return Err(parse_err(lineno, "header must be the first line".into()));
            }
            let h: ManifestHeader = serde_json::from_value(value)
                .map_err(|e| parse_err(lineno, format!("bad header: {e}")))?;
            if let Some(name) = &h.blob {
                blob = Some(read_blob(
                    &path.parent().unwrap_or(Path::new(".")).join(name),
                )?);
            }
            dim = Some(h.dim);
            header = Some(h);
            continue;
        }
        let line: Line =
            serde_json::from_value(value).map_err(|e| parse_err(lineno, e.to_string()))?;
        let feature = match (line.feat, line.off, &blob) {
            (Some(f), None, _) => f,
            (None, Some(off), Some(b)) => {
                let d = dim.expect("blob implies header");
                let end = off
                    .checked_add(d)
                    .filter(|&e| e <= b.len())
                    .ok_or_else(|| {
                        parse_err(
                            lineno,
                            format!(
                                "offset {off} + {d} floats exceeds blob of {} floats",
                                b.len()
                            ),
                        )
                    })?;
                b[off..end].iter().map(|&v| f64::from(v)).collect()
            }
            (None, Some(_), None) => {
                return Err(parse_err(
                    lineno,
                    "`off` given but the header names no blob".into(),
                ))
            }
            (Some(_), Some(_), _) => {
                return Err(parse_err(lineno, "record has both `feat` and `off`".into()))
            }
            (None, None, _) => return Err(parse_err(lineno, "record has no feature".into())),
        };
        match dim {
            Some(d) if d != feature.len() => {
                return Err(parse_err(
                    lineno,
                    format!("feature dimension {} differs from {d}", feature.len()),
                ));
            }
            None => dim = Some(feature.len()),
            _ => {}
        }
        if !seen.insert(line.id.clone()) {
            return Err(parse_err(
                lineno,
                format!("duplicate record id {:?}", line.id),
            ));
        }
        if let Some(h) = &header {
            if line.cam == 0 || usize::from(line.cam) > h.cameras {
                return Err(parse_err(
                    lineno,
                    format!("camera {} outside 1..={}", line.cam, h.cameras),
                ));
            }
        }
        records.push(FeatureRecord {
            id: line.id,
            pid: line.pid,
            camera: line.cam,
            split: line.split,
            feature,
            image: line.img,
        });
    }
    Dataset::new(records, header.map(|h| h.cameras)).map_err(|e| Error::format(path, e.to_string()))
}

fn read_blob(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path,
            format!("blob length {} is not a multiple of 4", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Where features go when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureStorage {
    /// Inline `feat` arrays, exact for f64.
    #[default]
    Inline,
    /// Little-endian f32 sidecar next to the manifest (`<name>.f32`).
    Sidecar,
}

/// Writes `dataset` with a header line. Returns the paths written.
pub fn write_manifest(
    path: &Path,
    dataset: &Dataset,
    storage: FeatureStorage,
) -> Result<Vec<PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    let blob_name = match storage {
        FeatureStorage::Inline => None,
        FeatureStorage::Sidecar => {
            let name = format!(
                "{}.f32",
                path.file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or("manifest")
            );
            let blob_path = path.with_file_name(&name);
            let mut bytes = Vec::with_capacity(dataset.len() * dataset.dim() * 4);
            for r in dataset.records() {
                for &v in &r.feature {
                    bytes.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            fs::write(&blob_path, bytes).map_err(|e| Error::io(&blob_path, e))?;
            written.push(blob_path);
            Some(name)
        }
    };
    let header = ManifestHeader {
        cameras: dataset.camera_count(),
        dim: dataset.dim(),
        blob: blob_name,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut out, &header).map_err(|e| Error::format(path, e.to_string()))?;
    out.write_all(b"\n").map_err(io)?;
    for (i, r) in dataset.records().iter().enumerate() {
        let line = Line {
            id: r.id.clone(),
            pid: r.pid,
            cam: r.camera,
            split: r.split,
            feat: (storage == FeatureStorage::Inline).then(|| r.feature.clone()),
            off: (storage == FeatureStorage::Sidecar).then_some(i * dataset.dim()),
            img: r.image.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| Error::format(path, e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(written)
}

/// Per-split identity counts and "seen by n cameras" histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub dim: usize,
    pub cameras: usize,
    pub splits: Vec<SplitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub split: Split,
    pub identities: usize,
    pub records: usize,
    /// `histogram[n-1]` identities appear in exactly `n` cameras.
    pub histogram: Vec<usize>,
}

impl DatasetSummary {
    pub fn of(dataset: &Dataset) -> Self {
        let splits = [Split::Train, Split::Query, Split::Gallery]
            .into_iter()
            .map(|split| SplitSummary {
                split,
                identities: dataset.identities(split).len(),
                records: dataset.split_records(split).len(),
                histogram: dataset.camera_histogram(split),
            })
            .collect();
        Self {
            records: dataset.len(),
            dim: dataset.dim(),
            cameras: dataset.camera_count(),
            splits,
        }
    }
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{} records, D = {}, {} cameras",
            self.records, self.dim, self.cameras
        )?;
        write!(f, "{:<8} {:>6} {:>8}", "split", "ids", "records")?;
        for n in 1..=self.cameras {
            write!(f, " {:>5}", format!("{n}cam"))?;
        }
        writeln!(f)?;
        for s in &self.splits {
            write!(
                f,
                "{:<8} {:>6} {:>8}",
                s.split.as_str(),
                s.identities,
                s.records
            )?;
            for n in 0..self.cameras {
                write!(f, " {:>5}", s.histogram.get(n).copied().unwrap_or(0))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
