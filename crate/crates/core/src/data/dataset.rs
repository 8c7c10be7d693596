use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PersonId = u32;
/// Cameras are numbered from 1.
pub type CameraId = u16;
/// Position of a record in [`Dataset::records`].
pub type RecordIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Query,
    Gallery,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Query => "query",
            Split::Gallery => "gallery",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "query" => Ok(Split::Query),
            "gallery" => Ok(Split::Gallery),
            other => Err(Error::Dataset(format!("unknown split {other:?}"))),
        }
    }
}

/// One observation of one identity in one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub pid: PersonId,
    pub camera: CameraId,
    pub split: Split,
    pub feature: Vec<f64>,
    pub image: Option<String>,
}

/// Immutable, validated collection of records with split/identity/camera
/// indexes. Index lists are ordered by record id.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<FeatureRecord>,
    dim: usize,
    cameras: usize,
    by_key: BTreeMap<(Split, PersonId, CameraId), Vec<RecordIdx>>,
    by_id: BTreeMap<String, RecordIdx>,
}

impl Dataset {
    /// Validates and indexes `records`.
    ///
    /// `declared_cameras`, when given, bounds every camera id; otherwise the
    /// camera count is the largest camera id present.
    pub fn new(records: Vec<FeatureRecord>, declared_cameras: Option<usize>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.feature.len());
        let mut by_key: BTreeMap<_, Vec<RecordIdx>> = BTreeMap::new();
        let mut by_id = BTreeMap::new();
        let mut max_camera = 0usize;

        for (idx, r) in records.iter().enumerate() {
            if r.feature.len() != dim {
                return Err(Error::Dataset(format!(
                    "record {:?} has feature dimension {}, expected {dim}",
                    r.id,
                    r.feature.len()
                )));
            }
            if r.feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!(
                    "record {:?} has a non-finite feature value",
                    r.id
                )));
            }
            if r.camera == 0 {
                return Err(Error::Dataset(format!(
                    "record {:?} has camera id 0; cameras start at 1",
                    r.id
                )));
            }
            if let Some(declared) = declared_cameras {
                if usize::from(r.camera) > declared {
                    return Err(Error::Dataset(format!(
                        "record {:?} has camera {} but only {declared} cameras are declared",
                        r.id, r.camera
                    )));
                }
            }
            if by_id.insert(r.id.clone(), idx).is_some() {
                return Err(Error::Dataset(format!("duplicate record id {:?}", r.id)));
            }
            max_camera = max_camera.max(usize::from(r.camera));
            by_key
                .entry((r.split, r.pid, r.camera))
                .or_default()
                .push(idx);
        }
        for list in by_key.values_mut() {
            list.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
        }
        Ok(Self {
            dim,
            cameras: declared_cameras.unwrap_or(max_camera),
            records,
            by_key,
            by_id,
        })
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn record(&self, idx: RecordIdx) -> &FeatureRecord {
        &self.records[idx]
    }

    pub fn feature(&self, idx: RecordIdx) -> &[f64] {
        &self.records[idx].feature
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Feature dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn camera_count(&self) -> usize {
        self.cameras
    }

    pub fn find(&self, record_id: &str) -> Option<RecordIdx> {
        self.by_id.get(record_id).copied()
    }

    /// Records of `pid` in `camera` for `split`, ordered by record id.
    pub fn records_of(&self, split: Split, pid: PersonId, camera: CameraId) -> &[RecordIdx] {
        self.by_key
            .get(&(split, pid, camera))
            .map_or(&[], Vec::as_slice)
    }

    /// Identities present in `split`, ascending.
    pub fn identities(&self, split: Split) -> Vec<PersonId> {
        let set: BTreeSet<PersonId> = self
            .by_key
            .keys()
            .filter(|k| k.0 == split)
            .map(|k| k.1)
            .collect();
        set.into_iter().collect()
    }

    /// Cameras in which `pid` appears in `split`, ascending.
    pub fn cameras_of(&self, split: Split, pid: PersonId) -> Vec<CameraId> {
        self.by_key
            .range((split, pid, 0)..=(split, pid, CameraId::MAX))
            .map(|(k, _)| k.2)
            .collect()
    }

    /// All records of `split` in `camera`, in dataset order.
    pub fn camera_records(&self, split: Split, camera: CameraId) -> Vec<RecordIdx> {
        (0..self.records.len())
            .filter(|&i| self.records[i].split == split && self.records[i].camera == camera)
            .collect()
    }

    /// All records of `split`, in dataset order.
    pub fn split_records(&self, split: Split) -> Vec<RecordIdx> {
        (0..self.records.len())
            .filter(|&i| self.records[i].split == split)
            .collect()
    }

    /// Number of identities of `split` seen in exactly `n` cameras, for
    /// `n = 1..=camera_count`.
    pub fn camera_histogram(&self, split: Split) -> Vec<usize> {
        let mut hist = alloc::vec![0usize; self.cameras];
        for pid in self.identities(split) {
            let n = self.cameras_of(split, pid).len();
            if n >= 1 && n <= hist.len() {
                hist[n - 1] += 1;
            }
        }
        hist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn rec(
        id: &str,
        pid: PersonId,
        camera: CameraId,
        split: Split,
        feature: Vec<f64>,
    ) -> FeatureRecord {
        FeatureRecord {
            id: id.to_string(),
            pid,
            camera,
            split,
            feature,
            image: None,
        }
    }

    #[test]
    fn empty_dataset_is_valid() {
        let ds = Dataset::new(vec![], None).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), 0);
    }

    #[test]
    fn rejects_inconsistent_dimension_duplicates_and_cameras() {
        let a = rec("a", 1, 1, Split::Train, vec![0.0, 1.0]);
        let b = rec("b", 1, 2, Split::Train, vec![0.0]);
        assert!(Dataset::new(vec![a.clone(), b], None).is_err());
        assert!(Dataset::new(vec![a.clone(), a.clone()], None).is_err());
        let c = rec("c", 1, 3, Split::Train, vec![0.0, 1.0]);
        assert!(Dataset::new(vec![a.clone(), c.clone()], Some(2)).is_err());
        assert_eq!(Dataset::new(vec![a, c], None).unwrap().camera_count(), 3);
    }

    #[test]
    fn indexes_by_split_identity_and_camera() {
        let ds = Dataset::new(
            vec![
                rec("q-b", 7, 2, Split::Query, vec![1.0]),
                rec("q-a", 7, 2, Split::Query, vec![2.0]),
                rec("g-1", 7, 1, Split::Gallery, vec![3.0]),
                rec("q-c", 9, 3, Split::Query, vec![4.0]),
            ],
            Some(3),
        )
        .unwrap();
        assert_eq!(ds.identities(Split::Query), vec![7, 9]);
        assert_eq!(ds.cameras_of(Split::Query, 7), vec![2]);
        let idx = ds.records_of(Split::Query, 7, 2);
        assert_eq!(ds.record(idx[0]).id, "q-a");
        assert_eq!(ds.find("g-1"), Some(2));
        assert_eq!(ds.camera_histogram(Split::Query), vec![2, 0, 0]);
    }
}
