use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{CameraId, Dataset, PersonId, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Vsp,
    Fsp,
}

impl core::fmt::Display for Protocol {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Protocol::Vsp => "vsp",
            Protocol::Fsp => "fsp",
        })
    }
}

impl core::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vsp" => Ok(Protocol::Vsp),
            "fsp" => Ok(Protocol::Fsp),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

/// One gallery/query camera bipartition and its eligible identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub id: usize,
    pub protocol: Protocol,
    pub gallery_cameras: Vec<CameraId>,
    /// Query cameras in fusion order.
    pub query_cameras: Vec<CameraId>,
    pub identities: Vec<PersonId>,
}

impl ProtocolPlan {
    pub fn size(&self) -> usize {
        self.query_cameras.len()
    }
}

fn cameras_in(mask: u32, all: &[CameraId]) -> Vec<CameraId> {
    all.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &c)| c)
        .collect()
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Plan(format!("need at least 2 cameras, got {n}")));
    }
    if n > 16 {
        return Err(Error::Plan(format!("{n} cameras is too many to enumerate")));
    }
    Ok(())
}

/// Every nonempty proper gallery subset of cameras `1..=n`, query = complement.
/// `2ⁿ − 2` plans.
pub fn vsp_plans(cameras: usize, dataset: &Dataset) -> Result<Vec<ProtocolPlan>> {
    check_count(cameras)?;
    let all: Vec<CameraId> = (1..=cameras as CameraId).collect();
    let full = (1u32 << cameras) - 1;
    let ids = dataset.identities(Split::Query);
    let mut plans = Vec::with_capacity(full as usize - 1);
    for mask in 1..full {
        let gallery_cameras = cameras_in(mask, &all);
        let query_cameras = cameras_in(full & !mask, &all);
        let identities = ids
            .iter()
            .copied()
            .filter(|&pid| {
                query_cameras
                    .iter()
                    .any(|&c| !dataset.records_of(Split::Query, pid, c).is_empty())
                    && gallery_cameras
                        .iter()
                        .any(|&c| !dataset.records_of(Split::Gallery, pid, c).is_empty())
            })
            .collect();
        plans.push(ProtocolPlan {
            id: plans.len(),
            protocol: Protocol::Vsp,
            gallery_cameras,
            query_cameras,
            identities,
        });
    }
    Ok(plans)
}

/// Every nonempty subset of the complement of `gallery`, sharing one identity
/// list: identities present in all gallery cameras and all complement cameras.
/// `2^|Q_C| − 1` plans.
pub fn fsp_plans(gallery: &[CameraId], dataset: &Dataset) -> Result<Vec<ProtocolPlan>> {
    let n = dataset.camera_count();
    check_count(n)?;
    let all: Vec<CameraId> = (1..=n as CameraId).collect();
    let mut gallery_cameras: Vec<CameraId> = gallery.to_vec();
    gallery_cameras.sort_unstable();
    gallery_cameras.dedup();
    if gallery_cameras.is_empty() || gallery_cameras.len() >= n {
        return Err(Error::Plan(format!(
            "gallery {gallery:?} is not a nonempty proper subset of {n} cameras"
        )));
    }
    if let Some(c) = gallery_cameras.iter().find(|&&c| c == 0 || c as usize > n) {
        return Err(Error::Plan(format!("gallery camera {c} outside 1..={n}")));
    }
    let full_query: Vec<CameraId> = all
        .iter()
        .copied()
        .filter(|c| !gallery_cameras.contains(c))
        .collect();
    let identities: Vec<PersonId> = dataset
        .identities(Split::Query)
        .into_iter()
        .filter(|&pid| {
            full_query
                .iter()
                .all(|&c| !dataset.records_of(Split::Query, pid, c).is_empty())
                && gallery_cameras
                    .iter()
                    .all(|&c| !dataset.records_of(Split::Gallery, pid, c).is_empty())
        })
        .collect();
    if identities.is_empty() {
        log::warn!("no identity is present in every camera for gallery {gallery_cameras:?}");
        return Ok(Vec::new());
    }
    let subsets = (1u32 << full_query.len()) - 1;
    Ok((1..=subsets)
        .map(|mask| ProtocolPlan {
            id: mask as usize - 1,
            protocol: Protocol::Fsp,
            gallery_cameras: gallery_cameras.clone(),
            query_cameras: cameras_in(mask, &full_query),
            identities: identities.clone(),
        })
        .collect())
}
