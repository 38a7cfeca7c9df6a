//! On-disk formats: versioned JSON for datasets and maps, CSV for trajectories and logs.
//!
//! A dataset directory holds `world.json`, `odometry.json`, `detections.json`,
//! `semantic.json` and `ground_truth.csv`. Every JSON file is an object with a
//! `version` field and one payload field named after the file.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gcslam::OptimizationLogEntry;
use crate::map::MapDocument;
use crate::sfloc::IcpDiagnostic;
use crate::simworld::{DetectionFrame, OdometrySample, SemanticFrame, WorldModel};
use crate::Pose2d;

pub const DATASET_VERSION: u32 = 1;

/// One simulated traversal of a lot, with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub world: WorldModel,
    pub ground_truth: Vec<(u64, Pose2d)>,
    pub odometry: Vec<OdometrySample>,
    pub detections: Vec<DetectionFrame>,
    pub semantic: Vec<SemanticFrame>,
}

impl Dataset {
    pub fn start_pose(&self) -> Result<Pose2d> {
        self.ground_truth.first().map(|(_, p)| *p).ok_or(Error::Empty("ground truth"))
    }

    pub fn odometry_trajectory(&self) -> Vec<(u64, Pose2d)> {
        self.odometry.iter().map(|o| (o.frame, o.pose)).collect()
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_versioned<T: Serialize>(path: &Path, key: &str, version: u32, payload: &T) -> Result<()> {
    let payload = serde_json::to_value(payload).map_err(|e| Error::parse(path, e))?;
    let mut doc = serde_json::Map::new();
    doc.insert("version".into(), Value::from(version));
    doc.insert(key.into(), payload);
    let text = serde_json::to_string(&Value::Object(doc)).map_err(|e| Error::parse(path, e))?;
    write_text(path, &text)
}

fn read_versioned<T: DeserializeOwned>(path: &Path, key: &str, what: &'static str, expected: u32) -> Result<T> {
    let text = read_text(path)?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    let found = doc
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::parse(path, "missing version field"))?;
    if found != expected as u64 {
        return Err(Error::Version { what, found: found as u32, expected });
    }
    let payload = doc
        .get_mut(key)
        .map(Value::take)
        .ok_or_else(|| Error::parse(path, format!("missing {key} field")))?;
    serde_json::from_value(payload).map_err(|e| Error::parse(path, e))
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    create_dir(dir)?;
    write_versioned(&dir.join("world.json"), "world", DATASET_VERSION, &ds.world)?;
    write_versioned(&dir.join("odometry.json"), "odometry", DATASET_VERSION, &ds.odometry)?;
    write_versioned(&dir.join("detections.json"), "detections", DATASET_VERSION, &ds.detections)?;
    write_versioned(&dir.join("semantic.json"), "semantic", DATASET_VERSION, &ds.semantic)?;
    write_trajectory(&dir.join("ground_truth.csv"), &ds.ground_truth)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let ds = Dataset {
        world: read_world(dir)?,
        odometry: read_versioned(&dir.join("odometry.json"), "odometry", "dataset", DATASET_VERSION)?,
        detections: read_versioned(&dir.join("detections.json"), "detections", "dataset", DATASET_VERSION)?,
        semantic: read_versioned(&dir.join("semantic.json"), "semantic", "dataset", DATASET_VERSION)?,
        ground_truth: read_trajectory(&dir.join("ground_truth.csv"))?,
    };
    if ds.odometry.len() != ds.detections.len() || ds.odometry.len() != ds.ground_truth.len() {
        return Err(Error::parse(dir, "odometry, detections and ground truth differ in length"));
    }
    Ok(ds)
}

/// Only the lot description of a dataset.
pub fn read_world(dir: &Path) -> Result<WorldModel> {
    read_versioned(&dir.join("world.json"), "world", "dataset", DATASET_VERSION)
}

pub fn write_map(path: &Path, map: &MapDocument) -> Result<()> {
    let text = serde_json::to_string(map).map_err(|e| Error::parse(path, e))?;
    write_text(path, &text)
}

pub fn read_map(path: &Path) -> Result<MapDocument> {
    let map: MapDocument = serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e))?;
    map.check_version()?;
    if !map.semantic_cloud.is_finite() || map.slots.iter().any(|s| !(s.x.is_finite() && s.y.is_finite())) {
        return Err(Error::parse(path, "non-finite coordinates"));
    }
    Ok(map)
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    frame: u64,
    x: f64,
    y: f64,
    theta: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::parse(path, e))).collect()
}

/// `frame,x,y,theta` with a header row.
pub fn write_trajectory(path: &Path, traj: &[(u64, Pose2d)]) -> Result<()> {
    write_rows(
        path,
        traj.iter().map(|(frame, p)| TrajectoryRow { frame: *frame, x: p.x, y: p.y, theta: p.theta }),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(u64, Pose2d)>> {
    let rows: Vec<TrajectoryRow> = read_rows(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let pose = Pose2d::new(r.x, r.y, r.theta);
        if !pose.is_finite() {
            return Err(Error::parse(path, format!("non-finite pose at frame {}", r.frame)));
        }
        if out.last().is_some_and(|(f, _)| *f >= r.frame) {
            return Err(Error::parse(path, format!("frame {} out of order", r.frame)));
        }
        out.push((r.frame, pose));
    }
    Ok(out)
}

pub fn write_icp_diagnostics(path: &Path, diags: &[IcpDiagnostic]) -> Result<()> {
    write_rows(path, diags)
}

pub fn read_icp_diagnostics(path: &Path) -> Result<Vec<IcpDiagnostic>> {
    read_rows(path)
}

pub fn write_optimization_log(path: &Path, log: &[OptimizationLogEntry]) -> Result<()> {
    write_rows(path, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = vec![(0, Pose2d::new(0.1, -2.0 / 3.0, 1e-17)), (5, Pose2d::new(1e6, 3.0, -3.0))];
        write_trajectory(&path, &traj).unwrap();
        assert_eq!(read_trajectory(&path).unwrap(), traj);
        assert!(read_text(&path).unwrap().starts_with("frame,x,y,theta\n"));
    }

    #[test]
    fn malformed_trajectory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_text(&path, "frame,x,y,theta\n0,1,2\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Parse { .. })));
        write_text(&path, "frame,x,y,theta\n3,0,0,0\n1,0,0,0\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Parse { .. })));
        assert!(matches!(read_trajectory(&dir.path().join("missing.csv")), Err(Error::Parse { .. } | Error::Io { .. })));
    }

    #[test]
    fn map_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut map = MapDocument::empty(5.3);
        write_map(&path, &map).unwrap();
        assert_eq!(read_map(&path).unwrap(), map);
        map.version = 99;
        write_map(&path, &map).unwrap();
        assert!(matches!(read_map(&path), Err(Error::Version { found: 99, .. })));
    }

    #[test]
    fn versioned_payload_requires_matching_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.json");
        write_text(&path, r#"{"version":2,"odometry":[]}"#).unwrap();
        let got: Result<Vec<OdometrySample>> = read_versioned(&path, "odometry", "dataset", DATASET_VERSION);
        assert!(matches!(got, Err(Error::Version { found: 2, expected: 1, .. })));
        write_text(&path, r#"{"odometry":[]}"#).unwrap();
        let got: Result<Vec<OdometrySample>> = read_versioned(&path, "odometry", "dataset", DATASET_VERSION);
        assert!(matches!(got, Err(Error::Parse { .. })));
    }
}
