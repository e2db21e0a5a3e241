use std::fs;
use std::path::{Path, PathBuf};

use super::{
    align_session, load_frame, load_sensor_log, timestamp_from_name, write_sensor_log, FrameError,
    RadiometricFrame, SensorSample, SessionManifest, SessionRecording,
};
use crate::roi::Mask;

/// Paths of one session directory.
#[derive(Debug, Clone)]
pub struct SessionDir {
    pub root: PathBuf,
}

impl SessionDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn frames(&self) -> PathBuf {
        self.root.join("frames")
    }

    pub fn sensors(&self) -> PathBuf {
        self.root.join("sensors.csv")
    }

    pub fn masks(&self) -> PathBuf {
        self.root.join("masks")
    }

    pub fn frame_path(&self, timestamp_ms: i64) -> PathBuf {
        self.frames().join(format!("frame_{timestamp_ms}.csv"))
    }

    pub fn mask_path(&self, timestamp_ms: i64) -> PathBuf {
        self.masks().join(format!("mask_{timestamp_ms}.csv"))
    }
}

/// Session directories under `dataset` (those holding a `manifest.json`), sorted by name.
pub fn list_sessions(dataset: &Path) -> Result<Vec<SessionDir>, FrameError> {
    let entries = fs::read_dir(dataset).map_err(|e| FrameError::io(dataset, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| FrameError::io(dataset, e))?;
        let path = entry.path();
        if path.join("manifest.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs.into_iter().map(SessionDir::new).collect())
}

fn stamped_files(dir: &Path, prefix: &str) -> Result<Vec<(i64, PathBuf)>, FrameError> {
    let entries = fs::read_dir(dir).map_err(|e| FrameError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| FrameError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some(ts) = timestamp_from_name(&path, prefix) {
                files.push((ts, path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Load and align one session directory, attaching any ingested masks.
pub fn load_session(dir: &SessionDir, tolerance_ms: i64) -> Result<SessionRecording, FrameError> {
    let manifest = SessionManifest::load(&dir.manifest())?;
    let frames = stamped_files(&dir.frames(), "frame")?
        .into_iter()
        .map(|(_, p)| load_frame(&p))
        .collect::<Result<Vec<_>, _>>()?;
    let log = load_sensor_log(&dir.sensors())?;
    let rec = align_session(frames, &log, manifest, tolerance_ms)?;
    let mask_dir = dir.masks();
    if !mask_dir.is_dir() {
        return Ok(rec);
    }
    let masks = stamped_files(&mask_dir, "mask")?
        .into_iter()
        .map(|(ts, p)| Mask::load_csv(&p).map(|m| (ts, m)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rec.with_masks(masks))
}

/// Write a session directory from parts. Masks are written only where present.
pub fn write_session(
    dir: &SessionDir,
    manifest: &SessionManifest,
    frames: &[RadiometricFrame],
    sensors: &[SensorSample],
    masks: &[(i64, Mask)],
) -> Result<(), FrameError> {
    fs::create_dir_all(dir.frames()).map_err(|e| FrameError::io(&dir.frames(), e))?;
    manifest.save(&dir.manifest())?;
    for f in frames {
        f.write_csv(&dir.frame_path(f.timestamp_ms()))?;
    }
    write_sensor_log(&dir.sensors(), sensors)?;
    if !masks.is_empty() {
        fs::create_dir_all(dir.masks()).map_err(|e| FrameError::io(&dir.masks(), e))?;
        for (ts, m) in masks {
            m.write_csv(&dir.mask_path(*ts))?;
        }
    }
    Ok(())
}
