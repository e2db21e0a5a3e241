use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use thermaltap::features::{frame_features, GridSpec, SessionFeatures};
use thermaltap::frame_store::{list_sessions, load_session, SessionDir, SessionRecording, DEFAULT_TOLERANCE_MS};
use thermaltap::roi::{frame_mask, segment_classical, SegmentConfig};

pub fn session_dirs(dataset: &Path) -> Result<Vec<SessionDir>> {
    if !dataset.is_dir() {
        bail!("dataset {} does not exist or is not a directory", dataset.display());
    }
    let dirs = list_sessions(dataset).with_context(|| format!("listing {}", dataset.display()))?;
    if dirs.is_empty() {
        bail!("dataset {} holds no sessions", dataset.display());
    }
    Ok(dirs)
}

pub fn load(dir: &SessionDir) -> Result<SessionRecording> {
    load_session(dir, DEFAULT_TOLERANCE_MS).with_context(|| format!("loading {}", dir.root.display()))
}

/// Frame features of one recording for every grid, segmenting each frame once.
pub fn features_of(rec: &SessionRecording, grids: &[GridSpec], seg: &SegmentConfig, ignore_masks: bool) -> Vec<SessionFeatures> {
    let mut out: Vec<SessionFeatures> = grids.iter().map(|g| SessionFeatures::new(rec.manifest.clone(), g.n)).collect();
    for (i, frame) in rec.frames.iter().enumerate() {
        let mask = if ignore_masks {
            rec.env[i].map(|e| segment_classical(frame, e.ambient_c, seg))
        } else {
            frame_mask(rec, i, seg)
        };
        for (g, sf) in grids.iter().zip(out.iter_mut()) {
            let f = mask.as_ref().and_then(|m| frame_features(frame, m, g));
            sf.push(frame.timestamp_ms(), f, rec.env[i]);
        }
    }
    out
}

/// Load every session and extract features; result is indexed `[grid][session]`.
/// Sessions are processed in parallel and returned in directory order.
pub fn load_features(dataset: &Path, grids: &[usize], seg: &SegmentConfig, ignore_masks: bool) -> Result<Vec<Vec<SessionFeatures>>> {
    let specs = grids
        .iter()
        .map(|&n| GridSpec::new(n).map_err(|e| crate::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let dirs = session_dirs(dataset)?;
    let per_session: Vec<Vec<SessionFeatures>> = dirs
        .par_iter()
        .map(|d| {
            let rec = load(d)?;
            log::info!("extracted {}", rec.manifest.session_id);
            Ok(features_of(&rec, &specs, seg, ignore_masks))
        })
        .collect::<Result<_>>()?;
    let mut by_grid: Vec<Vec<SessionFeatures>> = (0..grids.len()).map(|_| Vec::with_capacity(dirs.len())).collect();
    for mut s in per_session {
        for g in (0..grids.len()).rev() {
            by_grid[g].push(s.pop().expect("one entry per grid"));
        }
    }
    Ok(by_grid)
}
