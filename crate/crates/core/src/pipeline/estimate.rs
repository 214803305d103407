//! Final pose estimates and their on-disk format.

use crate::error::{Error, Result};
use crate::geom::{CameraPose, UnitQuaternion};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Which stage produced the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Silhouette,
    Semantics,
}

/// Per-image pipeline output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub image_id: String,
    pub template_id: usize,
    /// Quaternion components in (w, x, y, z) order.
    pub q: [f64; 4],
    pub s: f64,
    pub t: [f64; 2],
    pub z0: f64,
    pub iou: f64,
    pub miou: f64,
    pub v_agr: f64,
    pub accepted: bool,
    pub phase: Phase,
}

impl PoseEstimate {
    pub fn pose(&self) -> CameraPose {
        CameraPose::new(UnitQuaternion::from_array(self.q), self.s, self.t, self.z0)
    }

    pub fn quat(&self) -> UnitQuaternion {
        UnitQuaternion::from_array(self.q)
    }
}

/// Formats a real with 9 significant digits.
fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        "null".to_string()
    }
}

/// Writes one JSON record per line with a fixed field order and reals at
/// 9 significant digits, so reruns are byte-identical.
pub fn write_poses(estimates: &[PoseEstimate], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in estimates {
        writeln!(
            out,
            concat!(
                "{{\"image_id\":{},\"template_id\":{},",
                "\"q\":[{},{},{},{}],\"s\":{},\"t\":[{},{}],\"z0\":{},",
                "\"iou\":{},\"miou\":{},\"v_agr\":{},\"accepted\":{},\"phase\":{}}}"
            ),
            serde_json::to_string(&e.image_id)?,
            e.template_id,
            fmt_real(e.q[0]),
            fmt_real(e.q[1]),
            fmt_real(e.q[2]),
            fmt_real(e.q[3]),
            fmt_real(e.s),
            fmt_real(e.t[0]),
            fmt_real(e.t[1]),
            fmt_real(e.z0),
            fmt_real(e.iou),
            fmt_real(e.miou),
            fmt_real(e.v_agr),
            e.accepted,
            serde_json::to_string(&e.phase)?,
        )?;
    }
    Ok(())
}

/// Reads a pose file written by [`write_poses`].
pub fn load_poses(path: &Path) -> Result<Vec<PoseEstimate>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: PoseEstimate = serde_json::from_str(&line).map_err(|err| {
            Error::MalformedManifest(format!("{}:{}: {err}", path.display(), lineno + 1))
        })?;
        out.push(e);
    }
    Ok(out)
}
