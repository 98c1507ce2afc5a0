//! Per-panel CSV exports of a run log: odometry, mode timelines, hand
//! positions and contact forces.

use std::path::{Path, PathBuf};

use crate::config::fmt_f64;
use crate::error::Result;
use crate::log::RunLog;

/// File name and exact column header of every exported panel.
pub const PLOT_FILES: [(&str, &[&str]); 4] = [
    (
        "odometry.csv",
        &["t", "base_x", "base_y", "phi", "x", "xdot", "theta", "sp_xdot_des", "box_x", "box_y", "box_yaw"],
    ),
    ("modes.csv", &["t", "mode_s", "mode_y", "mode_a", "alpha", "contact", "fault"]),
    ("hands.csv", &["t", "hand_r_x", "hand_r_y", "hand_l_x", "hand_l_y"]),
    (
        "contact.csv",
        &[
            "t",
            "f_hand_r_x",
            "f_hand_r_y",
            "f_hand_r_z",
            "f_hand_l_x",
            "f_hand_l_y",
            "f_hand_l_z",
            "f_ext_x",
            "m_ext_z",
            "m_ext_est",
            "wall_normal",
            "lift",
            "f_xh",
            "m_zh_fb",
        ],
    ),
];

/// Write every panel into `dir`, returning the paths written.
pub fn export_plot_data(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (file, columns) in PLOT_FILES {
        let idx = columns.iter().map(|c| log.col(c)).collect::<Result<Vec<_>>>()?;
        let path = dir.join(file);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(columns)?;
        for row in &log.rows {
            w.write_record(idx.iter().map(|&k| fmt_f64(row[k])))?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
