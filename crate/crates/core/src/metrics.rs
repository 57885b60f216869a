//! Tracking and interaction metrics, and the comparison table.

use std::fmt::Write as _;

use armctl_kinematics::nalgebra::Vector3;
use thiserror::Error;

use crate::interaction::InteractionEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("desired series has zero range")]
    ZeroRange,
    #[error("empty series")]
    Empty,
    #[error("series lengths differ: {0} and {1}")]
    Length(usize, usize),
    #[error("no samples in window [{0}, {1})")]
    EmptyWindow(f64, f64),
}

/// Normalised maximum absolute error in percent, normalised by the range
/// of the desired series.
pub fn nmae(desired: &[f64], measured: &[f64]) -> Result<f64, MetricsError> {
    let (lo, hi) = desired
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    nmae_with_range(desired, measured, hi - lo)
}

/// As [`nmae`] with an explicit normalising range.
pub fn nmae_with_range(desired: &[f64], measured: &[f64], range: f64) -> Result<f64, MetricsError> {
    if desired.len() != measured.len() {
        return Err(MetricsError::Length(desired.len(), measured.len()));
    }
    if desired.is_empty() {
        return Err(MetricsError::Empty);
    }
    if range.is_nan() || range <= 0.0 {
        return Err(MetricsError::ZeroRange);
    }
    let max = desired
        .iter()
        .zip(measured)
        .fold(0.0f64, |m, (d, x)| m.max((d - x).abs()));
    Ok(100.0 * max / range)
}

/// Closest point on the target circle, with the height set to the target.
pub fn project_to_circle(center: &Vector3<f64>, radius: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let d = (p - center).xy();
    let planar = if d.norm() > 0.0 {
        d * (radius / d.norm())
    } else {
        d.map(|_| 0.0) + armctl_kinematics::nalgebra::Vector2::new(radius, 0.0)
    };
    Vector3::new(center.x + planar.x, center.y + planar.y, center.z)
}

/// Per-axis path-tracking NMAE over samples with `t` in `[t0, t1)`.
///
/// The desired point is the projection of the measured point onto the
/// circle. x and y are normalised by the desired range; the desired height
/// is constant, so z is normalised by the circle diameter.
pub fn tracking_nmae(
    t: &[f64],
    p: &[Vector3<f64>],
    center: &Vector3<f64>,
    radius: f64,
    window: (f64, f64),
) -> Result<[f64; 3], MetricsError> {
    if t.len() != p.len() {
        return Err(MetricsError::Length(t.len(), p.len()));
    }
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= window.0 && t[i] < window.1).collect();
    if idx.is_empty() {
        return Err(MetricsError::EmptyWindow(window.0, window.1));
    }
    let desired: Vec<Vector3<f64>> = idx.iter().map(|&i| project_to_circle(center, radius, &p[i])).collect();
    let axis = |k: usize| -> (Vec<f64>, Vec<f64>) {
        (desired.iter().map(|d| d[k]).collect(), idx.iter().map(|&i| p[i][k]).collect())
    };
    let (dx, mx) = axis(0);
    let (dy, my) = axis(1);
    let (dz, mz) = axis(2);
    Ok([nmae(&dx, &mx)?, nmae(&dy, &my)?, nmae_with_range(&dz, &mz, 2.0 * radius)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionStats {
    /// Peak contact force per event, N.
    pub max_force: Vec<f64>,
    /// Mean over events and the chosen joints of the peak `|q − q(t_start)|`
    /// inside each event window, degrees.
    pub joint_deviation_deg: f64,
}

/// `force[i]` is the contact force magnitude at `t[i]`; `q[i]` the joint
/// positions. `joints` are 0-based indices.
pub fn interaction_stats(
    t: &[f64],
    force: &[f64],
    q: &[Vec<f64>],
    events: &[InteractionEvent],
    joints: &[usize],
) -> Result<InteractionStats, MetricsError> {
    if t.len() != force.len() {
        return Err(MetricsError::Length(t.len(), force.len()));
    }
    if t.len() != q.len() {
        return Err(MetricsError::Length(t.len(), q.len()));
    }
    let mut max_force = Vec::with_capacity(events.len());
    let mut deviation = 0.0;
    let mut count = 0usize;
    for e in events {
        let idx: Vec<usize> = (0..t.len()).filter(|&i| e.is_active(t[i])).collect();
        let Some(&first) = idx.first() else {
            return Err(MetricsError::EmptyWindow(e.t_start, e.t_end()));
        };
        max_force.push(idx.iter().fold(0.0f64, |m, &i| m.max(force[i])));
        for &j in joints {
            let peak = idx.iter().fold(0.0f64, |m, &i| m.max((q[i][j] - q[first][j]).abs()));
            deviation += peak.to_degrees();
            count += 1;
        }
    }
    Ok(InteractionStats {
        max_force,
        joint_deviation_deg: if count == 0 { 0.0 } else { deviation / count as f64 },
    })
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub variant: String,
    pub nmae_pre: [f64; 3],
    /// `None` when the run has no interaction.
    pub nmae_post: Option<[f64; 3]>,
    pub max_force: Vec<f64>,
    pub joint_deviation_deg: f64,
    /// Largest orientation error norm before the first event, degrees.
    pub orientation_error_max_deg: f64,
    /// Largest height error before the first event, m.
    pub z_deviation_max: f64,
}

impl RunMetrics {
    /// Element-wise mean of repeated runs of one variant.
    pub fn mean(runs: &[RunMetrics]) -> Option<RunMetrics> {
        let first = runs.first()?;
        let n = runs.len() as f64;
        let avg3 = |f: &dyn Fn(&RunMetrics) -> [f64; 3]| {
            let mut acc = [0.0; 3];
            for r in runs {
                for (a, v) in acc.iter_mut().zip(f(r)) {
                    *a += v / n;
                }
            }
            acc
        };
        let forces = (0..first.max_force.len())
            .map(|k| runs.iter().map(|r| r.max_force.get(k).copied().unwrap_or(f64::NAN)).sum::<f64>() / n)
            .collect();
        Some(RunMetrics {
            variant: first.variant.clone(),
            nmae_pre: avg3(&|r| r.nmae_pre),
            nmae_post: first
                .nmae_post
                .map(|_| avg3(&|r| r.nmae_post.unwrap_or([f64::NAN; 3]))),
            max_force: forces,
            joint_deviation_deg: runs.iter().map(|r| r.joint_deviation_deg).sum::<f64>() / n,
            orientation_error_max_deg: runs.iter().map(|r| r.orientation_error_max_deg).sum::<f64>() / n,
            z_deviation_max: runs.iter().map(|r| r.z_deviation_max).sum::<f64>() / n,
        })
    }
}

pub const TABLE_COLUMNS: [&str; 10] = [
    "variant",
    "nmae_x_pre",
    "nmae_y_pre",
    "nmae_z_pre",
    "nmae_x_post",
    "nmae_y_post",
    "nmae_z_post",
    "max_force_1",
    "max_force_2",
    "joint_dev_deg",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    /// One row per variant, columns as [`TABLE_COLUMNS`].
    pub csv: String,
    /// One row per metric, one column per variant.
    pub text: String,
}

fn cells(r: &RunMetrics) -> Vec<String> {
    let num = |v: Option<f64>| match v {
        Some(v) if v.is_finite() => format!("{v:.3}"),
        _ => String::new(),
    };
    let post = r.nmae_post;
    vec![
        r.variant.clone(),
        num(Some(r.nmae_pre[0])),
        num(Some(r.nmae_pre[1])),
        num(Some(r.nmae_pre[2])),
        num(post.map(|p| p[0])),
        num(post.map(|p| p[1])),
        num(post.map(|p| p[2])),
        num(r.max_force.first().copied()),
        num(r.max_force.get(1).copied()),
        num((!r.max_force.is_empty()).then_some(r.joint_deviation_deg)),
    ]
}

pub fn comparison_table(runs: &[RunMetrics]) -> ComparisonTable {
    let rows: Vec<Vec<String>> = runs.iter().map(cells).collect();
    let mut csv = TABLE_COLUMNS.join(",");
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let label_width = TABLE_COLUMNS.iter().map(|c| c.len()).max().unwrap_or(0);
    let widths: Vec<usize> = rows
        .iter()
        .map(|row| row.iter().map(|c| c.len()).max().unwrap_or(0).max(1))
        .collect();
    let mut text = String::new();
    for (k, label) in TABLE_COLUMNS.iter().enumerate() {
        let _ = write!(text, "{label:<label_width$}");
        for (row, w) in rows.iter().zip(&widths) {
            let cell = if row[k].is_empty() { "-" } else { row[k].as_str() };
            let _ = write!(text, "  {cell:>w$}");
        }
        text.push('\n');
    }
    ComparisonTable { csv, text }
}
