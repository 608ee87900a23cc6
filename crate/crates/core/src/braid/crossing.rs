//! Crossing detection on the xt projection of two trajectories expressed in a
//! common frame.

use crate::error::{Error, Result};
use crate::geometry::ReferenceFrame;
use crate::scene::Trajectory;

/// |d_x| below this snaps to zero.
pub const EPS_X: f64 = 1e-9;
/// |d_y| at the crossing below this cannot be classified as over/below.
pub const EPS_Y: f64 = 1e-6;

/// The first crossing of strand `i` through strand `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    /// Interpolated crossing time in timestep units.
    pub t_star: f64,
    /// `y_i − y_j` at `t_star`, in the target frame.
    pub dy_at_cross: f64,
}

/// A sign change of `d_x`, with both the interpolated `d_y` and the `d_y` of
/// the nearest sample (used as a tie-break for near-collisions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCrossing {
    pub t_star: f64,
    pub dy_at_cross: f64,
    pub dy_nearest_sample: f64,
}

impl RawCrossing {
    pub fn is_ambiguous(&self) -> bool {
        self.dy_at_cross.abs() < EPS_Y
    }
}

/// `(t, x_i − x_j, y_i − y_j)` in `frame` over the valid future timesteps
/// shared by both trajectories.
pub fn relative_samples(traj_i: &Trajectory, traj_j: &Trajectory, frame: &ReferenceFrame) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    let mut fi = traj_i.future().peekable();
    let mut fj = traj_j.future().peekable();
    while let (Some(a), Some(b)) = (fi.peek(), fj.peek()) {
        match a.t.cmp(&b.t) {
            std::cmp::Ordering::Less => {
                fi.next();
            }
            std::cmp::Ordering::Greater => {
                fj.next();
            }
            std::cmp::Ordering::Equal => {
                let d = frame.to_local(a.position) - frame.to_local(b.position);
                out.push([a.t as f64, d.x, d.y]);
                fi.next();
                fj.next();
            }
        }
    }
    out
}

fn snapped_sign(dx: f64) -> i8 {
    if dx.abs() < EPS_X {
        0
    } else if dx > 0.0 {
        1
    } else {
        -1
    }
}

/// Every sign change of `d_x` in time order.
///
/// Consecutive nonzero samples of opposite sign cross at the root of the
/// linear interpolant. When snapped-zero samples separate them, the crossing
/// is placed at the first zero sample. Zero runs flanked by the same sign, or
/// open at either end, are touches and do not count.
pub fn crossings_from_samples(samples: &[[f64; 3]]) -> Vec<RawCrossing> {
    let mut out = Vec::new();
    let mut last_nonzero: Option<usize> = None;
    for (k, s) in samples.iter().enumerate() {
        let sign = snapped_sign(s[1]);
        if sign == 0 {
            continue;
        }
        if let Some(p) = last_nonzero {
            if snapped_sign(samples[p][1]) != sign {
                out.push(crossing_between(samples, p, k));
            }
        }
        last_nonzero = Some(k);
    }
    out
}

fn crossing_between(samples: &[[f64; 3]], p: usize, k: usize) -> RawCrossing {
    let [tp, dxp, dyp] = samples[p];
    let [tk, dxk, dyk] = samples[k];
    if k == p + 1 {
        let u = dxp / (dxp - dxk);
        let t_star = tp + (tk - tp) * u;
        let dy_at_cross = dyp + (dyk - dyp) * u;
        // ties go to the earlier sample
        let dy_nearest_sample = if u <= 0.5 { dyp } else { dyk };
        RawCrossing {
            t_star,
            dy_at_cross,
            dy_nearest_sample,
        }
    } else {
        let [tz, _, dyz] = samples[p + 1];
        RawCrossing {
            t_star: tz,
            dy_at_cross: dyz,
            dy_nearest_sample: dyz,
        }
    }
}

/// All crossings of `traj_i` through `traj_j` in `frame`.
pub fn find_crossings(traj_i: &Trajectory, traj_j: &Trajectory, frame: &ReferenceFrame) -> Result<Vec<RawCrossing>> {
    let samples = relative_samples(traj_i, traj_j, frame);
    if samples.len() < 2 {
        return Err(Error::InsufficientOverlap { found: samples.len() });
    }
    Ok(crossings_from_samples(&samples))
}

/// Earliest crossing of `traj_i` through `traj_j` when both are projected on
/// the xt plane of `frame`, or `None` when `x_i − x_j` keeps its sign.
pub fn detect_crossing(traj_i: &Trajectory, traj_j: &Trajectory, frame: &ReferenceFrame) -> Result<Option<CrossingEvent>> {
    let first = find_crossings(traj_i, traj_j, frame)?.into_iter().next();
    match first {
        None => Ok(None),
        Some(c) if c.is_ambiguous() => Err(Error::AmbiguousCrossing {
            t_star: c.t_star,
            dy: c.dy_at_cross,
        }),
        Some(c) => Ok(Some(CrossingEvent {
            t_star: c.t_star,
            dy_at_cross: c.dy_at_cross,
        })),
    }
}
