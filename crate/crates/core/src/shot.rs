//! Shot boundary detection from color-moment frame signatures.
//!
//! Each frame is summarized by the first `H` statistical moments of its
//! Y, I, Q planes, weighted per component. Consecutive-frame distances
//! over those vectors spike at abrupt cuts; a global threshold (fixed or
//! mean + k*sigma of the series) turns spikes into boundaries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gray::GrayImage;
use crate::media::Frame;
use crate::stats::mean_and_pop_std;

/// Weighted color-moment signature of one frame, component-major:
/// `[a1*M1^1..a1*M1^H, a2*M2^1.., a3*M3^1..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFeature {
    pub values: Vec<f64>,
    pub frame_index: usize,
}

/// A detected cut between frames `cut_after - 1` and `cut_after`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotBoundary {
    pub cut_after: usize,
    pub distance: f64,
}

/// Maximal run of frames between cuts, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Shot {
    pub start: usize,
    pub end: usize,
}

impl Shot {
    /// Number of frames in the shot (always at least one).
    pub fn frame_count(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Cut threshold: a fixed value or mean + k*sigma of the distance series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutThreshold {
    Fixed(f64),
    Auto { k: f64 },
}

impl Default for CutThreshold {
    fn default() -> Self {
        CutThreshold::Auto { k: 3.0 }
    }
}

/// Mean intensity of a plane.
pub fn first_moment(plane: &GrayImage) -> Result<f64> {
    if plane.is_empty() {
        return Err(Error::domain("first_moment of an empty plane"));
    }
    Ok(plane.data().iter().sum::<f64>() / plane.len() as f64)
}

/// h-th central moment root: `((1/N) sum (p - mean)^h)^(1/h)`.
///
/// For odd `h` a negative radicand takes the signed real root.
pub fn higher_moment(plane: &GrayImage, h: u32) -> Result<f64> {
    if h < 2 {
        return Err(Error::domain(format!("higher_moment requires h >= 2, got {h}")));
    }
    if plane.is_empty() {
        return Err(Error::domain("higher_moment of an empty plane"));
    }
    let mean = first_moment(plane)?;
    let radicand = plane
        .data()
        .iter()
        .map(|&p| (p - mean).powi(h as i32))
        .sum::<f64>()
        / plane.len() as f64;
    Ok(signed_root(radicand, h))
}

fn signed_root(radicand: f64, h: u32) -> f64 {
    if h % 2 == 0 {
        // Even central moments are nonnegative up to roundoff.
        radicand.max(0.0).powf(1.0 / h as f64)
    } else {
        radicand.signum() * radicand.abs().powf(1.0 / h as f64)
    }
}

/// Moment feature vector of a frame: `H` moments per YIQ component,
/// each component's block scaled by its weight.
pub fn feature_vector(frame: &Frame, moments: u32, weights: [f64; 3]) -> Result<MomentFeature> {
    if moments < 1 {
        return Err(Error::domain("feature_vector requires H >= 1"));
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::domain("feature_vector weights must be positive"));
    }
    let mut values = Vec::with_capacity(3 * moments as usize);
    for (plane, weight) in frame.planes().into_iter().zip(weights) {
        values.push(weight * first_moment(plane)?);
        for h in 2..=moments {
            values.push(weight * higher_moment(plane, h)?);
        }
    }
    Ok(MomentFeature {
        values,
        frame_index: frame.index,
    })
}

/// Sum of `|a_k - b_k|^q` over all vector entries. With `q = 2` this is
/// the squared Euclidean distance.
pub fn frame_distance(a: &MomentFeature, b: &MomentFeature, q: u32) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::domain(format!(
            "feature lengths differ: {} vs {}",
            a.values.len(),
            b.values.len()
        )));
    }
    if q < 1 {
        return Err(Error::domain("frame_distance requires q >= 1"));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs().powi(q as i32))
        .sum())
}

/// Consecutive-frame distance series: entry `j - 1` holds
/// `d(f_j, f_{j-1})` for `j` in `1..n`.
pub fn distance_series(features: &[MomentFeature], q: u32) -> Result<Vec<f64>> {
    features
        .windows(2)
        .map(|pair| frame_distance(&pair[1], &pair[0], q))
        .collect()
}

/// Detect abrupt cuts: a boundary after frame `j-1` wherever the
/// distance to the previous frame exceeds the threshold.
pub fn detect_cuts(
    features: &[MomentFeature],
    q: u32,
    threshold: CutThreshold,
) -> Result<Vec<ShotBoundary>> {
    if features.len() < 2 {
        return Ok(Vec::new());
    }
    let series = distance_series(features, q)?;
    let t1 = match threshold {
        CutThreshold::Fixed(t) => {
            if t <= 0.0 {
                return Err(Error::domain("cut threshold must be positive"));
            }
            t
        }
        CutThreshold::Auto { k } => {
            let (mean, std) = mean_and_pop_std(&series);
            mean + k * std
        }
    };
    Ok(series
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > t1)
        .map(|(i, &d)| ShotBoundary {
            cut_after: features[i + 1].frame_index,
            distance: d,
        })
        .collect())
}

/// Partition `[0, n_frames)` into shots split at each boundary.
pub fn cuts_to_shots(boundaries: &[ShotBoundary], n_frames: usize) -> Vec<Shot> {
    if n_frames == 0 {
        return Vec::new();
    }
    let mut shots = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0;
    for b in boundaries {
        if b.cut_after > start && b.cut_after < n_frames {
            shots.push(Shot {
                start,
                end: b.cut_after - 1,
            });
            start = b.cut_after;
        }
    }
    shots.push(Shot {
        start,
        end: n_frames - 1,
    });
    shots
}
