//! Keyframe selection inside a shot.
//!
//! A temporally maximum occurrence frame (TMOF) holds, per pixel, the
//! most frequent quantized luminance bin across the shot. Frames are
//! scored by mean absolute bin deviation from the TMOF; keyframes sit at
//! strict peaks of that curve above its mean, with the shot's middle
//! frame as fallback so every shot yields at least one keyframe.

use crate::error::{Error, Result};
use crate::media::Frame;
use crate::shot::Shot;

/// Per-pixel modal luminance bin over one shot.
#[derive(Debug, Clone)]
pub struct Tmof {
    pub width: usize,
    pub height: usize,
    pub modal_bin: Vec<u16>,
    pub bin_count: u16,
}

impl Tmof {
    /// Width of one luminance bin in intensity units.
    pub fn bin_width(&self) -> f64 {
        256.0 / self.bin_count as f64
    }
}

/// Selected keyframes of one shot plus the curve they came from.
#[derive(Debug, Clone)]
pub struct KeyframeSet {
    pub shot: Shot,
    pub keyframe_indices: Vec<usize>,
    pub distance_curve: Vec<f64>,
}

#[inline]
fn quantize(y: f64, bin_count: u16) -> u16 {
    let bin_width = 256.0 / bin_count as f64;
    let bin = (y.clamp(0.0, 255.0) / bin_width) as u16;
    bin.min(bin_count - 1)
}

/// Build the TMOF of a shot's frames over `bin_count` luminance bins.
/// Frequency ties break toward the lower bin index.
pub fn build_tmof(frames: &[Frame], bin_count: u16) -> Result<Tmof> {
    if frames.is_empty() {
        return Err(Error::domain("build_tmof of an empty shot"));
    }
    if bin_count == 0 || 256 % bin_count as usize != 0 {
        return Err(Error::domain(format!(
            "bin count {bin_count} must divide 256"
        )));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    for f in frames {
        if (f.width(), f.height()) != (w, h) {
            return Err(Error::domain("shot frames disagree in dimensions"));
        }
    }

    let bins = bin_count as usize;
    // Per-pixel histogram, pixel-major.
    let mut counts = vec![0u32; w * h * bins];
    for f in frames {
        for (p, &y) in f.y_plane.data().iter().enumerate() {
            counts[p * bins + quantize(y, bin_count) as usize] += 1;
        }
    }
    let modal_bin = (0..w * h)
        .map(|p| {
            let hist = &counts[p * bins..(p + 1) * bins];
            let mut best = 0usize;
            for (b, &c) in hist.iter().enumerate() {
                if c > hist[best] {
                    best = b;
                }
            }
            best as u16
        })
        .collect();
    Ok(Tmof {
        width: w,
        height: h,
        modal_bin,
        bin_count,
    })
}

/// Mean absolute quantized deviation between a frame and the TMOF,
/// scaled back to intensity units.
pub fn tmof_distance(frame: &Frame, tmof: &Tmof) -> Result<f64> {
    if frame.width() != tmof.width || frame.height() != tmof.height {
        return Err(Error::domain(format!(
            "frame {}x{} does not match tmof {}x{}",
            frame.width(),
            frame.height(),
            tmof.width,
            tmof.height
        )));
    }
    let sum: f64 = frame
        .y_plane
        .data()
        .iter()
        .zip(&tmof.modal_bin)
        .map(|(&y, &m)| (quantize(y, tmof.bin_count) as f64 - m as f64).abs())
        .sum();
    Ok(sum * tmof.bin_width() / (tmof.width * tmof.height) as f64)
}

/// Keyframes at strict local maxima of the curve above its mean; the
/// middle frame when no peak qualifies.
pub fn select_keyframes(curve: &[f64], shot: Shot) -> Result<KeyframeSet> {
    if curve.len() != shot.frame_count() {
        return Err(Error::domain(format!(
            "curve of {} entries does not cover shot of {} frames",
            curve.len(),
            shot.frame_count()
        )));
    }
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    let mut keyframe_indices: Vec<usize> = (1..curve.len().saturating_sub(1))
        .filter(|&j| curve[j] > curve[j - 1] && curve[j] > curve[j + 1] && curve[j] > mean)
        .map(|j| shot.start + j)
        .collect();
    if keyframe_indices.is_empty() {
        keyframe_indices.push(shot.start + shot.frame_count() / 2);
    }
    Ok(KeyframeSet {
        shot,
        keyframe_indices,
        distance_curve: curve.to_vec(),
    })
}

/// TMOF-based keyframe extraction for the frames of one shot.
/// `frames` must hold exactly the shot's frames in temporal order.
pub fn extract_keyframes(frames: &[Frame], shot: Shot, bin_count: u16) -> Result<KeyframeSet> {
    if frames.len() != shot.frame_count() {
        return Err(Error::domain(format!(
            "{} frames supplied for shot of {}",
            frames.len(),
            shot.frame_count()
        )));
    }
    let tmof = build_tmof(frames, bin_count)?;
    let curve: Vec<f64> = frames
        .iter()
        .map(|f| tmof_distance(f, &tmof))
        .collect::<Result<_>>()?;
    select_keyframes(&curve, shot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::rgb_to_yiq;
    use proptest::prelude::*;

    fn gray_frame(index: usize, w: usize, h: usize, level: u8) -> Frame {
        let p = vec![level; w * h];
        rgb_to_yiq(index, w, h, &p, &p, &p).unwrap()
    }

    fn frame_from_levels(index: usize, w: usize, h: usize, levels: &[u8]) -> Frame {
        rgb_to_yiq(index, w, h, levels, levels, levels).unwrap()
    }

    #[test]
    fn single_frame_shot_quantizes_that_frame() {
        let f = gray_frame(0, 2, 2, 100);
        let tmof = build_tmof(std::slice::from_ref(&f), 32).unwrap();
        // 100 / 8 = 12.5 -> bin 12
        assert!(tmof.modal_bin.iter().all(|&b| b == 12));
        assert_eq!(tmof.bin_width(), 8.0);
    }

    #[test]
    fn identical_frames_match_single_frame_tmof() {
        let frames: Vec<Frame> = (0..3).map(|i| gray_frame(i, 4, 4, 200)).collect();
        let one = build_tmof(&frames[..1], 32).unwrap();
        let three = build_tmof(&frames, 32).unwrap();
        assert_eq!(one.modal_bin, three.modal_bin);
    }

    #[test]
    fn modal_bin_counts_frequencies() {
        // Pixel luminance 10, 10, 200 across three frames: bin 1 wins.
        let frames: Vec<Frame> = [10u8, 10, 200]
            .iter()
            .enumerate()
            .map(|(i, &l)| gray_frame(i, 2, 2, l))
            .collect();
        let tmof = build_tmof(&frames, 32).unwrap();
        assert!(tmof.modal_bin.iter().all(|&b| b == 1));
    }

    #[test]
    fn frequency_tie_breaks_to_lower_bin() {
        // One frame at bin 1, one at bin 25: tie, lower bin wins.
        let frames = vec![gray_frame(0, 2, 2, 10), gray_frame(1, 2, 2, 200)];
        let tmof = build_tmof(&frames, 32).unwrap();
        assert!(tmof.modal_bin.iter().all(|&b| b == 1));
    }

    #[test]
    fn empty_shot_rejected() {
        assert!(build_tmof(&[], 32).is_err());
    }

    #[test]
    fn bin_count_must_divide_256() {
        let f = gray_frame(0, 2, 2, 0);
        assert!(build_tmof(std::slice::from_ref(&f), 33).is_err());
        assert!(build_tmof(std::slice::from_ref(&f), 0).is_err());
    }

    #[test]
    fn distance_to_own_tmof_is_zero() {
        let f = gray_frame(0, 3, 3, 150);
        let tmof = build_tmof(std::slice::from_ref(&f), 32).unwrap();
        assert_eq!(tmof_distance(&f, &tmof).unwrap(), 0.0);
    }

    #[test]
    fn black_frame_against_white_tmof() {
        let white = gray_frame(0, 4, 4, 255);
        let tmof = build_tmof(std::slice::from_ref(&white), 32).unwrap();
        let black = gray_frame(1, 4, 4, 0);
        // 31 bins apart, bin width 8.
        assert_eq!(tmof_distance(&black, &tmof).unwrap(), 248.0);
    }

    #[test]
    fn single_pixel_perturbation_moves_distance_by_one_bin_share() {
        // Levels 60 and 68 sit inside bins 7 and 8 (width 8), clear of
        // the quantization boundaries.
        let w = 4;
        let h = 4;
        let base = gray_frame(0, w, h, 60);
        let tmof = build_tmof(std::slice::from_ref(&base), 32).unwrap();
        let mut levels = vec![60u8; w * h];
        levels[5] = 68;
        let perturbed = frame_from_levels(1, w, h, &levels);
        let d = tmof_distance(&perturbed, &tmof).unwrap();
        assert!((d - 8.0 / (w * h) as f64).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = gray_frame(0, 4, 4, 0);
        let tmof = build_tmof(std::slice::from_ref(&f), 32).unwrap();
        let other = gray_frame(1, 5, 4, 0);
        assert!(tmof_distance(&other, &tmof).is_err());
    }

    #[test]
    fn flat_curve_falls_back_to_middle_frame() {
        let shot = Shot { start: 3, end: 7 };
        let ks = select_keyframes(&[1.0; 5], shot).unwrap();
        assert_eq!(ks.keyframe_indices, vec![5]);
    }

    #[test]
    fn peaks_above_mean_are_selected() {
        let shot = Shot { start: 0, end: 4 };
        // mean = 0.6; peaks at offsets 1 and 3 both exceed it.
        let ks = select_keyframes(&[0.0, 1.0, 0.0, 2.0, 0.0], shot).unwrap();
        assert_eq!(ks.keyframe_indices, vec![1, 3]);
    }

    #[test]
    fn monotone_curve_falls_back_to_middle() {
        let shot = Shot { start: 10, end: 14 };
        let ks = select_keyframes(&[0.0, 1.0, 2.0, 3.0, 4.0], shot).unwrap();
        assert_eq!(ks.keyframe_indices, vec![12]);
    }

    proptest! {
        #[test]
        fn every_shot_yields_a_keyframe_within_bounds(
            curve in proptest::collection::vec(0.0..10.0f64, 1..30),
            start in 0usize..100,
        ) {
            let shot = Shot { start, end: start + curve.len() - 1 };
            let ks = select_keyframes(&curve, shot).unwrap();
            prop_assert!(!ks.keyframe_indices.is_empty());
            for &k in &ks.keyframe_indices {
                prop_assert!(k >= shot.start && k <= shot.end);
            }
        }

        #[test]
        fn tmof_is_permutation_invariant(
            levels in proptest::collection::vec(0u8..=255, 2..8),
            seed in 0u64..1000,
        ) {
            let frames: Vec<Frame> = levels
                .iter()
                .enumerate()
                .map(|(i, &l)| gray_frame(i, 3, 3, l))
                .collect();
            let mut shuffled = frames.clone();
            // Simple deterministic shuffle.
            let n = shuffled.len();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let a = build_tmof(&frames, 32).unwrap();
            let b = build_tmof(&shuffled, 32).unwrap();
            prop_assert_eq!(a.modal_bin, b.modal_bin);
        }

        #[test]
        fn tmof_distance_nonnegative_zero_iff_modal(
            levels in proptest::collection::vec(0u8..=255, 9),
            probe in proptest::collection::vec(0u8..=255, 9),
        ) {
            let f = frame_from_levels(0, 3, 3, &levels);
            let tmof = build_tmof(std::slice::from_ref(&f), 32).unwrap();
            let p = frame_from_levels(1, 3, 3, &probe);
            let d = tmof_distance(&p, &tmof).unwrap();
            prop_assert!(d >= 0.0);
            let same_bins = levels
                .iter()
                .zip(&probe)
                .all(|(&a, &b)| a / 8 == b / 8);
            prop_assert_eq!(d == 0.0, same_bins);
        }
    }
}
