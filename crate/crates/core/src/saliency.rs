//! Laplacian filtering and maximum gradient difference.
//!
//! The 8-neighbor Laplacian produces positive and negative swings on
//! both sides of every stroke edge; the MGD map measures the swing
//! amplitude as max minus min over a horizontal 1 x N window, which is
//! large across text and small over smooth background.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::gray::GrayImage;

/// Per-pixel maximum gradient difference of a Laplacian-filtered image.
#[derive(Debug, Clone)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    pub mgd: GrayImage,
    pub window_n: usize,
}

const LAPLACIAN_MASK: [[f64; 3]; 3] = [[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]];

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    // Half-point reflection, valid for offsets within one period.
    if i < 0 {
        (-i - 1) as usize
    } else if i as usize >= n {
        2 * n - 1 - i as usize
    } else {
        i as usize
    }
}

/// 8-neighbor 3x3 Laplacian with symmetric boundary extension. Output
/// is signed.
pub fn laplacian(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::domain(format!(
            "laplacian needs at least 3x3, got {w}x{h}"
        )));
    }
    let mut out = GrayImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, row) in LAPLACIAN_MASK.iter().enumerate() {
                let sy = reflect(y as isize + dy as isize - 1, h);
                for (dx, &m) in row.iter().enumerate() {
                    let sx = reflect(x as isize + dx as isize - 1, w);
                    acc += m * img.get(sx, sy);
                }
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

/// Max minus min of `f` over a horizontal window of `n` columns centered
/// at each pixel, clipped at the image borders. Runs in O(W*H) via
/// monotone deques.
pub fn mgd_map(f: &GrayImage, n: usize) -> Result<SaliencyMap> {
    let (w, h) = (f.width(), f.height());
    if n % 2 == 0 || n < 3 || n > w {
        return Err(Error::domain(format!(
            "mgd window must be odd and within [3, image width {w}], got {n}"
        )));
    }
    let radius = (n - 1) / 2;
    let mut out = GrayImage::zeros(w, h);
    // Deques hold column indices; values decrease (max) or increase
    // (min) from front to back.
    let mut max_q: VecDeque<usize> = VecDeque::with_capacity(n);
    let mut min_q: VecDeque<usize> = VecDeque::with_capacity(n);
    for y in 0..h {
        let row = f.row(y);
        max_q.clear();
        min_q.clear();
        let mut filled = 0usize; // columns pushed so far
        for x in 0..w {
            // Window for x is [x - radius, x + radius] clipped to the row.
            let hi = (x + radius).min(w - 1);
            while filled <= hi {
                while max_q.back().is_some_and(|&i| row[i] <= row[filled]) {
                    max_q.pop_back();
                }
                max_q.push_back(filled);
                while min_q.back().is_some_and(|&i| row[i] >= row[filled]) {
                    min_q.pop_back();
                }
                min_q.push_back(filled);
                filled += 1;
            }
            let lo = x.saturating_sub(radius);
            while max_q.front().is_some_and(|&i| i < lo) {
                max_q.pop_front();
            }
            while min_q.front().is_some_and(|&i| i < lo) {
                min_q.pop_front();
            }
            out.set(x, y, row[max_q[0]] - row[min_q[0]]);
        }
    }
    Ok(SaliencyMap {
        width: w,
        height: h,
        mgd: out,
        window_n: n,
    })
}

/// Reference O(W*H*N) max/min scan, kept as the oracle for the deque
/// implementation.
pub fn mgd_map_brute_force(f: &GrayImage, n: usize) -> Result<SaliencyMap> {
    let (w, h) = (f.width(), f.height());
    if n % 2 == 0 || n < 3 || n > w {
        return Err(Error::domain(format!(
            "mgd window must be odd and within [3, image width {w}], got {n}"
        )));
    }
    let radius = (n - 1) / 2;
    let mut out = GrayImage::zeros(w, h);
    for y in 0..h {
        let row = f.row(y);
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            let mut mx = f64::NEG_INFINITY;
            let mut mn = f64::INFINITY;
            for &v in &row[lo..=hi] {
                mx = mx.max(v);
                mn = mn.min(v);
            }
            out.set(x, y, mx - mn);
        }
    }
    Ok(SaliencyMap {
        width: w,
        height: h,
        mgd: out,
        window_n: n,
    })
}
