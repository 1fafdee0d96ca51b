//! Separable 2-D discrete wavelet transform and detail-band fusion.
//!
//! Analysis runs rows first, then columns, downsampling by two; the
//! four subbands of one level are LL (smooth), LH (horizontal detail),
//! HL (vertical detail) and HH (diagonal). Multilevel decomposition
//! recurses on LL. `fuse_details` folds the absolute detail
//! coefficients of every level back to full resolution, which lights up
//! stroke-dense regions.
//!
//! Orthonormal kernels with periodic extension reconstruct exactly and
//! conserve energy on even dimensions (periodization of an odd-length
//! signal double-counts a sample, so those guarantees hold per level
//! only while the dimensions stay even). Symmetric extension avoids
//! edge artifacts in the localization pipeline, where no inverse is
//! ever taken.

use crate::error::{Error, Result};
use crate::gray::GrayImage;

/// Supported orthonormal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    Db2,
}

impl WaveletFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "haar" => Ok(WaveletFamily::Haar),
            "db2" => Ok(WaveletFamily::Db2),
            other => Err(Error::config(format!(
                "unknown wavelet {other:?} (expected haar or db2)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
        }
    }
}

/// Boundary handling for the filter passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// Half-point reflection; no edge artifacts.
    Symmetric,
    /// Circular wrap; exact reconstruction on even dimensions.
    Periodic,
}

/// Analysis filter pair plus boundary rule.
#[derive(Debug, Clone)]
pub struct WaveletKernel {
    pub family: WaveletFamily,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
    pub extension: Extension,
}

impl WaveletKernel {
    pub fn new(family: WaveletFamily, extension: Extension) -> Self {
        let lowpass: Vec<f64> = match family {
            WaveletFamily::Haar => {
                let c = std::f64::consts::FRAC_1_SQRT_2;
                vec![c, c]
            }
            WaveletFamily::Db2 => {
                let s3 = 3.0f64.sqrt();
                let norm = 4.0 * 2.0f64.sqrt();
                vec![
                    (1.0 + s3) / norm,
                    (3.0 + s3) / norm,
                    (3.0 - s3) / norm,
                    (1.0 - s3) / norm,
                ]
            }
        };
        // Quadrature mirror: hi[n] = (-1)^n * lo[L-1-n].
        let len = lowpass.len();
        let highpass: Vec<f64> = (0..len)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - n]
            })
            .collect();
        WaveletKernel {
            family,
            lowpass,
            highpass,
            extension,
        }
    }

    pub fn taps(&self) -> usize {
        self.lowpass.len()
    }
}

/// One level of detail subbands.
#[derive(Debug, Clone)]
pub struct DetailBands {
    pub lh: GrayImage,
    pub hl: GrayImage,
    pub hh: GrayImage,
}

/// Multilevel decomposition: detail bands per level (level 1 first) and
/// the deepest approximation band.
#[derive(Debug, Clone)]
pub struct SubbandPyramid {
    pub input_width: usize,
    pub input_height: usize,
    pub levels: Vec<DetailBands>,
    pub ll: GrayImage,
}

impl SubbandPyramid {
    /// Total energy over all retained subbands.
    pub fn energy(&self) -> f64 {
        let mut e = self.ll.sum_squares();
        for level in &self.levels {
            e += level.lh.sum_squares() + level.hl.sum_squares() + level.hh.sum_squares();
        }
        e
    }
}

#[inline]
fn fold_index(i: usize, n: usize, extension: Extension) -> usize {
    match extension {
        Extension::Periodic => i % n,
        Extension::Symmetric => {
            // Half-point reflection with period 2n.
            let j = i % (2 * n);
            if j < n {
                j
            } else {
                2 * n - 1 - j
            }
        }
    }
}

/// One analysis pass over a slice: approx and detail, each ceil(n/2) long.
fn analyze_1d(input: &[f64], kernel: &WaveletKernel) -> (Vec<f64>, Vec<f64>) {
    let n = input.len();
    let out_len = n.div_ceil(2);
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let mut a = 0.0;
        let mut d = 0.0;
        for (t, (&lo, &hi)) in kernel.lowpass.iter().zip(&kernel.highpass).enumerate() {
            let v = input[fold_index(2 * k + t, n, kernel.extension)];
            a += lo * v;
            d += hi * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Adjoint of `analyze_1d`: scatter coefficients back onto `out_len`
/// samples. Exact inverse for periodic extension on even lengths.
fn synthesize_1d(
    approx: &[f64],
    detail: &[f64],
    kernel: &WaveletKernel,
    out_len: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for k in 0..approx.len() {
        for (t, (&lo, &hi)) in kernel.lowpass.iter().zip(&kernel.highpass).enumerate() {
            let idx = fold_index(2 * k + t, out_len, kernel.extension);
            out[idx] += approx[k] * lo + detail[k] * hi;
        }
    }
    out
}

/// Single-level 2-D analysis: rows filtered and downsampled, then
/// columns. Returns (ll, lh, hl, hh), each ceil(w/2) x ceil(h/2).
pub fn dwt2_level(
    img: &GrayImage,
    kernel: &WaveletKernel,
) -> Result<(GrayImage, GrayImage, GrayImage, GrayImage)> {
    if img.is_empty() {
        return Err(Error::domain("dwt2_level of an empty image"));
    }
    let (w, h) = (img.width(), img.height());
    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);

    // Row pass.
    let mut row_lo = GrayImage::zeros(cw, h);
    let mut row_hi = GrayImage::zeros(cw, h);
    for y in 0..h {
        let (a, d) = analyze_1d(img.row(y), kernel);
        for x in 0..cw {
            row_lo.set(x, y, a[x]);
            row_hi.set(x, y, d[x]);
        }
    }

    // Column pass.
    let mut ll = GrayImage::zeros(cw, ch);
    let mut lh = GrayImage::zeros(cw, ch);
    let mut hl = GrayImage::zeros(cw, ch);
    let mut hh = GrayImage::zeros(cw, ch);
    let mut column = vec![0.0; h];
    for x in 0..cw {
        for (y, slot) in column.iter_mut().enumerate() {
            *slot = row_lo.get(x, y);
        }
        let (a, d) = analyze_1d(&column, kernel);
        for y in 0..ch {
            ll.set(x, y, a[y]);
            lh.set(x, y, d[y]);
        }
        for (y, slot) in column.iter_mut().enumerate() {
            *slot = row_hi.get(x, y);
        }
        let (a, d) = analyze_1d(&column, kernel);
        for y in 0..ch {
            hl.set(x, y, a[y]);
            hh.set(x, y, d[y]);
        }
    }
    Ok((ll, lh, hl, hh))
}

/// Single-level 2-D synthesis from four equally sized subbands. Output
/// dimensions are twice the subband dimensions.
pub fn idwt2_level(
    ll: &GrayImage,
    lh: &GrayImage,
    hl: &GrayImage,
    hh: &GrayImage,
    kernel: &WaveletKernel,
) -> Result<GrayImage> {
    let (cw, ch) = (ll.width(), ll.height());
    for band in [lh, hl, hh] {
        if band.width() != cw || band.height() != ch {
            return Err(Error::domain("idwt2_level subbands disagree in dimensions"));
        }
    }
    let w = cw * 2;
    let h = ch * 2;

    // Invert the column pass.
    let mut row_lo = GrayImage::zeros(cw, h);
    let mut row_hi = GrayImage::zeros(cw, h);
    let mut approx = vec![0.0; ch];
    let mut detail = vec![0.0; ch];
    for x in 0..cw {
        for y in 0..ch {
            approx[y] = ll.get(x, y);
            detail[y] = lh.get(x, y);
        }
        let col = synthesize_1d(&approx, &detail, kernel, h);
        for (y, v) in col.into_iter().enumerate() {
            row_lo.set(x, y, v);
        }
        for y in 0..ch {
            approx[y] = hl.get(x, y);
            detail[y] = hh.get(x, y);
        }
        let col = synthesize_1d(&approx, &detail, kernel, h);
        for (y, v) in col.into_iter().enumerate() {
            row_hi.set(x, y, v);
        }
    }

    // Invert the row pass.
    let mut out = GrayImage::zeros(w, h);
    for y in 0..h {
        let row = synthesize_1d(row_lo.row(y), row_hi.row(y), kernel, w);
        for (x, v) in row.into_iter().enumerate() {
            out.set(x, y, v);
        }
    }
    Ok(out)
}

/// Largest level count satisfying `min(w, h) / 2^L >= taps`.
pub fn max_levels(width: usize, height: usize, kernel: &WaveletKernel) -> usize {
    let mut side = width.min(height);
    let mut levels = 0;
    while side / 2 >= kernel.taps() {
        side /= 2;
        levels += 1;
    }
    levels
}

/// Multilevel decomposition: recursively split the LL band.
pub fn dwt2_multilevel(
    img: &GrayImage,
    levels: usize,
    kernel: &WaveletKernel,
) -> Result<SubbandPyramid> {
    if levels < 1 {
        return Err(Error::domain("dwt2_multilevel requires at least one level"));
    }
    let feasible = max_levels(img.width(), img.height(), kernel);
    if levels > feasible {
        return Err(Error::domain(format!(
            "{} levels infeasible for {}x{} with {}-tap kernel; at most {} possible",
            levels,
            img.width(),
            img.height(),
            kernel.taps(),
            feasible
        )));
    }
    let mut detail_levels = Vec::with_capacity(levels);
    let mut current = img.clone();
    for _ in 0..levels {
        let (ll, lh, hl, hh) = dwt2_level(&current, kernel)?;
        detail_levels.push(DetailBands { lh, hl, hh });
        current = ll;
    }
    Ok(SubbandPyramid {
        input_width: img.width(),
        input_height: img.height(),
        levels: detail_levels,
        ll: current,
    })
}

/// Fold every level's absolute detail coefficients back to the input
/// resolution (nearest-neighbor upsampling) and rescale onto [0, 255].
/// A detail-free input maps to all zeros.
pub fn fuse_details(pyramid: &SubbandPyramid) -> GrayImage {
    let (w, h) = (pyramid.input_width, pyramid.input_height);
    let mut acc = GrayImage::zeros(w, h);
    for (li, bands) in pyramid.levels.iter().enumerate() {
        let shift = li + 1;
        let sw = bands.lh.width();
        let sh = bands.lh.height();
        for y in 0..h {
            let sy = (y >> shift).min(sh - 1);
            for x in 0..w {
                let sx = (x >> shift).min(sw - 1);
                let v = bands.lh.get(sx, sy).abs()
                    + bands.hl.get(sx, sy).abs()
                    + bands.hh.get(sx, sy).abs();
                acc.set(x, y, acc.get(x, y) + v);
            }
        }
    }
    acc.rescale_to_255()
}
