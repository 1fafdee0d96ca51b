//! Binarization of the saliency map and rule-based rejection of
//! non-text blocks.
//!
//! The map is rescaled onto 256 levels and thresholded by the Otsu
//! criterion; 4-connected foreground components become candidate boxes;
//! boxes failing the aspect-ratio/density or size rules are dropped;
//! the survivors' mask is dilated to bridge inter-character gaps and
//! relabeled for the final boxes.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gray::{BinaryImage, GrayImage};
use crate::rect::Rect;
use crate::saliency::SaliencyMap;
use crate::stats::mean_and_pop_std;

/// Outcome of the geometric filter: rule 1 is aspect-ratio/density,
/// rule 2 is height bounds, rule 3 is width and area floors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Accepted,
    Rejected { rule: u8 },
}

/// Candidate or confirmed text region with its filter statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextBox {
    pub rect: Rect,
    /// Foreground pixel count inside the rectangle.
    pub edge_area: usize,
    pub aspect_ratio: f64,
    pub density: f64,
    pub verdict: Verdict,
}

/// Size-rule constants; the defaults gate horizontal text lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterRules {
    pub min_height: usize,
    pub max_height: usize,
    pub min_width: usize,
    pub min_area: usize,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            min_height: 6,
            max_height: 50,
            min_width: 5,
            min_area: 24,
        }
    }
}

/// A labeled 4-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: usize,
    pub pixels: Vec<(usize, usize)>,
    pub bounding_box: Rect,
}

/// Otsu threshold over a 256-bin histogram: the level maximizing
/// between-class variance, ties broken toward the lower level. Pixels
/// strictly above the returned level are foreground.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8> {
    let total: u64 = histogram.iter().sum();
    let distinct = histogram.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        return Err(Error::domain(
            "otsu threshold undefined for a single-level image",
        ));
    }
    let sum_total: f64 = histogram
        .iter()
        .enumerate()
        .map(|(level, &c)| level as f64 * c as f64)
        .sum();
    let total = total as f64;

    let mut weight_bg = 0.0;
    let mut sum_bg = 0.0;
    let mut best_level = 0u8;
    let mut best_variance = f64::NEG_INFINITY;
    for (level, &count) in histogram.iter().enumerate() {
        weight_bg += count as f64;
        sum_bg += level as f64 * count as f64;
        let weight_fg = total - weight_bg;
        if weight_bg == 0.0 {
            continue;
        }
        if weight_fg == 0.0 {
            break;
        }
        let level = level as u8;
        let mean_bg = sum_bg / weight_bg;
        let mean_fg = (sum_total - sum_bg) / weight_fg;
        let variance = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
        if variance > best_variance {
            best_variance = variance;
            best_level = level;
        }
    }
    Ok(best_level)
}

/// Quantize a real image onto 256 integer levels (values are expected
/// in [0, 255] already; out-of-range values clamp).
pub fn histogram_256(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[quantize_level(v) as usize] += 1;
    }
    hist
}

#[inline]
fn quantize_level(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Binarize by the Otsu level: foreground where the quantized value
/// exceeds the threshold.
pub fn binarize(img: &GrayImage) -> Result<BinaryImage> {
    let threshold = otsu_threshold(&histogram_256(img))?;
    Ok(BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        quantize_level(img.get(x, y)) > threshold
    }))
}

/// Label maximal 4-connected foreground components, ordered by the
/// (top, left) corner of their bounding boxes.
pub fn label_components(img: &BinaryImage) -> Vec<Component> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for sy in 0..h {
        for sx in 0..w {
            if !img.get(sx, sy) || seen[sy * w + sx] {
                continue;
            }
            let mut pixels = Vec::new();
            let (mut min_x, mut min_y, mut max_x, mut max_y) = (sx, sy, sx, sy);
            seen[sy * w + sx] = true;
            queue.push_back((sx, sy));
            while let Some((x, y)) = queue.pop_front() {
                pixels.push((x, y));
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
                let mut visit = |nx: usize, ny: usize| {
                    if img.get(nx, ny) && !seen[ny * w + nx] {
                        seen[ny * w + nx] = true;
                        queue.push_back((nx, ny));
                    }
                };
                if x > 0 {
                    visit(x - 1, y);
                }
                if x + 1 < w {
                    visit(x + 1, y);
                }
                if y > 0 {
                    visit(x, y - 1);
                }
                if y + 1 < h {
                    visit(x, y + 1);
                }
            }
            components.push(Component {
                id: 0,
                pixels,
                bounding_box: Rect::new(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1),
            });
        }
    }
    components.sort_by_key(|c| (c.bounding_box.y, c.bounding_box.x, c.pixels[0]));
    for (id, c) in components.iter_mut().enumerate() {
        c.id = id;
    }
    components
}

/// Apply the non-text rules in order; the first rule whose condition
/// holds rejects the box.
pub fn geometric_filter(box_stats: &TextBox, t1: f64, t2: f64, rules: &FilterRules) -> Verdict {
    let r = &box_stats.rect;
    if box_stats.aspect_ratio < t1 || box_stats.density < t2 {
        return Verdict::Rejected { rule: 1 };
    }
    if r.h > rules.max_height || r.h < rules.min_height {
        return Verdict::Rejected { rule: 2 };
    }
    if r.w < rules.min_width || r.h * r.w < rules.min_area {
        return Verdict::Rejected { rule: 3 };
    }
    Verdict::Accepted
}

/// Rule thresholds from the saliency map: mean and population standard
/// deviation of the map rescaled onto [0, 255] and divided by 255, so
/// both are commensurate with aspect-ratio and density scales.
pub fn compute_rule_thresholds(map: &SaliencyMap) -> (f64, f64) {
    let normalized: Vec<f64> = map
        .mgd
        .rescale_to_255()
        .data()
        .iter()
        .map(|v| v / 255.0)
        .collect();
    mean_and_pop_std(&normalized)
}

/// Binary dilation with a centered `se_w x se_h` rectangle; both
/// dimensions must be odd.
pub fn dilate(img: &BinaryImage, se_w: usize, se_h: usize) -> Result<BinaryImage> {
    if se_w % 2 == 0 || se_h % 2 == 0 || se_w == 0 || se_h == 0 {
        return Err(Error::domain(format!(
            "dilation element must be odd in both dimensions, got {se_w}x{se_h}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let rx = se_w / 2;
    let ry = se_h / 2;
    let mut out = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) {
                continue;
            }
            let y0 = y.saturating_sub(ry);
            let y1 = (y + ry).min(h - 1);
            let x0 = x.saturating_sub(rx);
            let x1 = (x + rx).min(w - 1);
            for oy in y0..=y1 {
                for ox in x0..=x1 {
                    out.set(ox, oy, true);
                }
            }
        }
    }
    Ok(out)
}

fn box_stats(bbox: Rect, mask: &BinaryImage) -> TextBox {
    let mut edge_area = 0usize;
    for y in bbox.y..bbox.bottom() {
        for x in bbox.x..bbox.right() {
            if mask.get(x, y) {
                edge_area += 1;
            }
        }
    }
    TextBox {
        rect: bbox,
        edge_area,
        aspect_ratio: bbox.w as f64 / bbox.h as f64,
        density: edge_area as f64 / bbox.area() as f64,
        verdict: Verdict::Accepted,
    }
}

/// Tunables of the localization stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizeParams {
    /// Explicit (t1, t2) rule thresholds; None derives them from the map.
    pub rule_thresholds: Option<(f64, f64)>,
    pub rules: FilterRules,
    pub dilate_w: usize,
    pub dilate_h: usize,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        LocalizeParams {
            rule_thresholds: None,
            rules: FilterRules::default(),
            dilate_w: 7,
            dilate_h: 3,
        }
    }
}

/// Full region-filter pipeline on one saliency map. Returns accepted
/// boxes only, ordered by (top, left). A map with a degenerate (single
/// level) histogram yields no boxes.
pub fn localize(map: &SaliencyMap, params: &LocalizeParams) -> Result<Vec<TextBox>> {
    let rescaled = map.mgd.rescale_to_255();
    let binary = match binarize(&rescaled) {
        Ok(b) => b,
        Err(Error::Domain(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };

    let (t1, t2) = params
        .rule_thresholds
        .unwrap_or_else(|| compute_rule_thresholds(map));

    // First pass: filter raw components.
    let mut survivors = BinaryImage::new(binary.width(), binary.height());
    let mut any_survivor = false;
    for component in label_components(&binary) {
        let mut stats = box_stats(component.bounding_box, &binary);
        stats.verdict = geometric_filter(&stats, t1, t2, &params.rules);
        if stats.verdict == Verdict::Accepted {
            for &(x, y) in &component.pixels {
                survivors.set(x, y, true);
            }
            any_survivor = true;
        }
    }
    if !any_survivor {
        return Ok(Vec::new());
    }

    // Bridge gaps, then relabel. Final boxes are tightened back onto
    // the pre-dilation pixels so the dilation margin never widens them.
    let dilated = dilate(&survivors, params.dilate_w, params.dilate_h)?;
    let mut boxes = Vec::new();
    for component in label_components(&dilated) {
        let mut min_x = usize::MAX;
        let mut min_y = usize::MAX;
        let mut max_x = 0usize;
        let mut max_y = 0usize;
        let mut any = false;
        for &(x, y) in &component.pixels {
            if survivors.get(x, y) {
                any = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
        if !any {
            continue; // unreachable: dilation is extensive
        }
        let bbox = Rect::new(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
        boxes.push(box_stats(bbox, &survivors));
    }
    boxes.sort_by_key(|b| (b.rect.y, b.rect.x, b.rect.w, b.rect.h));
    Ok(boxes)
}
