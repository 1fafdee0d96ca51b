//! Block-level detection metrics.
//!
//! Detected boxes are judged against ground truth as truly detected
//! (TDB), falsely detected (FDB), and, within TDB, flagged when they
//! miss part of the matched truth box (MDB). Rates follow directly:
//! detection rate TDB/ATB, false positive rate FDB/(TDB+FDB),
//! misdetection rate MDB/TDB, with recall = detection rate and
//! precision = 1 - false positive rate.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rect::Rect;

/// Frame identifier: a numeric index for video frames or a name for
/// dataset images.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameId {
    Index(u64),
    Name(String),
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameId::Index(i) => write!(f, "{i}"),
            FrameId::Name(n) => write!(f, "{n}"),
        }
    }
}

impl From<usize> for FrameId {
    fn from(i: usize) -> Self {
        FrameId::Index(i as u64)
    }
}

// Boxes appear either as [x, y, w, h] arrays (ground-truth files) or as
// {"x": .., "y": .., "w": .., "h": ..} objects (prediction sidecars).
#[derive(Deserialize)]
#[serde(untagged)]
enum BoxRepr {
    Tuple([usize; 4]),
    Object { x: usize, y: usize, w: usize, h: usize },
}

impl From<BoxRepr> for Rect {
    fn from(b: BoxRepr) -> Rect {
        match b {
            BoxRepr::Tuple([x, y, w, h]) => Rect::new(x, y, w, h),
            BoxRepr::Object { x, y, w, h } => Rect::new(x, y, w, h),
        }
    }
}

/// Ground truth for one frame. `actual_text_blocks` defaults to the
/// number of boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub frame: FrameId,
    pub boxes: Vec<Rect>,
    pub actual_text_blocks: Option<usize>,
}

impl GroundTruth {
    pub fn new(frame: impl Into<FrameId>, boxes: Vec<Rect>) -> Self {
        GroundTruth {
            frame: frame.into(),
            boxes,
            actual_text_blocks: None,
        }
    }

    pub fn atb(&self) -> usize {
        self.actual_text_blocks.unwrap_or(self.boxes.len())
    }
}

#[derive(Deserialize)]
struct FrameBoxesLine {
    frame: FrameId,
    boxes: Vec<BoxRepr>,
    #[serde(default)]
    actual_text_blocks: Option<usize>,
}

/// Judgment category for one detected box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Category {
    Tdb,
    Fdb,
}

/// Judgment of one detected box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockJudgment {
    pub detected_box: Rect,
    pub category: Category,
    /// Only meaningful for TDB: the matched truth box is not fully
    /// covered.
    pub missing_data: bool,
}

/// Counts plus derived rates, all rates as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub tdb: usize,
    pub fdb: usize,
    pub mdb: usize,
    pub atb: usize,
    pub detection_rate: f64,
    pub false_positive_rate: f64,
    pub misdetection_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl EvalReport {
    /// Derive every rate from raw counts.
    pub fn from_counts(tdb: usize, fdb: usize, mdb: usize, atb: usize) -> EvalReport {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let detection_rate = ratio(tdb, atb);
        let false_positive_rate = ratio(fdb, tdb + fdb);
        let misdetection_rate = ratio(mdb, tdb);
        let precision = 1.0 - false_positive_rate;
        let recall = detection_rate;
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            tdb,
            fdb,
            mdb,
            atb,
            detection_rate,
            false_positive_rate,
            misdetection_rate,
            precision,
            recall,
            f_measure,
        }
    }

    /// JSON object with the sample-table column names, rates as
    /// percentages.
    pub fn to_table_json(&self) -> serde_json::Value {
        serde_json::json!({
            "ATB": self.atb,
            "TDB": self.tdb,
            "FDB": self.fdb,
            "MDB": self.mdb,
            "Recall": 100.0 * self.recall,
            "Precision": 100.0 * self.precision,
            "F measure": 100.0 * self.f_measure,
            "MDR": 100.0 * self.misdetection_rate,
        })
    }
}

/// Judge each detected box against the truth boxes.
///
/// A detected box is TDB when its intersection with an unmatched truth
/// box covers at least `overlap_min` of that truth box's area or of its
/// own area; matches are assigned greedily by descending intersection
/// area, each truth box used at most once. A TDB that does not fully
/// cover its truth box carries the missing-data flag.
pub fn judge_boxes(
    detected: &[Rect],
    truth: &GroundTruth,
    overlap_min: f64,
) -> Result<Vec<BlockJudgment>> {
    if !(overlap_min > 0.0 && overlap_min <= 1.0) {
        return Err(Error::domain(format!(
            "overlap_min must lie in (0, 1], got {overlap_min}"
        )));
    }
    // (intersection, detected index, truth index), qualifying pairs only.
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (di, d) in detected.iter().enumerate() {
        for (ti, t) in truth.boxes.iter().enumerate() {
            let inter = d.intersection_area(t);
            if inter == 0 {
                continue;
            }
            let covers_truth = inter as f64 >= overlap_min * t.area() as f64;
            let covers_self = inter as f64 >= overlap_min * d.area() as f64;
            if covers_truth || covers_self {
                pairs.push((inter, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut matched_truth = vec![false; truth.boxes.len()];
    let mut matched_detected = vec![None; detected.len()];
    for (inter, di, ti) in pairs {
        if matched_detected[di].is_none() && !matched_truth[ti] {
            matched_detected[di] = Some((ti, inter));
            matched_truth[ti] = true;
        }
    }

    Ok(detected
        .iter()
        .enumerate()
        .map(|(di, d)| match matched_detected[di] {
            Some((ti, inter)) => BlockJudgment {
                detected_box: *d,
                category: Category::Tdb,
                missing_data: inter < truth.boxes[ti].area(),
            },
            None => BlockJudgment {
                detected_box: *d,
                category: Category::Fdb,
                missing_data: false,
            },
        })
        .collect())
}

/// Counts and rates for one frame's judgments.
pub fn compute_report(judgments: &[BlockJudgment], truth: &GroundTruth) -> EvalReport {
    let tdb = judgments
        .iter()
        .filter(|j| j.category == Category::Tdb)
        .count();
    let fdb = judgments.len() - tdb;
    let mdb = judgments
        .iter()
        .filter(|j| j.category == Category::Tdb && j.missing_data)
        .count();
    EvalReport::from_counts(tdb, fdb, mdb, truth.atb())
}

/// Micro-average: sum the raw counts, then recompute every rate.
pub fn aggregate_reports(reports: &[EvalReport]) -> EvalReport {
    let (mut tdb, mut fdb, mut mdb, mut atb) = (0, 0, 0, 0);
    for r in reports {
        tdb += r.tdb;
        fdb += r.fdb;
        mdb += r.mdb;
        atb += r.atb;
    }
    EvalReport::from_counts(tdb, fdb, mdb, atb)
}

/// Parse a JSONL file of per-frame box lists. Accepts both the array
/// and the object box encodings; blank lines are skipped.
pub fn read_frame_boxes_jsonl(path: &Path) -> Result<Vec<GroundTruth>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FrameBoxesLine = serde_json::from_str(line).map_err(|e| {
            Error::format(format!("{}:{}: {}", path.display(), lineno + 1, e))
        })?;
        out.push(GroundTruth {
            frame: parsed.frame,
            boxes: parsed.boxes.into_iter().map(Rect::from).collect(),
            actual_text_blocks: parsed.actual_text_blocks,
        });
    }
    Ok(out)
}

/// Evaluate prediction lines against ground-truth lines, matched by
/// frame id. Frames present on only one side count against the other
/// (missed truths lower recall, unmatched predictions are all FDB).
pub fn evaluate(
    predictions: &[GroundTruth],
    truths: &[GroundTruth],
    overlap_min: f64,
) -> Result<(EvalReport, Vec<(FrameId, EvalReport)>)> {
    let ids: BTreeSet<FrameId> = predictions
        .iter()
        .map(|p| p.frame.clone())
        .chain(truths.iter().map(|t| t.frame.clone()))
        .collect();
    let empty: Vec<Rect> = Vec::new();
    let mut per_frame = Vec::new();
    for id in ids {
        let pred_boxes = predictions
            .iter()
            .find(|p| p.frame == id)
            .map(|p| &p.boxes)
            .unwrap_or(&empty);
        let truth = truths
            .iter()
            .find(|t| t.frame == id)
            .cloned()
            .unwrap_or_else(|| GroundTruth::new(id.clone(), Vec::new()));
        let judgments = judge_boxes(pred_boxes, &truth, overlap_min)?;
        per_frame.push((id, compute_report(&judgments, &truth)));
    }
    let overall = aggregate_reports(&per_frame.iter().map(|(_, r)| *r).collect::<Vec<_>>());
    Ok((overall, per_frame))
}

/// Import ICDAR-2003-style ground truth: `<image>` elements holding an
/// `<imageName>` and `taggedRectangle` entries with x/y/width/height
/// attributes. Fractional coordinates round to the nearest pixel.
pub fn import_icdar_ground_truth(xml: &str) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    let mut rest = xml;
    while let Some(start) = rest.find("<image>") {
        let after = &rest[start + "<image>".len()..];
        let end = after
            .find("</image>")
            .ok_or_else(|| Error::format("icdar: unterminated <image> element"))?;
        let block = &after[..end];
        rest = &after[end + "</image>".len()..];

        let name = extract_tag_text(block, "imageName")
            .ok_or_else(|| Error::format("icdar: <image> without <imageName>"))?;
        let mut boxes = Vec::new();
        let mut scan = block;
        while let Some(pos) = scan.find("<taggedRectangle") {
            let tail = &scan[pos..];
            let rest = &tail["<taggedRectangle".len()..];
            // Skip the <taggedRectangles> container element.
            if rest.starts_with(|c: char| c.is_ascii_alphanumeric()) {
                scan = rest;
                continue;
            }
            let close = tail
                .find('>')
                .ok_or_else(|| Error::format("icdar: unterminated <taggedRectangle>"))?;
            let attrs = &tail[..close];
            boxes.push(Rect::new(
                extract_attr(attrs, "x")?,
                extract_attr(attrs, "y")?,
                extract_attr(attrs, "width")?,
                extract_attr(attrs, "height")?,
            ));
            scan = &tail[close..];
        }
        out.push(GroundTruth::new(FrameId::Name(name.to_string()), boxes));
    }
    Ok(out)
}

fn extract_tag_text<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = block.find(&open)? + open.len();
    let end = block[start..].find(&close)? + start;
    Some(block[start..end].trim())
}

fn extract_attr(attrs: &str, name: &str) -> Result<usize> {
    let needle = format!("{name}=\"");
    let start = attrs
        .find(&needle)
        .ok_or_else(|| Error::format(format!("icdar: taggedRectangle lacks {name}")))?
        + needle.len();
    let end = attrs[start..]
        .find('"')
        .ok_or_else(|| Error::format("icdar: unterminated attribute"))?
        + start;
    let raw = &attrs[start..end];
    let value: f64 = raw
        .parse()
        .map_err(|_| Error::format(format!("icdar: bad {name} value {raw:?}")))?;
    Ok(value.round().max(0.0) as usize)
}
