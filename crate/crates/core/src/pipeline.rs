//! End-to-end orchestration: source frames to shots, keyframes,
//! enhanced saliency, filtered boxes, and the run report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gray::GrayImage;
use crate::keyframe::{extract_keyframes, KeyframeSet};
use crate::media::{read_all_frames, write_annotated, Frame, SourceKind};
use crate::rect::Rect;
use crate::region::{localize, FilterRules, LocalizeParams, TextBox};
use crate::saliency::{laplacian, mgd_map, SaliencyMap};
use crate::shot::{
    cuts_to_shots, detect_cuts, distance_series, feature_vector, CutThreshold, Shot, ShotBoundary,
};
use crate::wavelet::{dwt2_multilevel, fuse_details, Extension, WaveletFamily, WaveletKernel};

/// Smallest frame the full stage stack can process (two wavelet levels
/// plus the 3x3 Laplacian).
pub const MIN_FRAME_SIDE: usize = 16;

/// Keyframe selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyframeMode {
    /// Peaks of the TMOF distance curve (middle-frame fallback).
    Peaks,
    /// Always the middle frame of the shot.
    Middle,
}

impl KeyframeMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "peaks" => Ok(KeyframeMode::Peaks),
            "middle" => Ok(KeyframeMode::Middle),
            other => Err(Error::config(format!(
                "unknown keyframe mode {other:?} (expected peaks or middle)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KeyframeMode::Peaks => "peaks",
            KeyframeMode::Middle => "middle",
        }
    }
}

/// Every tunable of the pipeline. Defaults follow the module
/// documentation; all values are reachable from the config file and the
/// CLI flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub moments: u32,
    pub weights: [f64; 3],
    pub distance_q: u32,
    pub cut_threshold: CutThreshold,
    pub tmof_bins: u16,
    pub keyframe_mode: KeyframeMode,
    pub wavelet: WaveletFamily,
    pub levels: usize,
    pub mgd_window: usize,
    pub rule_thresholds: Option<(f64, f64)>,
    pub rules: FilterRules,
    pub dilate_w: usize,
    pub dilate_h: usize,
    pub overlap_min: f64,
    pub dump_distances: bool,
    pub dump_subbands: bool,
    pub dump_mgd: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            moments: 3,
            weights: [0.6, 0.2, 0.2],
            distance_q: 2,
            cut_threshold: CutThreshold::Auto { k: 3.0 },
            tmof_bins: 32,
            keyframe_mode: KeyframeMode::Peaks,
            wavelet: WaveletFamily::Haar,
            levels: 2,
            mgd_window: 21,
            rule_thresholds: None,
            rules: FilterRules::default(),
            dilate_w: 7,
            dilate_h: 3,
            overlap_min: 0.1,
            dump_distances: false,
            dump_subbands: false,
            dump_mgd: false,
        }
    }
}

impl PipelineConfig {
    /// Set one configuration key from its textual value. Key names are
    /// shared between the config file and the CLI flags.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::config(format!("bad value {value:?} for {what}"));
        match key {
            "moments" => self.moments = value.parse().map_err(|_| bad("moments"))?,
            "weights" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("weights"))?;
                if parts.len() != 3 {
                    return Err(Error::config(format!(
                        "weights needs three comma-separated values, got {value:?}"
                    )));
                }
                self.weights = [parts[0], parts[1], parts[2]];
            }
            "distance_q" => self.distance_q = value.parse().map_err(|_| bad("distance_q"))?,
            "cut_threshold" => {
                self.cut_threshold = if value == "auto" {
                    CutThreshold::Auto { k: 3.0 }
                } else if let Some(k) = value.strip_prefix("auto:") {
                    CutThreshold::Auto {
                        k: k.parse().map_err(|_| bad("cut_threshold"))?,
                    }
                } else {
                    CutThreshold::Fixed(value.parse().map_err(|_| bad("cut_threshold"))?)
                };
            }
            "tmof_bins" => self.tmof_bins = value.parse().map_err(|_| bad("tmof_bins"))?,
            "keyframe_mode" => self.keyframe_mode = KeyframeMode::parse(value)?,
            "wavelet" => self.wavelet = WaveletFamily::parse(value)?,
            "levels" => self.levels = value.parse().map_err(|_| bad("levels"))?,
            "mgd_window" => self.mgd_window = value.parse().map_err(|_| bad("mgd_window"))?,
            "rule_thresholds" => {
                self.rule_thresholds = if value == "auto" {
                    None
                } else {
                    let (a, b) = value
                        .split_once(',')
                        .ok_or_else(|| bad("rule_thresholds"))?;
                    Some((
                        a.trim().parse().map_err(|_| bad("rule_thresholds"))?,
                        b.trim().parse().map_err(|_| bad("rule_thresholds"))?,
                    ))
                };
            }
            "dilate_se" => {
                let (w, h) = value.split_once('x').ok_or_else(|| bad("dilate_se"))?;
                self.dilate_w = w.trim().parse().map_err(|_| bad("dilate_se"))?;
                self.dilate_h = h.trim().parse().map_err(|_| bad("dilate_se"))?;
            }
            "min_height" => self.rules.min_height = value.parse().map_err(|_| bad("min_height"))?,
            "max_height" => self.rules.max_height = value.parse().map_err(|_| bad("max_height"))?,
            "min_width" => self.rules.min_width = value.parse().map_err(|_| bad("min_width"))?,
            "min_area" => self.rules.min_area = value.parse().map_err(|_| bad("min_area"))?,
            "overlap_min" => self.overlap_min = value.parse().map_err(|_| bad("overlap_min"))?,
            "dump_distances" => {
                self.dump_distances = value.parse().map_err(|_| bad("dump_distances"))?
            }
            "dump_subbands" => {
                self.dump_subbands = value.parse().map_err(|_| bad("dump_subbands"))?
            }
            "dump_mgd" => self.dump_mgd = value.parse().map_err(|_| bad("dump_mgd"))?,
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a flat `key=value` config file ('#' starts a comment).
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| Error::config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.moments < 1 {
            return Err(Error::config("moments must be at least 1"));
        }
        if self.weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::config("weights must be positive"));
        }
        if self.distance_q < 1 {
            return Err(Error::config("distance_q must be at least 1"));
        }
        if let CutThreshold::Fixed(t) = self.cut_threshold {
            if t <= 0.0 {
                return Err(Error::config("cut_threshold must be positive"));
            }
        }
        if self.tmof_bins == 0 || 256 % self.tmof_bins as usize != 0 {
            return Err(Error::config("tmof_bins must divide 256"));
        }
        if self.levels < 1 {
            return Err(Error::config("levels must be at least 1"));
        }
        if self.mgd_window < 3 || self.mgd_window % 2 == 0 {
            return Err(Error::config("mgd_window must be odd and at least 3"));
        }
        if self.dilate_w % 2 == 0 || self.dilate_h % 2 == 0 {
            return Err(Error::config("dilate_se dimensions must be odd"));
        }
        if !(self.overlap_min > 0.0 && self.overlap_min <= 1.0) {
            return Err(Error::config("overlap_min must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Canonical key=value rendering of the effective configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("moments".into(), self.moments.to_string());
        map.insert(
            "weights".into(),
            format!("{},{},{}", self.weights[0], self.weights[1], self.weights[2]),
        );
        map.insert("distance_q".into(), self.distance_q.to_string());
        map.insert(
            "cut_threshold".into(),
            match self.cut_threshold {
                CutThreshold::Fixed(t) => t.to_string(),
                CutThreshold::Auto { k } => format!("auto:{k}"),
            },
        );
        map.insert("tmof_bins".into(), self.tmof_bins.to_string());
        map.insert("keyframe_mode".into(), self.keyframe_mode.name().into());
        map.insert("wavelet".into(), self.wavelet.name().into());
        map.insert("levels".into(), self.levels.to_string());
        map.insert("mgd_window".into(), self.mgd_window.to_string());
        map.insert(
            "rule_thresholds".into(),
            match self.rule_thresholds {
                None => "auto".into(),
                Some((a, b)) => format!("{a},{b}"),
            },
        );
        map.insert(
            "dilate_se".into(),
            format!("{}x{}", self.dilate_w, self.dilate_h),
        );
        map.insert("min_height".into(), self.rules.min_height.to_string());
        map.insert("max_height".into(), self.rules.max_height.to_string());
        map.insert("min_width".into(), self.rules.min_width.to_string());
        map.insert("min_area".into(), self.rules.min_area.to_string());
        map.insert("overlap_min".into(), self.overlap_min.to_string());
        map
    }

    fn localize_params(&self) -> LocalizeParams {
        LocalizeParams {
            rule_thresholds: self.rule_thresholds,
            rules: self.rules,
            dilate_w: self.dilate_w,
            dilate_h: self.dilate_h,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub effective: BTreeMap<String, String>,
    /// Raw config file contents, when one was given.
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShotReport {
    pub start: usize,
    pub end: usize,
    pub keyframes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyframeReport {
    pub frame: usize,
    pub shot: usize,
    pub boxes: Vec<Rect>,
    pub annotated: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TimingMs {
    pub decode: f64,
    pub shot_detection: f64,
    pub keyframe_extraction: f64,
    pub localization: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

/// Everything one run produced. Serialized as `report.json`; the
/// `timing_ms` block is excluded from determinism comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub input: String,
    pub config: ConfigEcho,
    pub n_frames: usize,
    pub cuts: Vec<ShotBoundary>,
    pub shots: Vec<ShotReport>,
    pub keyframes: Vec<KeyframeReport>,
    pub error: Option<StageFailure>,
    pub timing_ms: TimingMs,
}

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::in_stage(name, e))
}

fn ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

/// Largest usable odd MGD window for a frame of the given width; the
/// configured window shrinks on narrow frames so the minimum frame size
/// stays processable.
fn effective_mgd_window(requested: usize, width: usize) -> usize {
    let mut n = requested.min(width);
    if n % 2 == 0 {
        n -= 1;
    }
    n.max(3)
}

/// Wavelet enhancement, Laplacian, and MGD for one frame.
pub fn saliency_of_frame(frame: &Frame, config: &PipelineConfig) -> Result<SaliencyMap> {
    let kernel = WaveletKernel::new(config.wavelet, Extension::Symmetric);
    let pyramid = dwt2_multilevel(&frame.y_plane, config.levels, &kernel)?;
    let fused = fuse_details(&pyramid);
    let filtered = laplacian(&fused)?;
    let window = effective_mgd_window(config.mgd_window, frame.width());
    mgd_map(&filtered, window)
}

/// Localize text boxes on one frame with the configured stage stack.
pub fn localize_frame(frame: &Frame, config: &PipelineConfig) -> Result<Vec<TextBox>> {
    let map = saliency_of_frame(frame, config)?;
    localize(&map, &config.localize_params())
}

fn check_min_size(frame: &Frame) -> Result<()> {
    if frame.width() < MIN_FRAME_SIDE || frame.height() < MIN_FRAME_SIDE {
        return Err(Error::domain(format!(
            "{}x{} frame is below the minimum processable size {}x{}",
            frame.width(),
            frame.height(),
            MIN_FRAME_SIDE,
            MIN_FRAME_SIDE
        )));
    }
    Ok(())
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn grid_png(path: &Path, tiles: &[Vec<GrayImage>]) -> Result<()> {
    const GAP: usize = 2;
    let row_heights: Vec<usize> = tiles
        .iter()
        .map(|row| row.iter().map(GrayImage::height).max().unwrap_or(0))
        .collect();
    let width = tiles
        .iter()
        .map(|row| row.iter().map(|t| t.width() + GAP).sum::<usize>())
        .max()
        .unwrap_or(0);
    let height: usize = row_heights.iter().map(|h| h + GAP).sum();
    let mut canvas = image::GrayImage::new(width.max(1) as u32, height.max(1) as u32);
    let mut y0 = 0;
    for (row, rh) in tiles.iter().zip(&row_heights) {
        let mut x0 = 0;
        for tile in row {
            let scaled = tile.rescale_to_255();
            for y in 0..tile.height() {
                for x in 0..tile.width() {
                    let v = scaled.get(x, y).round().clamp(0.0, 255.0) as u8;
                    canvas.put_pixel((x0 + x) as u32, (y0 + y) as u32, image::Luma([v]));
                }
            }
            x0 += tile.width() + GAP;
        }
        y0 += rh + GAP;
    }
    canvas
        .save(path)
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))
}

fn write_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    let scaled = img.rescale_to_255();
    let mut out = image::GrayImage::new(img.width() as u32, img.height() as u32);
    for y in 0..img.height() {
        for x in 0..img.width() {
            out.put_pixel(
                x as u32,
                y as u32,
                image::Luma([scaled.get(x, y).round().clamp(0.0, 255.0) as u8]),
            );
        }
    }
    out.save(path)
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))
}

struct LocalizedKeyframe {
    frame_index: usize,
    shot_index: usize,
    boxes: Vec<TextBox>,
}

/// Run the full video pipeline and write every artifact under
/// `output_dir`. Deterministic for a given config and input.
pub fn run_video(
    input: &Path,
    kind: SourceKind,
    config: &PipelineConfig,
    output_dir: &Path,
) -> Result<RunReport> {
    run_pipeline(input, kind, config, output_dir, false)
}

/// Single-image mode: the image is the sole keyframe and the temporal
/// stages are skipped.
pub fn run_image(input: &Path, config: &PipelineConfig, output_dir: &Path) -> Result<RunReport> {
    run_pipeline(input, SourceKind::Image, config, output_dir, true)
}

fn run_pipeline(
    input: &Path,
    kind: SourceKind,
    config: &PipelineConfig,
    output_dir: &Path,
    image_mode: bool,
) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let mut report = RunReport {
        mode: if image_mode { "image" } else { "video" }.into(),
        input: input.display().to_string(),
        config: ConfigEcho {
            effective: config.echo(),
            file: None,
        },
        n_frames: 0,
        cuts: Vec::new(),
        shots: Vec::new(),
        keyframes: Vec::new(),
        error: None,
        timing_ms: TimingMs::default(),
    };

    let total_start = Instant::now();
    match run_stages(input, kind, config, output_dir, image_mode, &mut report) {
        Ok(()) => {
            report.timing_ms.total = ms(total_start);
            let body = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::format(format!("report: {e}")))?;
            write_text(&output_dir.join("report.json"), &body)?;
            Ok(report)
        }
        Err(e) => {
            // Flag the partial outputs, then surface the failure.
            if let Error::Stage { stage, source } = &e {
                report.error = Some(StageFailure {
                    stage: (*stage).into(),
                    message: source.to_string(),
                });
            } else {
                report.error = Some(StageFailure {
                    stage: "config".into(),
                    message: e.to_string(),
                });
            }
            report.timing_ms.total = ms(total_start);
            if let Ok(body) = serde_json::to_string_pretty(&report) {
                let _ = fs::write(output_dir.join("report.json"), body);
            }
            Err(e)
        }
    }
}

fn run_stages(
    input: &Path,
    kind: SourceKind,
    config: &PipelineConfig,
    output_dir: &Path,
    image_mode: bool,
    report: &mut RunReport,
) -> Result<()> {
    // Decode.
    let t = Instant::now();
    let frames = stage("decode", read_all_frames(input, kind))?;
    stage("decode", check_min_size(&frames[0]))?;
    if image_mode && frames.len() != 1 {
        return Err(Error::in_stage(
            "decode",
            Error::domain(format!("image mode expects one frame, got {}", frames.len())),
        ));
    }
    report.n_frames = frames.len();
    report.timing_ms.decode = ms(t);

    // Shot detection.
    let t = Instant::now();
    let shots: Vec<Shot> = if image_mode {
        vec![Shot { start: 0, end: 0 }]
    } else {
        let features = stage(
            "shot_detection",
            frames
                .par_iter()
                .map(|f| feature_vector(f, config.moments, config.weights))
                .collect::<Result<Vec<_>>>(),
        )?;
        let cuts = stage(
            "shot_detection",
            detect_cuts(&features, config.distance_q, config.cut_threshold),
        )?;
        if config.dump_distances {
            let series = stage("shot_detection", distance_series(&features, config.distance_q))?;
            let mut csv = String::from("frame_index,distance\n");
            for (i, d) in series.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", i + 1, d));
            }
            stage("shot_detection", write_text(&output_dir.join("distances.csv"), &csv))?;
        }
        let shots = cuts_to_shots(&cuts, frames.len());
        report.cuts = cuts;
        shots
    };
    report.timing_ms.shot_detection = ms(t);

    // Keyframe extraction, shots in parallel.
    let t = Instant::now();
    let keyframe_sets: Vec<KeyframeSet> = if image_mode {
        vec![KeyframeSet {
            shot: shots[0],
            keyframe_indices: vec![0],
            distance_curve: vec![0.0],
        }]
    } else {
        stage(
            "keyframe_extraction",
            shots
                .par_iter()
                .map(|&shot| {
                    let slice = &frames[shot.start..=shot.end];
                    match config.keyframe_mode {
                        KeyframeMode::Peaks => extract_keyframes(slice, shot, config.tmof_bins),
                        KeyframeMode::Middle => Ok(KeyframeSet {
                            shot,
                            keyframe_indices: vec![shot.start + shot.frame_count() / 2],
                            distance_curve: vec![0.0; shot.frame_count()],
                        }),
                    }
                })
                .collect::<Result<Vec<_>>>(),
        )?
    };
    report.shots = keyframe_sets
        .iter()
        .map(|ks| ShotReport {
            start: ks.shot.start,
            end: ks.shot.end,
            keyframes: ks.keyframe_indices.clone(),
        })
        .collect();
    report.timing_ms.keyframe_extraction = ms(t);

    // Localization, keyframes in parallel.
    let t = Instant::now();
    let jobs: Vec<(usize, usize)> = keyframe_sets
        .iter()
        .enumerate()
        .flat_map(|(si, ks)| ks.keyframe_indices.iter().map(move |&f| (si, f)))
        .collect();
    let localized = stage(
        "localization",
        jobs.par_iter()
            .map(|&(shot_index, frame_index)| {
                let frame = &frames[frame_index];
                let map = saliency_of_frame(frame, config)?;
                let boxes = localize(&map, &config.localize_params())?;
                Ok((
                    LocalizedKeyframe {
                        frame_index,
                        shot_index,
                        boxes,
                    },
                    map,
                ))
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    report.timing_ms.localization = ms(t);

    // Outputs.
    let mut pred_lines = String::new();
    for (kf, map) in &localized {
        let frame = &frames[kf.frame_index];
        let name = format!("kf_{:05}.png", kf.frame_index);
        stage(
            "write_outputs",
            write_annotated(frame, &kf.boxes, &output_dir.join(&name)),
        )?;
        if config.dump_mgd {
            stage(
                "write_outputs",
                write_gray_png(
                    &output_dir.join(format!("kf_{:05}_mgd.png", kf.frame_index)),
                    &map.mgd,
                ),
            )?;
        }
        if config.dump_subbands {
            let kernel = WaveletKernel::new(config.wavelet, Extension::Symmetric);
            let pyramid = stage(
                "write_outputs",
                dwt2_multilevel(&frame.y_plane, config.levels, &kernel),
            )?;
            let mut rows: Vec<Vec<GrayImage>> = pyramid
                .levels
                .iter()
                .map(|b| vec![b.lh.clone(), b.hl.clone(), b.hh.clone()])
                .collect();
            rows.push(vec![pyramid.ll.clone()]);
            stage(
                "write_outputs",
                grid_png(
                    &output_dir.join(format!("kf_{:05}_subbands.png", kf.frame_index)),
                    &rows,
                ),
            )?;
        }
        let rects: Vec<[usize; 4]> = kf
            .boxes
            .iter()
            .map(|b| [b.rect.x, b.rect.y, b.rect.w, b.rect.h])
            .collect();
        pred_lines.push_str(
            &serde_json::to_string(&serde_json::json!({
                "frame": kf.frame_index,
                "boxes": rects,
            }))
            .expect("prediction line"),
        );
        pred_lines.push('\n');
        report.keyframes.push(KeyframeReport {
            frame: kf.frame_index,
            shot: kf.shot_index,
            boxes: kf.boxes.iter().map(|b| b.rect).collect(),
            annotated: name,
        });
    }
    stage("write_outputs", write_text(&output_dir.join("pred.jsonl"), &pred_lines))?;
    Ok(())
}
