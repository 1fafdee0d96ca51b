//! Deterministic synthetic test inputs: videos with known cut positions
//! and frames with text rendered at known boxes, so acceptance runs
//! need no external dataset.

mod font;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::rect::Rect;

/// Scene background fill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Background {
    /// Uniform gray level.
    Solid { level: u8 },
    /// Per-pixel uniform noise in `[low, high]`, fresh each frame.
    Noise { low: u8, high: u8 },
    /// Horizontal gradient from `from` at the left edge to `to` at the
    /// right.
    Gradient { from: u8, to: u8 },
    /// Solid level with a sparse fraction of pixels replaced by uniform
    /// random values (impulse noise), fresh each frame.
    Speckle { level: u8, density: f64 },
}

/// One text line rendered from the embedded 5x7 glyphs, scaled by an
/// integer factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextItem {
    pub x: usize,
    pub y: usize,
    pub scale: usize,
    pub text: String,
    pub intensity: u8,
}

impl TextItem {
    /// Tight bounding box of the rendered line: glyphs are
    /// `5*scale` wide with a `scale`-wide gap, `7*scale` tall.
    pub fn extent(&self) -> Rect {
        let n = self.text.chars().count();
        let w = if n == 0 {
            0
        } else {
            n * font::GLYPH_WIDTH * self.scale + (n - 1) * self.scale
        };
        Rect::new(self.x, self.y, w, font::GLYPH_HEIGHT * self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub duration: usize,
    pub background: Background,
    #[serde(default)]
    pub texts: Vec<TextItem>,
}

/// Full corpus description; `generate` is deterministic in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub scenes: Vec<Scene>,
}

impl CorpusSpec {
    pub fn from_json(json: &str) -> Result<CorpusSpec> {
        let spec: CorpusSpec =
            serde_json::from_str(json).map_err(|e| Error::config(format!("corpus spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::config("corpus spec has no scenes"));
        }
        for (si, scene) in self.scenes.iter().enumerate() {
            if scene.duration == 0 {
                return Err(Error::config(format!("scene {si} has zero duration")));
            }
            match scene.background {
                Background::Noise { low, high } if low > high => {
                    return Err(Error::config(format!(
                        "scene {si} noise range {low}..{high} is inverted"
                    )));
                }
                Background::Speckle { density, .. } if !(0.0..=1.0).contains(&density) => {
                    return Err(Error::config(format!(
                        "scene {si} speckle density {density} outside [0, 1]"
                    )));
                }
                _ => {}
            }
            for (ti, item) in scene.texts.iter().enumerate() {
                if item.scale == 0 {
                    return Err(Error::config(format!("scene {si} text {ti} has scale 0")));
                }
                if item.text.is_empty() {
                    return Err(Error::config(format!("scene {si} text {ti} is empty")));
                }
                if !item.extent().fits_within(self.width, self.height) {
                    return Err(Error::config(format!(
                        "scene {si} text {ti} extent {:?} exceeds {}x{}",
                        item.extent(),
                        self.width,
                        self.height
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.scenes.iter().map(|s| s.duration).sum()
    }

    /// Frame indices where a new scene starts (the cut positions).
    pub fn cut_positions(&self) -> Vec<usize> {
        let mut cuts = Vec::new();
        let mut acc = 0;
        for scene in &self.scenes[..self.scenes.len() - 1] {
            acc += scene.duration;
            cuts.push(acc);
        }
        cuts
    }

    /// Ground truth per frame: each frame carries its scene's text boxes.
    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        let mut out = Vec::with_capacity(self.total_frames());
        let mut index = 0usize;
        for scene in &self.scenes {
            let boxes: Vec<Rect> = scene.texts.iter().map(TextItem::extent).collect();
            for _ in 0..scene.duration {
                out.push(GroundTruth::new(index, boxes.clone()));
                index += 1;
            }
        }
        out
    }
}

fn render_background(spec: &CorpusSpec, background: Background, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = spec.width * spec.height;
    match background {
        Background::Solid { level } => vec![level; n],
        Background::Noise { low, high } => (0..n).map(|_| rng.random_range(low..=high)).collect(),
        Background::Gradient { from, to } => {
            let mut buf = Vec::with_capacity(n);
            let span = spec.width.max(2) - 1;
            for _ in 0..spec.height {
                for x in 0..spec.width {
                    let t = x as f64 / span as f64;
                    buf.push((from as f64 + t * (to as f64 - from as f64)).round() as u8);
                }
            }
            buf
        }
        Background::Speckle { level, density } => (0..n)
            .map(|_| {
                if rng.random::<f64>() < density {
                    rng.random_range(0..=255)
                } else {
                    level
                }
            })
            .collect(),
    }
}

fn render_text(buf: &mut [u8], width: usize, item: &TextItem) {
    let mut pen_x = item.x;
    for c in item.text.chars() {
        let g = font::glyph(c);
        for row in 0..font::GLYPH_HEIGHT {
            for col in 0..font::GLYPH_WIDTH {
                if !font::glyph_pixel(g, col, row) {
                    continue;
                }
                for dy in 0..item.scale {
                    let y = item.y + row * item.scale + dy;
                    let base = y * width + pen_x + col * item.scale;
                    buf[base..base + item.scale].fill(item.intensity);
                }
            }
        }
        pen_x += (font::GLYPH_WIDTH + 1) * item.scale;
    }
}

/// Render every frame as an 8-bit luminance buffer.
pub fn render_luma_frames(spec: &CorpusSpec) -> Result<Vec<Vec<u8>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::with_capacity(spec.total_frames());
    for scene in &spec.scenes {
        for _ in 0..scene.duration {
            let mut buf = render_background(spec, scene.background, &mut rng);
            for item in &scene.texts {
                render_text(&mut buf, spec.width, item);
            }
            frames.push(buf);
        }
    }
    Ok(frames)
}

/// Paths written by [`generate`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub frames_dir: PathBuf,
    pub ground_truth: PathBuf,
    pub cuts: PathBuf,
    pub n_frames: usize,
}

/// Write the corpus to disk: numbered PNG frames under
/// `out_dir/frames/`, per-frame ground truth as `gt.jsonl`, and the cut
/// list as `cuts.json`. Byte-identical for identical specs.
pub fn generate(spec: &CorpusSpec, out_dir: &Path) -> Result<CorpusFiles> {
    let frames = render_luma_frames(spec)?;
    let frames_dir = out_dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (i, buf) in frames.iter().enumerate() {
        let img = image::GrayImage::from_raw(spec.width as u32, spec.height as u32, buf.clone())
            .expect("buffer sized by construction");
        let path = frames_dir.join(format!("frame_{i:05}.png"));
        img.save(&path)
            .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?;
    }

    let gt_path = out_dir.join("gt.jsonl");
    let mut gt_body = String::new();
    for gt in spec.ground_truth() {
        let boxes: Vec<[usize; 4]> = gt.boxes.iter().map(|b| [b.x, b.y, b.w, b.h]).collect();
        gt_body.push_str(
            &serde_json::to_string(&serde_json::json!({"frame": gt.frame, "boxes": boxes}))
                .expect("jsonl line"),
        );
        gt_body.push('\n');
    }
    fs::write(&gt_path, gt_body).map_err(|e| Error::io(&gt_path, e))?;

    let cuts_path = out_dir.join("cuts.json");
    let cuts_body =
        serde_json::to_string(&spec.cut_positions()).expect("cut list serializes");
    fs::write(&cuts_path, cuts_body).map_err(|e| Error::io(&cuts_path, e))?;

    Ok(CorpusFiles {
        frames_dir,
        ground_truth: gt_path,
        cuts: cuts_path,
        n_frames: frames.len(),
    })
}
