//! Decoding of input media into [`Frame`] values and writing of annotated
//! outputs.
//!
//! Supported inputs: single PNG/PPM images, directories of PNG/PPM frames
//! (lexicographic order), and raw YUV4MPEG2 streams (C420/C444,
//! progressive). Compressed codecs are out of scope; transcode externally.

mod y4m;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gray::GrayImage;
use crate::rect::Rect;
use crate::region::TextBox;

/// One decoded frame as three real-valued YIQ planes.
///
/// Y lies in `[0, 255]`; I and Q keep their signed NTSC ranges
/// (roughly `[-152, 152]` and `[-134, 134]`).
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub y_plane: GrayImage,
    pub i_plane: GrayImage,
    pub q_plane: GrayImage,
}

impl Frame {
    pub fn new(
        index: usize,
        y_plane: GrayImage,
        i_plane: GrayImage,
        q_plane: GrayImage,
    ) -> Result<Self> {
        let (w, h) = (y_plane.width(), y_plane.height());
        for p in [&i_plane, &q_plane] {
            if p.width() != w || p.height() != h {
                return Err(Error::domain(format!(
                    "frame planes disagree: {}x{} vs {}x{}",
                    w,
                    h,
                    p.width(),
                    p.height()
                )));
            }
        }
        Ok(Frame {
            index,
            y_plane,
            i_plane,
            q_plane,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.y_plane.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.y_plane.height()
    }

    /// The three planes in Y, I, Q order.
    pub fn planes(&self) -> [&GrayImage; 3] {
        [&self.y_plane, &self.i_plane, &self.q_plane]
    }
}

// NTSC RGB -> YIQ analysis matrix.
const RGB_TO_YIQ: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
];

/// Convert three 8-bit planes to a YIQ [`Frame`] with the NTSC matrix.
/// I and Q are not clamped.
pub fn rgb_to_yiq(
    index: usize,
    width: usize,
    height: usize,
    r: &[u8],
    g: &[u8],
    b: &[u8],
) -> Result<Frame> {
    let n = width * height;
    if r.len() != n || g.len() != n || b.len() != n {
        return Err(Error::domain(format!(
            "rgb planes of lengths {}/{}/{} do not match {}x{}",
            r.len(),
            g.len(),
            b.len(),
            width,
            height
        )));
    }
    let mut y = Vec::with_capacity(n);
    let mut i = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let (rf, gf, bf) = (r[k] as f64, g[k] as f64, b[k] as f64);
        y.push(RGB_TO_YIQ[0][0] * rf + RGB_TO_YIQ[0][1] * gf + RGB_TO_YIQ[0][2] * bf);
        i.push(RGB_TO_YIQ[1][0] * rf + RGB_TO_YIQ[1][1] * gf + RGB_TO_YIQ[1][2] * bf);
        q.push(RGB_TO_YIQ[2][0] * rf + RGB_TO_YIQ[2][1] * gf + RGB_TO_YIQ[2][2] * bf);
    }
    Frame::new(
        index,
        GrayImage::from_vec(width, height, y)?,
        GrayImage::from_vec(width, height, i)?,
        GrayImage::from_vec(width, height, q)?,
    )
}

/// Exact inverse of the NTSC matrix, computed from the forward
/// coefficients so that the round trip closes to float precision.
pub fn yiq_to_rgb(y: f64, i: f64, q: f64) -> (f64, f64, f64) {
    let m = &RGB_TO_YIQ;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ];
    (
        inv[0][0] * y + inv[0][1] * i + inv[0][2] * q,
        inv[1][0] * y + inv[1][1] * i + inv[1][2] * q,
        inv[2][0] * y + inv[2][1] * i + inv[2][2] * q,
    )
}

/// What kind of source a path points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// A single still image.
    Image,
    /// A directory of numbered frames, lexicographic order.
    ImageSequence,
    /// A raw YUV4MPEG2 stream.
    Y4m,
}

impl SourceKind {
    /// Guess the kind from the path shape: directories are sequences,
    /// `.y4m` files are streams, everything else is a single image.
    pub fn infer(path: &Path) -> SourceKind {
        if path.is_dir() {
            SourceKind::ImageSequence
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("y4m"))
        {
            SourceKind::Y4m
        } else {
            SourceKind::Image
        }
    }
}

/// Ordered stream of frames from one source. Frame indices are
/// consecutive from 0.
pub struct FrameStream {
    inner: StreamInner,
    next_index: usize,
    dims: Option<(usize, usize)>,
}

enum StreamInner {
    Image(Option<PathBuf>),
    Sequence { paths: Vec<PathBuf>, pos: usize },
    Y4m(y4m::Y4mReader),
}

impl FrameStream {
    fn next_frame(&mut self) -> Option<Result<Frame>> {
        let index = self.next_index;
        let frame = match &mut self.inner {
            StreamInner::Image(slot) => {
                let path = slot.take()?;
                load_image_frame(&path, index)
            }
            StreamInner::Sequence { paths, pos } => {
                if *pos >= paths.len() {
                    return None;
                }
                let path = paths[*pos].clone();
                *pos += 1;
                load_image_frame(&path, index)
            }
            StreamInner::Y4m(reader) => match reader.next_frame(index) {
                Ok(Some(f)) => Ok(f),
                Ok(None) => return None,
                Err(e) => Err(e),
            },
        };
        let frame = frame.and_then(|f| {
            match self.dims {
                None => self.dims = Some((f.width(), f.height())),
                Some((w, h)) if (w, h) != (f.width(), f.height()) => {
                    return Err(Error::format(format!(
                        "frame {} is {}x{}, sequence started at {}x{}",
                        index,
                        f.width(),
                        f.height(),
                        w,
                        h
                    )));
                }
                Some(_) => {}
            }
            Ok(f)
        });
        self.next_index += 1;
        Some(frame)
    }
}

impl Iterator for FrameStream {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Result<Frame>> {
        self.next_frame()
    }
}

const FRAME_EXTENSIONS: [&str; 3] = ["png", "ppm", "pgm"];

/// Open a frame source. Frames are delivered in temporal order with
/// indices from 0; a dimension change mid-sequence is a format error.
pub fn read_frame_source(path: &Path, kind: SourceKind) -> Result<FrameStream> {
    let inner = match kind {
        SourceKind::Image => {
            if !path.is_file() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                ));
            }
            StreamInner::Image(Some(path.to_path_buf()))
        }
        SourceKind::ImageSequence => {
            let mut paths: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && p.extension().is_some_and(|ext| {
                            FRAME_EXTENSIONS
                                .iter()
                                .any(|known| ext.eq_ignore_ascii_case(known))
                        })
                })
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::format(format!(
                    "no frames found in {}",
                    path.display()
                )));
            }
            StreamInner::Sequence { paths, pos: 0 }
        }
        SourceKind::Y4m => StreamInner::Y4m(y4m::Y4mReader::open(path)?),
    };
    Ok(FrameStream {
        inner,
        next_index: 0,
        dims: None,
    })
}

/// Decode every frame of a source into memory.
pub fn read_all_frames(path: &Path, kind: SourceKind) -> Result<Vec<Frame>> {
    let frames: Vec<Frame> = read_frame_source(path, kind)?.collect::<Result<_>>()?;
    if frames.is_empty() {
        return Err(Error::format(format!(
            "no frames found in {}",
            path.display()
        )));
    }
    Ok(frames)
}

fn load_image_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut r = Vec::with_capacity(w * h);
    let mut g = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for px in img.pixels() {
        r.push(px.0[0]);
        g.push(px.0[1]);
        b.push(px.0[2]);
    }
    rgb_to_yiq(index, w, h, &r, &g, &b)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    frame: usize,
    boxes: &'a [Rect],
}

/// Render the luminance plane, draw 2-pixel box outlines, and write the
/// PNG plus a JSON sidecar (`<path>.json` with the extension swapped)
/// listing the boxes.
pub fn write_annotated(frame: &Frame, boxes: &[TextBox], path: &Path) -> Result<()> {
    let (w, h) = (frame.width(), frame.height());
    for tb in boxes {
        if !tb.rect.fits_within(w, h) {
            return Err(Error::domain(format!(
                "box {:?} exceeds frame {}x{}",
                tb.rect, w, h
            )));
        }
    }

    let mut img = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v = frame.y_plane.get(x, y).round().clamp(0.0, 255.0) as u8;
            img.put_pixel(x as u32, y as u32, image::Rgb([v, v, v]));
        }
    }
    for tb in boxes {
        draw_outline(&mut img, &tb.rect);
    }
    img.save(path)
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?;

    let rects: Vec<Rect> = boxes.iter().map(|tb| tb.rect).collect();
    let sidecar = Sidecar {
        frame: frame.index,
        boxes: &rects,
    };
    let json_path = path.with_extension("json");
    let body = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::format(format!("sidecar: {e}")))?;
    fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

// 2-pixel-thick outline just inside the rectangle bounds.
fn draw_outline(img: &mut image::RgbImage, rect: &Rect) {
    const OUTLINE: image::Rgb<u8> = image::Rgb([255, 0, 0]);
    const THICKNESS: usize = 2;
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            let dx = (x - rect.x).min(rect.right() - 1 - x);
            let dy = (y - rect.y).min(rect.bottom() - 1 - y);
            if dx < THICKNESS || dy < THICKNESS {
                img.put_pixel(x as u32, y as u32, OUTLINE);
            }
        }
    }
}
