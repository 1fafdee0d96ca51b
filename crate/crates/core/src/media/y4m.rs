//! Minimal YUV4MPEG2 stream reader: C420/C444 planar, progressive only.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::media::{rgb_to_yiq, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChromaFormat {
    C420,
    C444,
}

pub(super) struct Y4mReader {
    reader: BufReader<File>,
    path: PathBuf,
    width: usize,
    height: usize,
    chroma: ChromaFormat,
}

impl Y4mReader {
    pub(super) fn open(path: &Path) -> Result<Y4mReader> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let header = read_line(&mut reader, path)?;
        let mut tokens = header.split(' ');
        if tokens.next() != Some("YUV4MPEG2") {
            return Err(Error::format(format!(
                "{}: missing YUV4MPEG2 signature",
                path.display()
            )));
        }

        let mut width = None;
        let mut height = None;
        let mut chroma = ChromaFormat::C420; // stream default
        for token in tokens {
            let (tag, value) = match token.split_at_checked(1) {
                Some(parts) => parts,
                None => continue,
            };
            match tag {
                "W" => width = Some(parse_dim(value, path, "W")?),
                "H" => height = Some(parse_dim(value, path, "H")?),
                "I" => {
                    if value != "p" {
                        return Err(Error::format(format!(
                            "{}: interlaced streams (I{}) are unsupported",
                            path.display(),
                            value
                        )));
                    }
                }
                "C" => {
                    chroma = match value {
                        "444" => ChromaFormat::C444,
                        "420" | "420jpeg" | "420mpeg2" | "420paldv" => ChromaFormat::C420,
                        other => {
                            return Err(Error::format(format!(
                                "{}: unsupported colorspace C{}",
                                path.display(),
                                other
                            )));
                        }
                    };
                }
                // F (frame rate), A (aspect), X (extension) carry no
                // information this reader needs.
                _ => {}
            }
        }

        let width = width
            .ok_or_else(|| Error::format(format!("{}: header lacks W token", path.display())))?;
        let height = height
            .ok_or_else(|| Error::format(format!("{}: header lacks H token", path.display())))?;
        if chroma == ChromaFormat::C420 && (width % 2 != 0 || height % 2 != 0) {
            return Err(Error::format(format!(
                "{}: C420 requires even dimensions, got {}x{}",
                path.display(),
                width,
                height
            )));
        }

        Ok(Y4mReader {
            reader,
            path: path.to_path_buf(),
            width,
            height,
            chroma,
        })
    }

    pub(super) fn next_frame(&mut self, index: usize) -> Result<Option<Frame>> {
        let mut first = [0u8; 1];
        match self.reader.read(&mut first) {
            Ok(0) => return Ok(None),
            Ok(_) => {}
            Err(e) => return Err(Error::io(&self.path, e)),
        }
        let rest = read_line(&mut self.reader, &self.path)?;
        let marker = format!("{}{}", first[0] as char, rest);
        if marker != "FRAME" && !marker.starts_with("FRAME ") {
            return Err(Error::format(format!(
                "{}: expected FRAME marker, got {:?}",
                self.path.display(),
                marker
            )));
        }

        let (w, h) = (self.width, self.height);
        let y = self.read_plane(w * h)?;
        let (cb, cr) = match self.chroma {
            ChromaFormat::C444 => (self.read_plane(w * h)?, self.read_plane(w * h)?),
            ChromaFormat::C420 => {
                let cw = w / 2;
                let ch = h / 2;
                let cb_sub = self.read_plane(cw * ch)?;
                let cr_sub = self.read_plane(cw * ch)?;
                (upsample2x(&cb_sub, cw, ch, w, h), upsample2x(&cr_sub, cw, ch, w, h))
            }
        };

        let mut r = Vec::with_capacity(w * h);
        let mut g = Vec::with_capacity(w * h);
        let mut b = Vec::with_capacity(w * h);
        for k in 0..w * h {
            let (rr, gg, bb) = ycbcr_to_rgb(y[k], cb[k], cr[k]);
            r.push(rr);
            g.push(gg);
            b.push(bb);
        }
        rgb_to_yiq(index, w, h, &r, &g, &b).map(Some)
    }

    fn read_plane(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.reader.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(format!("{}: truncated frame payload", self.path.display()))
            } else {
                Error::io(&self.path, e)
            }
        })?;
        Ok(buf)
    }
}

fn parse_dim(value: &str, path: &Path, tag: &str) -> Result<usize> {
    let v: usize = value.parse().map_err(|_| {
        Error::format(format!("{}: bad {} token {:?}", path.display(), tag, value))
    })?;
    if v == 0 {
        return Err(Error::format(format!(
            "{}: zero {} dimension",
            path.display(),
            tag
        )));
    }
    Ok(v)
}

fn read_line(reader: &mut BufReader<File>, path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte) {
            Ok(0) => {
                return Err(Error::format(format!(
                    "{}: unexpected end of stream in header",
                    path.display()
                )));
            }
            Ok(_) => {
                if byte[0] == b'\n' {
                    break;
                }
                bytes.push(byte[0]);
                if bytes.len() > 4096 {
                    return Err(Error::format(format!(
                        "{}: unterminated header line",
                        path.display()
                    )));
                }
            }
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    String::from_utf8(bytes)
        .map_err(|_| Error::format(format!("{}: non-ascii header", path.display())))
}

// Nearest-neighbor 2x chroma upsampling.
fn upsample2x(sub: &[u8], cw: usize, ch: usize, w: usize, h: usize) -> Vec<u8> {
    let mut full = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = (y / 2).min(ch - 1);
        for x in 0..w {
            let sx = (x / 2).min(cw - 1);
            full.push(sub[sy * cw + sx]);
        }
    }
    full
}

// Full-range BT.601.
fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8) -> (u8, u8, u8) {
    let y = y as f64;
    let cb = cb as f64 - 128.0;
    let cr = cr as f64 - 128.0;
    let r = y + 1.402 * cr;
    let g = y - 0.344136 * cb - 0.714136 * cr;
    let b = y + 1.772 * cb;
    (
        r.round().clamp(0.0, 255.0) as u8,
        g.round().clamp(0.0, 255.0) as u8,
        b.round().clamp(0.0, 255.0) as u8,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{read_all_frames, SourceKind};
    use std::io::Write;

    fn write_y4m(path: &Path, header: &str, frames: &[Vec<u8>]) {
        let mut file = File::create(path).unwrap();
        writeln!(file, "{header}").unwrap();
        for payload in frames {
            writeln!(file, "FRAME").unwrap();
            file.write_all(payload).unwrap();
        }
    }

    // C420: Y (w*h) + Cb (w/2*h/2) + Cr, neutral chroma = 128.
    fn c420_payload(w: usize, h: usize, luma: u8) -> Vec<u8> {
        let mut p = vec![luma; w * h];
        p.extend(vec![128u8; (w / 2) * (h / 2) * 2]);
        p
    }

    #[test]
    fn minimal_c420_stream_decodes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        write_y4m(
            &path,
            "YUV4MPEG2 W16 H16 F25:1",
            &[c420_payload(16, 16, 40), c420_payload(16, 16, 200)],
        );
        let frames = read_all_frames(&path, SourceKind::Y4m).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!((frames[0].width(), frames[0].height()), (16, 16));
        assert_eq!(frames[1].index, 1);
        // Neutral chroma means gray; Y carries through BT.601 identity.
        assert!((frames[0].y_plane.get(3, 3) - 40.0).abs() < 1.0);
        assert!((frames[1].y_plane.get(3, 3) - 200.0).abs() < 1.0);
    }

    #[test]
    fn c444_stream_decodes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let mut payload = vec![90u8; 8 * 8];
        payload.extend(vec![128u8; 8 * 8 * 2]);
        write_y4m(&path, "YUV4MPEG2 W8 H8 F30:1 Ip A1:1 C444", &[payload]);
        let frames = read_all_frames(&path, SourceKind::Y4m).unwrap();
        assert_eq!(frames.len(), 1);
        assert!((frames[0].y_plane.get(0, 0) - 90.0).abs() < 1.0);
    }

    #[test]
    fn bad_signature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        std::fs::write(&path, b"YUV4MPEG3 W8 H8\n").unwrap();
        assert!(read_all_frames(&path, SourceKind::Y4m).is_err());
    }

    #[test]
    fn truncated_frame_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let mut payload = c420_payload(16, 16, 40);
        payload.truncate(100);
        write_y4m(&path, "YUV4MPEG2 W16 H16 F25:1", &[payload]);
        let err = read_all_frames(&path, SourceKind::Y4m).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn interlaced_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        write_y4m(&path, "YUV4MPEG2 W16 H16 F25:1 It", &[]);
        assert!(read_all_frames(&path, SourceKind::Y4m).is_err());
    }

    #[test]
    fn odd_dims_with_c420_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        write_y4m(&path, "YUV4MPEG2 W15 H16 F25:1", &[]);
        assert!(read_all_frames(&path, SourceKind::Y4m).is_err());
    }
}
