//! Binary greyscale PGM (P5) frames.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::error::{invalid, CorpcaError, Result};

/// A decoded PGM image. Samples are stored row-major as in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl PgmImage {
    /// Pixels scaled to `[0, 1]` by `maxval`, stacked column by column.
    pub fn to_vector(&self) -> DVector<f64> {
        let scale = self.maxval as f64;
        let (w, h) = (self.width, self.height);
        DVector::from_fn(w * h, |k, _| {
            let (col, row) = (k / h, k % h);
            self.samples[row * w + col] as f64 / scale
        })
    }

    /// Quantises a column-major vector in `[0, 1]` (values outside are
    /// clamped).
    pub fn from_vector(v: &DVector<f64>, width: usize, height: usize, maxval: u16) -> Result<Self> {
        if v.len() != width * height {
            return Err(invalid(format!(
                "vector of length {} does not fit a {width}x{height} image",
                v.len()
            )));
        }
        if maxval == 0 {
            return Err(invalid("maxval must be >= 1"));
        }
        let scale = maxval as f64;
        let mut samples = vec![0u16; width * height];
        for (k, &value) in v.iter().enumerate() {
            let (col, row) = (k / height, k % height);
            let q = (value.clamp(0.0, 1.0) * scale).round();
            samples[row * width + col] = if q.is_finite() { q as u16 } else { 0 };
        }
        Ok(PgmImage {
            width,
            height,
            maxval,
            samples,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.samples.iter().map(|&s| s as u8));
        } else {
            for &s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
        out
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn error(&self, detail: impl Into<String>) -> CorpcaError {
        CorpcaError::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos,
            detail: detail.into(),
        }
    }

    /// Skips whitespace and `#` comments that run to the end of the line.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| {
            let mut e = self.error(format!("{what} out of range"));
            if let CorpcaError::Parse { offset, .. } = &mut e {
                *offset = start;
            }
            e
        })
    }
}

/// Decodes a P5 file held in memory. `path` is only used in errors.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<PgmImage> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if bytes.get(0..2) != Some(b"P5") {
        return Err(cur.error("missing P5 magic number"));
    }
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(cur.error("expected whitespace after magic number"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.error("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.error(format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(cur.pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(cur.error("expected a single whitespace before the raster"));
    }
    cur.pos += 1;

    let wide = maxval > 255;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.error("image dimensions overflow"))?;
    let need = count * if wide { 2 } else { 1 };
    let raster = &bytes[cur.pos..];
    if raster.len() < need {
        cur.pos = bytes.len();
        return Err(cur.error(format!("raster truncated: need {need} bytes, found {}", raster.len())));
    }
    let samples: Vec<u16> = if wide {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster[..need].iter().map(|&b| b as u16).collect()
    };
    if let Some(pos) = samples.iter().position(|&s| s as usize > maxval) {
        cur.pos += pos * if wide { 2 } else { 1 };
        return Err(cur.error(format!("sample exceeds maxval {maxval}")));
    }
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: &Path, image: &PgmImage) -> Result<()> {
    fs::write(path, image.encode())?;
    Ok(())
}

/// Frames of equal size, vectorised column by column with values in
/// `[0, 1]`, and optional ground-truth foreground masks.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<DVector<f64>>,
    pub masks: Option<Vec<Vec<bool>>>,
}

impl FrameSequence {
    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// `*` matches any run of characters and `?` any single one.
pub fn wildcard_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let s: Vec<char> = name.chars().collect();
    let (mut pi, mut si) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == s[si]) {
            pi += 1;
            si += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, si));
            pi += 1;
        } else if let Some((sp, ss)) = star {
            pi = sp + 1;
            si = ss + 1;
            star = Some((sp, ss + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Files in `dir` whose names match `pattern`, sorted by name.
pub fn matching_files(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name();
        if wildcard_match(pattern, &name.to_string_lossy()) {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every matching P5 frame in `dir`, sorted by file name.
pub fn load_pgm_sequence(dir: &Path, pattern: &str) -> Result<FrameSequence> {
    let files = matching_files(dir, pattern)?;
    if files.is_empty() {
        return Err(CorpcaError::EmptySequence(format!(
            "no files matching {pattern:?} in {}",
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut shape = None;
    for path in &files {
        let img = read_pgm(path)?;
        match shape {
            None => shape = Some((img.width, img.height)),
            Some((w, h)) if (w, h) != (img.width, img.height) => {
                return Err(CorpcaError::Format {
                    path: path.clone(),
                    detail: format!("frame is {}x{}, expected {w}x{h}", img.width, img.height),
                })
            }
            _ => {}
        }
        frames.push(img.to_vector());
    }
    let (width, height) = shape.expect("at least one frame");
    Ok(FrameSequence {
        width,
        height,
        frames,
        masks: None,
    })
}

/// Loads masks from `dir` (nonzero pixels are foreground) and checks them
/// against the frames they belong to.
pub fn load_masks(dir: &Path, pattern: &str, seq: &FrameSequence) -> Result<Vec<Vec<bool>>> {
    let masks = load_pgm_sequence(dir, pattern)?;
    if (masks.width, masks.height) != (seq.width, seq.height) {
        return Err(CorpcaError::Format {
            path: dir.to_path_buf(),
            detail: format!(
                "masks are {}x{}, frames are {}x{}",
                masks.width, masks.height, seq.width, seq.height
            ),
        });
    }
    if masks.len() != seq.len() {
        return Err(CorpcaError::Format {
            path: dir.to_path_buf(),
            detail: format!("{} masks for {} frames", masks.len(), seq.len()),
        });
    }
    Ok(masks
        .frames
        .iter()
        .map(|f| f.iter().map(|&v| v > 0.0).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_column_major() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\xff\x00";
        let img = decode_pgm(bytes, Path::new("t.pgm")).unwrap();
        let v = img.to_vector();
        assert_eq!(v.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(img.encode(), bytes.to_vec());
    }

    #[test]
    fn column_major_order_is_by_column() {
        // row 0: 10 20 30, row 1: 40 50 60
        let img = PgmImage {
            width: 3,
            height: 2,
            maxval: 100,
            samples: vec![10, 20, 30, 40, 50, 60],
        };
        let v = img.to_vector();
        assert_eq!(v.as_slice(), &[0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
        let back = PgmImage::from_vector(&v, 3, 2, 100).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn comments_and_sixteen_bit() {
        let mut bytes = b"P5 # a comment\n1 2\n# another\n1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        bytes.extend_from_slice(&1000u16.to_be_bytes());
        let img = decode_pgm(&bytes, Path::new("c.pgm")).unwrap();
        assert_eq!(img.samples, vec![500, 1000]);
        assert_eq!(img.to_vector().as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let err = decode_pgm(b"P6\n1 1\n255\n\x00", Path::new("x.pgm")).unwrap_err();
        assert!(matches!(err, CorpcaError::Parse { offset: 0, .. }));
        let err = decode_pgm(b"P5\n1 x\n255\n\x00", Path::new("x.pgm")).unwrap_err();
        assert!(matches!(err, CorpcaError::Parse { offset: 5, .. }));
        let err = decode_pgm(b"P5\n2 2\n255\n\x00", Path::new("x.pgm")).unwrap_err();
        assert_eq!(err.kind(), "parse");
        let err = decode_pgm(b"P5\n1 1\n70000\n\x00\x00", Path::new("x.pgm")).unwrap_err();
        assert_eq!(err.kind(), "parse");
    }

    #[test]
    fn wildcard() {
        assert!(wildcard_match("*.pgm", "frame_001.pgm"));
        assert!(wildcard_match("frame_???.pgm", "frame_001.pgm"));
        assert!(!wildcard_match("*.pgm", "frame.csv"));
        assert!(wildcard_match("*", ""));
        assert!(wildcard_match("a*b*c", "axxbyyc"));
    }
}
