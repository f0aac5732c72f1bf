//! 8-bit grayscale rasters and binary PGM (P5) I/O.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    /// A `width`x`height` image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bytes", width * height),
                found: format!("{} bytes", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                found: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }

    /// Copies the `cols`x`rows` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, cols: usize, rows: usize) -> Result<GrayImage> {
        self.check_window(x0, y0, cols, rows)?;
        let mut data = Vec::with_capacity(cols * rows);
        for y in y0..y0 + rows {
            let start = y * self.width + x0;
            data.extend_from_slice(&self.data[start..start + cols]);
        }
        GrayImage::from_vec(cols, rows, data)
    }

    /// Writes `patch` into this image with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, patch: &GrayImage, x0: usize, y0: usize) -> Result<()> {
        self.check_window(x0, y0, patch.width, patch.height)?;
        for y in 0..patch.height {
            let dst = (y0 + y) * self.width + x0;
            let src = y * patch.width;
            self.data[dst..dst + patch.width].copy_from_slice(&patch.data[src..src + patch.width]);
        }
        Ok(())
    }

    fn check_window(&self, x0: usize, y0: usize, cols: usize, rows: usize) -> Result<()> {
        if cols == 0 || rows == 0 || x0 + cols > self.width || y0 + rows > self.height {
            return Err(Error::RegionMismatch {
                region: format!("{cols}x{rows}+{x0}+{y0}"),
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        self.to_pgm_with_comment(None)
    }

    /// P5 encoding with an optional single-line header comment.
    pub fn to_pgm_with_comment(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = b"P5\n".to_vec();
        if let Some(c) = comment {
            out.extend_from_slice(format!("# {}\n", c.replace(['\n', '\r'], " ")).as_bytes());
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    /// Decodes a PGM. Binary P5 and ASCII P2 are accepted; maxval must be
    /// at most 255 and is rescaled to 255 when smaller.
    pub fn from_pgm(bytes: &[u8]) -> Result<GrayImage> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos).ok_or_else(|| Error::Pgm("empty file".into()))?;
        let binary = match magic {
            b"P5" => true,
            b"P2" => false,
            other => {
                return Err(Error::Pgm(format!(
                    "unsupported magic {:?}",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        let width = parse_header_number(bytes, &mut pos, "width")?;
        let height = parse_header_number(bytes, &mut pos, "height")?;
        let maxval = parse_header_number(bytes, &mut pos, "maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
        }
        let n = width * height;
        let mut data = if binary {
            // exactly one whitespace byte separates the header from the raster
            pos += 1;
            let raster = bytes
                .get(pos..pos + n)
                .ok_or_else(|| Error::Pgm(format!("raster truncated: need {n} bytes")))?;
            raster.to_vec()
        } else {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                let s = parse_header_number(bytes, &mut pos, "pixel")?;
                if s > maxval {
                    return Err(Error::Pgm(format!("pixel {s} exceeds maxval {maxval}")));
                }
                v.push(s as u8);
            }
            v
        };
        if maxval != 255 {
            for p in &mut data {
                *p = ((*p as u32 * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8;
            }
        }
        GrayImage::from_vec(width, height, data).map_err(|e| Error::Pgm(e.to_string()))
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        GrayImage::from_pgm(&bytes)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_pgm_with_comment(path, None)
    }

    pub fn write_pgm_with_comment(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm_with_comment(comment)).map_err(|e| Error::io(path, e))
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos).ok_or_else(|| Error::Pgm(format!("missing {what}")))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Pgm(format!("bad {what} {:?}", String::from_utf8_lossy(tok))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_dims() {
        assert!(GrayImage::from_vec(0, 3, vec![]).is_err());
        assert!(GrayImage::from_vec(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn parses_ascii_with_comments() {
        let src = b"P2\n# made by hand\n3 1\n# max\n15\n0 15 7\n";
        let img = GrayImage::from_pgm(src).unwrap();
        assert_eq!(img.as_bytes(), &[0, 255, 119]);
    }

    #[test]
    fn truncated_raster_is_an_error() {
        let mut bytes = GrayImage::filled(4, 4, 9).unwrap().to_pgm();
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(GrayImage::from_pgm(&bytes), Err(Error::Pgm(_))));
    }

    #[test]
    fn crop_and_paste() {
        let img = GrayImage::from_fn(5, 4, |x, y| (10 * y + x) as u8).unwrap();
        let c = img.crop(1, 2, 3, 2).unwrap();
        assert_eq!(c.as_bytes(), &[21, 22, 23, 31, 32, 33]);
        let mut blank = GrayImage::filled(5, 4, 0).unwrap();
        blank.paste(&c, 1, 2).unwrap();
        assert_eq!(blank.get(3, 3), 33);
        assert!(img.crop(3, 0, 3, 1).is_err());
    }

    proptest! {
        #[test]
        fn pgm_roundtrip(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
            let img = GrayImage::from_fn(w, h, |x, y| {
                (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13) as u64) >> 3) as u8
            }).unwrap();
            prop_assert_eq!(GrayImage::from_pgm(&img.to_pgm()).unwrap(), img);
        }
    }
}
