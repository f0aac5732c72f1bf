//! Fast scaled-selective image encryption.
//!
//! A frame is optionally downscaled, a band around the pendulum is
//! selected, and the band alone goes through `T` rounds of
//!
//! 1. cyclic right shift of row `i` by `row_shifts[i]`,
//! 2. cyclic down shift of column `j` by `col_shifts[j]`,
//! 3. forward diffusion in raster order, each output byte chained to the
//!    previous output byte,
//! 4. backward diffusion in reverse raster order, chained to the following
//!    output byte.
//!
//! All keystream material is drawn from one Bülban orbit: per round `M` row
//! values, then `N` column values, then `M·N` diffusion values, each real
//! value `v` quantized as `floor(v·10^5) mod m`. Later rounds continue the
//! same orbit, so encryptor and decryptor stay synchronized on the key alone.
//!
//! With `⊕` the bitwise xor and `+`/`−` modulo 256, forward diffusion is
//!
//! ```text
//! c[0] = (p[0] ⊕ k[0]) + k[0]
//! c[p] = ((p[p] ⊕ k[p]) + k[p−1]) ⊕ c[p−1]
//! ```
//!
//! and backward diffusion mirrors it from the last byte with `k[p+1]` and
//! `c[p+1]`. Output chaining makes a single changed plaintext byte touch
//! every ciphertext byte of the band, while a corrupted ciphertext byte only
//! spoils its raster neighbours on decryption.

use serde::{Deserialize, Serialize};

use crate::chaos::{ChaosParams, Orbit};
use crate::image::GrayImage;
use crate::vision::{self, HoughOptions};
use crate::{Error, Result};

/// Scale applied to chaos values before integer quantization.
pub const QUANTIZATION_SCALE: f64 = 1e5;
/// Default width of the encrypted band, in pixels.
pub const DEFAULT_BAND_WIDTH: usize = 100;

/// Rectangle of rows/columns inside an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Region {
    pub fn full(img: &GrayImage) -> Self {
        Self {
            x0: 0,
            y0: 0,
            rows: img.height(),
            cols: img.width(),
        }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.rows >= 1
            && self.cols >= 1
            && self.x0 + self.cols <= width
            && self.y0 + self.rows <= height
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, img: &GrayImage) -> Result<()> {
        if !self.fits(img.width(), img.height()) {
            return Err(Error::RegionMismatch {
                region: format!("{}x{}+{}+{}", self.cols, self.rows, self.x0, self.y0),
                width: img.width(),
                height: img.height(),
            });
        }
        Ok(())
    }
}

/// How the encrypted area is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionChoice {
    Full,
    Fixed(Region),
    /// Full-height band centered on the detected pendulum.
    Auto { band_width: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipherConfig {
    pub scale_factor: f64,
    pub region: RegionChoice,
    pub rounds: u32,
    pub key: ChaosParams,
}

impl CipherConfig {
    pub fn new(key: ChaosParams, rounds: u32) -> Self {
        Self {
            scale_factor: 1.0,
            region: RegionChoice::Full,
            rounds,
            key,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::param("rounds must be at least 1"));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor <= 1.0) {
            return Err(Error::param(format!(
                "scale factor {} outside (0, 1]",
                self.scale_factor
            )));
        }
        self.key.validate().map_err(|e| Error::InvalidKey(e.to_string()))
    }
}

/// Plaintext framing that travels with a ciphertext frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipherHeader {
    pub x0: usize,
    pub y0: usize,
    #[serde(rename = "M")]
    pub rows: usize,
    #[serde(rename = "N")]
    pub cols: usize,
    pub scale: f64,
    pub rounds: u32,
}

impl CipherHeader {
    pub fn region(&self) -> Region {
        Region {
            x0: self.x0,
            y0: self.y0,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Encrypted {
    pub image: GrayImage,
    pub header: CipherHeader,
    /// Chaos values consumed after the burn-in.
    pub keystream_draws: usize,
}

/// Per-round key material for an `M`x`N` block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyStream {
    pub rows: usize,
    pub cols: usize,
    pub row_shifts: Vec<usize>,
    pub col_shifts: Vec<usize>,
    pub diffusion: Vec<u8>,
}

/// `floor(v · 10^5) mod m`.
pub fn quantize(v: f64, m: u64) -> u64 {
    debug_assert!(m > 0);
    ((v * QUANTIZATION_SCALE).floor() as u64) % m
}

impl KeyStream {
    /// Draws one round of key material from a running orbit.
    pub fn draw(orbit: &mut Orbit, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("keystream dimensions must be positive"));
        }
        let mut next = || orbit.next_value().map_err(|e| Error::InvalidKey(e.to_string()));
        let row_shifts = (0..rows)
            .map(|_| next().map(|v| quantize(v, rows as u64) as usize))
            .collect::<Result<_>>()?;
        let col_shifts = (0..cols)
            .map(|_| next().map(|v| quantize(v, cols as u64) as usize))
            .collect::<Result<_>>()?;
        let diffusion = (0..rows * cols)
            .map(|_| next().map(|v| quantize(v, 256) as u8))
            .collect::<Result<_>>()?;
        Ok(Self {
            rows,
            cols,
            row_shifts,
            col_shifts,
            diffusion,
        })
    }

    fn check(&self, block: &GrayImage) -> Result<()> {
        if block.height() != self.rows || block.width() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.cols, self.rows),
                found: format!("{}x{}", block.width(), block.height()),
            });
        }
        Ok(())
    }
}

/// First-round keystream for an `M`x`N` block.
pub fn derive_keystream(key: &ChaosParams, rows: usize, cols: usize) -> Result<KeyStream> {
    let mut orbit = Orbit::new(*key).map_err(|e| Error::InvalidKey(e.to_string()))?;
    KeyStream::draw(&mut orbit, rows, cols)
}

/// Bilinear downscaling with pixel-center alignment; outputs round half away
/// from zero.
pub fn scale_bilinear(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::param(format!("scale factor {factor} outside (0, 1]")));
    }
    let (w, h) = (img.width(), img.height());
    let ow = (w as f64 * factor).round() as usize;
    let oh = (h as f64 * factor).round() as usize;
    if ow == 0 || oh == 0 {
        return Err(Error::param(format!(
            "scaling {w}x{h} by {factor} gives an empty image"
        )));
    }
    let (rx, ry) = (w as f64 / ow as f64, h as f64 / oh as f64);
    let src = |s: f64, n: usize| {
        let s = s.clamp(0.0, (n - 1) as f64);
        let i = s.floor() as usize;
        (i, (i + 1).min(n - 1), s - i as f64)
    };
    GrayImage::from_fn(ow, oh, |x, y| {
        let (x0, x1, fx) = src((x as f64 + 0.5) * rx - 0.5, w);
        let (y0, y1, fy) = src((y as f64 + 0.5) * ry - 0.5, h);
        let p = |xx, yy| img.get(xx, yy) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8
    })
}

/// Full-height band of `band_width` columns centered on the dominant dark
/// line (the pendulum), clamped to the image.
pub fn select_region(img: &GrayImage, band_width: usize) -> Result<Region> {
    if band_width == 0 {
        return Err(Error::param("band width must be positive"));
    }
    // the band only needs the line's location, so a coarse angle grid does
    let opts = HoughOptions {
        theta_step: 1f64.to_radians(),
        ..HoughOptions::default()
    };
    let peak = vision::hough_peak(img, &opts)?;
    let center = vision::line_support_centroid(img, &peak, &opts)
        .ok_or(Error::NoLineFound { score: peak.score })?;
    let cols = band_width.min(img.width());
    let x0 = (center.0 - cols as f64 / 2.0).round().max(0.0) as usize;
    let x0 = x0.min(img.width() - cols);
    Ok(Region {
        x0,
        y0: 0,
        rows: img.height(),
        cols,
    })
}

/// Row then column cyclic shifts.
pub fn permute(block: &GrayImage, ks: &KeyStream) -> Result<GrayImage> {
    ks.check(block)?;
    let (m, n) = (ks.rows, ks.cols);
    let src = block.as_bytes();
    let mut rowed = vec![0u8; m * n];
    for i in 0..m {
        let s = ks.row_shifts[i] % n;
        let row = &src[i * n..(i + 1) * n];
        let dst = &mut rowed[i * n..(i + 1) * n];
        dst[s..].copy_from_slice(&row[..n - s]);
        dst[..s].copy_from_slice(&row[n - s..]);
    }
    let mut out = vec![0u8; m * n];
    for j in 0..n {
        let s = ks.col_shifts[j] % m;
        for i in 0..m {
            out[((i + s) % m) * n + j] = rowed[i * n + j];
        }
    }
    GrayImage::from_vec(n, m, out)
}

pub fn unpermute(block: &GrayImage, ks: &KeyStream) -> Result<GrayImage> {
    ks.check(block)?;
    let (m, n) = (ks.rows, ks.cols);
    let src = block.as_bytes();
    let mut cols = vec![0u8; m * n];
    for j in 0..n {
        let s = ks.col_shifts[j] % m;
        for i in 0..m {
            cols[i * n + j] = src[((i + s) % m) * n + j];
        }
    }
    let mut out = vec![0u8; m * n];
    for i in 0..m {
        let s = ks.row_shifts[i] % n;
        let row = &cols[i * n..(i + 1) * n];
        let dst = &mut out[i * n..(i + 1) * n];
        dst[..n - s].copy_from_slice(&row[s..]);
        dst[n - s..].copy_from_slice(&row[..s]);
    }
    GrayImage::from_vec(n, m, out)
}

fn diffuse_forward(buf: &mut [u8], k: &[u8]) {
    let mut prev_c = 0u8;
    for p in 0..buf.len() {
        let c = if p == 0 {
            (buf[0] ^ k[0]).wrapping_add(k[0])
        } else {
            (buf[p] ^ k[p]).wrapping_add(k[p - 1]) ^ prev_c
        };
        buf[p] = c;
        prev_c = c;
    }
}

fn undiffuse_forward(buf: &mut [u8], k: &[u8]) {
    for p in (0..buf.len()).rev() {
        buf[p] = if p == 0 {
            buf[0].wrapping_sub(k[0]) ^ k[0]
        } else {
            (buf[p] ^ buf[p - 1]).wrapping_sub(k[p - 1]) ^ k[p]
        };
    }
}

fn diffuse_backward(buf: &mut [u8], k: &[u8]) {
    let last = buf.len() - 1;
    let mut next_c = 0u8;
    for p in (0..=last).rev() {
        let c = if p == last {
            (buf[p] ^ k[p]).wrapping_add(k[p])
        } else {
            (buf[p] ^ k[p]).wrapping_add(k[p + 1]) ^ next_c
        };
        buf[p] = c;
        next_c = c;
    }
}

fn undiffuse_backward(buf: &mut [u8], k: &[u8]) {
    let last = buf.len() - 1;
    for p in 0..=last {
        buf[p] = if p == last {
            buf[p].wrapping_sub(k[p]) ^ k[p]
        } else {
            (buf[p] ^ buf[p + 1]).wrapping_sub(k[p + 1]) ^ k[p]
        };
    }
}

/// Forward then backward output-feedback diffusion.
pub fn diffuse(block: &GrayImage, ks: &KeyStream) -> Result<GrayImage> {
    ks.check(block)?;
    let mut out = block.clone();
    diffuse_forward(out.as_bytes_mut(), &ks.diffusion);
    diffuse_backward(out.as_bytes_mut(), &ks.diffusion);
    Ok(out)
}

pub fn inverse_diffuse(block: &GrayImage, ks: &KeyStream) -> Result<GrayImage> {
    ks.check(block)?;
    let mut out = block.clone();
    undiffuse_backward(out.as_bytes_mut(), &ks.diffusion);
    undiffuse_forward(out.as_bytes_mut(), &ks.diffusion);
    Ok(out)
}

/// Intermediate results of the first diffusion pass, exposed for auditing.
pub fn diffuse_forward_only(block: &GrayImage, ks: &KeyStream) -> Result<GrayImage> {
    ks.check(block)?;
    let mut out = block.clone();
    diffuse_forward(out.as_bytes_mut(), &ks.diffusion);
    Ok(out)
}

fn resolve_region(img: &GrayImage, choice: &RegionChoice) -> Result<Region> {
    let region = match choice {
        RegionChoice::Full => Region::full(img),
        RegionChoice::Fixed(r) => *r,
        RegionChoice::Auto { band_width } => select_region(img, *band_width)?,
    };
    region.check(img)?;
    Ok(region)
}

/// Scales, selects and encrypts a frame. Pixels outside the region are
/// passed through unchanged.
pub fn encrypt(img: &GrayImage, cfg: &CipherConfig) -> Result<Encrypted> {
    cfg.validate()?;
    let mut frame = if cfg.scale_factor < 1.0 {
        scale_bilinear(img, cfg.scale_factor)?
    } else {
        img.clone()
    };
    let region = resolve_region(&frame, &cfg.region)?;
    let mut orbit = Orbit::new(cfg.key).map_err(|e| Error::InvalidKey(e.to_string()))?;
    let mut block = frame.crop(region.x0, region.y0, region.cols, region.rows)?;
    for _ in 0..cfg.rounds {
        let ks = KeyStream::draw(&mut orbit, region.rows, region.cols)?;
        block = permute(&block, &ks)?;
        diffuse_forward(block.as_bytes_mut(), &ks.diffusion);
        diffuse_backward(block.as_bytes_mut(), &ks.diffusion);
    }
    frame.paste(&block, region.x0, region.y0)?;
    Ok(Encrypted {
        image: frame,
        header: CipherHeader {
            x0: region.x0,
            y0: region.y0,
            rows: region.rows,
            cols: region.cols,
            scale: cfg.scale_factor,
            rounds: cfg.rounds,
        },
        keystream_draws: orbit.draws(),
    })
}

/// Inverts [`encrypt`] given the header it produced. The result has the
/// (possibly scaled) dimensions of the ciphertext frame.
pub fn decrypt(img: &GrayImage, header: &CipherHeader, key: &ChaosParams) -> Result<GrayImage> {
    if header.rounds < 1 {
        return Err(Error::param("rounds must be at least 1"));
    }
    let region = header.region();
    region.check(img)?;
    key.validate().map_err(|e| Error::InvalidKey(e.to_string()))?;
    let mut orbit = Orbit::new(*key).map_err(|e| Error::InvalidKey(e.to_string()))?;
    let streams = (0..header.rounds)
        .map(|_| KeyStream::draw(&mut orbit, region.rows, region.cols))
        .collect::<Result<Vec<_>>>()?;
    let mut block = img.crop(region.x0, region.y0, region.cols, region.rows)?;
    for ks in streams.iter().rev() {
        undiffuse_backward(block.as_bytes_mut(), &ks.diffusion);
        undiffuse_forward(block.as_bytes_mut(), &ks.diffusion);
        block = unpermute(&block, ks)?;
    }
    let mut out = img.clone();
    out.paste(&block, region.x0, region.y0)?;
    Ok(out)
}

/// Decrypts with an explicit configuration, rejecting a header whose
/// framing disagrees with it.
pub fn decrypt_with_config(
    img: &GrayImage,
    header: &CipherHeader,
    cfg: &CipherConfig,
) -> Result<GrayImage> {
    cfg.validate()?;
    let fixed_mismatch = matches!(cfg.region, RegionChoice::Fixed(r) if r != header.region());
    if fixed_mismatch || header.rounds != cfg.rounds || header.scale != cfg.scale_factor {
        return Err(Error::RegionMismatch {
            region: format!(
                "header {}x{}+{}+{} (scale {}, {} rounds) vs config",
                header.cols, header.rows, header.x0, header.y0, header.scale, header.rounds
            ),
            width: img.width(),
            height: img.height(),
        });
    }
    decrypt(img, header, &cfg.key)
}

/// Probability `1 / C(ni, ns)` that a uniformly placed shear of `ns` of the
/// `ni` ciphertext pixels covers one specific `ns`-pixel set; evaluated in
/// log space.
pub fn shear_compromise_probability(ni: u64, ns: u64) -> Result<f64> {
    if ns > ni {
        return Err(Error::param(format!(
            "sheared pixels ({ns}) exceed image pixels ({ni})"
        )));
    }
    let s = ns.min(ni - ns);
    let ln_binom: f64 = (1..=s)
        .map(|k| ((ni - s + k) as f64).ln() - (k as f64).ln())
        .sum();
    Ok((-ln_binom).exp())
}
