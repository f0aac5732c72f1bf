//! Seeded eavesdropping attacks on transmitted frames.
//!
//! Each attack is a pure function of `(image, parameters, seed)`. Randomness
//! comes from [`crate::seed::rng`], so a recorded seed replays an attack
//! exactly.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image::GrayImage;
use crate::seed;
use crate::{Error, Result};

/// Time an attacker needs to tamper with a frame, in seconds.
pub const DEFAULT_INJECTION_TIME: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    Shear { rate: f64 },
    SaltPepper { density: f64 },
    Gaussian { mu: f64, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    #[serde(flatten)]
    pub kind: AttackKind,
    pub seed: u64,
    #[serde(default = "default_injection_time")]
    pub injection_time: f64,
}

fn default_injection_time() -> f64 {
    DEFAULT_INJECTION_TIME
}

impl AttackSpec {
    pub fn new(kind: AttackKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            injection_time: DEFAULT_INJECTION_TIME,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AttackKind::Shear { rate } => fraction("shear rate", rate)?,
            AttackKind::SaltPepper { density } => fraction("salt-and-pepper density", density)?,
            AttackKind::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::param(format!(
                        "gaussian attack needs finite mu and sigma >= 0, got ({mu}, {sigma})"
                    )));
                }
            }
        }
        if !(self.injection_time >= 0.0 && self.injection_time.is_finite()) {
            return Err(Error::param("injection time must be nonnegative"));
        }
        Ok(())
    }

    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        self.validate()?;
        match self.kind {
            AttackKind::Shear { rate } => apply_shear(img, rate, self.seed),
            AttackKind::SaltPepper { density } => apply_salt_pepper(img, density, self.seed),
            AttackKind::Gaussian { mu, sigma } => apply_gaussian(img, mu, sigma, self.seed),
        }
    }

    /// Parses the compact CLI form `shear:0.04`, `sp:0.01`, `gaussian:0,1`.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let (name, args) = text
            .split_once(':')
            .ok_or_else(|| Error::param(format!("attack {text:?} is not of the form kind:args")))?;
        let nums = args
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::param(format!("attack {text:?}: {e}")))?;
        let kind = match (name, nums.as_slice()) {
            ("shear", [r]) => AttackKind::Shear { rate: *r },
            ("sp" | "salt_pepper", [d]) => AttackKind::SaltPepper { density: *d },
            ("gaussian" | "gauss", [mu, sigma]) => AttackKind::Gaussian { mu: *mu, sigma: *sigma },
            _ => return Err(Error::param(format!("unknown attack {text:?}"))),
        };
        let spec = Self::new(kind, seed);
        spec.validate()?;
        Ok(spec)
    }
}

fn fraction(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param(format!("{what} {v} outside [0, 1]")));
    }
    Ok(())
}

/// Cells covered by a shear of `n` pixels: a block `cols` wide with
/// `n / cols` full rows plus one partial row holding the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShearBlock {
    pub x0: usize,
    pub y0: usize,
    pub cols: usize,
    pub pixels: usize,
}

impl ShearBlock {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        if x < self.x0 || x >= self.x0 + self.cols || y < self.y0 {
            return false;
        }
        let idx = (y - self.y0) * self.cols + (x - self.x0);
        idx < self.pixels
    }
}

/// Location of the shear rectangle for a given image size, rate and seed.
pub fn shear_block(width: usize, height: usize, rate: f64, seed: u64) -> Result<ShearBlock> {
    fraction("shear rate", rate)?;
    let total = width * height;
    let n = ((rate * total as f64).round() as usize).min(total);
    if n == 0 {
        return Ok(ShearBlock { x0: 0, y0: 0, cols: 1, pixels: 0 });
    }
    let cols = ((n as f64 * width as f64 / height as f64).sqrt().ceil() as usize).clamp(1, width);
    let rows = n.div_ceil(cols);
    let mut rng = seed::rng(seed);
    let x0 = rng.random_range(0..=width - cols);
    let y0 = rng.random_range(0..=height - rows);
    Ok(ShearBlock { x0, y0, cols, pixels: n })
}

/// Zeroes `round(rate·W·H)` pixels in one seed-placed block whose aspect
/// ratio follows the image.
pub fn apply_shear(img: &GrayImage, rate: f64, seed: u64) -> Result<GrayImage> {
    let block = shear_block(img.width(), img.height(), rate, seed)?;
    let mut out = img.clone();
    let w = img.width();
    let data = out.as_bytes_mut();
    for k in 0..block.pixels {
        let (x, y) = (block.x0 + k % block.cols, block.y0 + k / block.cols);
        data[y * w + x] = 0;
    }
    Ok(out)
}

/// Replaces each pixel by 0 or 255 (equal odds) with probability `density`.
pub fn apply_salt_pepper(img: &GrayImage, density: f64, seed: u64) -> Result<GrayImage> {
    fraction("salt-and-pepper density", density)?;
    let mut rng = seed::rng(seed);
    let mut out = img.clone();
    for p in out.as_bytes_mut() {
        if rng.random::<f64>() < density {
            *p = if rng.random::<bool>() { 255 } else { 0 };
        }
    }
    Ok(out)
}

/// Adds rounded `N(mu, sigma²)` noise and clamps to the byte range.
pub fn apply_gaussian(img: &GrayImage, mu: f64, sigma: f64, seed: u64) -> Result<GrayImage> {
    let normal = Normal::new(mu, sigma)
        .map_err(|e| Error::param(format!("gaussian attack ({mu}, {sigma}): {e}")))?;
    let mut rng = seed::rng(seed);
    let mut out = img.clone();
    for p in out.as_bytes_mut() {
        let v = *p as f64 + normal.sample(&mut rng);
        *p = v.round().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| (1 + (x * 7 + y * 3) % 254) as u8).unwrap()
    }

    fn changed(a: &GrayImage, b: &GrayImage) -> usize {
        a.as_bytes().iter().zip(b.as_bytes()).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn shear_examples() {
        let img = textured(100, 480);
        assert_eq!(apply_shear(&img, 0.0, 3).unwrap(), img);
        assert!(apply_shear(&img, 1.0, 3).unwrap().as_bytes().iter().all(|&v| v == 0));
        let s = apply_shear(&img, 0.04, 7).unwrap();
        assert_eq!(changed(&img, &s), 1920);
        assert!(apply_shear(&img, 1.5, 7).is_err());
    }

    #[test]
    fn shear_exact_count_for_awkward_sizes() {
        for (w, h) in [(7, 13), (1, 50), (50, 1), (33, 31)] {
            let img = textured(w, h);
            for rate in [0.01, 0.13, 0.5, 0.97] {
                for seed in 0..5 {
                    let s = apply_shear(&img, rate, seed).unwrap();
                    let n = (rate * (w * h) as f64).round() as usize;
                    assert_eq!(changed(&img, &s), n, "{w}x{h} rate {rate}");
                    let b = shear_block(w, h, rate, seed).unwrap();
                    for y in 0..h {
                        for x in 0..w {
                            let hit = s.get(x, y) != img.get(x, y);
                            assert_eq!(hit, b.contains(x, y));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn salt_pepper_examples() {
        let img = textured(100, 1000);
        assert_eq!(apply_salt_pepper(&img, 0.0, 1).unwrap(), img);
        let full = apply_salt_pepper(&img, 1.0, 1).unwrap();
        assert!(full.as_bytes().iter().all(|&v| v == 0 || v == 255));
        // textured() never produces 0 or 255, so every hit is visible
        let s = apply_salt_pepper(&img, 0.01, 2).unwrap();
        let n = 1e5;
        let (mean, sd) = (n * 0.01, (n * 0.01 * 0.99f64).sqrt());
        let c = changed(&img, &s) as f64;
        assert!((c - mean).abs() <= 3.0 * sd, "changed {c}");
    }

    #[test]
    fn gaussian_examples() {
        let img = GrayImage::filled(100, 1000, 128).unwrap();
        assert_eq!(apply_gaussian(&img, 0.0, 0.0, 1).unwrap(), img);
        let plus = apply_gaussian(&textured(30, 30), 10.0, 0.0, 1).unwrap();
        for (a, b) in textured(30, 30).as_bytes().iter().zip(plus.as_bytes()) {
            assert_eq!(*b, (*a as u16 + 10).min(255) as u8);
        }
        let g = apply_gaussian(&img, 0.0, 5.0, 9).unwrap();
        let mean = g.as_bytes().iter().map(|&v| v as f64).sum::<f64>() / 1e5 - 128.0;
        assert!(mean.abs() < 0.1, "mean shift {mean}");
    }

    #[test]
    fn spec_parse_and_apply() {
        let s = AttackSpec::parse("shear:0.04", 7).unwrap();
        assert_eq!(s.kind, AttackKind::Shear { rate: 0.04 });
        assert_eq!(s.injection_time, 0.001);
        assert_eq!(
            AttackSpec::parse("gaussian:0,1", 1).unwrap().kind,
            AttackKind::Gaussian { mu: 0.0, sigma: 1.0 }
        );
        assert!(AttackSpec::parse("sp:2", 1).is_err());
        assert!(AttackSpec::parse("blur:1", 1).is_err());
        let img = textured(20, 20);
        assert_eq!(s.apply(&img).unwrap(), s.apply(&img).unwrap());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AttackSpec>(&json).unwrap(), s);
    }
}
