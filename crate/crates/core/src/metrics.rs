//! Security and fidelity metrics for 8-bit images.

use rand::Rng as _;
use serde::{Serialize, Serializer};

use crate::image::GrayImage;
use crate::seed;
use crate::{Error, Result};

/// Upper 1% point of the chi-square distribution with 255 degrees of freedom.
pub const CHI2_255_CRITICAL_1PCT: f64 = 310.457;

/// Number of changing pixel rate, in percent.
pub fn npcr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    let diff = a.as_bytes().iter().zip(b.as_bytes()).filter(|(x, y)| x != y).count();
    Ok(100.0 * diff as f64 / a.len() as f64)
}

/// Unified average changing intensity, in percent.
pub fn uaci(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    let sum: u64 = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .map(|(&x, &y)| x.abs_diff(y) as u64)
        .sum();
    Ok(100.0 * sum as f64 / (255.0 * a.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `(x, y)` with `(x+1, y)`.
    H,
    /// `(x, y)` with `(x, y+1)`.
    V,
    /// `(x, y)` with `(x+1, y+1)`.
    D,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::H, Direction::V, Direction::D];

    fn offset(self) -> (usize, usize) {
        match self {
            Direction::H => (1, 0),
            Direction::V => (0, 1),
            Direction::D => (1, 1),
        }
    }
}

/// Which adjacent pairs enter the correlation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSampling {
    Random { pairs: usize, seed: u64 },
    Exhaustive,
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling::Random { pairs: 2000, seed: 0 }
    }
}

fn pearson(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in pairs {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    if n < 2.0 {
        return Err(Error::Undefined("correlation needs at least two pairs".into()));
    }
    let cov = sxy / n - (sx / n) * (sy / n);
    let vx = sxx / n - (sx / n).powi(2);
    let vy = syy / n - (sy / n).powi(2);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::Undefined("correlation of a constant sample".into()));
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of adjacent pixel pairs. Pixels without a neighbour
/// in the given direction are never sampled.
pub fn adjacency_correlation(img: &GrayImage, dir: Direction, sampling: PairSampling) -> Result<f64> {
    let (dx, dy) = dir.offset();
    let (w, h) = (img.width(), img.height());
    if w <= dx || h <= dy {
        return Err(Error::Undefined(format!("{w}x{h} image has no {dir:?} pairs")));
    }
    let (cw, ch) = (w - dx, h - dy);
    let pair = |x: usize, y: usize| (img.get(x, y) as f64, img.get(x + dx, y + dy) as f64);
    match sampling {
        PairSampling::Exhaustive => {
            pearson((0..ch).flat_map(|y| (0..cw).map(move |x| (x, y))).map(|(x, y)| pair(x, y)))
        }
        PairSampling::Random { pairs, seed } => {
            let mut rng = seed::rng(seed);
            let picks: Vec<_> = (0..pairs)
                .map(|_| (rng.random_range(0..cw), rng.random_range(0..ch)))
                .collect();
            pearson(picks.into_iter().map(|(x, y)| pair(x, y)))
        }
    }
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in img.as_bytes() {
        h[p as usize] += 1;
    }
    h
}

/// Shannon entropy of the 256-bin histogram, in bits.
pub fn entropy(img: &GrayImage) -> f64 {
    let n = img.len() as f64;
    -histogram(img)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Pearson chi-square statistic of the histogram against the uniform law.
pub fn chi_square_uniform(img: &GrayImage) -> f64 {
    let expected = img.len() as f64 / 256.0;
    histogram(img)
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_dims(test)?;
    let se: u64 = reference
        .as_bytes()
        .iter()
        .zip(test.as_bytes())
        .map(|(&a, &b)| (a.abs_diff(b) as u64).pow(2))
        .sum();
    if se == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = se as f64 / reference.len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Serializes non-finite reals as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn serialize_opt_real<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_real(x, s),
        None => s.serialize_none(),
    }
}

/// Metrics comparing a reference image with a test image. Correlations and
/// entropy describe the test image; `None` marks an undefined correlation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub npcr: f64,
    pub uaci: f64,
    #[serde(serialize_with = "serialize_opt_real")]
    pub corr_h: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub corr_v: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub corr_d: Option<f64>,
    pub entropy: f64,
    pub chi_square: f64,
    #[serde(serialize_with = "serialize_real")]
    pub psnr: f64,
}

impl MetricsReport {
    pub fn compute(reference: &GrayImage, test: &GrayImage, sampling: PairSampling) -> Result<Self> {
        let corr = |d| adjacency_correlation(test, d, sampling).ok();
        Ok(Self {
            npcr: npcr(reference, test)?,
            uaci: uaci(reference, test)?,
            corr_h: corr(Direction::H),
            corr_v: corr(Direction::V),
            corr_d: corr(Direction::D),
            entropy: entropy(test),
            chi_square: chi_square_uniform(test),
            psnr: psnr(reference, test)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) -> GrayImage {
        GrayImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn npcr_uaci_examples() {
        let a = img(10, 10, |x, y| (x * y) as u8);
        assert_eq!(npcr(&a, &a).unwrap(), 0.0);
        assert_eq!(uaci(&a, &a).unwrap(), 0.0);
        let b = img(10, 10, |x, y| (x * y) as u8 ^ 1);
        assert_eq!(npcr(&a, &b).unwrap(), 100.0);
        let zero = GrayImage::filled(4, 4, 0).unwrap();
        let full = GrayImage::filled(4, 4, 255).unwrap();
        assert_eq!(uaci(&zero, &full).unwrap(), 100.0);
        assert!(npcr(&zero, &a).is_err());
    }

    #[test]
    fn correlation_examples() {
        let ramp = img(64, 64, |x, _| (x * 3) as u8);
        for s in [PairSampling::default(), PairSampling::Exhaustive] {
            assert!((adjacency_correlation(&ramp, Direction::H, s).unwrap() - 1.0).abs() < 1e-9);
        }
        let checker = img(64, 64, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        let c = adjacency_correlation(&checker, Direction::H, PairSampling::default()).unwrap();
        assert!((c + 1.0).abs() < 1e-9);
        let flat = GrayImage::filled(8, 8, 9).unwrap();
        assert!(matches!(
            adjacency_correlation(&flat, Direction::V, PairSampling::Exhaustive),
            Err(Error::Undefined(_))
        ));
        let row = GrayImage::filled(8, 1, 9).unwrap();
        assert!(adjacency_correlation(&row, Direction::V, PairSampling::Exhaustive).is_err());
    }

    #[test]
    fn entropy_and_histogram_examples() {
        let flat = GrayImage::filled(16, 16, 42).unwrap();
        assert_eq!(entropy(&flat), 0.0);
        assert_eq!(histogram(&flat)[42], 256);
        let uniform = img(16, 16, |x, y| (16 * y + x) as u8);
        assert!((entropy(&uniform) - 8.0).abs() < 1e-12);
        assert_eq!(chi_square_uniform(&uniform), 0.0);
        let two = img(4, 4, |x, _| if x < 2 { 10 } else { 200 });
        let h = histogram(&two);
        assert_eq!(h.iter().filter(|&&c| c > 0).count(), 2);
        assert_eq!(h.iter().sum::<u64>(), 16);
    }

    #[test]
    fn psnr_examples() {
        let a = GrayImage::filled(100, 100, 0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let mut b = a.clone();
        b.set(3, 4, 255);
        assert!((psnr(&a, &b).unwrap() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn report_json_uses_inf_sentinel() {
        let a = img(8, 8, |x, y| (x * 8 + y) as u8);
        let r = MetricsReport::compute(&a, &a, PairSampling::Exhaustive).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["psnr"], "inf");
        assert_eq!(v["npcr"], 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_permutation_invariant(seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || { s = crate::seed::splitmix64(s); (s >> 56) as u8 };
            let a = img(12, 9, |_, _| next());
            let b = img(12, 9, |_, _| next());
            prop_assert_eq!(npcr(&a, &b).unwrap(), npcr(&b, &a).unwrap());
            prop_assert_eq!(uaci(&a, &b).unwrap(), uaci(&b, &a).unwrap());
            let mut rev = a.as_bytes().to_vec();
            rev.reverse();
            let r = GrayImage::from_vec(12, 9, rev).unwrap();
            prop_assert!((entropy(&a) - entropy(&r)).abs() < 1e-12);
            prop_assert_eq!(histogram(&a), histogram(&r));
            let e = entropy(&a);
            prop_assert!((0.0..=8.0).contains(&e));
        }
    }
}
