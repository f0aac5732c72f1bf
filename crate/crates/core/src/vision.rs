//! Synthetic camera frames of the cart-pendulum and state extraction.
//!
//! Frames show a dark cart rectangle resting on an (undrawn) rail and a dark
//! pendulum rod hinged on top of it, over a uniform light background. The
//! extractor locates the cart from a column histogram of dark pixels in the
//! cart rows and the rod from a Hough peak over the pixels above the cart,
//! refined by a principal-axis fit of the peak's supporting pixels.
//!
//! Line parametrization: `ρ = x·cos φ + y·sin φ` in pixel coordinates (`y`
//! pointing down). A rod leaning by `θ` from the vertical (tip to the right
//! for `θ > 0`) has normal angle `φ = θ`.

use serde::{Deserialize, Serialize};

use crate::image::GrayImage;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub meters_per_pixel: f64,
    /// Row of the rail; the cart occupies the `cart_height_px` rows above it.
    pub rail_row: usize,
    pub pendulum_length_px: f64,
    pub cart_width_px: usize,
    pub cart_height_px: usize,
    pub rod_width_px: f64,
    pub background: u8,
    pub foreground: u8,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 480,
            height: 240,
            meters_per_pixel: 0.002,
            rail_row: 200,
            pendulum_length_px: 150.0,
            cart_width_px: 40,
            cart_height_px: 20,
            rod_width_px: 3.0,
            background: 180,
            foreground: 30,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.meters_per_pixel > 0.0 && self.meters_per_pixel.is_finite()) {
            return Err(Error::param("meters_per_pixel must be positive"));
        }
        if self.cart_width_px == 0 || self.cart_width_px > self.width {
            return Err(Error::param("cart does not fit the frame width"));
        }
        if self.rail_row > self.height || self.cart_height_px + 2 > self.rail_row {
            return Err(Error::param("cart does not fit above the rail"));
        }
        if !(self.pendulum_length_px > 0.0) || self.pendulum_length_px >= self.pivot_row() {
            return Err(Error::param("pendulum does not fit above the cart"));
        }
        if !(self.rod_width_px >= 1.0) {
            return Err(Error::param("rod width must be at least one pixel"));
        }
        if self.foreground >= self.background {
            return Err(Error::param("foreground must be darker than the background"));
        }
        Ok(())
    }

    fn cart_top(&self) -> usize {
        self.rail_row - self.cart_height_px
    }

    /// Row of the hinge, two pixels above the cart so the rod and the cart
    /// never share a row.
    pub fn pivot_row(&self) -> f64 {
        self.cart_top() as f64 - 2.0 - self.rod_width_px / 2.0
    }

    /// Image column of the cart center for cart position `alpha`.
    pub fn column_of(&self, alpha: f64) -> f64 {
        (self.width as f64 - 1.0) / 2.0 + alpha / self.meters_per_pixel
    }

    pub fn alpha_of(&self, column: f64) -> f64 {
        (column - (self.width as f64 - 1.0) / 2.0) * self.meters_per_pixel
    }

    /// Gray level separating dark objects from the background.
    pub fn dark_threshold(&self) -> u8 {
        ((self.background as u16 + self.foreground as u16) / 2) as u8
    }

    fn alpha_limit(&self) -> f64 {
        (self.width - self.cart_width_px) as f64 / 2.0 * self.meters_per_pixel
    }
}

/// Renders the cart at position `alpha` (m) with the rod at angle `theta`
/// (rad from vertical). Positions that would push the cart out of frame are
/// clamped to the frame edge.
pub fn render_frame(alpha: f64, theta: f64, cam: &CameraModel) -> Result<GrayImage> {
    cam.validate()?;
    if !alpha.is_finite() || !theta.is_finite() {
        return Err(Error::param("render needs a finite state"));
    }
    let lim = cam.alpha_limit();
    let alpha = if alpha.abs() > lim {
        log::warn!("cart position {alpha} m outside the frame, clamped to ±{lim} m");
        alpha.clamp(-lim, lim)
    } else {
        alpha
    };
    let cx = cam.column_of(alpha);
    let mut img = GrayImage::filled(cam.width, cam.height, cam.background)?;

    let half = cam.cart_width_px as f64 / 2.0;
    for y in cam.cart_top()..cam.rail_row {
        for x in 0..cam.width {
            if (x as f64 - cx).abs() <= half - 0.5 {
                img.set(x, y, cam.foreground);
            }
        }
    }

    let (px, py) = (cx, cam.pivot_row());
    let (tx, ty) = (
        px + cam.pendulum_length_px * theta.sin(),
        py - cam.pendulum_length_px * theta.cos(),
    );
    let r = cam.rod_width_px / 2.0;
    let x_lo = (px.min(tx) - r).floor().max(0.0) as usize;
    let x_hi = ((px.max(tx) + r).ceil().max(0.0) as usize).min(cam.width - 1);
    let y_lo = (py.min(ty) - r).floor().max(0.0) as usize;
    let y_hi = ((py.max(ty) + r).ceil().max(0.0) as usize).min(cam.cart_top() - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            if segment_distance(x as f64, y as f64, (px, py), (tx, ty)) <= r {
                img.set(x, y, cam.foreground);
            }
        }
    }
    Ok(img)
}

fn segment_distance(x: f64, y: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x - a.0) * dx + (y - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - a.0 - t * dx).hypot(y - a.1 - t * dy)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoughOptions {
    /// Pixels strictly darker than this vote.
    pub dark_threshold: u8,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_step: f64,
    /// Minimum accumulator votes for a line to count as found.
    pub min_score: u32,
    /// Only rows `y < row_limit` vote.
    pub row_limit: Option<usize>,
    /// Only columns in `[lo, hi)` vote.
    pub col_range: Option<(usize, usize)>,
}

impl Default for HoughOptions {
    fn default() -> Self {
        Self {
            dark_threshold: CameraModel::default().dark_threshold(),
            theta_min: -std::f64::consts::FRAC_PI_2,
            theta_max: std::f64::consts::FRAC_PI_2,
            theta_step: 0.25f64.to_radians(),
            min_score: 30,
            row_limit: None,
            col_range: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoughLine {
    pub rho: f64,
    pub theta: f64,
    pub score: u32,
}

fn dark_pixels(img: &GrayImage, opts: &HoughOptions) -> Vec<(usize, usize)> {
    let rows = opts.row_limit.unwrap_or(img.height()).min(img.height());
    let (c0, c1) = opts.col_range.unwrap_or((0, img.width()));
    let c1 = c1.min(img.width());
    let mut out = Vec::new();
    for y in 0..rows {
        for x in c0..c1 {
            if img.get(x, y) < opts.dark_threshold {
                out.push((x, y));
            }
        }
    }
    out
}

/// Strongest line in a `(ρ, φ)` accumulator with 1 px `ρ` bins.
pub fn hough_peak(img: &GrayImage, opts: &HoughOptions) -> Result<HoughLine> {
    if !(opts.theta_step > 0.0) || opts.theta_max <= opts.theta_min {
        return Err(Error::param("bad Hough angle range"));
    }
    let pts = dark_pixels(img, opts);
    let n_theta = ((opts.theta_max - opts.theta_min) / opts.theta_step).ceil() as usize;
    let diag = (img.width() as f64).hypot(img.height() as f64).ceil() as i64;
    let n_rho = (2 * diag + 1) as usize;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|i| {
            let t = opts.theta_min + i as f64 * opts.theta_step;
            (t.cos(), t.sin())
        })
        .collect();
    let mut acc = vec![0u32; n_theta * n_rho];
    for &(x, y) in &pts {
        let (x, y) = (x as f64, y as f64);
        for (i, &(c, s)) in trig.iter().enumerate() {
            let r = (x * c + y * s).round() as i64 + diag;
            acc[i * n_rho + r as usize] += 1;
        }
    }
    // first maximum in (angle, rho) order; ties therefore resolve toward
    // the smallest angle
    let (best, &score) = acc
        .iter()
        .enumerate()
        .fold((0, &0), |b, cur| if cur.1 > b.1 { cur } else { b });
    if score < opts.min_score {
        return Err(Error::NoLineFound { score });
    }
    let (i, r) = (best / n_rho, best % n_rho);
    Ok(HoughLine {
        rho: r as f64 - diag as f64,
        theta: opts.theta_min + i as f64 * opts.theta_step,
        score,
    })
}

fn line_inliers(img: &GrayImage, line: &HoughLine, opts: &HoughOptions, tol: f64) -> Vec<(f64, f64)> {
    let (c, s) = (line.theta.cos(), line.theta.sin());
    dark_pixels(img, opts)
        .into_iter()
        .map(|(x, y)| (x as f64, y as f64))
        .filter(|&(x, y)| (x * c + y * s - line.rho).abs() <= tol)
        .collect()
}

/// Mean position of the dark pixels within 2 px of `line`.
pub fn line_support_centroid(img: &GrayImage, line: &HoughLine, opts: &HoughOptions) -> Option<(f64, f64)> {
    let pts = line_inliers(img, line, opts, 2.0);
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    Some((sx / n, sy / n))
}

/// Angle from vertical of the principal axis of `pts`.
fn principal_angle(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    // direction (ux, uy) of largest spread; the rod points up (uy < 0)
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (mut ux, mut uy) = (phi.cos(), phi.sin());
    if uy > 0.0 {
        ux = -ux;
        uy = -uy;
    }
    Some(ux.atan2(-uy))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub alpha: f64,
    pub theta: f64,
    pub alpha_dot: f64,
    pub theta_dot: f64,
    pub valid: bool,
}

impl StateEstimate {
    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.theta, self.alpha_dot, self.theta_dot]
    }
}

/// Cart column from the densest cart-wide window of dark pixels in the
/// cart rows.
fn locate_cart(img: &GrayImage, cam: &CameraModel) -> Option<f64> {
    let thr = cam.dark_threshold();
    let mut counts = vec![0u32; img.width()];
    for y in cam.cart_top()..cam.rail_row.min(img.height()) {
        for (x, c) in counts.iter_mut().enumerate() {
            *c += (img.get(x, y) < thr) as u32;
        }
    }
    let w = cam.cart_width_px.min(img.width());
    let mut window: u32 = counts[..w].iter().sum();
    let (mut best, mut best_x) = (window, 0);
    for x0 in 1..=img.width() - w {
        window = window + counts[x0 + w - 1] - counts[x0 - 1];
        if window > best {
            best = window;
            best_x = x0;
        }
    }
    // at least half of the cart must be visible, and the window must hold
    // most of the dark mass of the cart rows
    let total: u32 = counts.iter().sum();
    if (best as usize) < w * cam.cart_height_px / 2 || total - best > best {
        return None;
    }
    let slice = &counts[best_x..best_x + w];
    let mass: u32 = slice.iter().sum();
    let moment: f64 = slice.iter().enumerate().map(|(i, &c)| (best_x + i) as f64 * c as f64).sum();
    Some(moment / mass as f64)
}

/// Largest rod angle the extractor searches for.
pub const MAX_ROD_ANGLE: f64 = 0.6;

fn measure(img: &GrayImage, cam: &CameraModel) -> Option<(f64, f64)> {
    if img.width() != cam.width || img.height() != cam.height {
        return None;
    }
    let cx = locate_cart(img, cam)?;
    let reach = cam.pendulum_length_px * MAX_ROD_ANGLE.sin() + cam.rod_width_px + 2.0;
    let lo = (cx - reach).floor().max(0.0) as usize;
    let hi = ((cx + reach).ceil() as usize + 1).min(img.width());
    let opts = HoughOptions {
        dark_threshold: cam.dark_threshold(),
        theta_min: -MAX_ROD_ANGLE,
        theta_max: MAX_ROD_ANGLE,
        row_limit: Some(cam.cart_top()),
        col_range: Some((lo, hi)),
        min_score: (cam.pendulum_length_px / 3.0) as u32,
        ..HoughOptions::default()
    };
    let line = hough_peak(img, &opts).ok()?;
    let pts = line_inliers(img, &line, &opts, cam.rod_width_px / 2.0 + 1.0);
    let theta = principal_angle(&pts)?;
    Some((cam.alpha_of(cx), theta))
}

/// Estimates the state from one frame. Velocities are backward differences
/// against `prev` over `dt`; they are zero on the first frame. When the
/// frame cannot be read, the previous estimate is held with `valid = false`.
pub fn extract_state(
    img: &GrayImage,
    prev: Option<&StateEstimate>,
    dt: f64,
    cam: &CameraModel,
) -> StateEstimate {
    match measure(img, cam) {
        Some((alpha, theta)) => {
            let (alpha_dot, theta_dot) = match prev {
                Some(p) if dt > 0.0 => ((alpha - p.alpha) / dt, (theta - p.theta) / dt),
                _ => (0.0, 0.0),
            };
            StateEstimate {
                alpha,
                theta,
                alpha_dot,
                theta_dot,
                valid: true,
            }
        }
        None => StateEstimate {
            valid: false,
            ..prev.copied().unwrap_or_default()
        },
    }
}
