//! Linear cart-pendulum with norm-bounded uncertainty, the per-sample delay
//! schedule and the closed-loop simulator.
//!
//! State ordering is `x = (α, θ, α̇, θ̇)`: cart position (m), rod angle from
//! the upright (rad, positive toward `+α`), and their rates. The control `u`
//! is the horizontal force on the cart (N), applied as `u = K·x̂`.
//!
//! Each sampling instant `t_k = k·h` starts one packet through the chain
//! encode → inject → sensor-to-controller → decode → process →
//! controller-to-actuator. The control computed from that frame reaches the
//! actuator at `t_k + η_en + Δη + τ_sc + η_de + d + τ_ca` and is held until
//! the next arrival. A packet overtaken by a newer one is discarded.

use nalgebra::{Complex, Matrix4, Vector4};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, AttackSpec};
use crate::chaos::ChaosParams;
use crate::cipher::{self, CipherConfig, RegionChoice};
use crate::image::GrayImage;
use crate::seed::{self, Rng};
use crate::vision::{self, CameraModel, StateEstimate};
use crate::{Error, Result};

/// Physical parameters of the cart-pendulum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPole {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Distance from the hinge to the rod's center of mass.
    pub half_length: f64,
    pub gravity: f64,
}

impl Default for CartPole {
    fn default() -> Self {
        Self {
            cart_mass: 1.096,
            pole_mass: 0.109,
            half_length: 0.25,
            gravity: 9.81,
        }
    }
}

impl CartPole {
    /// Small-angle linearization about the upright equilibrium of a
    /// frictionless cart carrying a uniform rod (`I = m·l²/3` about its
    /// center of mass).
    pub fn linearize(&self) -> (Matrix4<f64>, Vector4<f64>) {
        let (mc, m, l, g) = (self.cart_mass, self.pole_mass, self.half_length, self.gravity);
        let i = m * l * l / 3.0;
        let p = i * (mc + m) + mc * m * l * l;
        let a = Matrix4::new(
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, -m * m * g * l * l / p, 0.0, 0.0,
            0.0, m * g * l * (mc + m) / p, 0.0, 0.0,
        );
        let b = Vector4::new(0.0, 0.0, (i + m * l * l) / p, -m * l / p);
        (a, b)
    }
}

/// `ẋ = (A + D·F(t)·E)·x + B·u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PlantFile", into = "PlantFile")]
pub struct PlantModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub d: Matrix4<f64>,
    pub e: Matrix4<f64>,
}

/// Row-major JSON form of [`PlantModel`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFile {
    a: [[f64; 4]; 4],
    b: [f64; 4],
    #[serde(default = "identity_rows")]
    d: [[f64; 4]; 4],
    #[serde(default = "default_e_rows")]
    e: [[f64; 4]; 4],
}

fn rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

fn from_rows(r: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| r[i][j])
}

fn identity_rows() -> [[f64; 4]; 4] {
    rows(&Matrix4::identity())
}

fn default_e_rows() -> [[f64; 4]; 4] {
    rows(&UncertaintyModel::default().e_matrix())
}

impl From<PlantFile> for PlantModel {
    fn from(f: PlantFile) -> Self {
        Self {
            a: from_rows(&f.a),
            b: Vector4::from(f.b),
            d: from_rows(&f.d),
            e: from_rows(&f.e),
        }
    }
}

impl From<PlantModel> for PlantFile {
    fn from(p: PlantModel) -> Self {
        Self {
            a: rows(&p.a),
            b: p.b.into(),
            d: rows(&p.d),
            e: rows(&p.e),
        }
    }
}

impl PlantModel {
    pub fn from_cart_pole(cp: &CartPole) -> Self {
        let (a, b) = cp.linearize();
        Self {
            a,
            b,
            d: Matrix4::identity(),
            e: UncertaintyModel::default().e_matrix(),
        }
    }

    pub fn with_uncertainty(mut self, um: &UncertaintyModel) -> Self {
        self.e = um.e_matrix();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.a.iter().chain(self.b.iter()).chain(self.d.iter()).chain(self.e.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::param("plant matrices must be finite"));
        }
        Ok(())
    }
}

pub fn default_plant() -> PlantModel {
    PlantModel::from_cart_pole(&CartPole::default())
}

/// State feedback `u = K·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gain(pub [f64; 4]);

impl Gain {
    pub fn apply(&self, x: &Vector4<f64>) -> f64 {
        self.0.iter().zip(x.iter()).map(|(k, v)| k * v).sum()
    }

    pub fn closed_loop(&self, plant: &PlantModel) -> Matrix4<f64> {
        plant.a + plant.b * nalgebra::RowVector4::from(self.0)
    }
}

/// Gain reported for the laboratory platform; a reference value only, since
/// it belongs to a different plant parametrization.
pub const REFERENCE_GAIN: Gain = Gain([3.7633, -29.9925, 4.0355, -5.4562]);

/// Ackermann pole placement: returns `K` with `eig(A + B·K)` equal to
/// `poles`.
pub fn place_poles(a: &Matrix4<f64>, b: &Vector4<f64>, poles: &[Complex<f64>]) -> Result<Gain> {
    if poles.len() != 4 {
        return Err(Error::param(format!("need 4 poles, got {}", poles.len())));
    }
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for p in poles {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += *c;
            next[i + 1] -= *c * p;
        }
        coeffs = next;
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if coeffs.iter().any(|c| c.im.abs() > 1e-9 * scale) {
        return Err(Error::param("poles must be closed under conjugation"));
    }
    // coeffs[k] multiplies s^(4-k)
    let c: Vec<f64> = coeffs.iter().map(|c| c.re).collect();
    let ab = a * b;
    let a2b = a * ab;
    let a3b = a * a2b;
    let ctrb = Matrix4::from_columns(&[*b, ab, a2b, a3b]);
    let col_scale: f64 = ctrb.column_iter().map(|c| c.norm()).product();
    if col_scale == 0.0 || (ctrb.determinant() / col_scale).abs() < 1e-12 {
        return Err(Error::Uncontrollable);
    }
    let inv = ctrb.try_inverse().ok_or(Error::Uncontrollable)?;
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let phi = a4 + a3 * c[1] + a2 * c[2] + a * c[3] + Matrix4::identity() * c[4];
    let k_ack = inv.row(3) * phi;
    let k = [-k_ack[0], -k_ack[1], -k_ack[2], -k_ack[3]];
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(Gain(k))
}

/// Real poles as complex values.
pub fn real_poles(p: &[f64]) -> Vec<Complex<f64>> {
    p.iter().map(|&r| Complex::new(r, 0.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::param(format!("{what}: bad interval [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Bounds of every timing component of one sample (seconds).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayModel {
    pub eta_en: Interval,
    pub eta_de: Interval,
    pub tau_sc: Interval,
    pub tau_ca: Interval,
    pub d_proc: Interval,
    /// Attack injection time.
    pub delta_eta: f64,
    /// Camera exposure preceding encryption, charged to `η_en`.
    pub exposure: f64,
    /// Sampling period.
    pub h: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            eta_en: Interval::new(0.004, 0.007),
            eta_de: Interval::new(0.004, 0.007),
            tau_sc: Interval::new(0.0, 0.005),
            tau_ca: Interval::new(0.0, 0.005),
            d_proc: Interval::new(0.007, 0.009),
            delta_eta: crate::attacks::DEFAULT_INJECTION_TIME,
            exposure: 0.010,
            h: 0.020,
        }
    }
}

/// Bounds entering the stability certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayBounds {
    pub tau_bar: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
}

impl DelayBounds {
    /// `λ₁ = λ̄ + τ̄`.
    pub fn lambda1(&self) -> f64 {
        self.lambda_upper + self.tau_bar
    }

    /// `λ₂ = λ̄ − λ̲`.
    pub fn lambda2(&self) -> f64 {
        self.lambda_upper - self.lambda_lower
    }

    /// `λ₃ = λ₁ − λ̲`.
    pub fn lambda3(&self) -> f64 {
        self.lambda1() - self.lambda_lower
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_bar > 0.0 && self.lambda_lower > 0.0 && self.lambda_lower < self.lambda_upper) {
            return Err(Error::param(format!(
                "delay bounds need 0 < τ̄ and 0 < λ̲ < λ̄, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for DelayBounds {
    fn default() -> Self {
        Self {
            tau_bar: 0.005,
            lambda_lower: 0.026,
            lambda_upper: 0.054,
        }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        self.eta_en.check("eta_en")?;
        self.eta_de.check("eta_de")?;
        self.tau_sc.check("tau_sc")?;
        self.tau_ca.check("tau_ca")?;
        self.d_proc.check("d_proc")?;
        let comps = [self.eta_en.lo, self.eta_de.lo, self.tau_sc.lo, self.tau_ca.lo, self.d_proc.lo];
        if comps.iter().any(|&v| v < 0.0) || self.delta_eta < 0.0 || self.exposure < 0.0 {
            return Err(Error::param("delays must be nonnegative"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param("sampling period must be positive"));
        }
        Ok(())
    }

    /// `λ̲ = η̲_en + Δη + τ̲_sc + η̲_de + d̲`, exposure included in `η_en`.
    pub fn lambda_lower(&self) -> f64 {
        (self.eta_en.lo + self.exposure) + self.delta_eta + self.tau_sc.lo + self.eta_de.lo + self.d_proc.lo
    }

    /// `λ̄ = 2η̄_en + 2Δη + τ̄_sc + η̄_de + d̄`, exposure included in `η_en`.
    pub fn lambda_upper(&self) -> f64 {
        2.0 * (self.eta_en.hi + self.exposure)
            + 2.0 * self.delta_eta
            + self.tau_sc.hi
            + self.eta_de.hi
            + self.d_proc.hi
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_ca.hi
    }

    pub fn bounds(&self) -> DelayBounds {
        DelayBounds {
            tau_bar: self.tau_bar(),
            lambda_lower: self.lambda_lower(),
            lambda_upper: self.lambda_upper(),
        }
    }

    /// Largest per-packet image-induced delay the sampler can produce.
    pub fn max_sample_lambda(&self) -> f64 {
        self.eta_en.hi + self.exposure + self.delta_eta + self.tau_sc.hi + self.eta_de.hi + self.d_proc.hi
    }

    /// Splits an encryption+decryption budget evenly between `η̄_en` and
    /// `η̄_de`, keeping lower bounds at most the new uppers.
    pub fn with_enc_dec_budget(mut self, budget: f64) -> Self {
        let half = budget / 2.0;
        self.eta_en = Interval::new(self.eta_en.lo.min(half), half);
        self.eta_de = Interval::new(self.eta_de.lo.min(half), half);
        self
    }

    /// Encryption+decryption budget that [`Self::with_enc_dec_budget`] must
    /// be given for `λ̄` to equal `lambda_upper`.
    pub fn enc_dec_budget_for(&self, lambda_upper: f64) -> f64 {
        let fixed = 2.0 * self.exposure + 2.0 * self.delta_eta + self.tau_sc.hi + self.d_proc.hi;
        (lambda_upper - fixed) / 1.5
    }
}

/// One packet's timing (seconds). `eta_en` includes the exposure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleDelays {
    pub eta_en: f64,
    pub delta_eta: f64,
    pub tau_sc: f64,
    pub eta_de: f64,
    pub d: f64,
    pub tau_ca: f64,
}

impl SampleDelays {
    /// Image-induced part `λ_k`.
    pub fn lambda(&self) -> f64 {
        self.eta_en + self.delta_eta + self.tau_sc + self.eta_de + self.d
    }

    pub fn total(&self) -> f64 {
        self.lambda() + self.tau_ca
    }
}

/// Draws each component uniformly within its bounds. `Δη` is charged only
/// while an attack is active. The sample index does not influence the draw;
/// it is accepted so callers can log it alongside.
pub fn sample_delays(dm: &DelayModel, _k: usize, attack_active: bool, rng: &mut Rng) -> SampleDelays {
    SampleDelays {
        eta_en: dm.eta_en.sample(rng) + dm.exposure,
        delta_eta: if attack_active { dm.delta_eta } else { 0.0 },
        tau_sc: dm.tau_sc.sample(rng),
        eta_de: dm.eta_de.sample(rng),
        d: dm.d_proc.sample(rng),
        tau_ca: dm.tau_ca.sample(rng),
    }
}

/// Delays of a plain (unencrypted) camera loop: no encoding, decoding or
/// injection time.
pub fn sample_delays_traditional(dm: &DelayModel, rng: &mut Rng) -> SampleDelays {
    SampleDelays {
        tau_sc: dm.tau_sc.sample(rng),
        d: dm.d_proc.sample(rng),
        tau_ca: dm.tau_ca.sample(rng),
        ..SampleDelays::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Refresh {
    /// `r₁, r₂` redrawn uniformly in `[−1, 1]` at every sampling instant.
    PerSample,
    Constant { r1: f64, r2: f64 },
    /// `F ≡ 0`.
    Off,
}

/// `ΔA = D·F(t)·E` with `F = diag(r₁, r₂, 0, 0)` and
/// `E = diag(0.4 + Δ₁ᴹ, 0.82 + Δ₂ᴹ, 0, 0)` for the default environment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyModel {
    pub delta1_env: Interval,
    pub delta2_env: Interval,
    pub delta1_att: Interval,
    pub delta2_att: Interval,
    pub refresh: Refresh,
}

impl Default for UncertaintyModel {
    fn default() -> Self {
        Self {
            delta1_env: Interval::new(-0.4, 0.4),
            delta2_env: Interval::new(-0.82, 0.82),
            delta1_att: Interval::point(0.0),
            delta2_att: Interval::point(0.0),
            refresh: Refresh::PerSample,
        }
    }
}

impl UncertaintyModel {
    pub fn none() -> Self {
        Self {
            refresh: Refresh::Off,
            ..Self::default()
        }
    }

    pub fn e_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(
            self.delta1_env.magnitude() + self.delta1_att.magnitude(),
            self.delta2_env.magnitude() + self.delta2_att.magnitude(),
            0.0,
            0.0,
        ))
    }

    fn draw(&self, rng: &mut Rng) -> (f64, f64) {
        match self.refresh {
            Refresh::PerSample => (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)),
            Refresh::Constant { r1, r2 } => (r1.clamp(-1.0, 1.0), r2.clamp(-1.0, 1.0)),
            Refresh::Off => (0.0, 0.0),
        }
    }
}

/// Attack-induced uncertainty from relative extraction errors `errᵢ/stateᵢ`:
/// the attack ranges become the observed `[min, max]` of each trace.
pub fn error_to_uncertainty(rel_alpha: &[f64], rel_theta: &[f64], base: &UncertaintyModel) -> UncertaintyModel {
    let range = |v: &[f64]| {
        let finite = v.iter().copied().filter(|x| x.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            Interval::new(lo, hi)
        } else {
            Interval::point(0.0)
        }
    };
    UncertaintyModel {
        delta1_att: range(rel_alpha),
        delta2_att: range(rel_theta),
        ..*base
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The controller sees the true state at each sampling instant.
    IdealState,
    /// Render → encrypt → attack → decrypt → extract at each instant.
    VisionLoop,
    /// Render → attack → extract without encryption or its delays.
    Traditional,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal_state" => Ok(Mode::IdealState),
            "vision_loop" => Ok(Mode::VisionLoop),
            "traditional" => Ok(Mode::Traditional),
            _ => Err(Error::param(format!("unknown mode {s:?}"))),
        }
    }
}

/// Camera, cipher and attack used by the image-based modes. Attacks act on
/// the transmitted band only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    pub camera: CameraModel,
    pub key: ChaosParams,
    pub rounds: u32,
    pub band_width: usize,
    pub attack: Option<AttackKind>,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            key: ChaosParams {
                a: 0.5,
                b: 2.0,
                y0: crate::chaos::REFERENCE_Y0,
                burn_in: crate::chaos::DEFAULT_BURN_IN,
            },
            rounds: 1,
            band_width: cipher::DEFAULT_BAND_WIDTH,
            attack: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub dt: f64,
    pub horizon: f64,
    pub x0: [f64; 4],
    pub divergence_bound: f64,
    pub seed: u64,
    /// Keep every n-th integration step in the trajectory.
    pub record_stride: usize,
    /// Charge the injection time `Δη` even without an active attack.
    pub always_charge_injection: bool,
    pub vision: VisionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: Mode::IdealState,
            dt: 1e-4,
            horizon: 10.0,
            x0: [0.05, 0.05, 0.0, 0.0],
            divergence_bound: 1e3,
            seed: 0,
            record_stride: 10,
            always_charge_injection: true,
            vision: VisionConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self, dm: &DelayModel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::param(format!("dt = {} must lie in (0, 1e-3]", self.dt)));
        }
        if !(self.horizon >= dm.h) {
            return Err(Error::param("horizon must cover at least one sampling period"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record stride must be positive"));
        }
        if self.x0.iter().any(|v| !v.is_finite()) || !(self.divergence_bound > 0.0) {
            return Err(Error::param("bad initial state or divergence bound"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleEvent {
    pub k: usize,
    pub t: f64,
    pub delays: SampleDelays,
    /// Arrival instant snapped to the integration grid.
    pub arrival: f64,
    pub u: f64,
    /// Whether the packet was applied (false when overtaken or past the
    /// horizon).
    pub applied: bool,
    pub x_true: [f64; 4],
    pub x_hat: [f64; 4],
    pub estimate_valid: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub t: Vec<f64>,
    pub x: Vec<[f64; 4]>,
    pub u: Vec<f64>,
    /// A sampling instant fell in the recorded step or the skipped ones
    /// before it.
    pub sampled: Vec<bool>,
    /// A control arrival was applied in the recorded step or the skipped
    /// ones before it.
    pub arrived: Vec<bool>,
    pub events: Vec<SampleEvent>,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub mean_alpha: f64,
    pub sd_alpha: f64,
    pub mean_theta: f64,
    pub sd_theta: f64,
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Trajectory {
    pub fn final_state(&self) -> [f64; 4] {
        *self.x.last().expect("trajectory has at least one point")
    }

    pub fn final_norm(&self) -> f64 {
        Vector4::from(self.final_state()).norm()
    }

    /// Mean and population SD of `α` and `θ` over recorded points with
    /// `t ≥ from`.
    pub fn stats(&self, from: f64) -> RunStats {
        let idx = || self.t.iter().enumerate().filter(move |(_, &t)| t >= from).map(|(i, _)| i);
        let (mean_alpha, sd_alpha) = mean_sd(idx().map(|i| self.x[i][0]));
        let (mean_theta, sd_theta) = mean_sd(idx().map(|i| self.x[i][1]));
        RunStats {
            mean_alpha,
            sd_alpha,
            mean_theta,
            sd_theta,
        }
    }

    /// Relative extraction errors `(α̂ − α)/α` and `(θ̂ − θ)/θ` over valid
    /// samples whose true values exceed `floor` in magnitude.
    pub fn relative_errors(&self, floor_alpha: f64, floor_theta: f64) -> (Vec<f64>, Vec<f64>) {
        let mut ra = Vec::new();
        let mut rt = Vec::new();
        for e in self.events.iter().filter(|e| e.estimate_valid) {
            if e.x_true[0].abs() > floor_alpha {
                ra.push((e.x_hat[0] - e.x_true[0]) / e.x_true[0]);
            }
            if e.x_true[1].abs() > floor_theta {
                rt.push((e.x_hat[1] - e.x_true[1]) / e.x_true[1]);
            }
        }
        (ra, rt)
    }

    pub fn write_csv(&self, mut w: impl std::io::Write, header_comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = header_comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "t,alpha,theta,alpha_dot,theta_dot,u,sample,arrival")?;
        for i in 0..self.t.len() {
            let x = self.x[i];
            writeln!(
                w,
                "{:.4},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
                self.t[i], x[0], x[1], x[2], x[3], self.u[i], self.sampled[i] as u8, self.arrived[i] as u8
            )?;
        }
        Ok(())
    }
}

struct Sensor<'a> {
    mode: Mode,
    vision: &'a VisionConfig,
    master_seed: u64,
    h: f64,
    last: Option<StateEstimate>,
}

impl Sensor<'_> {
    fn measure(&mut self, k: usize, x: &Vector4<f64>) -> Result<(Vector4<f64>, bool)> {
        if self.mode == Mode::IdealState {
            return Ok((*x, true));
        }
        let cam = &self.vision.camera;
        let frame = vision::render_frame(x[0], x[1], cam)?;
        let attack = self
            .vision
            .attack
            .map(|kind| AttackSpec::new(kind, seed::derive(self.master_seed, "attack", k as u64)));
        let received = match self.mode {
            Mode::VisionLoop => {
                let mut cfg = CipherConfig::new(self.vision.key, self.vision.rounds);
                cfg.region = RegionChoice::Auto {
                    band_width: self.vision.band_width,
                };
                match cipher::encrypt(&frame, &cfg) {
                    Ok(enc) => {
                        let tampered = attack_band(&enc.image, &enc.header.region(), attack.as_ref())?;
                        cipher::decrypt(&tampered, &enc.header, &self.vision.key)?
                    }
                    // nothing recognizable to select: the frame is lost
                    Err(Error::NoLineFound { .. }) => GrayImage::filled(frame.width(), frame.height(), 0)?,
                    Err(e) => return Err(e),
                }
            }
            _ => match cipher::select_region(&frame, self.vision.band_width) {
                Ok(region) => attack_band(&frame, &region, attack.as_ref())?,
                Err(Error::NoLineFound { .. }) => GrayImage::filled(frame.width(), frame.height(), 0)?,
                Err(e) => return Err(e),
            },
        };
        let est = vision::extract_state(&received, self.last.as_ref(), self.h, cam);
        self.last = Some(est);
        Ok((Vector4::from(est.as_array()), est.valid))
    }
}

/// Applies `attack` to the pixels of `region` only.
pub fn attack_band(img: &GrayImage, region: &cipher::Region, attack: Option<&AttackSpec>) -> Result<GrayImage> {
    let Some(spec) = attack else {
        return Ok(img.clone());
    };
    let band = img.crop(region.x0, region.y0, region.cols, region.rows)?;
    let hit = spec.apply(&band)?;
    let mut out = img.clone();
    out.paste(&hit, region.x0, region.y0)?;
    Ok(out)
}

/// Closed-loop simulation with RK4 integration, zero-order hold at packet
/// arrivals and per-sample redraws of the uncertainty.
pub fn simulate(
    plant: &PlantModel,
    gain: &Gain,
    dm: &DelayModel,
    um: &UncertaintyModel,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    plant.validate()?;
    dm.validate()?;
    cfg.validate(dm)?;
    if gain.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("gain must be finite"));
    }
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let h_steps = ((dm.h / cfg.dt).round() as usize).max(1);
    let e = um.e_matrix();
    let attack_active = cfg.mode != Mode::IdealState && cfg.vision.attack.is_some();
    let charge_injection = attack_active || cfg.always_charge_injection;

    let mut delay_rng = seed::rng(seed::derive(cfg.seed, "delay", 0));
    let mut f_rng = seed::rng(seed::derive(cfg.seed, "uncertainty", 0));
    let mut sensor = Sensor {
        mode: cfg.mode,
        vision: &cfg.vision,
        master_seed: cfg.seed,
        h: dm.h,
        last: None,
    };

    let mut x = Vector4::from(cfg.x0);
    let mut u = 0.0;
    let mut a_eff = plant.a;
    let mut pending: Vec<(usize, usize, f64)> = Vec::new();
    let mut last_applied: Option<usize> = None;
    let cap = steps / cfg.record_stride + 2;
    let mut traj = Trajectory {
        mode: cfg.mode,
        t: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        u: Vec::with_capacity(cap),
        sampled: Vec::with_capacity(cap),
        arrived: Vec::with_capacity(cap),
        events: Vec::with_capacity(steps / h_steps + 1),
        diverged: false,
        diverged_at: None,
    };
    let (mut sampled, mut arrived) = (false, false);

    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        if step % h_steps == 0 {
            let k = step / h_steps;
            let (r1, r2) = um.draw(&mut f_rng);
            let f = Matrix4::from_diagonal(&Vector4::new(r1, r2, 0.0, 0.0));
            a_eff = plant.a + plant.d * f * e;
            let (x_hat, valid) = sensor.measure(k, &x)?;
            let delays = match cfg.mode {
                Mode::Traditional => sample_delays_traditional(dm, &mut delay_rng),
                _ => sample_delays(dm, k, charge_injection, &mut delay_rng),
            };
            let arrival_step = step + (delays.total() / cfg.dt).round() as usize;
            let uk = gain.apply(&x_hat);
            pending.push((arrival_step, traj.events.len(), uk));
            traj.events.push(SampleEvent {
                k,
                t,
                delays,
                arrival: arrival_step as f64 * cfg.dt,
                u: uk,
                applied: false,
                x_true: x.into(),
                x_hat: x_hat.into(),
                estimate_valid: valid,
            });
            sampled = true;
        }
        let mut i = 0;
        while i < pending.len() {
            if pending[i].0 == step {
                let (_, idx, uk) = pending.swap_remove(i);
                // a packet older than the one in force is stale
                if last_applied.is_none_or(|l| idx > l) {
                    u = uk;
                    last_applied = Some(idx);
                    traj.events[idx].applied = true;
                    arrived = true;
                }
            } else {
                i += 1;
            }
        }
        if step % cfg.record_stride == 0 || step == steps {
            traj.t.push(t);
            traj.x.push(x.into());
            traj.u.push(u);
            traj.sampled.push(sampled);
            traj.arrived.push(arrived);
            sampled = false;
            arrived = false;
        }
        if step == steps {
            break;
        }
        x = rk4(&a_eff, &plant.b, u, &x, cfg.dt);
        if !x.iter().all(|v| v.is_finite()) || x.norm() > cfg.divergence_bound {
            traj.diverged = true;
            traj.diverged_at = Some(t + cfg.dt);
            traj.t.push(t + cfg.dt);
            traj.x.push(x.into());
            traj.u.push(u);
            traj.sampled.push(false);
            traj.arrived.push(false);
            break;
        }
    }
    Ok(traj)
}

fn rk4(a: &Matrix4<f64>, b: &Vector4<f64>, u: f64, x: &Vector4<f64>, dt: f64) -> Vector4<f64> {
    let f = |x: &Vector4<f64>| a * x + b * u;
    let k1 = f(x);
    let k2 = f(&(x + k1 * (dt / 2.0)));
    let k3 = f(&(x + k2 * (dt / 2.0)));
    let k4 = f(&(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    Shear,
    SaltPepper,
    /// Gaussian attacks with fixed mean; levels are standard deviations.
    GaussianSigma { mu: f64 },
    /// `η̄_en + η̄_de` in seconds.
    EncDecBudget,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Shear => "shear_rate",
            SweepAxis::SaltPepper => "sp_density",
            SweepAxis::GaussianSigma { .. } => "gaussian_sigma",
            SweepAxis::EncDecBudget => "enc_dec_budget",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: f64,
    pub runs: usize,
    pub stable_runs: usize,
    /// Averages over runs of the per-run statistics.
    pub stats: RunStats,
    pub stable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub runs: usize,
    pub seed: u64,
    /// Start of the window for the position statistics.
    pub settle: f64,
    /// A run is stable when it did not diverge and ends below this norm.
    pub terminal_norm: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            runs: 20,
            seed: 0,
            settle: 2.0,
            terminal_norm: 0.5,
        }
    }
}

/// Independent seeded runs per level; rows come back in level order
/// regardless of execution order.
#[allow(clippy::too_many_arguments)]
pub fn robustness_sweep(
    plant: &PlantModel,
    gain: &Gain,
    dm: &DelayModel,
    um: &UncertaintyModel,
    base: &SimConfig,
    axis: SweepAxis,
    levels: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    if settings.runs == 0 || levels.is_empty() {
        return Err(Error::param("sweep needs at least one level and one run"));
    }
    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..settings.runs).map(move |r| (l, r)))
        .collect();
    let run = |&(l, r): &(usize, usize)| -> Result<(bool, RunStats)> {
        let level = levels[l];
        let mut cfg = *base;
        let mut dm = *dm;
        // common random numbers: run r sees the same delays and uncertainty
        // draws at every level
        cfg.seed = seed::derive(settings.seed, "sweep", r as u64);
        match axis {
            SweepAxis::Shear => cfg.vision.attack = Some(AttackKind::Shear { rate: level }),
            SweepAxis::SaltPepper => cfg.vision.attack = Some(AttackKind::SaltPepper { density: level }),
            SweepAxis::GaussianSigma { mu } => {
                cfg.vision.attack = Some(AttackKind::Gaussian { mu, sigma: level })
            }
            SweepAxis::EncDecBudget => dm = dm.with_enc_dec_budget(level),
        }
        let traj = simulate(plant, gain, &dm, um, &cfg)?;
        let stable = !traj.diverged && traj.final_norm() < settings.terminal_norm;
        Ok((stable, traj.stats(settings.settle)))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<(bool, RunStats)>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(bool, RunStats)>> = jobs.iter().map(run).collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(levels
        .iter()
        .enumerate()
        .map(|(l, &level)| {
            let chunk = &results[l * settings.runs..(l + 1) * settings.runs];
            let n = chunk.len() as f64;
            let stable_runs = chunk.iter().filter(|r| r.0).count();
            let avg = |f: fn(&RunStats) -> f64| chunk.iter().map(|r| f(&r.1)).sum::<f64>() / n;
            SweepRow {
                level,
                runs: chunk.len(),
                stable_runs,
                stats: RunStats {
                    mean_alpha: avg(|s| s.mean_alpha),
                    sd_alpha: avg(|s| s.sd_alpha),
                    mean_theta: avg(|s| s.mean_theta),
                    sd_theta: avg(|s| s.sd_theta),
                },
                stable: stable_runs == chunk.len(),
            }
        })
        .collect())
}

pub fn write_sweep_csv(
    rows: &[SweepRow],
    axis: SweepAxis,
    mut w: impl std::io::Write,
    header_comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "{},runs,stable_runs,mean_alpha,sd_alpha,mean_theta,sd_theta,verdict",
        axis.name()
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            r.level,
            r.runs,
            r.stable_runs,
            r.stats.mean_alpha,
            r.stats.sd_alpha,
            r.stats.mean_theta,
            r.stats.sd_theta,
            if r.stable { "stable" } else { "unstable" }
        )?;
    }
    Ok(())
}
