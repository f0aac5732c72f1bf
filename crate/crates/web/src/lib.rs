//! Browser bindings: frame cipher, chaos diagnostics and closed-loop simulation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::*;

use servolab::attacks::AttackSpec;
use servolab::chaos::{self, ChaosParams};
use servolab::cipher::{self, CipherConfig};
use servolab::metrics::{self, MetricsReport, PairSampling};
use servolab::plant::{self, default_plant, DelayModel, Mode, SimConfig, UncertaintyModel, VisionConfig};
use servolab::vision::{self, CameraModel};
use servolab::{experiment, GrayImage};

fn js(e: servolab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn attack(text: &str, seed: u64) -> Result<Option<AttackSpec>, JsError> {
    match text.trim() {
        "" | "none" => Ok(None),
        t => AttackSpec::parse(t, seed).map(Some).map_err(js),
    }
}

/// Plain, cipher, attacked and decrypted versions of one rendered frame.
#[wasm_bindgen]
pub struct FrameDemo {
    width: usize,
    height: usize,
    plain: GrayImage,
    cipher: GrayImage,
    attacked: GrayImage,
    decrypted: GrayImage,
    report: MetricsReport,
    estimate: vision::StateEstimate,
    entropy: f64,
}

#[wasm_bindgen]
impl FrameDemo {
    /// Renders the frame at `(alpha, theta)`, encrypts its moving band with key
    /// `(a, b, y0)`, applies `attack` (`none`, `shear:R`, `sp:D`,
    /// `gaussian:MU,SIGMA`) to the band and decrypts it again.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(alpha: f64, theta: f64, a: f64, b: f64, y0: f64, rounds: u32, attack_text: &str, seed: u64) -> Result<FrameDemo, JsError> {
        let cam = CameraModel::default();
        let key = ChaosParams::new(a, b, y0).map_err(js)?;
        let plain = vision::render_frame(alpha, theta, &cam).map_err(js)?;
        let enc = cipher::encrypt(&plain, &CipherConfig::new(key, rounds)).map_err(js)?;
        let spec = attack(attack_text, seed)?;
        let attacked = plant::attack_band(&enc.image, &enc.header.region(), spec.as_ref()).map_err(js)?;
        let decrypted = cipher::decrypt(&attacked, &enc.header, &key).map_err(js)?;
        let report = MetricsReport::compute(&plain, &decrypted, PairSampling::default()).map_err(js)?;
        let estimate = vision::extract_state(&decrypted, None, DelayModel::default().h, &cam);
        let band = enc.image.crop(enc.header.x0, enc.header.y0, enc.header.cols, enc.header.rows).map_err(js)?;
        Ok(FrameDemo {
            width: cam.width,
            height: cam.height,
            plain,
            cipher: enc.image,
            attacked,
            decrypted,
            report,
            estimate,
            entropy: metrics::entropy(&band),
        })
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plain(&self) -> Vec<u8> {
        self.plain.as_bytes().to_vec()
    }

    pub fn cipher(&self) -> Vec<u8> {
        self.cipher.as_bytes().to_vec()
    }

    pub fn attacked(&self) -> Vec<u8> {
        self.attacked.as_bytes().to_vec()
    }

    pub fn decrypted(&self) -> Vec<u8> {
        self.decrypted.as_bytes().to_vec()
    }

    /// PSNR of the decrypted frame against the plain one (dB).
    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.report.psnr
    }

    /// Entropy of the encrypted band (bits).
    #[wasm_bindgen(getter)]
    pub fn band_entropy(&self) -> f64 {
        self.entropy
    }

    #[wasm_bindgen(getter)]
    pub fn alpha_hat(&self) -> f64 {
        self.estimate.alpha
    }

    #[wasm_bindgen(getter)]
    pub fn theta_hat(&self) -> f64 {
        self.estimate.theta
    }

    #[wasm_bindgen(getter)]
    pub fn estimate_valid(&self) -> bool {
        self.estimate.valid
    }
}

fn grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    if steps < 2 || !(hi > lo) {
        return Err(JsError::new("grid needs hi > lo and at least 2 steps"));
    }
    Ok((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())
}

/// Lyapunov exponent over an `a` grid as `[a0, v0, a1, v1, ...]`; `NaN`
/// where the orbit leaves the domain.
#[wasm_bindgen]
pub fn lyapunov_scan(a_min: f64, a_max: f64, steps: usize, b: f64, y0: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let g = grid(a_min, a_max, steps)?;
    Ok(chaos::lyapunov_scan(&g, b, y0, n)
        .into_iter()
        .flat_map(|(a, v)| [a, v.unwrap_or(f64::NAN)])
        .collect())
}

/// Bifurcation diagram points as `[a0, y0, a1, y1, ...]`.
#[wasm_bindgen]
pub fn bifurcation_scan(a_min: f64, a_max: f64, steps: usize, b: f64, y0: f64, settle: usize, keep: usize) -> Result<Vec<f64>, JsError> {
    let g = grid(a_min, a_max, steps)?;
    Ok(chaos::bifurcation_scan(&g, b, y0, settle, keep)
        .map_err(js)?
        .into_iter()
        .flat_map(|c| c.samples.into_iter().flat_map(move |y| [c.a, y]))
        .collect())
}

/// One closed-loop run.
#[wasm_bindgen]
pub struct SimRun {
    t: Vec<f64>,
    alpha: Vec<f64>,
    theta: Vec<f64>,
    diverged: bool,
    final_norm: f64,
}

#[wasm_bindgen]
impl SimRun {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn diverged(&self) -> bool {
        self.diverged
    }

    #[wasm_bindgen(getter)]
    pub fn final_norm(&self) -> f64 {
        self.final_norm
    }
}

/// Simulates the cart-pendulum under `mode` (`ideal_state`, `vision_loop`,
/// `traditional`) with the default pole-placement gain.
#[wasm_bindgen]
pub fn simulate(mode: &str, attack_text: &str, seed: u64, horizon: f64, enc_dec_budget: f64) -> Result<SimRun, JsError> {
    let mode: Mode = mode.parse().map_err(js)?;
    let spec = attack(attack_text, seed)?;
    let dm = DelayModel::default().with_enc_dec_budget(enc_dec_budget);
    let um = UncertaintyModel::default();
    let plant = default_plant().with_uncertainty(&um);
    let cfg = SimConfig {
        mode,
        horizon,
        seed,
        record_stride: 100,
        vision: VisionConfig { attack: spec.map(|s| s.kind), ..VisionConfig::default() },
        ..SimConfig::default()
    };
    let traj = plant::simulate(&plant, &experiment::default_gain().map_err(js)?, &dm, &um, &cfg).map_err(js)?;
    Ok(SimRun {
        alpha: traj.x.iter().map(|x| x[0]).collect(),
        theta: traj.x.iter().map(|x| x[1]).collect(),
        diverged: traj.diverged,
        final_norm: traj.final_norm(),
        t: traj.t,
    })
}

/// Default `η̄_en + η̄_de` (seconds).
#[wasm_bindgen]
pub fn default_enc_dec_budget() -> f64 {
    let dm = DelayModel::default();
    dm.eta_en.hi + dm.eta_de.hi
}
