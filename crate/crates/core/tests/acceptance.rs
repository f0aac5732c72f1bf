//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Tests hold a shared lock so the timed criteria run without contention.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector4};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;

use servolab::attacks::AttackKind;
use servolab::certify::{self, Certificate, LmiPlant, SearchOptions};
use servolab::chaos::{self, ChaosParams};
use servolab::cipher::{self, CipherConfig, RegionChoice};
use servolab::experiment::{self, FrameState};
use servolab::metrics;
use servolab::plant::{
    default_plant, simulate, DelayBounds, DelayModel, Gain, Interval, Refresh, SimConfig, UncertaintyModel, VisionConfig,
};
use servolab::vision::{self, CameraModel};
use servolab::{seed, GrayImage};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("{} {id:>2} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn key() -> ChaosParams {
    VisionConfig::default().key
}

fn band_config(rounds: u32) -> CipherConfig {
    CipherConfig {
        region: RegionChoice::Auto { band_width: cipher::DEFAULT_BAND_WIDTH },
        ..CipherConfig::new(key(), rounds)
    }
}

fn random_image(rng: &mut seed::Rng, width: usize, height: usize) -> GrayImage {
    GrayImage::from_fn(width, height, |_, _| rng.random()).unwrap()
}

#[test]
fn c01_cipher_round_trip() {
    let _g = serial();
    let mut rng = seed::rng(1);
    let mut images: Vec<GrayImage> = (0..50).map(|_| random_image(&mut rng, 480, 100)).collect();
    for _ in 0..10 {
        let (w, h) = (2 * rng.random_range(1..150) + 1, 2 * rng.random_range(1..150) + 1);
        images.push(random_image(&mut rng, w, h));
    }
    let (mut failures, mut draw_errors, mut worst) = (0, 0, Duration::ZERO);
    for img in &images {
        for t in 1..=3u32 {
            let cfg = CipherConfig { region: RegionChoice::Full, ..CipherConfig::new(key(), t) };
            let start = Instant::now();
            let enc = cipher::encrypt(img, &cfg).unwrap();
            let dec = cipher::decrypt(&enc.image, &enc.header, &key()).unwrap();
            let took = start.elapsed();
            if img.width() == 480 && img.height() == 100 {
                worst = worst.max(took);
            }
            if dec != *img {
                failures += 1;
            }
            let (m, n) = (img.height(), img.width());
            if enc.keystream_draws != t as usize * (m * n + m + n) {
                draw_errors += 1;
            }
        }
    }
    let ms = worst.as_secs_f64() * 1e3;
    report(
        1,
        "cipher round trip",
        failures == 0 && draw_errors == 0 && ms <= 50.0,
        &format!("{} images x T=1..3, {failures} mismatches, {draw_errors} draw-count errors, worst 100x480 enc+dec {ms:.2} ms", images.len()),
    );
}

#[test]
fn c02_ciphertext_quality() {
    let _g = serial();
    let f = FrameState::default();
    let frame = vision::render_frame(f.alpha, f.theta, &CameraModel::default()).unwrap();
    let start = Instant::now();
    let q = experiment::cipher_quality(&frame, &band_config(2)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "ciphertext quality",
        q.acceptable() && q.plain_corr_h >= 0.8 && secs < 5.0,
        &format!(
            "T=2 entropy {:.4}, NPCR {:.2}%, UACI {:.2}%, corr h/v/d {:.4}/{:.4}/{:.4}, plain h-corr {:.3}, {secs:.2} s",
            q.entropy, q.npcr, q.uaci, q.corr_h, q.corr_v, q.corr_d, q.plain_corr_h
        ),
    );
}

#[test]
fn c03_chi_square_flatness() {
    let _g = serial();
    let cam = CameraModel::default();
    let worst = std::cell::Cell::new(0.0f64);
    let mut runner = TestRunner::new_with_rng(Config::with_cases(10), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let result = runner.run(&(-0.2f64..0.2, -0.4f64..0.4), |(alpha, theta)| {
        let frame = vision::render_frame(alpha, theta, &cam).unwrap();
        let enc = cipher::encrypt(&frame, &band_config(1)).unwrap();
        let r = enc.header.region();
        let chi = metrics::chi_square_uniform(&enc.image.crop(r.x0, r.y0, r.cols, r.rows).unwrap());
        worst.set(worst.get().max(chi));
        proptest::prop_assert!(chi < metrics::CHI2_255_CRITICAL_1PCT, "χ² = {chi} at ({alpha}, {theta})");
        Ok(())
    });
    report(
        3,
        "chi-square flatness",
        result.is_ok(),
        &format!("10 random frames, worst χ² {:.1} (critical {})", worst.get(), metrics::CHI2_255_CRITICAL_1PCT),
    );
}

#[test]
fn c04_compromise_probability() {
    let _g = serial();
    let p = cipher::shear_compromise_probability(100, 4).unwrap();
    let shown = format!("{p:.4e}");
    report(4, "compromise probability", shown == "2.6034e-7", &format!("P(100,4) = {p:.6e}, target 2.6034e-7"));
}

#[test]
fn c05_chaos() {
    let _g = serial();
    let mut rng = seed::rng(5);
    let exps: Vec<f64> = (0..10)
        .map(|_| {
            let y0 = rng.random_range(2.05..5.0);
            chaos::lyapunov_exponent(&ChaosParams::new(0.5, 2.0, y0).unwrap(), 100_000).unwrap()
        })
        .collect();
    let k = ChaosParams::with_burn_in(0.5, 2.0, 2.5, 0).unwrap();
    let fixed = chaos::bulban_step(2.5, &k).unwrap() == 2.5;
    let slope = chaos::bulban_derivative(2.5, &k).unwrap();
    let fixed_lyap = chaos::lyapunov_exponent(&k, 1000).unwrap() == slope.abs().ln();
    let min = exps.iter().copied().fold(f64::INFINITY, f64::min);
    report(
        5,
        "chaos",
        min > 0.0 && fixed && fixed_lyap && (slope + 1.5).abs() < 1e-15,
        &format!("min Lyapunov over 10 seeds {min:.4}, f(a+b) = a+b: {fixed}, f'(a+b) = {slope}"),
    );
}

#[test]
fn c06_psnr_under_shear() {
    let _g = serial();
    let vc = VisionConfig::default();
    let rates = [0.01, 0.02, 0.04, 0.05, 0.06];
    let means: Vec<f64> = rates
        .iter()
        .map(|&rate| experiment::attacked_psnr(&vc, AttackKind::Shear { rate }, 20, 0).unwrap().0)
        .collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let above = means.iter().all(|&m| m > 20.0);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.2}")).collect();
    report(6, "PSNR under shear", monotone && above, &format!("mean dB at 1/2/4/5/6%: {}", shown.join(", ")));
}

#[test]
fn c07_delay_budget() {
    let _g = serial();
    let dm = DelayModel::default();
    let lower = dm.lambda_lower();
    // λ̄ = 2η̄_en + 2Δη + τ̄_sc + η̄_de + d̄ with the 0.01 s exposure inside η_en
    let formula = 2.0 * (0.007 + 0.010) + 2.0 * 0.001 + 0.005 + 0.007 + 0.009;
    let upper = dm.lambda_upper();
    report(
        7,
        "delay budget",
        lower == 0.026 && (upper - formula).abs() <= 1e-12,
        &format!("λ̲ = {lower}, λ̄ = {upper} (formula {formula})"),
    );
}

struct Stability {
    runs: usize,
    diverged: usize,
    worst_ratio: f64,
}

impl Stability {
    fn settled(&self) -> bool {
        self.diverged == 0 && self.worst_ratio <= 1e-2
    }
}

fn stability_run(gain: &Gain, dm: &DelayModel, um: &UncertaintyModel, runs: u64) -> Stability {
    let plant = default_plant().with_uncertainty(um);
    let (mut diverged, mut worst_ratio) = (0, 0.0f64);
    for s in 0..runs {
        let cfg = SimConfig { seed: s, ..SimConfig::default() };
        let traj = simulate(&plant, gain, dm, um, &cfg).unwrap();
        if traj.diverged {
            diverged += 1;
        } else {
            worst_ratio = worst_ratio.max(traj.final_norm() / Vector4::from(cfg.x0).norm());
        }
    }
    Stability { runs: runs as usize, diverged, worst_ratio }
}

/// Delays used by the stability criterion: every sampled `λ` lies in
/// `[0.026, 0.054]` and `τ ≤ 0.005`.
fn nominal_delays() -> DelayModel {
    let dm = DelayModel::default();
    assert!(dm.lambda_lower() >= 0.026 && dm.max_sample_lambda() <= 0.054 && dm.tau_bar() <= 0.005);
    dm
}

#[test]
fn c08_closed_loop_stability() {
    let _g = serial();
    let start = Instant::now();
    let gain = experiment::default_gain().unwrap();
    let um = UncertaintyModel::default();
    let nominal = stability_run(&gain, &nominal_delays(), &um, 100);

    let late = DelayModel { d_proc: Interval::new(0.007, 0.090), ..DelayModel::default() };
    assert!((late.max_sample_lambda() - 0.12).abs() < 1e-12);
    let late_run = stability_run(&gain, &late, &um, 100);

    let wide = UncertaintyModel { delta1_att: Interval::new(-2.6, 2.6), refresh: Refresh::Constant { r1: 1.0, r2: 1.0 }, ..um };
    assert!((wide.e_matrix()[(0, 0)] - 3.0).abs() < 1e-12);
    let wide_run = stability_run(&gain, &nominal_delays(), &wide, 100);

    let secs = start.elapsed().as_secs_f64();
    let frac = |s: &Stability| s.diverged as f64 / s.runs as f64;
    report(
        8,
        "closed-loop stability",
        nominal.settled() && frac(&late_run) >= 0.8 && frac(&wide_run) >= 0.8 && secs <= 120.0,
        &format!(
            "K = {:.3?}: nominal {}/{} diverged, worst ‖x(10)‖/‖x0‖ {:.2e}; λ to 0.12 s {:.0}% diverged; E11 = 3 {:.0}% diverged; {secs:.1} s",
            gain.0,
            nominal.diverged,
            nominal.runs,
            nominal.worst_ratio,
            100.0 * frac(&late_run),
            100.0 * frac(&wide_run)
        ),
    );
}

#[test]
fn c09_attack_sweep() {
    let _g = serial();
    let gain = experiment::default_gain().unwrap();
    let sds: Vec<f64> = [0.01, 0.02, 0.04]
        .iter()
        .map(|&rate| experiment::attack_row(&gain, AttackKind::Shear { rate }, 20, 0).unwrap().row.stats.sd_alpha)
        .collect();
    let gauss = experiment::attack_row(&gain, AttackKind::Gaussian { mu: 0.0, sigma: 1.0 }, 20, 0).unwrap();
    let monotone = sds.windows(2).all(|w| w[1] >= w[0]);
    report(
        9,
        "attack sweep",
        monotone && !gauss.row.stable,
        &format!(
            "SD(α) at shear 1/2/4%: {:.5}/{:.5}/{:.5} (nondecreasing: {monotone}); Gaussian(0,1) {} with {}/{} stable runs",
            sds[0],
            sds[1],
            sds[2],
            if gauss.row.stable { "stable" } else { "unstable" },
            gauss.row.stable_runs,
            gauss.row.runs
        ),
    );
}

fn scalar_cert(v: &[f64], bounds: DelayBounds) -> Certificate {
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    Certificate {
        x: s(v[0]),
        qt: (1..8).map(|i| s(v[i])).collect(),
        zt: (8..12).map(|i| s(v[i])).collect(),
        y: s(v[12]),
        eps: v[13],
        bounds,
        ..Certificate::zeros(1, 1, 1.0, bounds)
    }
}

/// Entry-by-entry matrix for a scalar plant, written from the block list.
fn hand_scalar(c: &Certificate, p: &LmiPlant) -> DMatrix<f64> {
    let (a, b, d, e) = (p.a[0], p.b[0], p.d[0], p.e[0]);
    let x = c.x[0];
    let q: Vec<f64> = c.qt.iter().map(|m| m[0]).collect();
    let z: Vec<f64> = c.zt.iter().map(|m| m[0]).collect();
    let (y, ep, dd) = (c.y[0], c.eps, d * d);
    let (ll, tb) = (c.bounds.lambda_lower, c.bounds.tau_bar);
    let l1 = c.bounds.lambda_upper + tb;
    let l2 = c.bounds.lambda_upper - ll;
    let l3 = l1 - ll;
    let [t1, t2, t3, t4] = c.theta;
    let mut m = DMatrix::zeros(13, 13);
    let mut set = |i: usize, j: usize, v: f64| {
        m[(i - 1, j - 1)] = v;
        m[(j - 1, i - 1)] = v;
    };
    set(1, 1, 2.0 * a * x + q.iter().sum::<f64>() - z[0] - z[2] + ep * dd);
    set(1, 2, z[0]);
    set(1, 5, z[2]);
    set(1, 7, b * y);
    set(2, 2, -q[0] - z[0] - z[1] - z[3]);
    set(2, 3, z[1]);
    set(2, 7, z[3]);
    set(3, 3, -(1.0 - c.eps1) * q[1] - 2.0 * z[1]);
    set(3, 4, z[1]);
    set(4, 4, -q[2] - z[1]);
    set(5, 5, -(1.0 - c.eps2) * q[3] - 2.0 * z[2]);
    set(5, 6, z[2]);
    set(6, 6, -q[4] - z[2]);
    set(7, 7, -2.0 * z[3]);
    set(7, 8, z[3]);
    set(8, 8, -q[6] - z[3]);
    for (j, c) in [(9, ll), (10, l2), (11, tb), (12, l3)] {
        set(1, j, c * x * a + ep * c * dd);
    }
    for (j, c) in [(9, ll), (10, l2), (11, tb), (12, l1)] {
        set(7, j, c * y * b);
    }
    let diag = [(9, t1, z[0], l1), (10, t2, z[1], l2), (11, t3, z[2], tb), (12, t4, z[3], l3)];
    for (i, t, zi, c) in diag {
        set(i, i, -2.0 * t * x + t * t * zi + ep * c * c * dd);
    }
    let scales = [ll, l2, tb, l3];
    for i in 0..4 {
        for j in i + 1..4 {
            set(9 + i, 9 + j, ep * scales[i] * scales[j] * dd);
        }
    }
    set(1, 13, e);
    set(13, 13, -ep);
    m
}

fn smooth_path(rng: &mut seed::Rng, n: usize, samples: usize, span: f64) -> (Vec<DVector<f64>>, DMatrix<f64>) {
    let modes = 3;
    let coef: Vec<f64> = (0..n * modes).map(|_| rng.random_range(-2.0..2.0)).collect();
    let freq: Vec<f64> = (0..n * modes).map(|_| rng.random_range(0.1..20.0)).collect();
    let phase: Vec<f64> = (0..n * modes).map(|_| rng.random_range(-3.0..3.0)).collect();
    let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xdot = (0..samples)
        .map(|s| {
            let t = span * s as f64 / (samples - 1) as f64;
            DVector::from_fn(n, |i, _| {
                offset[i] + (0..modes).map(|m| coef[i * modes + m] * (freq[i * modes + m] * t + phase[i * modes + m]).sin()).sum::<f64>()
            })
        })
        .collect();
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (xdot, &g * g.transpose() + DMatrix::identity(n, n) * 0.05)
}

#[test]
fn c10_certify() {
    let _g = serial();
    let bounds = DelayBounds::default();
    let mut rng = seed::rng(10);

    let scalar = LmiPlant::scalar(0.7, 1.3, 0.9, 0.6);
    let (mut hand_err, mut asym): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let v: Vec<f64> = (0..14).map(|i| if i == 13 { rng.random_range(0.01..3.0) } else { rng.random_range(-3.0..3.0) }).collect();
        let c = scalar_cert(&v, bounds);
        let phi = certify::assemble_theorem1(&c, &scalar).unwrap().phi;
        hand_err = hand_err.max((&phi - hand_scalar(&c, &scalar)).amax());
        asym = asym.max((&phi - phi.transpose()).amax());
    }

    let plant = default_plant();
    let lp = LmiPlant::from(&plant);
    let outcome = certify::certificate_search(&lp, bounds, 0, &SearchOptions::default()).unwrap();
    let cert = outcome.certificate().cloned();
    let (mut gain_residual, mut stability) = (f64::INFINITY, None);
    if let Some(c) = &cert {
        let phi = certify::assemble_theorem1(c, &lp).unwrap().phi;
        asym = asym.max((&phi - phi.transpose()).amax());
        let k = certify::recover_gain_matrix(c).unwrap();
        gain_residual = (&k * &c.x - &c.y).amax();
        let gain = certify::recover_gain(c).unwrap();
        stability = Some(stability_run(&gain, &nominal_delays(), &UncertaintyModel::default(), 100));
    }

    let mut lemma_failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let gamma = rng.random_range(0.001..1.0);
        let (xdot, r) = smooth_path(&mut rng, n, 201, gamma);
        if !certify::check_lemma1(&xdot, &r, gamma).unwrap().holds(1e-9) {
            lemma_failures += 1;
        }
        let d1 = rng.random_range(0.001..0.2);
        let d2 = d1 + rng.random_range(0.001..0.5);
        let dt = rng.random_range(d1..=d2);
        let (xdot, r) = smooth_path(&mut rng, n, 201, d2 - d1);
        if !certify::check_lemma2(&xdot, &r, d1, d2, dt).unwrap().holds(1e-9) {
            lemma_failures += 1;
        }
    }

    let settled = stability.as_ref().is_some_and(Stability::settled);
    report(
        10,
        "certify",
        asym <= 1e-12 && hand_err <= 1e-12 && gain_residual <= 1e-10 && lemma_failures == 0 && settled,
        &format!(
            "asymmetry {asym:.1e}, hand assembly {hand_err:.1e}, ‖KX−Y‖ {gain_residual:.1e}, lemma failures {lemma_failures}/2000, searched K = {:?}, stability {}",
            cert.as_ref().map(|c| certify::recover_gain(c).unwrap().0),
            stability.map_or("n/a".into(), |s| format!("{}/{} diverged, worst ratio {:.2e}", s.diverged, s.runs, s.worst_ratio))
        ),
    );
}

#[test]
fn c11_vision() {
    let _g = serial();
    let cam = CameraModel::default();
    let grid = |half: f64| (0..9).map(move |i| -half + 2.0 * half * i as f64 / 8.0);
    let (mut worst_a, mut worst_t, mut invalid) = (0.0f64, 0.0f64, 0);
    for alpha in grid(0.2) {
        for theta in grid(0.5) {
            let frame = vision::render_frame(alpha, theta, &cam).unwrap();
            let est = vision::extract_state(&frame, None, 1.0, &cam);
            if !est.valid {
                invalid += 1;
                continue;
            }
            worst_a = worst_a.max((est.alpha - alpha).abs());
            worst_t = worst_t.max((est.theta - theta).abs());
        }
    }
    report(
        11,
        "vision",
        invalid == 0 && worst_t <= 0.01 && worst_a <= 2.0 * cam.meters_per_pixel,
        &format!("9x9 grid α∈[−0.2,0.2] m, θ∈[−0.5,0.5] rad: worst |θ̂−θ| {worst_t:.4}, worst |α̂−α| {worst_a:.4} (limit {}), {invalid} unreadable", 2.0 * cam.meters_per_pixel),
    );
}
