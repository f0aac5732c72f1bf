use servolab_web::{bifurcation_scan, default_enc_dec_budget, lyapunov_scan, simulate, FrameDemo};

#[test]
fn frame_demo_without_attack_is_lossless() {
    let f = FrameDemo::new(0.05, 0.1, 0.5, 2.0, servolab::chaos::REFERENCE_Y0, 2, "none", 0).unwrap();
    assert_eq!(f.plain().len(), f.width() * f.height());
    assert_eq!(f.plain(), f.decrypted());
    assert_ne!(f.plain(), f.cipher());
    assert!(f.psnr().is_infinite());
    assert!(f.band_entropy() > 7.9);
    assert!(f.estimate_valid());
    assert!((f.theta_hat() - 0.1).abs() <= 0.01);
}

#[test]
fn frame_demo_with_shear_degrades_gracefully() {
    let f = FrameDemo::new(0.0, 0.0, 0.5, 2.0, servolab::chaos::REFERENCE_Y0, 1, "shear:0.02", 3).unwrap();
    assert_ne!(f.cipher(), f.attacked());
    assert!(f.psnr() > 20.0 && f.psnr().is_finite());
}

#[test]
fn chaos_scans_are_flat_pairs() {
    let l = lyapunov_scan(0.4, 0.5, 3, 2.0, servolab::chaos::REFERENCE_Y0, 5000).unwrap();
    assert_eq!(l.len(), 6);
    assert_eq!(l[4], 0.5);
    let b = bifurcation_scan(0.3, 0.6, 4, 2.0, servolab::chaos::REFERENCE_Y0, 100, 10).unwrap();
    assert_eq!(b.len() % 2, 0);
    assert!(b.chunks(2).all(|p| (0.3..=0.6).contains(&p[0])));
}

#[test]
fn ideal_state_simulation_settles() {
    let run = simulate("ideal_state", "none", 1, 5.0, default_enc_dec_budget()).unwrap();
    assert!(!run.diverged());
    assert_eq!(run.t().len(), run.alpha().len());
    assert!(run.final_norm() < 0.01);
}
