use std::ffi::CStr;
use std::ptr;

use adaos_ffi::*;

fn last_error() -> String {
    let p = adaos_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_engine(config: &AdaosEngineConfig) -> *mut AdaosEngine {
    let mut engine = ptr::null_mut();
    assert_eq!(unsafe { adaos_engine_new(config, &mut engine) }, AdaosStatus::Ok);
    assert!(!engine.is_null());
    engine
}

#[test]
fn engine_matches_the_rust_engine_day_by_day() {
    let engine = new_engine(&adaos_engine_config_default());
    let mut reference = adaos::engine::TitrationEngine::new(adaos::engine::EngineConfig::default()).unwrap();
    let mut out = AdaosDayResult::default();
    for day in 0..50u32 {
        let y_g = 12.0 - 0.1 * day as f64;
        let y_s = if day % 7 == 3 { 6.0 } else { 10.0 };
        assert_eq!(unsafe { adaos_engine_step(engine, y_g, y_s, &mut out) }, AdaosStatus::Ok);
        let rec = reference.step(y_g, y_s).unwrap();
        assert_eq!(out.day, rec.day);
        assert_eq!(out.dose.to_bits(), rec.dose.to_bits());
        assert_eq!(out.k_p_hat.to_bits(), rec.theta_hat.k_p.to_bits());
        assert_eq!(out.k_s_applied.to_bits(), rec.theta_applied.k_s.to_bits());
        assert_eq!(out.cost_total.to_bits(), rec.cost.total.to_bits());
    }
    let mut dose = f64::NAN;
    assert_eq!(unsafe { adaos_engine_dose(engine, &mut dose) }, AdaosStatus::Ok);
    assert_eq!(dose, out.dose);
    unsafe { adaos_engine_free(engine) };
}

#[test]
fn first_day_dose_from_default_gains() {
    // dithered gains on day 1 are (0.3 + 0.01 sign(sin 10), ...) and the
    // initial dose is zero
    let engine = new_engine(&adaos_engine_config_default());
    let mut out = AdaosDayResult::default();
    assert_eq!(unsafe { adaos_engine_step(engine, 12.0, 10.0, &mut out) }, AdaosStatus::Ok);
    assert_eq!(out.day, 1);
    assert!((out.dose - out.k_p_applied * 6.5).abs() < 1e-12);
    unsafe { adaos_engine_free(engine) };
}

#[test]
fn invalid_config_is_reported() {
    let mut config = adaos_engine_config_default();
    config.kp0 = 5.0;
    let mut engine = std::ptr::dangling_mut::<AdaosEngine>();
    assert_eq!(unsafe { adaos_engine_new(&config, &mut engine) }, AdaosStatus::InvalidConfig);
    assert!(engine.is_null());
    assert!(last_error().contains("outside"), "{}", last_error());
}

#[test]
fn bad_measurements_leave_the_engine_untouched() {
    let engine = new_engine(&adaos_engine_config_default());
    let mut out = AdaosDayResult::default();
    assert_eq!(unsafe { adaos_engine_step(engine, 9.0, 11.0, &mut out) }, AdaosStatus::InvalidInput);
    assert!(last_error().contains("score"));
    assert_eq!(unsafe { adaos_engine_step(engine, f64::NAN, 5.0, &mut out) }, AdaosStatus::InvalidInput);
    assert_eq!(unsafe { adaos_engine_step(engine, 9.0, 10.0, &mut out) }, AdaosStatus::Ok);
    assert_eq!(out.day, 1);
    unsafe { adaos_engine_free(engine) };
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = AdaosDayResult::default();
    let mut dose = 0.0;
    unsafe {
        assert_eq!(adaos_engine_step(ptr::null_mut(), 9.0, 10.0, &mut out), AdaosStatus::NullPointer);
        assert_eq!(adaos_engine_dose(ptr::null(), &mut dose), AdaosStatus::NullPointer);
        assert_eq!(adaos_engine_new(ptr::null(), ptr::null_mut()), AdaosStatus::NullPointer);
        let mut engine = ptr::null_mut();
        assert_eq!(adaos_engine_new(ptr::null(), &mut engine), AdaosStatus::NullPointer);
        assert_eq!(adaos_control_law(0.3, 1.0, 12.0, 0.0, 5.5, 10.0, ptr::null_mut()), AdaosStatus::NullPointer);
        adaos_engine_free(ptr::null_mut());
    }
    assert_eq!(last_error(), "out is null");
}

#[test]
fn errors_are_per_thread() {
    let mut config = adaos_engine_config_default();
    config.forgetting_factor = 0.0;
    let mut engine = ptr::null_mut();
    assert_eq!(unsafe { adaos_engine_new(&config, &mut engine) }, AdaosStatus::InvalidConfig);
    std::thread::spawn(|| assert!(adaos_last_error_message().is_null())).join().unwrap();
    assert!(last_error().contains("forgetting"));
}

#[test]
fn pure_functions() {
    let mut du = 0.0;
    assert_eq!(unsafe { adaos_control_law(0.3, 1.0, 12.0, 0.0, 5.5, 10.0, &mut du) }, AdaosStatus::Ok);
    assert!((du - 0.975).abs() < 1e-12);
    assert_eq!(unsafe { adaos_control_law(0.3, 1.0, 12.0, -1.0, 5.5, 10.0, &mut du) }, AdaosStatus::InvalidInput);
    assert!((adaos_smbg_sigma(4.2) - (0.02 * 2f64.ln() + 0.415)).abs() < 1e-12);
    assert_eq!(adaos_phg_sigmoid(0.6, 7.0, 0.6), 0.5);
    let s = adaos_softmin(2.0, 0.0, 50.0);
    assert!(s <= 0.0 && s > -1e-40);
    assert!((adaos_softmin(0.0, 0.0, 50.0) + 2f64.ln() / 50.0).abs() < 1e-15);
}
