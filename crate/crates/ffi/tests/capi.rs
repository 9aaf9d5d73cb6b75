use std::ffi::CStr;
use std::ptr;

use nougat_ffi::*;

fn stream(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let x = i as f64;
            let shift = if i >= n / 2 { 2.0 } else { 0.0 };
            [(x * 0.7).sin() + shift, (x * 1.3).cos()]
        })
        .collect()
}

fn last_error() -> String {
    let p = nougat_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn online_detector_round_trip() {
    let mut cfg = nougat_config_default();
    cfg.n_ref = 8;
    cfg.n_test = 4;
    cfg.sigma = 0.5;
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { nougat_detector_new(&cfg, &mut det) }, NougatStatus::Ok);
    assert!(!det.is_null());

    let mut step = NougatStep { t: 0, warm: false, alarm: false, dict_len: 0, value: 0.0, score: 0.0 };
    for (i, y) in stream(60).iter().enumerate() {
        let s = unsafe { nougat_detector_step(det, y.as_ptr(), 2, &mut step) };
        assert_eq!(s, NougatStatus::Ok);
        assert_eq!(step.t, i as u64);
        assert_eq!(step.warm, i >= 11);
        assert_eq!(step.value.is_nan(), !step.warm);
        if step.warm {
            assert!((step.score - (step.value + 1.0).abs()).abs() < 1e-15);
        }
    }
    assert!(step.dict_len >= 1);
    assert_eq!(unsafe { nougat_detector_dict_len(det) }, step.dict_len);
    unsafe { nougat_detector_free(det) };
}

#[test]
fn matches_core_detector() {
    use nougat_core::detectors::{DetectorKind, DetectorSet, DictionaryMode, StreamDetector};
    use nougat_core::{Dictionary, KernelParams, WindowConfig};

    let atoms = [0.0, 0.0, 1.0, 0.5, -1.0, 0.2];
    let mut cfg = nougat_config_default();
    cfg.kind = NougatKind::Drulsif;
    cfg.n_ref = 6;
    cfg.n_test = 3;
    cfg.sigma = 0.8;
    let mut det = ptr::null_mut();
    let s = unsafe { nougat_detector_new_fixed(&cfg, atoms.as_ptr(), 3, 2, &mut det) };
    assert_eq!(s, NougatStatus::Ok);

    let params = KernelParams::new(0.8).unwrap();
    let dict = Dictionary::from_atoms(atoms.chunks(2).map(<[f64]>::to_vec).collect(), params, 1.0).unwrap();
    let set = DetectorSet::new(vec![DetectorKind::Drulsif], cfg.mu, cfg.nu, cfg.xi);
    let mut reference =
        StreamDetector::new(set, WindowConfig::new(6, 3).unwrap(), DictionaryMode::Fixed(dict)).unwrap();

    let mut step = NougatStep { t: 0, warm: false, alarm: false, dict_len: 0, value: 0.0, score: 0.0 };
    for y in stream(40) {
        assert_eq!(unsafe { nougat_detector_step(det, y.as_ptr(), 2, &mut step) }, NougatStatus::Ok);
        let r = reference.step(&y).unwrap();
        assert_eq!(step.dict_len, 3);
        match r.values[0] {
            Some(v) => assert_eq!(v.to_bits(), step.value.to_bits()),
            None => assert!(step.value.is_nan()),
        }
        assert_eq!(r.alarms[0], step.alarm);
    }
    unsafe { nougat_detector_free(det) };
}

#[test]
fn error_codes() {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { nougat_detector_new(ptr::null(), &mut det) }, NougatStatus::NullPointer);
    assert!(last_error().contains("cfg"));

    let mut cfg = nougat_config_default();
    cfg.sigma = -1.0;
    assert_eq!(unsafe { nougat_detector_new(&cfg, &mut det) }, NougatStatus::InvalidArgument);
    assert!(det.is_null());

    cfg = nougat_config_default();
    cfg.n_ref = 0;
    assert_eq!(unsafe { nougat_detector_new(&cfg, &mut det) }, NougatStatus::InvalidArgument);

    cfg = nougat_config_default();
    assert_eq!(unsafe { nougat_detector_new(&cfg, &mut det) }, NougatStatus::Ok);
    let mut step = NougatStep { t: 0, warm: false, alarm: false, dict_len: 0, value: 0.0, score: 0.0 };
    let y2 = [0.1, 0.2];
    let y3 = [0.1, 0.2, 0.3];
    assert_eq!(unsafe { nougat_detector_step(det, y2.as_ptr(), 2, &mut step) }, NougatStatus::Ok);
    assert_eq!(unsafe { nougat_detector_step(det, y3.as_ptr(), 3, &mut step) }, NougatStatus::DimensionMismatch);
    let bad = [f64::NAN, 0.0];
    assert_eq!(unsafe { nougat_detector_step(det, bad.as_ptr(), 2, &mut step) }, NougatStatus::DataError);
    assert!(last_error().contains("non-finite"));
    assert_eq!(unsafe { nougat_detector_step(det, ptr::null(), 2, &mut step) }, NougatStatus::NullPointer);
    unsafe { nougat_detector_free(det) };
    unsafe { nougat_detector_free(ptr::null_mut()) };
    assert_eq!(unsafe { nougat_detector_dict_len(ptr::null()) }, 0);
}

#[test]
fn kappa_values() {
    let a = [0.0, 0.0];
    let b = [1.0, 1.0];
    let mut k = 0.0;
    assert_eq!(unsafe { nougat_kappa(a.as_ptr(), b.as_ptr(), 2, 1.0, &mut k) }, NougatStatus::Ok);
    assert!((k - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(unsafe { nougat_kappa(a.as_ptr(), a.as_ptr(), 2, 0.3, &mut k) }, NougatStatus::Ok);
    assert_eq!(k, 1.0);
    assert_eq!(unsafe { nougat_kappa(a.as_ptr(), b.as_ptr(), 2, 0.0, &mut k) }, NougatStatus::InvalidArgument);
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nougat.h")).unwrap();
    for name in [
        "nougat_detector_new",
        "nougat_detector_new_fixed",
        "nougat_detector_step",
        "nougat_detector_free",
        "nougat_last_error",
        "typedef struct NougatDetector NougatDetector",
        "NOUGAT_STATUS_DIMENSION_MISMATCH",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
