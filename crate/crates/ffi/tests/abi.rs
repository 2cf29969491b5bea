use std::ffi::{CStr, CString};
use std::ptr;

use psod_eval::mask::{save_mask, SaliencyMap};
use psod_eval::metrics::{MetricConfig, MetricSet};
use psod_eval::synth::{generate_benchmark, BenchmarkConfig};
use psod_eval_ffi::*;

fn new_mask(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> *mut PsodMask {
    let values: Vec<f64> = (0..w * h).map(|i| f(i % w, i / w)).collect();
    let mut out = ptr::null_mut();
    let status = unsafe { psod_mask_new(w, h, values.as_ptr(), values.len(), &mut out) };
    assert_eq!(status, PsodStatus::Ok);
    out
}

fn last_error() -> String {
    let p = psod_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn rect(x: usize, y: usize) -> f64 {
    ((3..12).contains(&x) && (2..9).contains(&y)) as u8 as f64
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(psod_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn mask_lifecycle() {
    let m = new_mask(5, 3, |x, y| (x + y) as f64 / 10.0);
    unsafe {
        assert_eq!(psod_mask_width(m), 5);
        assert_eq!(psod_mask_height(m), 3);
        let mut buf = vec![0.0; 15];
        assert_eq!(psod_mask_values(m, buf.as_mut_ptr(), 15), PsodStatus::Ok);
        assert_eq!(buf[7], 0.3);
        assert_eq!(psod_mask_values(m, buf.as_mut_ptr(), 14), PsodStatus::InvalidArgument);
        psod_mask_free(m);
        psod_mask_free(ptr::null_mut());
        assert_eq!(psod_mask_width(ptr::null()), 0);
    }
}

#[test]
fn invalid_masks_are_rejected() {
    let mut out = ptr::null_mut();
    let bad = [0.0, 1.5];
    unsafe {
        assert_eq!(psod_mask_new(2, 1, bad.as_ptr(), 2, &mut out), PsodStatus::InvalidArgument);
        assert!(out.is_null());
        assert_eq!(psod_mask_new(3, 1, bad.as_ptr(), 2, &mut out), PsodStatus::InvalidArgument);
        assert!(last_error().contains("expected 3"));
        assert_eq!(psod_mask_new(2, 1, ptr::null(), 2, &mut out), PsodStatus::NullPointer);
        assert_eq!(psod_mask_new(2, 1, bad.as_ptr(), 2, ptr::null_mut()), PsodStatus::NullPointer);
    }
}

#[test]
fn metrics_match_library() {
    let pred = new_mask(16, 12, |x, y| if rect(x, y) == 1.0 { 0.8 } else { (x * y % 5) as f64 / 20.0 });
    let gt = new_mask(16, 12, rect);
    let mut m = PsodMetrics::default();
    let mut ms = 0.0;
    unsafe {
        assert_eq!(psod_metrics(pred, gt, &mut m), PsodStatus::Ok);
        assert_eq!(psod_match_score(pred, gt, &mut ms), PsodStatus::Ok);
    }
    let p = SaliencyMap::from_fn(16, 12, |x, y| if rect(x, y) == 1.0 { 0.8 } else { (x * y % 5) as f64 / 20.0 });
    let g = SaliencyMap::from_fn(16, 12, rect);
    let want = MetricSet::compute(&p, &g, &MetricConfig::default()).unwrap();
    assert_eq!(
        [m.f_max, m.f_avg, m.s_measure, m.e_mean, m.mae, m.match_score],
        want.values()
    );
    assert_eq!(ms, want.match_score);
    unsafe {
        psod_mask_free(pred);
        psod_mask_free(gt);
    }
}

#[test]
fn error_codes() {
    let a = new_mask(4, 4, |_, _| 0.5);
    let b = new_mask(5, 4, |_, _| 0.5);
    let empty = new_mask(4, 4, |_, _| 0.0);
    let mut m = PsodMetrics::default();
    let mut v = 0.0;
    unsafe {
        assert_eq!(psod_metrics(a, b, &mut m), PsodStatus::DimensionMismatch);
        assert!(!last_error().is_empty());
        assert_eq!(psod_metrics(a, ptr::null(), &mut m), PsodStatus::NullPointer);
        assert_eq!(psod_metrics(a, empty, &mut m), PsodStatus::EmptyGroundTruth);
        // match score falls back to the structure measure on empty ground truth
        assert_eq!(psod_match_score(a, empty, &mut v), PsodStatus::Ok);
        assert_eq!(v, 0.5);

        let path = CString::new("/nonexistent/dir/mask.png").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(psod_mask_load(path.as_ptr(), &mut out), PsodStatus::Io);
        assert_eq!(psod_mask_load(ptr::null(), &mut out), PsodStatus::NullPointer);
        for p in [a, b, empty] {
            psod_mask_free(p);
        }
    }
}

#[test]
fn losses_and_levels() {
    let gt = new_mask(8, 8, |x, _| (x < 4) as u8 as f64);
    let half = new_mask(8, 8, |_, _| 0.5);
    let mut l = PsodLoss::default();
    unsafe {
        assert_eq!(psod_mask_loss(half, gt, PSOD_DEFAULT_LAMBDA_CE, &mut l), PsodStatus::Ok);
        assert!((l.ce - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(l.total, 2.5 * l.ce + l.dice);
        assert_eq!(psod_mask_loss(half, gt, 0.0, &mut l), PsodStatus::InvalidArgument);
        psod_mask_free(gt);
        psod_mask_free(half);

        let mut q = 0.0;
        let levels: Vec<f64> = (1..=4)
            .map(|lv| {
                assert_eq!(psod_normalize_quality_level(lv, &mut q), PsodStatus::Ok);
                q
            })
            .collect();
        assert_eq!(levels, [0.0, 0.33, 0.67, 1.0]);
        assert_eq!(psod_normalize_quality_level(9, &mut q), PsodStatus::InvalidArgument);
    }
    assert!((psod_f1_harmonic(0.889, 0.904) - 0.896).abs() < 5e-4);
    assert_eq!(psod_f1_harmonic(0.0, 0.0), 0.0);
}

#[test]
fn precision_recall_from_flat_matrix() {
    // two predictions, three ground truths
    let m = [0.9, 0.2, 0.1, 0.3, 0.8, 0.4];
    let (mut p, mut r) = (0.0, 0.0);
    unsafe {
        assert_eq!(psod_image_precision(m.as_ptr(), 2, 3, &mut p), PsodStatus::Ok);
        assert_eq!(psod_image_recall(m.as_ptr(), 2, 3, &mut r), PsodStatus::Ok);
        assert_eq!(psod_image_precision(m.as_ptr(), 0, 3, &mut p), PsodStatus::InvalidArgument);
    }
    assert!((p - 0.85).abs() < 1e-15);
    assert!((r - (0.9 + 0.8 + 0.4) / 3.0).abs() < 1e-15);
}

#[test]
fn alignment() {
    let a = [0.9, 0.3, 0.5];
    let b = [0.1, 0.7, 0.5];
    let a_sup = [1u8, 0, 1];
    let mut acc = 0.0;
    unsafe {
        assert_eq!(psod_alignment_accuracy(a.as_ptr(), b.as_ptr(), a_sup.as_ptr(), 3, PsodTiePolicy::Half, &mut acc), PsodStatus::Ok);
        assert!((acc - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(psod_alignment_accuracy(a.as_ptr(), b.as_ptr(), a_sup.as_ptr(), 3, PsodTiePolicy::Wrong, &mut acc), PsodStatus::Ok);
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(psod_alignment_accuracy(a.as_ptr(), b.as_ptr(), a_sup.as_ptr(), 0, PsodTiePolicy::Half, &mut acc), PsodStatus::InvalidArgument);
    }
}

#[test]
fn manifest_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = BenchmarkConfig {
        n_images: 3,
        width: 64,
        height: 64,
        ..BenchmarkConfig::default()
    };
    let manifest = generate_benchmark(&cfg, &MetricConfig::default(), tmp.path()).unwrap();
    let path = CString::new(manifest.to_str().unwrap()).unwrap();
    let mut s = PsodEvalSummary::default();
    unsafe {
        assert_eq!(psod_evaluate_manifest(path.as_ptr(), 0.5, &mut s), PsodStatus::Ok);
    }
    assert_eq!(s.n_images, 3);
    assert_eq!(s.threshold, 0.5);
    assert!(s.ap > 0.0 && s.ap <= 1.0 && s.ar > 0.0 && s.ar <= 1.0);

    let png = tmp.path().join("m.png");
    save_mask(&SaliencyMap::from_fn(6, 4, |x, _| x as f64 / 5.0), &png).unwrap();
    let png = CString::new(png.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(psod_mask_load(png.as_ptr(), &mut m), PsodStatus::Ok);
        assert_eq!((psod_mask_width(m), psod_mask_height(m)), (6, 4));
        let copy = CString::new(tmp.path().join("copy.png").to_str().unwrap()).unwrap();
        assert_eq!(psod_mask_save(m, copy.as_ptr()), PsodStatus::Ok);
        psod_mask_free(m);
    }
}
