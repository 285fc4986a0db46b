use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use refdiff::fixtures::{gen_dataset, FixtureSpec};
use refdiff::Dataset;
use refdiff_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = refdiff_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dataset(dir: &Path, n: usize) -> PathBuf {
    let spec = FixtureSpec {
        n_samples: n,
        ..FixtureSpec::default()
    };
    gen_dataset(&spec, dir).unwrap()
}

#[test]
fn tensor_roundtrip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&dir.path().join("t.rdtf"));
    let dims = [2usize, 3];
    let data = [0.0f32, 1.0, 2.0, 3.0, 4.0, 5.0];
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            refdiff_tensor_from_f32(dims.as_ptr(), 2, data.as_ptr(), 6, &mut t),
            RefdiffStatus::Ok
        );
        assert_eq!(refdiff_tensor_save(t, path.as_ptr()), RefdiffStatus::Ok);
        refdiff_tensor_free(t);

        let mut back = ptr::null_mut();
        assert_eq!(
            refdiff_tensor_load(path.as_ptr(), &mut back),
            RefdiffStatus::Ok
        );
        let mut got = [0usize; 4];
        assert_eq!(refdiff_tensor_dims(back, got.as_mut_ptr(), 4), 2);
        assert_eq!(&got[..2], &dims);
        assert_eq!(refdiff_tensor_dtype(back), RefdiffDtype::F32);
        let mut len = 0;
        let p = refdiff_tensor_data_f32(back, &mut len);
        assert_eq!(std::slice::from_raw_parts(p, len), &data);
        assert!(refdiff_tensor_data_u8(back, ptr::null_mut()).is_null());
        refdiff_tensor_free(back);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rdtf");
    std::fs::write(&bad, b"NOPE\x01\x01\x01\x00\x00\x00\x00").unwrap();
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            refdiff_tensor_load(cstr(&bad).as_ptr(), &mut t),
            RefdiffStatus::BadMagic
        );
        assert!(t.is_null());
        assert!(last_error().starts_with("BadMagic"));

        assert_eq!(
            refdiff_tensor_load(ptr::null(), &mut t),
            RefdiffStatus::NullArgument
        );
        let mut out = 0.0;
        let two = [1u8, 2];
        assert_eq!(
            refdiff_iou(two.as_ptr(), two.as_ptr(), 2, 1, &mut out),
            RefdiffStatus::NonBinaryMask
        );
        refdiff_tensor_free(ptr::null_mut());
    }
}

#[test]
fn correlation_and_generative_score() {
    // 2x2 grid, one token, one head, peak at (1,1)
    let dims = [2usize, 2, 1, 1];
    let data = [0.0f32, 0.0, 0.0, 4.0];
    unsafe {
        let mut att = ptr::null_mut();
        refdiff_tensor_from_f32(dims.as_ptr(), 4, data.as_ptr(), 4, &mut att);
        let mut map = ptr::null_mut();
        assert_eq!(
            refdiff_correlation_matrix(att, 0, 2, 2, 1e-8, &mut map),
            RefdiffStatus::Ok
        );
        assert_eq!((refdiff_map_width(map), refdiff_map_height(map)), (2, 2));
        let mut len = 0;
        let v = std::slice::from_raw_parts(refdiff_map_data(map, &mut len), len);
        assert!((v[3] - 1.0).abs() < 1e-6 && v[0] == 0.0);

        let mask = [0u8, 0, 0, 1];
        let mut s = 0.0;
        assert_eq!(
            refdiff_generative_score(map, mask.as_ptr(), 4, &mut s),
            RefdiffStatus::Ok
        );
        assert!((s - v[3]).abs() < 1e-12);

        let mut bad = ptr::null_mut();
        assert_eq!(
            refdiff_correlation_matrix(att, 5, 2, 2, 1e-8, &mut bad),
            RefdiffStatus::IndexOutOfRange
        );
        refdiff_map_free(map);
        refdiff_tensor_free(att);
    }
}

#[test]
fn positional_bias_flags() {
    unsafe {
        let mut m = ptr::null_mut();
        let both = REFDIFF_DIRECTION_LEFT | REFDIFF_DIRECTION_RIGHT;
        refdiff_positional_bias(both, 3, 2, RefdiffBiasProfile::Linear, &mut m);
        let v = std::slice::from_raw_parts(refdiff_map_data(m, ptr::null_mut()), 6);
        assert!(v.iter().all(|&x| x == 1.0));
        refdiff_map_free(m);

        refdiff_positional_bias(
            REFDIFF_DIRECTION_TOP,
            1,
            3,
            RefdiffBiasProfile::Linear,
            &mut m,
        );
        let v = std::slice::from_raw_parts(refdiff_map_data(m, ptr::null_mut()), 3);
        assert_eq!(v, &[1.0, 0.5, 0.0]);
        refdiff_map_free(m);
    }
}

#[test]
fn segment_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let index = dataset(dir.path(), 3);
    let ds = Dataset::load(&index).unwrap();
    let manifest = ds.resolve(&ds.entries[0]);
    let gt = refdiff::SampleManifest::parse(&manifest)
        .unwrap()
        .load_gt()
        .unwrap();
    let cfg = refdiff_config_default(RefdiffMode::Full);
    assert_eq!(cfg.alpha, 0.1);
    unsafe {
        let mut sel = ptr::null_mut();
        assert_eq!(
            refdiff_segment(cstr(&manifest).as_ptr(), &cfg, &mut sel),
            RefdiffStatus::Ok
        );
        let (mut w, mut h) = (0, 0);
        let mask = refdiff_selection_mask(sel, &mut w, &mut h);
        assert_eq!((w, h), gt.dims());
        assert_eq!(std::slice::from_raw_parts(mask, w * h), gt.as_slice());
        assert!(refdiff_selection_score(sel).is_finite());
        refdiff_selection_free(sel);

        let mut report = ptr::null_mut();
        assert_eq!(
            refdiff_evaluate(cstr(&index).as_ptr(), &cfg, 2, &mut report),
            RefdiffStatus::Ok
        );
        assert_eq!(refdiff_report_miou(report), 1.0);
        assert_eq!(refdiff_report_oiou(report), 1.0);
        assert_eq!(refdiff_report_len(report), 3);
        assert_eq!(refdiff_report_sample_iou(report, 2), 1.0);
        assert!(refdiff_report_sample_iou(report, 3).is_nan());
        let out = dir.path().join("report.json");
        assert_eq!(
            refdiff_report_write(report, cstr(&out).as_ptr()),
            RefdiffStatus::Ok
        );
        let text = std::fs::read_to_string(out).unwrap();
        assert!(text.contains("\"miou\": 1.0"));
        refdiff_report_free(report);

        let bad = RefdiffConfig { alpha: 2.0, ..cfg };
        assert_eq!(
            refdiff_segment(cstr(&manifest).as_ptr(), &bad, &mut sel),
            RefdiffStatus::InvalidConfig
        );
    }
}

/// Compile a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary> -> target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("librefdiff_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built at {}, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-Wall", "-Werror", "-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());

    let index = dataset(&dir.path().join("data"), 1);
    let ds = Dataset::load(&index).unwrap();
    let manifest = ds.resolve(&ds.entries[0]);
    let gt = manifest.parent().unwrap().join("gt.rdtf");
    let out = Command::new(&exe).arg(&manifest).arg(&gt).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
