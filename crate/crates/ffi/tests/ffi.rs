use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use reggkm_ffi::*;

fn last_error() -> String {
    let p = rgkm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dims(ds: *const RgkmDataset) -> (usize, usize, usize) {
    let (mut n, mut p, mut q) = (0, 0, 0);
    assert_eq!(unsafe { rgkm_dataset_dims(ds, &mut n, &mut p, &mut q) }, RgkmStatus::Ok);
    (n, p, q)
}

#[test]
fn simulate_fit_predict_round_trip() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(rgkm_simulate(1, 0.0, 5, &mut ds), RgkmStatus::Ok);
        assert_eq!(dims(ds), (100, 1, 5));
        // keep raw covariates for prediction before standardizing
        let mut raw = ptr::null_mut();
        assert_eq!(rgkm_simulate(1, 0.0, 5, &mut raw), RgkmStatus::Ok);
        assert_eq!(rgkm_dataset_standardize(ds), RgkmStatus::Ok);
        assert_eq!(rgkm_dataset_standardize(ds), RgkmStatus::DataError);
        assert!(last_error().contains("already standardized"));

        let mut model = ptr::null_mut();
        assert_eq!(rgkm_fit(ds, 0.01, 0.01, 0.1, 5, &mut model), RgkmStatus::Ok);

        let spec = reggkm::simgen::SettingSpec::builtin(1, 0.0, 5).unwrap();
        let plain = reggkm::simgen::generate(&spec).unwrap();
        let x: Vec<f64> = plain.x().transpose().iter().copied().collect();
        let z: Vec<f64> = plain.z().transpose().iter().copied().collect();
        let mut scores = vec![0.0; 100];
        assert_eq!(rgkm_predict(model, x.as_ptr(), z.as_ptr(), 100, scores.as_mut_ptr()), RgkmStatus::Ok);

        let mut json = ptr::null_mut();
        assert_eq!(rgkm_model_to_json(model, &mut json), RgkmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rgkm_model_from_json(json, &mut back), RgkmStatus::Ok);
        let mut again = vec![0.0; 100];
        assert_eq!(rgkm_predict(back, x.as_ptr(), z.as_ptr(), 100, again.as_mut_ptr()), RgkmStatus::Ok);
        assert_eq!(scores, again);

        let time = plain.time().to_vec();
        let status: Vec<i32> = plain.status().iter().map(|s| *s as i32).collect();
        let mut c = 0.0;
        assert_eq!(rgkm_c_statistic(time.as_ptr(), status.as_ptr(), scores.as_ptr(), 100, f64::NAN, &mut c), RgkmStatus::Ok);
        assert!(c > 0.6 && c <= 1.0);
        let mut auc = 0.0;
        assert_eq!(rgkm_auc(time.as_ptr(), status.as_ptr(), scores.as_ptr(), 100, 0.0, &mut auc), RgkmStatus::Ok);
        assert!(auc > 0.6 && auc <= 1.0);

        rgkm_string_free(json);
        rgkm_model_free(model);
        rgkm_model_free(back);
        rgkm_dataset_free(ds);
        rgkm_dataset_free(raw);
    }
}

#[test]
fn dataset_from_arrays() {
    let time = [3.0, 1.0, 2.0, 4.0];
    let status = [1, 1, 0, 1];
    let x = [0.1, 0.2, 0.3, 0.4];
    let z = [1.0, 0.0, 0.5, 2.0, 1.5, 1.0, 0.2, 0.3];
    unsafe {
        let mut ds = ptr::null_mut();
        let s = rgkm_dataset_new(time.as_ptr(), status.as_ptr(), 4, x.as_ptr(), 1, z.as_ptr(), 2, &mut ds);
        assert_eq!(s, RgkmStatus::Ok);
        assert_eq!(dims(ds), (4, 1, 2));
        rgkm_dataset_free(ds);

        let bad_status = [1, 2, 0, 1];
        let mut ds = ptr::null_mut();
        let s = rgkm_dataset_new(time.as_ptr(), bad_status.as_ptr(), 4, x.as_ptr(), 1, z.as_ptr(), 2, &mut ds);
        assert_eq!(s, RgkmStatus::DataError);
        assert!(ds.is_null());

        let nan_time = [3.0, f64::NAN, 2.0, 4.0];
        let s = rgkm_dataset_new(nan_time.as_ptr(), status.as_ptr(), 4, x.as_ptr(), 1, z.as_ptr(), 2, &mut ds);
        assert_eq!(s, RgkmStatus::DataError);
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(rgkm_fit(ptr::null(), 0.1, 0.1, 0.1, 0, &mut model), RgkmStatus::NullPointer);
        assert!(last_error().contains("ds"));

        let mut ds = ptr::null_mut();
        assert_eq!(rgkm_simulate(9, 0.0, 1, &mut ds), RgkmStatus::InvalidArgument);
        assert_eq!(rgkm_simulate(1, 0.0, 1, &mut ds), RgkmStatus::Ok);
        // fitting raw data is refused
        assert_eq!(rgkm_fit(ds, 0.1, 0.1, 0.1, 0, &mut model), RgkmStatus::DataError);
        assert_eq!(rgkm_dataset_standardize(ds), RgkmStatus::Ok);
        assert_eq!(rgkm_fit(ds, 0.1, 0.1, 0.0, 0, &mut model), RgkmStatus::InvalidArgument);
        rgkm_dataset_free(ds);

        let junk = CString::new("{\"version\": 1}").unwrap();
        assert_eq!(rgkm_model_from_json(junk.as_ptr(), &mut model), RgkmStatus::DataError);

        let t = [1.0, 2.0];
        let s = [0, 0];
        let r = [0.5, 0.1];
        let mut out = 0.0;
        assert_eq!(rgkm_c_statistic(t.as_ptr(), s.as_ptr(), r.as_ptr(), 2, 0.0, &mut out), RgkmStatus::NumericalError);

        rgkm_dataset_free(ptr::null_mut());
        rgkm_model_free(ptr::null_mut());
        rgkm_string_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include").join("reggkm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "rgkm_dataset_new",
        "rgkm_dataset_free",
        "rgkm_dataset_standardize",
        "rgkm_fit",
        "rgkm_predict",
        "rgkm_model_to_json",
        "rgkm_model_from_json",
        "rgkm_c_statistic",
        "rgkm_auc",
        "rgkm_simulate",
        "rgkm_last_error_message",
        "rgkm_string_free",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("typedef struct RgkmModel RgkmModel;"));

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"reggkm.h\"\nint main(void) { RgkmDataset *d = 0; return rgkm_simulate(1, 0.0, 1, &d) == RGKM_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-I").arg(root.join("include")).arg(&src).output()
    else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
