use std::ffi::{CStr, CString};
use std::ptr;

use trotterflow_ffi::*;

fn interleave(m: &[(f64, f64)]) -> Vec<f64> {
    m.iter().flat_map(|&(re, im)| [re, im]).collect()
}

fn last_error() -> String {
    let p = tf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// d = 2, k = 1: H = diag(1, -1), W = I, R = [[0, 1], [0, 0]] (lowering).
fn amplitude_damping() -> *mut TfStructure {
    let h = interleave(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]);
    let w = interleave(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let r = interleave(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
    let mut s = ptr::null_mut();
    let st = unsafe { tf_structure_new(2, 1, h.as_ptr(), w.as_ptr(), r.as_ptr(), &mut s) };
    assert_eq!(st, TfStatus::Ok);
    s
}

#[test]
fn structure_round_trip() {
    let s = amplitude_damping();
    let (mut d, mut k) = (0, 0);
    assert_eq!(unsafe { tf_structure_dims(s, &mut d, &mut k) }, TfStatus::Ok);
    assert_eq!((d, k), (2, 1));

    let mut gen = vec![0.0; 2 * 16];
    assert_eq!(unsafe { tf_structure_generator(s, gen.as_mut_ptr()) }, TfStatus::Ok);
    // L(1) = 0: the identity column-stacked is e_0 + e_3, so columns 0 and 3 sum to zero
    for row in 0..4 {
        let re = gen[2 * (row * 4)] + gen[2 * (row * 4 + 3)];
        let im = gen[2 * (row * 4) + 1] + gen[2 * (row * 4 + 3) + 1];
        assert!(re.abs() < 1e-14 && im.abs() < 1e-14);
    }

    let mut both = ptr::null_mut();
    assert_eq!(unsafe { tf_structure_combine(s, s, &mut both) }, TfStatus::Ok);
    assert_eq!(unsafe { tf_structure_dims(both, &mut d, &mut k) }, TfStatus::Ok);
    assert_eq!((d, k), (2, 2));
    unsafe {
        tf_structure_free(both);
        tf_structure_free(s);
    }
}

#[test]
fn semigroup_decays_excited_population() {
    let s = amplitude_damping();
    let x = interleave(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let mut y = vec![0.0; 8];
    assert_eq!(
        unsafe { tf_semigroup_apply(s, 1.0, x.as_ptr(), y.as_mut_ptr()) },
        TfStatus::Ok
    );
    // R*R = |1><1|, so the projector onto e_1 decays as e^{-t}
    assert!((y[6] - (-1.0f64).exp()).abs() < 1e-12, "{y:?}");
    assert!(y[0].abs() < 1e-12);
    unsafe { tf_structure_free(s) };
}

#[test]
fn flow_element_of_identity_is_exponential_overlap() {
    let s = amplitude_damping();
    let x = interleave(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let u = interleave(&[(1.0, 0.0), (0.0, 0.0)]);
    let f = interleave(&[(0.5, 0.0)]);
    let g = interleave(&[(0.0, 1.0)]);
    let steps = 64;
    let (mut re, mut im) = (0.0, 0.0);
    let st = unsafe {
        tf_flow_matrix_element(
            s,
            1.0,
            steps,
            x.as_ptr(),
            u.as_ptr(),
            u.as_ptr(),
            f.as_ptr(),
            g.as_ptr(),
            &mut re,
            &mut im,
        )
    };
    assert_eq!(st, TfStatus::Ok, "{}", last_error());
    // <f, g> = f conj(g) = 0.5 * (-i)
    let h = 1.0 / steps as f64;
    let z = num_complex::Complex64::new(1.0, -0.5 * h).powi(steps as i32);
    assert!(
        (re - z.re).abs() < 1e-12 && (im - z.im).abs() < 1e-12,
        "{re} {im} vs {z}"
    );
    unsafe { tf_structure_free(s) };
}

#[test]
fn errors_are_reported() {
    let mut s = ptr::null_mut();
    let h = interleave(&[(0.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
    let w = interleave(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let r = [0.0; 8];
    let st = unsafe { tf_structure_new(2, 1, h.as_ptr(), w.as_ptr(), r.as_ptr(), &mut s) };
    assert_eq!(st, TfStatus::NotSelfAdjoint);
    assert!(s.is_null());
    assert!(last_error().contains("self-adjoint"));

    let st = unsafe { tf_structure_new(2, 1, ptr::null(), w.as_ptr(), r.as_ptr(), &mut s) };
    assert_eq!(st, TfStatus::NullPointer);
    assert_eq!(last_error(), "h is null");

    let (mut d, mut k) = (0, 0);
    assert_eq!(
        unsafe { tf_structure_dims(ptr::null(), &mut d, &mut k) },
        TfStatus::NullPointer
    );

    let bad_w = interleave(&[(2.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let h = [0.0; 8];
    let st = unsafe { tf_structure_new(2, 1, h.as_ptr(), bad_w.as_ptr(), r.as_ptr(), &mut s) };
    assert_eq!(st, TfStatus::NotUnitary);

    unsafe {
        tf_structure_free(ptr::null_mut());
        tf_string_free(ptr::null_mut());
    }
}

fn run(config: &str, seed: Option<u64>, format: TfFormat) -> (TfStatus, String, i32) {
    let c = CString::new(config).unwrap();
    let mut text = ptr::null_mut();
    let mut code = -1;
    let st = unsafe {
        tf_run_config(
            c.as_ptr(),
            seed.unwrap_or(0),
            seed.is_some() as i32,
            format,
            &mut text,
            &mut code,
        )
    };
    let out = if text.is_null() {
        String::new()
    } else {
        let s = unsafe { CStr::from_ptr(text) }.to_string_lossy().into_owned();
        unsafe { tf_string_free(text) };
        s
    };
    (st, out, code)
}

const SEMIGROUP: &str =
    r#"{"seed": 3, "experiment": {"kind": "semigroup-trotter", "pairs": 2, "n_values": [8, 16, 32, 64]}}"#;

#[test]
fn run_config_is_deterministic() {
    let (st, a, code) = run(SEMIGROUP, None, TfFormat::Csv);
    assert_eq!(st, TfStatus::Ok, "{}", last_error());
    assert_eq!(code, 0);
    assert!(a.starts_with("pair,n,error"), "{a}");
    let (_, b, _) = run(SEMIGROUP, None, TfFormat::Csv);
    assert_eq!(a, b);
    let (_, c, _) = run(SEMIGROUP, Some(4), TfFormat::Csv);
    assert_ne!(a, c);

    let (st, json, _) = run(SEMIGROUP, Some(4), TfFormat::Json);
    assert_eq!(st, TfStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["metadata"]["seed"], 4);
    assert_eq!(v["metadata"]["seed_source"], "cli");
}

#[test]
fn run_config_rejects_bad_configs() {
    let (st, out, code) = run(r#"{"seed": 1, "experiment": {"kind": "nope"}}"#, None, TfFormat::Csv);
    assert_eq!(st, TfStatus::Config);
    assert!(out.is_empty());
    assert_eq!(code, -1);
    let (st, _, _) = run("", None, TfFormat::Csv);
    assert_eq!(st, TfStatus::Config);
    let mut text = ptr::null_mut();
    let mut code = 0;
    let st = unsafe { tf_run_config(ptr::null(), 0, 0, TfFormat::Csv, &mut text, &mut code) };
    assert_eq!(st, TfStatus::NullPointer);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(tf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/trotterflow.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "tf_structure_new",
        "tf_run_config",
        "tf_last_error_message",
        "TF_STATUS_CONFIG",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    match std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c", header])
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("no C compiler available, syntax check skipped: {e}"),
    }
}
