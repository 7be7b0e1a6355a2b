use std::ffi::{c_void, CStr};
use std::process::Command;
use std::ptr;

use sbd::*;

unsafe extern "C" fn sphere(x: *const f64, dims: usize, user: *mut c_void) -> f64 {
    let calls = &mut *(user as *mut usize);
    *calls += 1;
    std::slice::from_raw_parts(x, dims).iter().map(|v| v * v).sum()
}

fn last_error() -> String {
    let p = sbd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn accounting_round_trip() {
    let mut saving = 0.0;
    let mut budget = 0;
    unsafe {
        assert_eq!(sbd_time_saving(20, 100, 50, &mut saving), SbdStatus::Ok);
        assert_eq!(saving, 97.5);
        assert_eq!(sbd_budget_from_saving(20, 100, 97.5, &mut budget), SbdStatus::Ok);
    }
    assert_eq!(budget, 50);
}

#[test]
fn null_and_bad_arguments_report_errors() {
    unsafe {
        assert_eq!(sbd_time_saving(20, 100, 50, ptr::null_mut()), SbdStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut out = 0.0;
        assert_eq!(sbd_time_saving(0, 100, 5, &mut out), SbdStatus::InvalidArgument);
        let x = [0.0; 2];
        assert_ne!(sbd_benchmark_eval(c"nope".as_ptr(), x.as_ptr(), 2, &mut out), SbdStatus::Ok);
    }
}

#[test]
fn benchmark_minima() {
    let mut out = f64::NAN;
    unsafe {
        let ones = [1.0; 3];
        assert_eq!(sbd_benchmark_eval(c"levy".as_ptr(), ones.as_ptr(), 3, &mut out), SbdStatus::Ok);
        assert!(out.abs() < 1e-12);
        let zeros = [0.0; 3];
        assert_eq!(sbd_benchmark_eval(c"ackley".as_ptr(), zeros.as_ptr(), 3, &mut out), SbdStatus::Ok);
        assert!(out.abs() < 1e-12);
    }
}

#[test]
fn tma_cost_rejects_wrong_dimension() {
    let omega = [0.1; 8];
    let mut out = 0.0;
    unsafe {
        assert_eq!(sbd_tma_cost(16, -30.0, omega.as_ptr(), 8, &mut out), SbdStatus::Ok);
        assert!(out.is_finite() && out >= 0.0);
        assert_eq!(sbd_tma_cost(16, -30.0, omega.as_ptr(), 7, &mut out), SbdStatus::DimensionMismatch);
    }
}

#[test]
fn kriging_interpolates_training_data() {
    unsafe {
        let set = sbd_training_set_new(1);
        for i in 0..6 {
            let x = [i as f64 / 5.0];
            assert_eq!(sbd_training_set_push(set, x.as_ptr(), 1, x[0] * x[0]), SbdStatus::Ok);
        }
        assert_eq!(sbd_training_set_len(set), 6);
        let mut model = ptr::null_mut();
        assert_eq!(sbd_model_fit(set, SbdModelKind::Kriging, &mut model), SbdStatus::Ok);
        let (mut v, mut c) = (0.0, 0.0);
        let x = [0.4];
        assert_eq!(sbd_model_predict(model, x.as_ptr(), 1, &mut v, &mut c), SbdStatus::Ok);
        assert!((v - 0.16).abs() < 1e-4);
        assert!((0.0..1e-2).contains(&c));
        sbd_model_free(model);

        assert_eq!(sbd_model_fit(set, SbdModelKind::Rbfn, &mut model), SbdStatus::Ok);
        assert_eq!(sbd_model_predict(model, x.as_ptr(), 1, &mut v, &mut c), SbdStatus::Ok);
        assert!(c.is_nan());
        assert_eq!(sbd_model_predict(model, x.as_ptr(), 2, &mut v, ptr::null_mut()), SbdStatus::DimensionMismatch);
        sbd_model_free(model);
        sbd_training_set_free(set);
    }
}

#[test]
fn empty_training_set_cannot_be_fitted() {
    unsafe {
        let set = sbd_training_set_new(2);
        let mut model = ptr::null_mut();
        assert_ne!(sbd_model_fit(set, SbdModelKind::Kriging, &mut model), SbdStatus::Ok);
        assert!(model.is_null());
        sbd_training_set_free(set);
    }
}

#[test]
fn optimizers_call_back_the_expected_number_of_times() {
    let lower = [-5.0; 2];
    let upper = [5.0; 2];
    for opt in [SbdOptimizer::Pso, SbdOptimizer::De] {
        let mut calls = 0usize;
        let mut best = [f64::NAN; 2];
        let (mut cost, mut evals) = (f64::NAN, 0usize);
        let status = unsafe {
            sbd_optimize(
                opt,
                Some(sphere),
                &mut calls as *mut usize as *mut c_void,
                lower.as_ptr(),
                upper.as_ptr(),
                2,
                10,
                30,
                7,
                best.as_mut_ptr(),
                &mut cost,
                &mut evals,
            )
        };
        assert_eq!(status, SbdStatus::Ok);
        assert_eq!(calls, 10 * 31);
        assert_eq!(evals, calls);
        assert!(cost < 1e-2, "{opt:?} {cost}");
        assert!((best[0] * best[0] + best[1] * best[1] - cost).abs() < 1e-12);
    }
}

#[test]
fn confidence_sbd_respects_budget() {
    let lower = [-5.0; 2];
    let upper = [5.0; 2];
    let mut calls = 0usize;
    let mut best = [f64::NAN; 2];
    let (mut cost, mut evals) = (f64::NAN, 0usize);
    let status = unsafe {
        sbd_pso_ok_c(
            Some(sphere),
            &mut calls as *mut usize as *mut c_void,
            lower.as_ptr(),
            upper.as_ptr(),
            2,
            10,
            20,
            6,
            15,
            2.0,
            3,
            best.as_mut_ptr(),
            &mut cost,
            &mut evals,
        )
    };
    assert_eq!(status, SbdStatus::Ok);
    assert!(calls <= 15 && evals == calls, "{calls} {evals}");
    assert!(cost.is_finite());

    let status = unsafe {
        sbd_pso_ok_c(
            None,
            ptr::null_mut(),
            lower.as_ptr(),
            upper.as_ptr(),
            2,
            10,
            20,
            6,
            15,
            2.0,
            3,
            best.as_mut_ptr(),
            &mut cost,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, SbdStatus::NullPointer);
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"sbd.h\"\nint main(void) { double s; return sbd_time_saving(20, 100, 50, &s) == SBD_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
    {
        Ok(out) => out,
        Err(_) => return,
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
