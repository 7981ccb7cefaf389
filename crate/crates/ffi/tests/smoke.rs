//! Exercises the C ABI from Rust: handle lifecycles, status codes, the
//! thread-local error slot, and determinism of the sampling entry points.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use dgp_inverse_ffi::{
    dgpinv_baseline_sample, dgpinv_contract_json, dgpinv_dgp_sample, dgpinv_exponents_json,
    dgpinv_field_dim, dgpinv_field_free, dgpinv_field_from_json, dgpinv_field_len,
    dgpinv_field_new, dgpinv_field_to_json, dgpinv_field_values, dgpinv_last_error,
    dgpinv_model_apply, dgpinv_model_free, dgpinv_model_new, dgpinv_string_free, dgpinv_version,
    DgpinvField, DgpinvModel, DgpinvProblem, DgpinvStatus,
};

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(dgpinv_last_error())
            .to_str()
            .expect("error messages are UTF-8")
            .to_owned()
    }
}

/// Copies and frees a returned string.
fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    unsafe {
        let text = CStr::from_ptr(ptr).to_str().unwrap().to_owned();
        dgpinv_string_free(ptr);
        text
    }
}

fn values_of(field: *const DgpinvField) -> Vec<f64> {
    unsafe {
        let len = dgpinv_field_len(field);
        let mut buf = vec![0.0; len];
        assert_eq!(
            dgpinv_field_values(field, buf.as_mut_ptr(), len),
            DgpinvStatus::Ok
        );
        buf
    }
}

#[test]
fn version_is_a_static_semverish_string() {
    let v = unsafe { CStr::from_ptr(dgpinv_version()) }.to_str().unwrap();
    assert!(v.contains('.'), "unexpected version {v:?}");
}

#[test]
fn field_handles_round_trip_through_json() {
    unsafe {
        let values: Vec<f64> = (0..65).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut field: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_new(1, 65, 0.25, values.as_ptr(), values.len(), &mut field),
            DgpinvStatus::Ok
        );
        assert_eq!(dgpinv_field_len(field), 65);
        assert_eq!(dgpinv_field_dim(field), 1);
        assert_eq!(values_of(field), values);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(dgpinv_field_to_json(field, &mut json), DgpinvStatus::Ok);
        let text = take_string(json);

        let c_text = CString::new(text).unwrap();
        let mut back: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_from_json(c_text.as_ptr(), &mut back),
            DgpinvStatus::Ok
        );
        assert_eq!(values_of(back), values);

        dgpinv_field_free(field);
        dgpinv_field_free(back);
    }
}

#[test]
fn mismatched_value_blocks_and_buffers_are_refused() {
    unsafe {
        let values = [1.0; 10];
        let mut field: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_new(1, 65, 0.25, values.as_ptr(), values.len(), &mut field),
            DgpinvStatus::Config
        );
        assert!(field.is_null());
        assert!(last_error().contains("65 nodes"), "{}", last_error());

        let good: Vec<f64> = vec![0.0; 65];
        assert_eq!(
            dgpinv_field_new(1, 65, 0.25, good.as_ptr(), good.len(), &mut field),
            DgpinvStatus::Ok
        );
        assert!(last_error().is_empty(), "success must clear the slot");
        let mut short = vec![0.0; 3];
        assert_eq!(
            dgpinv_field_values(field, short.as_mut_ptr(), short.len()),
            DgpinvStatus::Config
        );
        dgpinv_field_free(field);
    }
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    unsafe {
        let mut out: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_new(1, 65, 0.25, ptr::null(), 65, &mut out),
            DgpinvStatus::NullArgument
        );
        assert!(last_error().contains("values"));
        assert_eq!(dgpinv_field_len(ptr::null()), 0);
        assert_eq!(dgpinv_field_dim(ptr::null()), 0);
        assert_eq!(
            dgpinv_model_apply(ptr::null(), ptr::null(), &mut out),
            DgpinvStatus::NullArgument
        );
        dgpinv_field_free(ptr::null_mut());
        dgpinv_model_free(ptr::null_mut());
        dgpinv_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_arguments_return_the_utf8_status() {
    unsafe {
        let bad = [0xffu8, 0xfe, 0x00];
        let mut out: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_from_json(bad.as_ptr() as *const c_char, &mut out),
            DgpinvStatus::Utf8
        );
        assert!(last_error().contains("UTF-8"));
    }
}

#[test]
fn schrodinger_apply_respects_the_maximum_principle() {
    unsafe {
        let mut model: *mut DgpinvModel = ptr::null_mut();
        assert_eq!(
            dgpinv_model_new(DgpinvProblem::Schrodinger, 1, 65, 0.25, 0.0, &mut model),
            DgpinvStatus::Ok
        );

        let theta = vec![0.0; 65];
        let mut theta_field: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_new(1, 65, 0.25, theta.as_ptr(), theta.len(), &mut theta_field),
            DgpinvStatus::Ok
        );

        let mut u: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_model_apply(model, theta_field, &mut u),
            DgpinvStatus::Ok
        );
        let values = values_of(u);
        assert!(values.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-10));

        // A field on a different grid is refused before the solver runs.
        let other = vec![0.0; 33];
        let mut other_field: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_field_new(1, 33, 0.25, other.as_ptr(), other.len(), &mut other_field),
            DgpinvStatus::Ok
        );
        let mut refused: *mut DgpinvField = ptr::null_mut();
        assert_eq!(
            dgpinv_model_apply(model, other_field, &mut refused),
            DgpinvStatus::Config
        );
        assert!(last_error().contains("grid"));

        dgpinv_field_free(theta_field);
        dgpinv_field_free(other_field);
        dgpinv_field_free(u);
        dgpinv_model_free(model);
    }
}

#[test]
fn prior_draws_are_deterministic_in_seed_and_replicate() {
    unsafe {
        let draw = |replicate: u32| -> Vec<f64> {
            let mut f: *mut DgpinvField = ptr::null_mut();
            assert_eq!(
                dgpinv_dgp_sample(1, 1, 3.0, 1, 2.0, 65, 0.25, 500, 9, replicate, &mut f),
                DgpinvStatus::Ok,
                "{}",
                last_error()
            );
            let v = values_of(f);
            dgpinv_field_free(f);
            v
        };
        assert_eq!(draw(0), draw(0));
        assert_ne!(draw(0), draw(1));

        let base = |replicate: u32| -> Vec<f64> {
            let mut f: *mut DgpinvField = ptr::null_mut();
            assert_eq!(
                dgpinv_baseline_sample(1, 2.0, 1, 8, 65, 0.25, 500, 9, replicate, &mut f),
                DgpinvStatus::Ok,
                "{}",
                last_error()
            );
            let v = values_of(f);
            dgpinv_field_free(f);
            v
        };
        assert_eq!(base(2), base(2));
        assert_ne!(base(2), base(3));
    }
}

#[test]
fn exponent_tables_come_back_as_json_with_exact_rationals() {
    unsafe {
        let alpha = CString::new("3").unwrap();
        let tau = CString::new("4").unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(
            dgpinv_exponents_json(
                DgpinvProblem::Darcy,
                alpha.as_ptr(),
                2,
                1,
                tau.as_ptr(),
                &mut out
            ),
            DgpinvStatus::Ok
        );
        let doc: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(doc["dgp_l2"], serde_json::json!([1, 7]));
        assert_eq!(doc["prediction"], serde_json::json!([3, 7]));
        assert_eq!(doc["tau_prior_lower"][1], serde_json::json!([3, 10]));

        // The identity map has no exponent table.
        let mut refused: *mut c_char = ptr::null_mut();
        assert_eq!(
            dgpinv_exponents_json(
                DgpinvProblem::Identity,
                alpha.as_ptr(),
                2,
                1,
                ptr::null(),
                &mut refused
            ),
            DgpinvStatus::Config
        );
        assert!(refused.is_null());

        // Inadmissible smoothness is a config error with a message.
        let bad_alpha = CString::new("2").unwrap();
        assert_eq!(
            dgpinv_exponents_json(
                DgpinvProblem::Darcy,
                bad_alpha.as_ptr(),
                2,
                1,
                ptr::null(),
                &mut refused
            ),
            DgpinvStatus::Config
        );
        assert!(last_error().contains("alpha"));
    }
}

#[test]
fn contract_reports_are_identical_across_worker_counts() {
    let plan = r#"{
      "problem": {"problem": "identity"},
      "truth": {"kind": "smooth-bump", "alpha": 3.0, "radius": 1.0, "ambient_d": 1},
      "priors": [{"family": "baseline", "tau": 2.0, "beta": 1, "scaling": "canonical", "truncation": 8}],
      "n_grid": [20, 40, 80],
      "replicates": 1,
      "schedule": {"burn_in": 50, "length": 100, "thin": 2},
      "seed": 11,
      "points_per_axis": 65,
      "margin": 0.25
    }"#;
    let c_plan = CString::new(plan).unwrap();
    let run = |jobs: usize| -> String {
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { dgpinv_contract_json(c_plan.as_ptr(), jobs, &mut out) };
        assert_eq!(status, DgpinvStatus::Ok, "{}", last_error());
        take_string(out)
    };
    let a = run(1);
    let b = run(2);
    assert_eq!(a, b);

    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(doc["cells"].as_array().unwrap().len(), 3);
    assert_eq!(doc["failures"].as_array().unwrap().len(), 0);

    let garbage = CString::new("{\"problem\": 12}").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { dgpinv_contract_json(garbage.as_ptr(), 1, &mut out) };
    assert_eq!(status, DgpinvStatus::Config);
    assert!(!last_error().is_empty());
}
