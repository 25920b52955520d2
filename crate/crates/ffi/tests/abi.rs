use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use nesy_dcsp_ffi::*;

fn builtin(kind: NdBuiltin, k: u32, concepts: usize) -> *mut NdTask {
    let mut task = ptr::null_mut();
    assert_eq!(unsafe { nd_task_new_builtin(kind, k, concepts, 1, &mut task) }, NdStatus::Ok);
    assert!(!task.is_null());
    task
}

fn analyze(task: *const NdTask) -> *mut NdSpace {
    let mut space = ptr::null_mut();
    assert_eq!(unsafe { nd_analyze(task, &mut space) }, NdStatus::Ok);
    space
}

fn last_error() -> String {
    let p = nd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn addition_is_learnable() {
    let task = builtin(NdBuiltin::Add, 0, 10);
    let mut pool = 0;
    unsafe {
        assert_eq!(nd_task_pool_size(task, &mut pool), NdStatus::Ok);
        assert_eq!(pool, 100);
        let mut y = 0i64;
        assert_eq!(nd_task_forward(task, [7u32, 8].as_ptr(), 2, &mut y), NdStatus::Ok);
        assert_eq!(y, 15);

        let space = analyze(task);
        assert_eq!(nd_space_num_solutions(space), 1);
        assert!(nd_space_is_complete(space));
        let mut report = NdReport::default();
        assert_eq!(nd_report(space, &mut report), NdStatus::Ok);
        assert!(report.learnable);
        assert_eq!((report.d, report.concepts), (0, 10));
        let mut sol = [0u32; 10];
        assert_eq!(nd_space_solution(space, 0, sol.as_mut_ptr(), sol.len()), NdStatus::Ok);
        assert_eq!(sol, [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        nd_space_free(space);
        nd_task_free(task);
    }
}

#[test]
fn modular_tasks_and_ensembles() {
    let m9 = builtin(NdBuiltin::ModAdd, 9, 10);
    let m3 = builtin(NdBuiltin::ModAdd, 3, 10);
    let m4 = builtin(NdBuiltin::ModAdd, 4, 10);
    unsafe {
        let space = analyze(m9);
        assert_eq!(nd_space_num_solutions(space), 2);
        let mut d = 0;
        assert_eq!(nd_space_disagreement(space, &mut d), NdStatus::Ok);
        assert_eq!(d, 2);
        let mut report = NdReport::default();
        assert_eq!(nd_report(space, &mut report), NdStatus::Ok);
        assert!(!report.learnable);
        assert!((report.error_bound - 0.2).abs() < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(nd_space_to_json(space, 8, &mut json), NdStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["num_solutions"], 2);
        assert_eq!(v["d"], 2);
        nd_string_free(json);

        let mut small = [0u32; 3];
        assert_eq!(nd_space_solution(space, 0, small.as_mut_ptr(), small.len()), NdStatus::OutOfRange);
        let mut full = [0u32; 10];
        assert_eq!(nd_space_solution(space, 5, full.as_mut_ptr(), full.len()), NdStatus::OutOfRange);
        assert!(last_error().contains("out of range"));
        nd_space_free(space);

        let pair = [m3 as *const NdTask, m4 as *const NdTask];
        let mut merged = ptr::null_mut();
        assert_eq!(nd_ensemble_analyze(pair.as_ptr(), 2, &mut merged), NdStatus::Ok);
        assert_eq!(nd_space_num_solutions(merged), 1);
        nd_space_free(merged);

        assert_eq!(nd_ensemble_analyze(pair.as_ptr(), 0, &mut merged), NdStatus::InvalidArgument);
        nd_task_free(m3);
        nd_task_free(m4);
        nd_task_free(m9);
    }
}

#[test]
fn cap_breach_is_reported() {
    let task = builtin(NdBuiltin::ModAdd, 2, 10);
    unsafe {
        assert_eq!(nd_task_set_options(task, true, 100), NdStatus::Ok);
        let space = analyze(task);
        assert!(!nd_space_is_complete(space));
        assert_eq!(nd_space_num_solutions(space), 100);
        let mut report = NdReport::default();
        assert_eq!(nd_report(space, &mut report), NdStatus::CapExceeded);
        assert_eq!(nd_task_set_options(task, true, 0), NdStatus::InvalidArgument);
        nd_space_free(space);
        nd_task_free(task);
    }
}

#[test]
fn toml_tasks_and_errors() {
    let text = CString::new("name = \"x\"\nbuiltin = \"xor\"\n").unwrap();
    let mut task = ptr::null_mut();
    unsafe {
        assert_eq!(nd_task_from_toml(text.as_ptr(), &mut task), NdStatus::Ok);
        let space = analyze(task);
        assert_eq!(nd_space_num_solutions(space), 2);
        nd_space_free(space);
        nd_task_free(task);

        let bad = CString::new("builtin = \"sub\"\n").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(nd_task_from_toml(bad.as_ptr(), &mut other), NdStatus::TaskFile);
        assert!(other.is_null());
        assert!(last_error().contains("line 1"));

        assert_eq!(nd_task_from_toml(ptr::null(), &mut other), NdStatus::NullPointer);
        assert_eq!(nd_task_new_builtin(NdBuiltin::ModAdd, 1, 10, 1, &mut other), NdStatus::InvalidArgument);
        assert_eq!(nd_analyze(ptr::null(), &mut ptr::null_mut()), NdStatus::NullPointer);
        assert_eq!(nd_space_num_solutions(ptr::null()), 0);
        nd_task_free(ptr::null_mut());
        nd_space_free(ptr::null_mut());
        nd_string_free(ptr::null_mut());
    }
}

#[test]
fn forward_rejects_bad_sequences() {
    let task = builtin(NdBuiltin::Add, 0, 10);
    let mut y = 0i64;
    unsafe {
        assert_eq!(nd_task_forward(task, [1u32].as_ptr(), 1, &mut y), NdStatus::Domain);
        assert_eq!(nd_task_forward(task, [1u32, 10].as_ptr(), 2, &mut y), NdStatus::Domain);
        nd_task_free(task);
    }
}

#[test]
fn bound_and_trials() {
    let task = builtin(NdBuiltin::Add, 0, 10);
    unsafe {
        let mut bound = 0.0;
        assert_eq!(nd_sample_complexity_bound(task, 0.01, &mut bound), NdStatus::Ok);
        assert_eq!(bound.ceil(), 922.0);
        assert_eq!(nd_sample_complexity_bound(task, 1.5, &mut bound), NdStatus::InvalidArgument);

        let mut a = NdTrial::default();
        let mut b = NdTrial::default();
        assert_eq!(nd_erm_trial(task, 2000, 11, &mut a), NdStatus::Ok);
        assert_eq!(nd_erm_trial(task, 2000, 11, &mut b), NdStatus::Ok);
        assert_eq!(a, b);
        assert!(a.complete);
        assert_eq!(a.num_solutions, 1);
        assert_eq!(a.concept_error, 0.0);
        assert_eq!(nd_erm_trial(task, 0, 11, &mut a), NdStatus::InvalidArgument);
        nd_task_free(task);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nesy_dcsp.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in ["nd_task_new_builtin", "nd_analyze", "nd_report", "nd_last_error_message", "ND_STATUS_CAP_EXCEEDED"]
    {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status()
    else {
        eprintln!("no C compiler on PATH; header compile check not run");
        return;
    };
    assert!(status.success());
}
