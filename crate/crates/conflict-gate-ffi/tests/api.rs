//! End-to-end exercise of the C ABI from the Rust side.

use std::ffi::CString;
use std::ptr;

use conflict_gate_ffi::*;

fn params() -> CgSeirParams {
    CgSeirParams { population: 1000.0, beta: 1.0, sigma: 0.2, gamma: 0.14 }
}

fn init() -> CgSeirState {
    CgSeirState { t: 0.0, s: 0.999, e: 0.0, i: 0.001, r: 0.0 }
}

#[test]
fn simulate_train_verify_roundtrip() {
    let mut traj = ptr::null_mut();
    assert_eq!(cg_seir_simulate(params(), init(), 100.0, 0.1, &mut traj), CgStatus::Ok);
    assert_eq!(cg_trajectory_len(traj), 1001);
    let mut st = CgSeirState { t: 0.0, s: 0.0, e: 0.0, i: 0.0, r: 0.0 };
    assert_eq!(cg_trajectory_state(traj, 1000, &mut st), CgStatus::Ok);
    assert!((st.s + st.e + st.i + st.r - 1.0).abs() <= 1e-10);

    let mut ds = ptr::null_mut();
    assert_eq!(cg_dataset_generate(traj, 20, 0.05, 7, &mut ds), CgStatus::Ok);
    assert_eq!(cg_dataset_len(ds), 20);
    let (mut t, mut i) = (0.0, 0.0);
    assert_eq!(cg_dataset_observation(ds, 0, &mut t, &mut i), CgStatus::Ok);
    assert!(t >= 0.0 && i.is_finite());

    let cfg = cg_config_default();
    assert_eq!(cg_config_set_strategy(cfg, CgStrategy::Cggs, 1.0), CgStatus::Ok);
    assert_eq!(cg_config_set_steps(cfg, 8), CgStatus::Ok);
    assert_eq!(cg_config_set_seed(cfg, 1), CgStatus::Ok);
    let widths = [1u32, 8, 4];
    assert_eq!(cg_config_set_layers(cfg, widths.as_ptr(), widths.len()), CgStatus::Ok);
    assert_eq!(cg_config_set_grid(cfg, 20, 100.0), CgStatus::Ok);
    assert_eq!(cg_config_set_gate(cfg, 0.9, 5.0, 1e-8, 1.0), CgStatus::Ok);

    let mut trace = ptr::null_mut();
    assert_eq!(cg_train(cfg, ds, params(), &mut trace), CgStatus::Ok);
    assert_eq!(cg_trace_len(trace), 8);
    let mut rec = CgTraceRecord {
        step: 0,
        l_data: 0.0,
        l_ode: 0.0,
        l_logic: 0.0,
        lambda_hat: 0.0,
        s_cos: 0.0,
        norm_data: 0.0,
        norm_phy: 0.0,
        descent_inner: 0.0,
        d_norm: 0.0,
    };
    assert_eq!(cg_trace_record(trace, 7, &mut rec), CgStatus::Ok);
    assert_eq!(rec.step, 7);
    assert!(rec.l_data.is_finite() && rec.l_data >= 0.0);
    assert!((-1.0..=1.0).contains(&rec.s_cos));

    let n = cg_trace_theta_len(trace);
    assert_eq!(n, 8 + 8 + 8 * 4 + 4);
    let mut theta = vec![0.0f64; n];
    assert_eq!(cg_trace_final_theta(trace, theta.as_mut_ptr(), n), CgStatus::Ok);
    assert!(theta.iter().all(|v| v.is_finite()));

    let mut verdict = CgVerifySummary { checked: 0, passed: 0, pass_rate: 0.0, pass: false };
    assert_eq!(cg_verify_descent(trace, 5.0, &mut verdict), CgStatus::Ok);
    assert!(verdict.checked <= 8);

    let dir = tempdir();
    let csv = CString::new(dir.join("trace.csv").to_str().unwrap()).unwrap();
    assert_eq!(cg_trace_save_csv(trace, csv.as_ptr()), CgStatus::Ok);
    let ds_path = CString::new(dir.join("ds.csv").to_str().unwrap()).unwrap();
    assert_eq!(cg_dataset_save_csv(ds, ds_path.as_ptr()), CgStatus::Ok);
    let mut ds2 = ptr::null_mut();
    assert_eq!(cg_dataset_load_csv(ds_path.as_ptr(), 100.0, &mut ds2), CgStatus::Ok);
    assert_eq!(cg_dataset_len(ds2), 20);

    cg_dataset_free(ds2);
    cg_trace_free(trace);
    cg_config_free(cfg);
    cg_dataset_free(ds);
    cg_trajectory_free(traj);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn m_kappa_through_the_abi() {
    let mut c = CgDescentConstants { kappa: 0.0, m_kappa: 0.0, s_star: 0.0, c: 0.0 };
    assert_eq!(cg_compute_m_kappa(5.0, &mut c), CgStatus::Ok);
    assert!((0.051..=0.061).contains(&c.m_kappa));
    assert!((0.24..=0.28).contains(&c.s_star));
    assert_eq!(cg_compute_m_kappa(-1.0, &mut c), CgStatus::InvalidArgument);
}

#[test]
fn deadlock_through_the_abi() {
    let mut s = CgDeadlockSummary {
        lambda_std: 0.0,
        fixed_update_ratio: 0.0,
        pareto_alpha: 0.0,
        pareto_residual_ratio: 0.0,
        cggs_direction_ratio: 0.0,
        cggs_deviation_ratio: 0.0,
        pass: false,
    };
    assert_eq!(cg_deadlock_demo(2.0, 5.0, 512, 3, &mut s), CgStatus::Ok);
    assert!(s.pass);
    assert!(s.fixed_update_ratio <= 1e-12);
    assert!(s.cggs_direction_ratio >= 0.99);
    assert_eq!(cg_deadlock_demo(-2.0, 5.0, 512, 3, &mut s), CgStatus::InvalidArgument);
}

#[test]
fn layer_validation_through_the_abi() {
    let cfg = cg_config_default();
    let bad = [2u32, 4];
    assert_eq!(cg_config_set_layers(cfg, bad.as_ptr(), bad.len()), CgStatus::InvalidArgument);
    let msg = unsafe { std::ffi::CStr::from_ptr(cg_last_error_message()) };
    assert!(msg.to_str().unwrap().contains("layer"));
    cg_config_free(cfg);
}

#[test]
fn generated_header_exists_and_names_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/conflict_gate.h");
    let text = std::fs::read_to_string(header).expect("header generated at build time");
    for needle in [
        "CONFLICT_GATE_H",
        "typedef struct CgTrace CgTrace;",
        "cg_seir_simulate",
        "cg_train",
        "cg_compute_m_kappa",
        "cg_last_error_message",
    ] {
        assert!(text.contains(needle), "header missing `{needle}`");
    }
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("cgffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
