use std::ffi::{CStr, CString};
use std::ptr;

use darcy_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = darcy_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn plates_gppid_round_trip() {
    let mut sol = ptr::null_mut();
    let st = unsafe { darcy_run(c("plates").as_ptr(), c("gppid").as_ptr(), 1, 24, 12, ptr::null(), &mut sol) };
    assert_eq!(st, DarcyStatus::Ok);
    assert!(darcy_last_error().is_null());

    let (mut nodes, mut elements) = (0usize, 0usize);
    assert_eq!(unsafe { darcy_solution_counts(sol, &mut nodes, &mut elements) }, DarcyStatus::Ok);
    assert_eq!((nodes, elements), (25 * 13, 288));

    let mut small = vec![0.0; 3];
    assert_eq!(unsafe { darcy_solution_potential(sol, small.as_mut_ptr(), small.len()) }, DarcyStatus::BufferTooSmall);
    let mut p = vec![0.0; nodes];
    assert_eq!(unsafe { darcy_solution_potential(sol, p.as_mut_ptr(), p.len()) }, DarcyStatus::Ok);
    assert!(p.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));

    // element 0 is in the lower layer, the last one in the upper
    let mut u = [0.0; 2];
    assert_eq!(unsafe { darcy_solution_velocity_at(sol, 0, 0.3, -0.2, u.as_mut_ptr()) }, DarcyStatus::Ok);
    assert!((u[0] - 0.5).abs() < 1e-8 && u[1].abs() < 1e-8);
    assert_eq!(unsafe { darcy_solution_velocity_at(sol, elements - 1, 1.0, -1.0, u.as_mut_ptr()) }, DarcyStatus::Ok);
    assert!((u[0] - 1.0).abs() < 1e-8);
    assert_eq!(unsafe { darcy_solution_velocity_at(sol, elements, 0.0, 0.0, u.as_mut_ptr()) }, DarcyStatus::InvalidArgument);
    assert_eq!(unsafe { darcy_solution_velocity_at(sol, 0, 2.0, 0.0, u.as_mut_ptr()) }, DarcyStatus::InvalidArgument);

    let mut e = DarcyErrors::default();
    assert_eq!(unsafe { darcy_solution_errors(sol, &mut e) }, DarcyStatus::Ok);
    assert!(e.l2_u < 1e-8 && e.nx == 24);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plates.vtk");
    let cpath = c(path.to_str().unwrap());
    assert_eq!(unsafe { darcy_solution_write_vtk(sol, cpath.as_ptr()) }, DarcyStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(&format!("POINTS {} double", 288 * 4)));

    unsafe { darcy_solution_free(sol) };
    unsafe { darcy_solution_free(ptr::null_mut()) };
}

#[test]
fn errors_are_reported() {
    let mut sol = ptr::null_mut();
    let st = unsafe { darcy_run(c("nowhere").as_ptr(), c("gpp").as_ptr(), 1, 4, 4, ptr::null(), &mut sol) };
    assert_eq!(st, DarcyStatus::UnknownName);
    assert!(last_error().contains("nowhere"));
    assert!(sol.is_null());

    let st = unsafe { darcy_run(c("plates").as_ptr(), c("gpp").as_ptr(), 3, 4, 4, ptr::null(), &mut sol) };
    assert_eq!(st, DarcyStatus::InvalidArgument);

    let st = unsafe { darcy_run(ptr::null(), c("gpp").as_ptr(), 1, 4, 4, ptr::null(), &mut sol) };
    assert_eq!(st, DarcyStatus::NullPointer);
    assert!(last_error().contains("problem"));

    // a single bilinear element per macro is unstable
    let mut opts = darcy_options_default();
    opts.macro_x = 1;
    opts.macro_y = 1;
    let st = unsafe { darcy_run(c("plates").as_ptr(), c("lpp").as_ptr(), 1, 4, 2, &opts, &mut sol) };
    assert_eq!(st, DarcyStatus::InvalidArgument);

    let st = unsafe { darcy_run(c("barriers").as_ptr(), c("galerkin").as_ptr(), 1, 25, 25, ptr::null(), &mut sol) };
    assert_eq!(st, DarcyStatus::Ok);
    let mut e = DarcyErrors::default();
    assert_eq!(unsafe { darcy_solution_errors(sol, &mut e) }, DarcyStatus::NoExactSolution);
    unsafe { darcy_solution_free(sol) };
}

#[test]
fn convergence_report() {
    let meshes = [4u32, 8, 16];
    let mut rep = ptr::null_mut();
    let st = unsafe { darcy_converge(c("crumpton").as_ptr(), c("galerkin").as_ptr(), 1, meshes.as_ptr(), 3, ptr::null(), &mut rep) };
    assert_eq!(st, DarcyStatus::Ok);
    assert_eq!(unsafe { darcy_report_len(rep) }, 3);
    let mut row = DarcyErrors::default();
    assert_eq!(unsafe { darcy_report_row(rep, 2, &mut row) }, DarcyStatus::Ok);
    assert_eq!(row.nx, 16);
    assert_eq!(unsafe { darcy_report_row(rep, 3, &mut row) }, DarcyStatus::InvalidArgument);
    let mut rate = 0.0;
    assert_eq!(unsafe { darcy_report_ls_rate(rep, c("l2_p").as_ptr(), &mut rate) }, DarcyStatus::Ok);
    assert!((rate - 2.0).abs() < 0.2, "{rate}");
    assert_eq!(unsafe { darcy_report_ls_rate(rep, c("bogus").as_ptr(), &mut rate) }, DarcyStatus::UnknownName);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    assert_eq!(unsafe { darcy_report_write_csv(rep, c(path.to_str().unwrap()).as_ptr()) }, DarcyStatus::Ok);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    let bad = c("/nonexistent-dir/r.csv");
    assert_eq!(unsafe { darcy_report_write_csv(rep, bad.as_ptr()) }, DarcyStatus::IoError);
    unsafe { darcy_report_free(rep) };
    assert_eq!(unsafe { darcy_report_len(ptr::null()) }, 0);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(darcy_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
