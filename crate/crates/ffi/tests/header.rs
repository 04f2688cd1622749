use std::path::Path;
use std::process::Command;

const HEADER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/include/darcy.h");

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(HEADER).unwrap();
    for f in [
        "darcy_version",
        "darcy_last_error",
        "darcy_options_default",
        "darcy_run",
        "darcy_solution_free",
        "darcy_solution_counts",
        "darcy_solution_potential",
        "darcy_solution_velocity_at",
        "darcy_solution_errors",
        "darcy_solution_write_vtk",
        "darcy_converge",
        "darcy_report_free",
        "darcy_report_len",
        "darcy_report_row",
        "darcy_report_ls_rate",
        "darcy_report_write_csv",
    ] {
        assert!(h.contains(&format!(" {f}(")) || h.contains(&format!("*{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct DarcySolution DarcySolution;"));
    assert!(h.contains("DARCY_STATUS_OK = 0"));
}

/// The header must compile as C when a compiler is around.
#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "darcy.h"
int use(void) {
    DarcySolution *s = 0;
    DarcyOptions o = darcy_options_default();
    DarcyStatus st = darcy_run("plates", "gppid", 1, 24, 12, &o, &s);
    double u[2];
    if (st == DARCY_STATUS_OK) st = darcy_solution_velocity_at(s, 0, 0.0, 0.0, u);
    darcy_solution_free(s);
    return (int)st;
}
"#,
    )
    .unwrap();
    let include = Path::new(HEADER).parent().unwrap();
    let out = Command::new(cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(include).arg(&src).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()).ok_or(())
}
