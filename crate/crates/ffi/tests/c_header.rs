//! Builds a small C program against the generated header and the shared
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "scalestat.h"

int main(void) {
    double x[4] = {3.0, 0.0, 0.0, 1.0};
    double out[4];
    if (ss_project_nuclear_ball(x, 2, 2.0, out) != SS_STATUS_OK) return 1;
    if (out[0] < 1.999 || out[0] > 2.001 || out[3] > 1e-9) return 2;
    size_t count = 0;
    if (ss_cut_polytope_vertex_count(400, &count) != SS_STATUS_INFEASIBLE_SCALE) return 3;
    char msg[256];
    if (ss_last_error(msg, sizeof msg) == 0) return 4;
    SsDataset *ds = NULL;
    double v[3] = {1.0, 2.0, 3.0};
    if (ss_dataset_new(v, 3, 1, NULL, &ds) != SS_STATUS_OK) return 5;
    double w;
    if (ss_bootstrap_ci_widths(ds, SS_ESTIMATOR_MEAN, 200, 0.05, 1, &w, 1) != SS_STATUS_OK) return 6;
    ss_dataset_free(ds);
    printf("%s %s\n", ss_version(), msg);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = target_dir();
    assert!(
        lib_dir.join("libscalestat_ffi.so").exists() || lib_dir.join("libscalestat_ffi.dylib").exists(),
        "shared library not found in {}",
        lib_dir.display()
    );
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    let bin = work.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror"])
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lscalestat_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .expect("C compiler not available");
    assert!(status.success(), "compiling the C smoke test failed");
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("vertices"), "{stdout}");
}
