//! Compiles and runs a C program against the generated header and the
//! static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "divrec.h"

int main(void) {
    double v = 0.0;
    if (divrec_logistic(1.0, 1.0, 3.0, 3.0, &v) != DIVREC_STATUS_OK || v != 0.5) return 1;
    if (divrec_logistic(1.0, -1.0, 3.0, 3.0, &v) != DIVREC_STATUS_INVALID_ARGUMENT) return 2;
    if (divrec_last_error() == NULL) return 3;

    double p[3];
    if (divrec_discount(3, 1.0, p) != DIVREC_STATUS_OK) return 4;
    if (p[0] != 6.0 / 11.0 || p[2] != 2.0 / 11.0) return 5;

    double h[7] = {0, 0, 1, 0, 1, 0, 0};
    if (divrec_diversity(h, DIVREC_METRIC_VARIANCE, &v) != DIVREC_STATUS_OK || v != 1.0) return 6;

    DivrecConfig cfg = divrec_config_default();
    if (cfg.kernel != DIVREC_KERNEL_KENDALL || cfg.has_t) return 7;

    DivrecPanel *panel = NULL;
    if (divrec_panel_from_json("not json", &panel) != DIVREC_STATUS_PARSE || panel != NULL) return 8;

    printf("%s\n", divrec_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have(tool: &str) -> bool {
    Command::new(tool).arg("--version").output().is_ok()
}

#[test]
fn header_compiles_and_links() {
    if !have("cc") {
        eprintln!("cc not found; skipping C header check");
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("divrec.h").exists(), "header was not generated");
    let lib = target_dir().join("libdivrec_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.path().join("main");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");

    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
