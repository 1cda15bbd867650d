//! Compiles and runs a C program against the generated header and static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "parrep.h"

int main(void) {
    ParrepNetwork *net = NULL;
    if (parrep_network_builtin("schlogl", &net) != PARREP_STATUS_OK) return 1;
    size_t s, r, p;
    parrep_network_dims(net, &s, &r, &p);
    if (s != 1 || r != 4 || p != 4) return 2;
    int64_t x0[1] = {94};
    ParrepReport *rep = NULL;
    if (parrep_run_ssa(net, x0, 1, 20.0, 0.0, 1, 0, &rep) != PARREP_STATUS_OK) return 3;
    if (parrep_report_clock(rep) != 20.0) return 4;
    parrep_report_free(rep);
    ParrepNetwork *bad = NULL;
    if (parrep_network_builtin("nope", &bad) != PARREP_STATUS_UNKNOWN_MODEL) return 5;
    char msg[128];
    parrep_last_error_message(msg, sizeof msg);
    printf("%s\n", msg);
    parrep_network_free(net);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile = if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    };
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("../../target"))
        .join(profile)
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libparrep_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("nope"));
}
