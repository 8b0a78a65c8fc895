use std::path::PathBuf;
use std::process::Command;

const EXPORTS: &[&str] = &[
    "lp_last_error",
    "lp_grid_new",
    "lp_grid_len",
    "lp_grid_free",
    "lp_weight_new",
    "lp_weight_power",
    "lp_weight_free",
    "lp_family_dyadic",
    "lp_family_len",
    "lp_family_free",
    "lp_kernel_by_name",
    "lp_kernel_certify",
    "lp_kernel_free",
    "lp_a1_constant",
    "lp_bmo_norm",
    "lp_blo_constant",
    "lp_g_function",
    "lp_area_integral",
    "lp_g_star",
    "lp_jn_blo_verify",
];

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn header() -> String {
    std::fs::read_to_string(crate_dir().join("include/lpsquare.h")).expect("header is generated by the build script")
}

#[test]
fn header_declares_every_export() {
    let h = header();
    assert!(h.contains("#ifndef LPSQUARE_H"));
    for name in EXPORTS {
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
    }
    for opaque in ["LpGrid", "LpWeight", "LpFamily", "LpKernel"] {
        assert!(h.contains(&format!("typedef struct {opaque} {opaque};")), "{opaque} is not opaque");
    }
    assert!(h.contains("LP_STATUS_OK = 0"));
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("liblpsquare_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_compiles_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = crate_dir();
    let src = dir.join("tests/c/smoke.c");
    let include = dir.join("include");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success(), "header does not compile as C99");

    let Some(lib) = static_lib() else {
        eprintln!("static library not found next to the test binary; skipping link step");
        return;
    };
    let tmp = tempfile_dir();
    let exe = tmp.join("smoke");
    let out = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "smoke program failed: {stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("a1=1.000000 bmo=0.500000 blo=0.500000 certified=1"), "{stdout}");
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lpsquare-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
