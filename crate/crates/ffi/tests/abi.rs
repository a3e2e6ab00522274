use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use streamguide_ffi::*;

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bundled(name: &str) -> *mut SgScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { sg_scenario_bundled(name.as_ptr(), &mut sc) }, SgStatus::Ok);
    assert!(!sc.is_null());
    sc
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn parse_errors_carry_position() {
    let text = CString::new("name = \"x\"\n[grid]\nkappa = 1\n").unwrap();
    let mut sc = ptr::dangling_mut();
    let st = unsafe { sg_scenario_from_toml(text.as_ptr(), &mut sc) };
    assert_eq!(st, SgStatus::Parse);
    assert!(sc.is_null());
    assert!(last_error().contains(":3:1:"), "{}", last_error());

    let st = unsafe { sg_scenario_from_toml(ptr::null(), &mut sc) };
    assert_eq!(st, SgStatus::NullArgument);
    let st = unsafe { sg_scenario_from_toml(text.as_ptr(), ptr::null_mut()) };
    assert_eq!(st, SgStatus::NullArgument);

    let bad = [0xffu8, 0];
    let st = unsafe { sg_scenario_from_toml(bad.as_ptr().cast(), &mut sc) };
    assert_eq!(st, SgStatus::InvalidUtf8);
}

#[test]
fn missing_file_is_io() {
    let p = CString::new("/nonexistent/dir/scenario.toml").unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { sg_scenario_from_file(p.as_ptr(), &mut sc) }, SgStatus::Io);
}

#[test]
fn stream_function_is_constant_on_a_lone_obstacle_boundary() {
    let text = CString::new(
        r#"
[grid]
L_x = 20.0
L_y = 20.0
N_x = 100
N_y = 100
[target]
x = 0.8
y = 9.8
[vessel]
x0 = 18.8
y0 = 9.8
psi0 = 3.141592653589793
[planner]
gamma = 0.2
n_r = 5
delta = 0.01
[path]
zeta = 0.5
epsilon = 0.005
[controller]
Kp = [20.0, 20.0]
kpsi = 40.0
Knu = [20.0, 20.0, 20.0]
ud = 0.2
eps_reg = 0.01
mu = 0.0001
[sim]
dt = 0.01
t_max = 600.0
[[obstacles]]
x = 10.0
y = 10.0
vx = 0.0
vy = 0.0
r = 1.5
l = 1.5
Cv = 1.0
compliant = false
"#,
    )
    .unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { sg_scenario_from_toml(text.as_ptr(), &mut sc) }, SgStatus::Ok);
    let mut vals = Vec::new();
    for i in 0..32 {
        let a = i as f64 * std::f64::consts::TAU / 32.0;
        let mut v = 0.0;
        let st = unsafe { sg_stream_function(sc, 18.8, 9.8, 10.0 + 1.5 * a.cos(), 10.0 + 1.5 * a.sin(), &mut v) };
        assert_eq!(st, SgStatus::Ok);
        vals.push(v);
    }
    let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-9, "spread {spread}");
    let mut v = 0.0;
    assert_eq!(unsafe { sg_stream_function(sc, 18.8, 9.8, 0.8, 9.8, &mut v) }, SgStatus::Singular);
    unsafe { sg_scenario_free(sc) };
}

#[test]
fn run_round_trip() {
    let sc = bundled("colregs_crossing");
    let mut n = 0usize;
    assert_eq!(unsafe { sg_scenario_obstacle_count(sc, &mut n) }, SgStatus::Ok);
    assert_eq!(n, 1);

    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sg_run(sc, &mut run) }, SgStatus::Ok);
    let mut outcome = SgOutcome::Fault;
    assert_eq!(unsafe { sg_run_outcome(run, &mut outcome) }, SgStatus::Ok);
    assert_eq!(outcome, SgOutcome::Reached);

    let mut s = std::mem::MaybeUninit::<SgSummary>::uninit();
    assert_eq!(unsafe { sg_run_summary(run, s.as_mut_ptr()) }, SgStatus::Ok);
    let s = unsafe { s.assume_init() };
    assert!(s.arrival_time > 0.0 && s.min_clearance_ratio > 0.8);

    let mut rows = 0usize;
    assert_eq!(unsafe { sg_run_row_count(run, &mut rows) }, SgStatus::Ok);
    let (mut x, mut y) = (0.0, 0.0);
    assert_eq!(unsafe { sg_run_position(run, 0, &mut x, &mut y, ptr::null_mut()) }, SgStatus::Ok);
    assert_eq!((x, y), (15.8, 3.8000000000000003));
    assert_eq!(
        unsafe { sg_run_position(run, rows, &mut x, &mut y, ptr::null_mut()) },
        SgStatus::OutOfRange
    );
    assert!(last_error().contains("out of range"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sg_run_write_trace(run, cpath.as_ptr()) }, SgStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), rows + 1);

    unsafe {
        sg_run_free(run);
        sg_scenario_free(sc);
        sg_run_free(ptr::null_mut());
        sg_scenario_free(ptr::null_mut());
    }
}

#[test]
fn null_handles_are_rejected() {
    let mut n = 0usize;
    assert_eq!(unsafe { sg_scenario_obstacle_count(ptr::null(), &mut n) }, SgStatus::NullArgument);
    assert_eq!(unsafe { sg_run_row_count(ptr::null(), &mut n) }, SgStatus::NullArgument);
    assert!(last_error().contains("run is null"));
    // a successful call clears the slot
    let sc = bundled("complex_1");
    assert!(sg_last_error_message().is_null());
    unsafe { sg_scenario_free(sc) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/streamguide.h")).unwrap();
    for f in [
        "sg_version", "sg_last_error_message", "sg_scenario_from_toml", "sg_scenario_from_file",
        "sg_scenario_bundled", "sg_scenario_free", "sg_scenario_obstacle_count", "sg_stream_function",
        "sg_run", "sg_run_free", "sg_run_outcome", "sg_run_summary", "sg_run_row_count",
        "sg_run_position", "sg_run_write_trace",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct SgScenario SgScenario;"));
}

/// target/<profile>/ next to this test binary, where the static library lands.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = profile_dir().join("libstreamguide_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rows"));
}
