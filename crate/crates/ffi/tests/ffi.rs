use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ccl_core::encoder::{RandomEncoder, EMBEDDING_DIM};
use ccl_core::env::{RoverConfig, RoverEnv, TeamEnv};
use ccl_core::intrinsic::{IntrinsicConfig, IntrinsicEngine, RewardMode};
use ccl_core::rng::Rng;
use ccl_ffi::*;
use rand::SeedableRng;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    unsafe {
        ccl_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn encoder_matches_core() {
    let mut enc = ptr::null_mut();
    assert_eq!(unsafe { ccl_encoder_new(11, 5, &mut enc) }, CclStatus::Ok);
    let obs = [0.3, -1.0, 2.0, 0.0, 0.5];
    let mut out = [0.0; EMBEDDING_DIM];
    let status = unsafe { ccl_encoder_encode(enc, obs.as_ptr(), obs.len(), out.as_mut_ptr(), out.len()) };
    assert_eq!(status, CclStatus::Ok);
    let want = RandomEncoder::new(11, 5, EMBEDDING_DIM).unwrap().encode(&obs).unwrap();
    assert_eq!(out.as_slice(), want.as_slice());

    let status = unsafe { ccl_encoder_encode(enc, obs.as_ptr(), 4, out.as_mut_ptr(), out.len()) };
    assert_eq!(status, CclStatus::DimensionMismatch);
    assert!(last_error().contains("expected length 5"));
    unsafe { ccl_encoder_free(enc) };
}

#[test]
fn engine_and_rover_match_core() {
    let config = RoverConfig::default();
    let mut core_env = RoverEnv::new(config.clone()).unwrap();
    let mut rng = Rng::seed_from_u64(5);
    let core_obs = core_env.reset(&mut rng).unwrap();
    let mut core_engine = IntrinsicEngine::new(
        IntrinsicConfig {
            mode: RewardMode::Mixture,
            ..Default::default()
        },
        &core_env.obs_dims(),
        9,
    )
    .unwrap();
    core_engine.reset(&core_obs).unwrap();

    let json = std::ffi::CString::new(serde_json::to_string(&config).unwrap()).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { ccl_rover_new(json.as_ptr(), 5, &mut env) }, CclStatus::Ok);
    let n = unsafe { ccl_rover_n_agents(env) };
    let d = unsafe { ccl_rover_obs_dim(env) };
    let a = unsafe { ccl_rover_action_dim(env) };
    let mut obs = vec![0.0; n * d];
    assert_eq!(unsafe { ccl_rover_reset(env, obs.as_mut_ptr(), obs.len()) }, CclStatus::Ok);
    assert_eq!(obs, core_obs.concat());

    let dims = vec![d; n];
    let mixture = c"{\"mode\": \"mixture\"}";
    let mut engine = ptr::null_mut();
    assert_eq!(
        unsafe { ccl_engine_new(mixture.as_ptr(), dims.as_ptr(), n, 9, &mut engine) },
        CclStatus::Ok
    );
    assert_eq!(unsafe { ccl_engine_reset(engine, obs.as_ptr(), obs.len()) }, CclStatus::Ok);

    let (mut ccl, mut oem) = (vec![0.0; n], vec![0.0; n]);
    let (mut reward, mut done) = (0.0, false);
    let mut t = 0;
    while !done {
        let actions: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![((t + i) as f64 * 0.7).sin(), ((t * i) as f64 * 0.3).cos()])
            .collect();
        let flat = actions.concat();
        let status = unsafe { ccl_rover_step(env, flat.as_ptr(), n * a, obs.as_mut_ptr(), obs.len(), &mut reward, &mut done) };
        assert_eq!(status, CclStatus::Ok);
        let out = core_env.step(&actions).unwrap();
        assert_eq!(obs, out.observations.concat());
        assert_eq!((reward, done), (out.team_reward, out.done));

        let status = unsafe { ccl_engine_step(engine, obs.as_ptr(), obs.len(), ccl.as_mut_ptr(), oem.as_mut_ptr(), n) };
        assert_eq!(status, CclStatus::Ok);
        let step = core_engine.step(&out.observations).unwrap();
        assert_eq!((ccl.clone(), oem.clone()), (step.ccl, step.oem));
        t += 1;
    }
    let mut pos = vec![0.0; 2 * n];
    assert_eq!(
        unsafe { ccl_rover_positions(env, pos.as_mut_ptr(), pos.len()) },
        CclStatus::Ok
    );
    assert_eq!(pos, core_env.positions().concat());
    unsafe {
        ccl_engine_free(engine);
        ccl_rover_free(env);
    }
}

#[test]
fn error_codes() {
    let mut env = ptr::null_mut();
    let bad = c"{\"n_agents\": 0}";
    assert_eq!(unsafe { ccl_rover_new(bad.as_ptr(), 0, &mut env) }, CclStatus::Config);
    assert!(env.is_null());
    let unknown = c"{\"bogus\": 1}";
    assert_eq!(unsafe { ccl_rover_new(unknown.as_ptr(), 0, &mut env) }, CclStatus::Config);
    assert!(last_error().contains("bogus"));
    assert_eq!(
        unsafe { ccl_rover_new(ptr::null(), 0, ptr::null_mut()) },
        CclStatus::NullPointer
    );
    assert_eq!(
        unsafe { ccl_rover_reset(ptr::null_mut(), ptr::null_mut(), 0) },
        CclStatus::NullPointer
    );

    let dims = [2usize, 2];
    let mut engine = ptr::null_mut();
    assert_eq!(
        unsafe { ccl_engine_new(ptr::null(), dims.as_ptr(), 2, 0, &mut engine) },
        CclStatus::Ok
    );
    let obs = [0.0; 4];
    let (mut c, mut o) = ([0.0; 2], [0.0; 2]);
    let status = unsafe { ccl_engine_step(engine, obs.as_ptr(), 4, c.as_mut_ptr(), o.as_mut_ptr(), 2) };
    assert_eq!(status, CclStatus::Config, "{}", last_error());
    assert!(last_error().contains("before reset"));
    unsafe {
        ccl_engine_free(engine);
        ccl_encoder_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(ccl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/ccl.h")).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from ccl.h");
    }
}

/// Compiles the C smoke program against the generated header and the static
/// library. Skipped when no C compiler is on the path.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libccl_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let exe = profile_dir.join("ccl_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
