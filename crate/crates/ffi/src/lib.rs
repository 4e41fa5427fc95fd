//! C ABI over `ccl-core`.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`CclStatus`]; the message of the last
//! failure on the calling thread is available from [`ccl_last_error`].
//! Buffers are caller-owned and their lengths are passed explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ccl_core::encoder::{RandomEncoder, EMBEDDING_DIM};
use ccl_core::env::{RoverConfig, RoverEnv, TeamEnv};
use ccl_core::intrinsic::{shape_ccl, IntrinsicConfig, IntrinsicEngine};
use ccl_core::rng::Rng;
use ccl_core::Error;
use rand::SeedableRng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InsufficientMemory = 4,
    Config = 5,
    Environment = 6,
    /// The call panicked; the handle should be considered poisoned.
    Internal = 7,
}

pub struct CclEncoder {
    inner: RandomEncoder,
    obs_dim: usize,
}

pub struct CclEngine {
    inner: IntrinsicEngine,
    obs_dims: Vec<usize>,
}

pub struct CclRover {
    inner: RoverEnv,
    rng: Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CclStatus, msg: impl Into<String>) -> CclStatus {
    set_error(msg.into());
    status
}

fn from_core(err: Error) -> CclStatus {
    let status = match &err {
        Error::Config(_) | Error::Json(_) => CclStatus::Config,
        Error::Dimension { .. } => CclStatus::DimensionMismatch,
        Error::InsufficientMemory => CclStatus::InsufficientMemory,
        Error::Environment(_) => CclStatus::Environment,
        _ => CclStatus::Internal,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> CclStatus) -> CclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CclStatus::Internal, "panic inside ccl"),
    }
}

macro_rules! try_core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_core(e),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(CclStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], CclStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(CclStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, want: usize, name: &str) -> Result<&'a mut [f64], CclStatus> {
    if len != want {
        return Err(fail(
            CclStatus::DimensionMismatch,
            format!("{name}: expected length {want}, got {len}"),
        ));
    }
    if want == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(CclStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn json_or_default<T: Default + serde::de::DeserializeOwned>(json: *const c_char) -> Result<T, CclStatus> {
    if json.is_null() {
        return Ok(T::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|_| fail(CclStatus::InvalidArgument, "config is not UTF-8"))?;
    serde_json::from_str(text).map_err(|e| fail(CclStatus::Config, format!("config: {e}")))
}

fn split(flat: &[f64], dims: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(dims.len());
    let mut at = 0;
    for &d in dims {
        out.push(flat[at..at + d].to_vec());
        at += d;
    }
    out
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length, or 0 if there is
/// none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ccl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Shaped CCL reward `min(beta * softplus(-raw), cap)`.
#[no_mangle]
pub extern "C" fn ccl_shape(raw: f64, beta: f64, cap: f64) -> f64 {
    shape_ccl(raw, beta, cap)
}

/// Dimension of every embedding produced by the encoders.
#[no_mangle]
pub extern "C" fn ccl_embedding_dim() -> usize {
    EMBEDDING_DIM
}

/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn ccl_encoder_new(seed: u64, obs_dim: usize, out: *mut *mut CclEncoder) -> CclStatus {
    guard(|| {
        if out.is_null() {
            return fail(CclStatus::NullPointer, "out is null");
        }
        let inner = try_core!(RandomEncoder::new(seed, obs_dim, EMBEDDING_DIM));
        *out = Box::into_raw(Box::new(CclEncoder { inner, obs_dim }));
        CclStatus::Ok
    })
}

/// Embeds one observation of length `obs_len` into `embedding`, which must
/// have length `ccl_embedding_dim()`.
///
/// # Safety
/// `encoder` must come from `ccl_encoder_new`; buffers must hold the stated
/// number of doubles.
#[no_mangle]
pub unsafe extern "C" fn ccl_encoder_encode(
    encoder: *const CclEncoder,
    obs: *const f64,
    obs_len: usize,
    embedding: *mut f64,
    embedding_len: usize,
) -> CclStatus {
    guard(|| {
        let Some(enc) = encoder.as_ref() else {
            return fail(CclStatus::NullPointer, "encoder is null");
        };
        if obs_len != enc.obs_dim {
            return fail(
                CclStatus::DimensionMismatch,
                format!("obs: expected length {}, got {obs_len}", enc.obs_dim),
            );
        }
        let x = match input(obs, obs_len, "obs") {
            Ok(x) => x,
            Err(s) => return s,
        };
        let y = match output(embedding, embedding_len, EMBEDDING_DIM, "embedding") {
            Ok(y) => y,
            Err(s) => return s,
        };
        y.copy_from_slice(try_core!(enc.inner.encode(x)).as_slice());
        CclStatus::Ok
    })
}

/// # Safety
/// `encoder` must be null or come from `ccl_encoder_new`, and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccl_encoder_free(encoder: *mut CclEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Creates an intrinsic-reward engine for `n_agents` agents with the given
/// observation sizes. `config_json` is a JSON object of intrinsic settings
/// (missing keys take defaults) or null for all defaults.
///
/// # Safety
/// `obs_dims` must hold `n_agents` values; `config_json` must be null or a
/// NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccl_engine_new(
    config_json: *const c_char,
    obs_dims: *const usize,
    n_agents: usize,
    encoder_seed: u64,
    out: *mut *mut CclEngine,
) -> CclStatus {
    guard(|| {
        if out.is_null() || obs_dims.is_null() {
            return fail(CclStatus::NullPointer, "out or obs_dims is null");
        }
        if n_agents == 0 {
            return fail(CclStatus::InvalidArgument, "n_agents must be positive");
        }
        let config: IntrinsicConfig = match json_or_default(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let dims = slice::from_raw_parts(obs_dims, n_agents).to_vec();
        let inner = try_core!(IntrinsicEngine::new(config, &dims, encoder_seed));
        *out = Box::into_raw(Box::new(CclEngine { inner, obs_dims: dims }));
        CclStatus::Ok
    })
}

/// Starts an episode. `obs` holds every agent's observation back to back.
///
/// # Safety
/// `engine` must come from `ccl_engine_new`; `obs` must hold `obs_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ccl_engine_reset(engine: *mut CclEngine, obs: *const f64, obs_len: usize) -> CclStatus {
    guard(|| {
        let e = deref_mut!(engine, "engine");
        let want: usize = e.obs_dims.iter().sum();
        if obs_len != want {
            return fail(
                CclStatus::DimensionMismatch,
                format!("obs: expected length {want}, got {obs_len}"),
            );
        }
        let x = match input(obs, obs_len, "obs") {
            Ok(x) => x,
            Err(s) => return s,
        };
        try_core!(e.inner.reset(&split(x, &e.obs_dims)));
        CclStatus::Ok
    })
}

/// Advances one step and writes one CCL and one OEM reward per agent.
/// Terms not enabled by the reward mode are written as 0.
///
/// # Safety
/// `engine` must come from `ccl_engine_new`; `ccl` and `oem` must each hold
/// `n_agents` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccl_engine_step(
    engine: *mut CclEngine,
    obs: *const f64,
    obs_len: usize,
    ccl: *mut f64,
    oem: *mut f64,
    n_agents: usize,
) -> CclStatus {
    guard(|| {
        let e = deref_mut!(engine, "engine");
        let want: usize = e.obs_dims.iter().sum();
        if obs_len != want {
            return fail(
                CclStatus::DimensionMismatch,
                format!("obs: expected length {want}, got {obs_len}"),
            );
        }
        let n = e.obs_dims.len();
        let (x, c, o) = match (
            input(obs, obs_len, "obs"),
            output(ccl, n_agents, n, "ccl"),
            output(oem, n_agents, n, "oem"),
        ) {
            (Ok(x), Ok(c), Ok(o)) => (x, c, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let step = try_core!(e.inner.step(&split(x, &e.obs_dims)));
        c.copy_from_slice(&step.ccl);
        o.copy_from_slice(&step.oem);
        CclStatus::Ok
    })
}

/// # Safety
/// `engine` must be null or come from `ccl_engine_new`, and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccl_engine_free(engine: *mut CclEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Creates a rover environment from a JSON object of rover settings, or
/// the defaults when `config_json` is null. `seed` drives spawn positions.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_new(config_json: *const c_char, seed: u64, out: *mut *mut CclRover) -> CclStatus {
    guard(|| {
        if out.is_null() {
            return fail(CclStatus::NullPointer, "out is null");
        }
        let config: RoverConfig = match json_or_default(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let inner = try_core!(RoverEnv::new(config));
        *out = Box::into_raw(Box::new(CclRover {
            inner,
            rng: Rng::seed_from_u64(seed),
        }));
        CclStatus::Ok
    })
}

/// Number of rovers.
///
/// # Safety
/// `env` must be null or come from `ccl_rover_new`.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_n_agents(env: *const CclRover) -> usize {
    env.as_ref().map_or(0, |e| e.inner.n_agents())
}

/// Observation length of each rover.
///
/// # Safety
/// `env` must be null or come from `ccl_rover_new`.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_obs_dim(env: *const CclRover) -> usize {
    env.as_ref().map_or(0, |e| e.inner.obs_dims()[0])
}

/// Action length of each rover.
///
/// # Safety
/// `env` must be null or come from `ccl_rover_new`.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_action_dim(env: *const CclRover) -> usize {
    env.as_ref().map_or(0, |e| e.inner.action_dim())
}

/// Starts an episode and writes the observations, agent-major, into `obs`
/// (length `n_agents * obs_dim`).
///
/// # Safety
/// `env` must come from `ccl_rover_new`; `obs` must hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_reset(env: *mut CclRover, obs: *mut f64, obs_len: usize) -> CclStatus {
    guard(|| {
        let e = deref_mut!(env, "env");
        let want = e.inner.n_agents() * e.inner.obs_dims()[0];
        let y = match output(obs, obs_len, want, "obs") {
            Ok(y) => y,
            Err(s) => return s,
        };
        let o = try_core!(e.inner.reset(&mut e.rng));
        y.copy_from_slice(&o.concat());
        CclStatus::Ok
    })
}

/// Applies one joint action (agent-major, length `n_agents * action_dim`),
/// writes the next observations, the team reward (nonzero only at the end)
/// and whether the episode is over.
///
/// # Safety
/// `env` must come from `ccl_rover_new`; buffers must hold the stated
/// number of values; `team_reward` and `done` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_step(
    env: *mut CclRover,
    actions: *const f64,
    actions_len: usize,
    obs: *mut f64,
    obs_len: usize,
    team_reward: *mut f64,
    done: *mut bool,
) -> CclStatus {
    guard(|| {
        let e = deref_mut!(env, "env");
        if team_reward.is_null() || done.is_null() {
            return fail(CclStatus::NullPointer, "team_reward or done is null");
        }
        let n = e.inner.n_agents();
        let a_dim = e.inner.action_dim();
        if actions_len != n * a_dim {
            return fail(
                CclStatus::DimensionMismatch,
                format!("actions: expected length {}, got {actions_len}", n * a_dim),
            );
        }
        let want = n * e.inner.obs_dims()[0];
        let (a, y) = match (input(actions, actions_len, "actions"), output(obs, obs_len, want, "obs")) {
            (Ok(a), Ok(y)) => (a, y),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let out = try_core!(e.inner.step(&split(a, &vec![a_dim; n])));
        y.copy_from_slice(&out.observations.concat());
        *team_reward = out.team_reward;
        *done = out.done;
        CclStatus::Ok
    })
}

/// Writes rover positions as `x0, y0, x1, y1, ...` (length `2 * n_agents`).
///
/// # Safety
/// `env` must come from `ccl_rover_new`; `positions` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_positions(env: *const CclRover, positions: *mut f64, len: usize) -> CclStatus {
    guard(|| {
        let Some(e) = env.as_ref() else {
            return fail(CclStatus::NullPointer, "env is null");
        };
        let p = e.inner.positions();
        let y = match output(positions, len, 2 * p.len(), "positions") {
            Ok(y) => y,
            Err(s) => return s,
        };
        for (chunk, q) in y.chunks_exact_mut(2).zip(&p) {
            chunk.copy_from_slice(q);
        }
        CclStatus::Ok
    })
}

/// # Safety
/// `env` must be null or come from `ccl_rover_new`, and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccl_rover_free(env: *mut CclRover) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}
