//! C ABI over the fieldsearch simulator.
//!
//! The surface is handle-based: `fs_env_new` builds one episode
//! environment from a run-configuration JSON document and a seed,
//! `fs_policy_load` opens a trained checkpoint, and the remaining calls
//! step the episode and read its state. Every fallible function returns
//! an [`FsStatus`]; on failure a thread-local message is readable via
//! [`fs_last_error`]. Episodes built here from seed `s` are identical
//! to the ones the CLI and training loop build from the same seed.
//!
//! The companion header `include/fieldsearch.h` is regenerated by the
//! build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fieldsearch::config::RunConfig;
use fieldsearch::dqn::{greedy_action, Checkpoint};
use fieldsearch::env::{Action, ObservationSource, SearchEnv};
use fieldsearch::field::{generate_field, generate_prior_map};
use fieldsearch::grid::Cell;
use fieldsearch::metrics::score;
use fieldsearch::nn::QNetwork;
use fieldsearch::rng::{derive_seed, tag};
use fieldsearch::Error;

/// Result of every fallible call. `FS_STATUS_OK` is zero; anything else
/// indicates failure and leaves a message in `fs_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    /// A pointer was null or a buffer had the wrong length.
    InvalidArgument = 1,
    /// The configuration document failed validation.
    Config = 2,
    /// The call broke a library precondition.
    Contract = 3,
    /// A required file does not exist.
    MissingFile = 4,
    /// Malformed JSON, CSV or checkpoint data.
    Parse = 5,
    Io = 6,
    /// An unexpected internal failure (a bug, not caller error).
    Internal = 7,
}

/// One search episode: the field, its prior map, and the drone state.
pub struct FsEnv {
    inner: SearchEnv,
}

/// A trained Q-network loaded from a checkpoint file.
pub struct FsPolicy {
    net: QNetwork<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember_error(message: String) {
    let sanitized = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn fail(status: FsStatus, message: impl Into<String>) -> FsStatus {
    remember_error(message.into());
    status
}

fn fail_with(err: Error) -> FsStatus {
    let status = match err {
        Error::Config(_) => FsStatus::Config,
        Error::Contract(_) => FsStatus::Contract,
        Error::MissingFile(_) => FsStatus::MissingFile,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => FsStatus::Parse,
        Error::Io(_) => FsStatus::Io,
    };
    fail(status, err.to_string())
}

/// Run `body`, converting panics into `FS_STATUS_INTERNAL` so they never
/// unwind across the C boundary.
fn guarded(body: impl FnOnce() -> FsStatus) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(FsStatus::Internal, "internal panic"),
    }
}

/// Crate version as a static string; never null.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, or an
/// empty string. The pointer stays valid until the thread's next failing
/// fieldsearch call.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build an episode environment from a run-configuration JSON document
/// (the same schema the CLI's `--config` accepts). The field, prior map
/// and observation noise streams all derive from `seed`.
///
/// On success writes a handle to `out_env`; free it with `fs_env_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_env` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_env_new(
    config_json: *const c_char,
    seed: u64,
    out_env: *mut *mut FsEnv,
) -> FsStatus {
    guarded(|| {
        if config_json.is_null() || out_env.is_null() {
            return fail(FsStatus::InvalidArgument, "null pointer argument");
        }
        let json = match unsafe { CStr::from_ptr(config_json) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(FsStatus::InvalidArgument, "config JSON is not UTF-8"),
        };
        let config = match RunConfig::from_json(json).and_then(|c| {
            c.validate()?;
            Ok(c)
        }) {
            Ok(c) => c,
            Err(e) => return fail_with(e),
        };

        let build = || -> fieldsearch::Result<SearchEnv> {
            let field = generate_field(&config.field, derive_seed(seed, tag::FIELD))?;
            let prior = generate_prior_map(&field, &config.noise, derive_seed(seed, tag::PRIOR))?;
            SearchEnv::reset(
                field,
                prior,
                &config.env,
                ObservationSource::simulated(config.noise.clone(), seed),
                seed,
            )
        };
        match build() {
            Ok(inner) => {
                unsafe { *out_env = Box::into_raw(Box::new(FsEnv { inner })) };
                FsStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Release an environment handle. Passing null is a no-op.
///
/// # Safety
/// `env` must be a handle from `fs_env_new` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fs_env_free(env: *mut FsEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Apply one action (an `FS_ACTION_*` value). Writes the step's reward
/// and whether the episode ended. Stepping a finished episode fails with
/// `FS_STATUS_CONTRACT`.
///
/// # Safety
/// All pointers must be valid; `env` must be a live `fs_env_new` handle.
#[no_mangle]
pub unsafe extern "C" fn fs_env_step(
    env: *mut FsEnv,
    action: i32,
    out_reward: *mut f64,
    out_done: *mut bool,
) -> FsStatus {
    guarded(|| {
        if env.is_null() || out_reward.is_null() || out_done.is_null() {
            return fail(FsStatus::InvalidArgument, "null pointer argument");
        }
        let action = match usize::try_from(action).map_err(|_| ()).and_then(|i| {
            Action::from_index(i).map_err(|_| ())
        }) {
            Ok(a) => a,
            Err(()) => return fail(FsStatus::InvalidArgument, format!("no action {action}")),
        };
        let env = unsafe { &mut *env };
        match env.inner.step(action) {
            Ok(result) => {
                unsafe {
                    *out_reward = result.reward;
                    *out_done = result.done;
                }
                FsStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Field side length in cells.
///
/// # Safety
/// `env` must be a live `fs_env_new` handle.
#[no_mangle]
pub unsafe extern "C" fn fs_env_grid_size(env: *const FsEnv) -> u32 {
    if env.is_null() {
        return 0;
    }
    unsafe { &*env }.inner.field().size() as u32
}

/// Drone position, remaining battery fraction and episode-done flag.
/// Null out-pointers are skipped.
///
/// # Safety
/// `env` must be a live `fs_env_new` handle; non-null out-pointers must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_env_state(
    env: *const FsEnv,
    out_drone_x: *mut u32,
    out_drone_y: *mut u32,
    out_battery_frac: *mut f64,
    out_done: *mut bool,
) -> FsStatus {
    guarded(|| {
        if env.is_null() {
            return fail(FsStatus::InvalidArgument, "null env");
        }
        let env = &unsafe { &*env }.inner;
        unsafe {
            if !out_drone_x.is_null() {
                *out_drone_x = env.drone().x as u32;
            }
            if !out_drone_y.is_null() {
                *out_drone_y = env.drone().y as u32;
            }
            if !out_battery_frac.is_null() {
                *out_battery_frac = env.battery_frac() as f64;
            }
            if !out_done.is_null() {
                *out_done = env.done();
            }
        }
        FsStatus::Ok
    })
}

/// Which per-cell map `fs_env_read_map` copies out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsMap {
    /// Ground-truth object cells.
    Occupancy = 0,
    /// The episode's prior-knowledge map.
    Prior = 1,
    /// Cells marked found by detections so far.
    Found = 2,
    /// Cells the FOV has covered so far.
    Coverage = 3,
}

/// Copy one binary map into `buf` as row-major 0/1 bytes. `buf_len`
/// must equal `grid_size * grid_size`.
///
/// # Safety
/// `env` must be a live `fs_env_new` handle and `buf` must point to at
/// least `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fs_env_read_map(
    env: *const FsEnv,
    which: FsMap,
    buf: *mut u8,
    buf_len: usize,
) -> FsStatus {
    guarded(|| {
        if env.is_null() || buf.is_null() {
            return fail(FsStatus::InvalidArgument, "null pointer argument");
        }
        let env = &unsafe { &*env }.inner;
        let occupancy;
        let mask = match which {
            FsMap::Occupancy => {
                occupancy = env.field().occupancy();
                &occupancy
            }
            FsMap::Prior => env.prior_map(),
            FsMap::Found => env.found_map(),
            FsMap::Coverage => env.coverage_map(),
        };
        let m = mask.size();
        if buf_len != m * m {
            return fail(
                FsStatus::InvalidArgument,
                format!("buffer holds {buf_len} bytes, map needs {}", m * m),
            );
        }
        let out = unsafe { std::slice::from_raw_parts_mut(buf, buf_len) };
        for x in 0..m {
            for y in 0..m {
                out[x * m + y] = mask.get(Cell::new(x, y)) as u8;
            }
        }
        FsStatus::Ok
    })
}

/// Precision and recall of the found map against the ground truth, plus
/// the number of actions taken so far. Null out-pointers are skipped.
///
/// # Safety
/// `env` must be a live `fs_env_new` handle; non-null out-pointers must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_env_score(
    env: *const FsEnv,
    out_precision: *mut f64,
    out_recall: *mut f64,
    out_steps: *mut u64,
) -> FsStatus {
    guarded(|| {
        if env.is_null() {
            return fail(FsStatus::InvalidArgument, "null env");
        }
        let env = &unsafe { &*env }.inner;
        match score(env.found_map(), env.field()) {
            Ok(metrics) => {
                unsafe {
                    if !out_precision.is_null() {
                        *out_precision = metrics.precision;
                    }
                    if !out_recall.is_null() {
                        *out_recall = metrics.recall;
                    }
                    if !out_steps.is_null() {
                        *out_steps = env.steps() as u64;
                    }
                }
                FsStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Load a trained policy from a checkpoint file written by the trainer.
/// On success writes a handle to `out_policy`; free it with
/// `fs_policy_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_policy` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_policy_load(
    path: *const c_char,
    out_policy: *mut *mut FsPolicy,
) -> FsStatus {
    guarded(|| {
        if path.is_null() || out_policy.is_null() {
            return fail(FsStatus::InvalidArgument, "null pointer argument");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(FsStatus::InvalidArgument, "path is not UTF-8"),
        };
        match Checkpoint::load(Path::new(path)).and_then(|c| c.build_network()) {
            Ok(net) => {
                unsafe { *out_policy = Box::into_raw(Box::new(FsPolicy { net })) };
                FsStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Release a policy handle. Passing null is a no-op.
///
/// # Safety
/// `policy` must be a handle from `fs_policy_load` that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn fs_policy_free(policy: *mut FsPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Greedy action of the policy in the environment's current state,
/// written to `out_action` as an `FS_ACTION_*` value. Fails with
/// `FS_STATUS_CONTRACT` when the policy was trained for a different
/// field or FOV geometry.
///
/// # Safety
/// `policy` and `env` must be live handles and `out_action` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_policy_action(
    policy: *const FsPolicy,
    env: *const FsEnv,
    out_action: *mut i32,
) -> FsStatus {
    guarded(|| {
        if policy.is_null() || env.is_null() || out_action.is_null() {
            return fail(FsStatus::InvalidArgument, "null pointer argument");
        }
        let policy = unsafe { &*policy };
        let env = &unsafe { &*env }.inner;
        match greedy_action(&policy.net, &env.state_tensor()) {
            Ok(action) => {
                unsafe { *out_action = action.index() as i32 };
                FsStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Static name of an `FS_ACTION_*` value ("north", "south", "west",
/// "east", "land"), or null for an unknown value.
#[no_mangle]
pub extern "C" fn fs_action_name(action: i32) -> *const c_char {
    match action {
        0 => "north\0",
        1 => "south\0",
        2 => "west\0",
        3 => "east\0",
        4 => "land\0",
        _ => return std::ptr::null(),
    }
    .as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const CONFIG: &str = r#"{
      "version": 1,
      "field": {"grid_size": 8, "n_obj_mean": 4, "n_obj_std": 1, "k_mean": 1, "k_std": 0,
                "cov_choices": [[[2.0, 0.0], [0.0, 2.0]]]},
      "env": {"fov_size": 4, "b_init": 10}
    }"#;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(fs_last_error()) }
            .to_str()
            .unwrap()
            .to_string()
    }

    fn new_env(config: &str, seed: u64) -> *mut FsEnv {
        let json = c(config);
        let mut env = ptr::null_mut();
        let status = unsafe { fs_env_new(json.as_ptr(), seed, &mut env) };
        assert_eq!(status, FsStatus::Ok, "{}", last_error());
        assert!(!env.is_null());
        env
    }

    #[test]
    fn episode_runs_to_completion_and_scores() {
        let env = new_env(CONFIG, 3);
        assert_eq!(unsafe { fs_env_grid_size(env) }, 8);

        let (mut reward, mut done) = (0.0, false);
        let mut steps = 0;
        while !done {
            let action = if steps < 3 { 3 } else { 4 };
            let status = unsafe { fs_env_step(env, action, &mut reward, &mut done) };
            assert_eq!(status, FsStatus::Ok, "{}", last_error());
            steps += 1;
            assert!(steps <= 11, "episode must end by battery exhaustion");
        }

        let (mut precision, mut recall, mut taken) = (-1.0, -1.0, 0u64);
        let status = unsafe { fs_env_score(env, &mut precision, &mut recall, &mut taken) };
        assert_eq!(status, FsStatus::Ok);
        assert!((0.0..=1.0).contains(&precision) && (0.0..=1.0).contains(&recall));
        assert_eq!(taken, steps as u64);

        // Stepping a finished episode is a contract violation.
        let status = unsafe { fs_env_step(env, 0, &mut reward, &mut done) };
        assert_eq!(status, FsStatus::Contract);
        assert!(!last_error().is_empty());
        unsafe { fs_env_free(env) };
    }

    #[test]
    fn same_seed_same_episode() {
        let (a, b) = (new_env(CONFIG, 9), new_env(CONFIG, 9));
        let (mut ra, mut rb) = (0.0, 0.0);
        let (mut da, mut db) = (false, false);
        for action in [0, 1, 3, 3, 4] {
            unsafe {
                assert_eq!(fs_env_step(a, action, &mut ra, &mut da), FsStatus::Ok);
                assert_eq!(fs_env_step(b, action, &mut rb, &mut db), FsStatus::Ok);
            }
            assert_eq!(ra.to_bits(), rb.to_bits());
            assert_eq!(da, db);
            if da {
                break;
            }
        }
        unsafe {
            fs_env_free(a);
            fs_env_free(b);
        }
    }

    #[test]
    fn maps_copy_out_row_major() {
        let env = new_env(CONFIG, 5);
        let mut buf = vec![9u8; 64];
        for which in [FsMap::Occupancy, FsMap::Prior, FsMap::Found, FsMap::Coverage] {
            let status = unsafe { fs_env_read_map(env, which, buf.as_mut_ptr(), buf.len()) };
            assert_eq!(status, FsStatus::Ok);
            assert!(buf.iter().all(|&b| b <= 1));
        }
        // Coverage starts as exactly the initial FOV footprint.
        let status =
            unsafe { fs_env_read_map(env, FsMap::Coverage, buf.as_mut_ptr(), buf.len()) };
        assert_eq!(status, FsStatus::Ok);
        assert_eq!(buf.iter().filter(|&&b| b == 1).count(), 16);

        let status = unsafe { fs_env_read_map(env, FsMap::Prior, buf.as_mut_ptr(), 63) };
        assert_eq!(status, FsStatus::InvalidArgument);
        assert!(last_error().contains("64"));
        unsafe { fs_env_free(env) };
    }

    #[test]
    fn policy_loads_and_acts() {
        let spec = fieldsearch::nn::NetworkSpec::for_field(8, 4);
        let net: QNetwork<f32> = QNetwork::zeros(spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("policy.ckpt");
        Checkpoint::of(&net, 0, None).save(&ckpt).unwrap();

        let mut policy = ptr::null_mut();
        let path = c(ckpt.to_str().unwrap());
        let status = unsafe { fs_policy_load(path.as_ptr(), &mut policy) };
        assert_eq!(status, FsStatus::Ok, "{}", last_error());

        let env = new_env(CONFIG, 1);
        let mut action = -1;
        let status = unsafe { fs_policy_action(policy, env, &mut action) };
        assert_eq!(status, FsStatus::Ok, "{}", last_error());
        assert!((0..5).contains(&action));
        assert!(!fs_action_name(action).is_null());

        unsafe {
            fs_env_free(env);
            fs_policy_free(policy);
        }
    }

    #[test]
    fn failures_set_status_and_message() {
        let mut env = ptr::null_mut();
        assert_eq!(
            unsafe { fs_env_new(ptr::null(), 0, &mut env) },
            FsStatus::InvalidArgument
        );

        let bad = c("{\"version\": 1, \"unknown_knob\": 3}");
        assert_eq!(
            unsafe { fs_env_new(bad.as_ptr(), 0, &mut env) },
            FsStatus::Parse
        );
        assert!(last_error().contains("unknown_knob"), "{}", last_error());

        let missing = c("/definitely/not/here.ckpt");
        let mut policy = ptr::null_mut();
        assert_eq!(
            unsafe { fs_policy_load(missing.as_ptr(), &mut policy) },
            FsStatus::MissingFile
        );

        let env = new_env(CONFIG, 2);
        let (mut reward, mut done) = (0.0, false);
        assert_eq!(
            unsafe { fs_env_step(env, 99, &mut reward, &mut done) },
            FsStatus::InvalidArgument
        );
        unsafe { fs_env_free(env) };

        assert_eq!(fs_action_name(99), ptr::null());
        assert!(!fs_version().is_null());
    }

    #[test]
    fn generated_header_declares_the_surface() {
        let header = std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fieldsearch.h"),
        )
        .unwrap();
        for symbol in [
            "typedef struct FsEnv FsEnv;",
            "typedef struct FsPolicy FsPolicy;",
            "fs_env_new",
            "fs_env_step",
            "fs_env_read_map",
            "fs_policy_action",
            "fs_last_error",
            "FS_STATUS_MISSING_FILE",
        ] {
            assert!(header.contains(symbol), "header lacks {symbol}");
        }
    }
}
