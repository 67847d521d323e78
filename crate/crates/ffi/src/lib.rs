//! C ABI over `akm-core`.
//!
//! Conventions:
//! - every fallible function returns an [`AkmStatus`]; on failure a message is
//!   available from [`akm_last_error`] on the same thread
//! - strings are NUL-terminated UTF-8; strings returned through `out`
//!   parameters are owned by the caller and released with [`akm_string_free`]
//! - structured values (records, search hits, run records) cross the boundary as JSON
//! - handles are opaque and released with their `_free` function; passing NULL to
//!   a `_free` function is a no-op

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use akm::adr::{parse_adr, render_adr, Adr};
use akm::cli::exit_code;
use akm::config::Config;
use akm::llm::Gateway;
use akm::orchestrator::{replay, run_pipeline};
use akm::retrieval::{EmbeddedDoc, Embedder, HashingEmbedder, VectorStore};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AkmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Run = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AkmStatus, String);

impl Failure {
    fn new(status: AkmStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AkmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            AkmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AkmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(AkmStatus::NullArgument, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(AkmStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(AkmStatus::NullArgument, "output pointer is NULL"));
    }
    let c = CString::new(value).map_err(|_| Failure::new(AkmStatus::InvalidArgument, "result contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn akm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn akm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn akm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a markdown record into its JSON form.
///
/// # Safety
/// `markdown` must be a valid C string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn akm_adr_parse(markdown: *const c_char, out_json: *mut *mut c_char) -> AkmStatus {
    guard(|| {
        let text = str_arg(markdown, "markdown")?;
        let adr = parse_adr(text).map_err(|e| Failure::new(AkmStatus::Parse, e))?;
        write_string(out_json, serde_json::to_string(&adr).expect("records always serialize"))
    })
}

/// Renders a record given as JSON into markdown.
///
/// # Safety
/// `adr_json` must be a valid C string; `out_markdown` must be writable.
#[no_mangle]
pub unsafe extern "C" fn akm_adr_render(adr_json: *const c_char, out_markdown: *mut *mut c_char) -> AkmStatus {
    guard(|| {
        let json = str_arg(adr_json, "adr_json")?;
        let adr: Adr = serde_json::from_str(json).map_err(|e| Failure::new(AkmStatus::Parse, e))?;
        let text = render_adr(&adr).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        write_string(out_markdown, text)
    })
}

/// Vector store paired with the built-in hashing embedder.
pub struct AkmStore {
    store: VectorStore,
    embedder: HashingEmbedder,
}

/// Creates an empty store. Never returns NULL.
#[no_mangle]
pub extern "C" fn akm_store_new() -> *mut AkmStore {
    Box::into_raw(Box::new(AkmStore { store: VectorStore::new(), embedder: HashingEmbedder::default() }))
}

/// Loads a JSONL store file into a new handle.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn akm_store_load(path: *const c_char, out: *mut *mut AkmStore) -> AkmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::new(AkmStatus::NullArgument, "`out` is NULL"));
        }
        let store = VectorStore::load(Path::new(path)).map_err(|e| Failure::new(AkmStatus::Io, e))?;
        *out = Box::into_raw(Box::new(AkmStore { store, embedder: HashingEmbedder::default() }));
        Ok(())
    })
}

/// # Safety
/// `store` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn akm_store_save(store: *const AkmStore, path: *const c_char) -> AkmStatus {
    guard(|| {
        let store = store.as_ref().ok_or_else(|| Failure::new(AkmStatus::NullArgument, "`store` is NULL"))?;
        let path = str_arg(path, "path")?;
        store.store.save(Path::new(path)).map_err(|e| Failure::new(AkmStatus::Io, e))
    })
}

/// # Safety
/// `store` must be NULL or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn akm_store_free(store: *mut AkmStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of documents; 0 for NULL.
///
/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn akm_store_len(store: *const AkmStore) -> usize {
    store.as_ref().map_or(0, |s| s.store.len())
}

/// Embeds `text` with the hashing embedder and upserts it under `doc_id`.
///
/// # Safety
/// `store` must be a live handle; `doc_id` and `text` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn akm_store_add_text(
    store: *mut AkmStore,
    doc_id: *const c_char,
    text: *const c_char,
) -> AkmStatus {
    guard(|| {
        let store = store.as_mut().ok_or_else(|| Failure::new(AkmStatus::NullArgument, "`store` is NULL"))?;
        let (doc_id, text) = (str_arg(doc_id, "doc_id")?, str_arg(text, "text")?);
        let vector = store.embedder.embed(text).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        store.store.add(EmbeddedDoc::new(doc_id, text, vector)).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))
    })
}

/// Upserts a caller-supplied vector of `len` doubles.
///
/// # Safety
/// `store` must be a live handle; `vector` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn akm_store_add_vector(
    store: *mut AkmStore,
    doc_id: *const c_char,
    text: *const c_char,
    vector: *const f64,
    len: usize,
) -> AkmStatus {
    guard(|| {
        let store = store.as_mut().ok_or_else(|| Failure::new(AkmStatus::NullArgument, "`store` is NULL"))?;
        let (doc_id, text) = (str_arg(doc_id, "doc_id")?, str_arg(text, "text")?);
        if vector.is_null() {
            return Err(Failure::new(AkmStatus::NullArgument, "`vector` is NULL"));
        }
        let v = std::slice::from_raw_parts(vector, len).to_vec();
        store.store.add(EmbeddedDoc::new(doc_id, text, v)).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))
    })
}

/// Top-`k` hits for `query` as a JSON array of `{doc_id, score, text}`.
///
/// # Safety
/// `store` must be a live handle; `query` a valid C string; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn akm_store_search(
    store: *const AkmStore,
    query: *const c_char,
    k: usize,
    out_json: *mut *mut c_char,
) -> AkmStatus {
    guard(|| {
        let store = store.as_ref().ok_or_else(|| Failure::new(AkmStatus::NullArgument, "`store` is NULL"))?;
        let query = str_arg(query, "query")?;
        let q = store.embedder.embed(query).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        let hits = store.store.search(&q, k).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        write_string(out_json, serde_json::to_string(&hits).expect("hits always serialize"))
    })
}

/// Runs the pipeline selected by `config_json` (a config document; `{}` for
/// defaults) on `repo`. On success `out_exit_code` receives the CLI exit code
/// for the run status and `out_run_json` the full run record.
///
/// # Safety
/// String arguments must be valid C strings; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn akm_run(
    repo: *const c_char,
    config_json: *const c_char,
    out_exit_code: *mut i32,
    out_run_json: *mut *mut c_char,
) -> AkmStatus {
    guard(|| {
        let repo = str_arg(repo, "repo")?;
        let config: Config = serde_json::from_str(str_arg(config_json, "config_json")?)
            .map_err(|e| Failure::new(AkmStatus::Parse, e))?;
        config.validate().map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        if out_exit_code.is_null() {
            return Err(Failure::new(AkmStatus::NullArgument, "`out_exit_code` is NULL"));
        }
        let gateway = Gateway::from_config(&config).map_err(|e| Failure::new(AkmStatus::InvalidArgument, e))?;
        let run = run_pipeline(Path::new(repo), &config, &gateway).map_err(|e| Failure::new(AkmStatus::Run, e))?;
        *out_exit_code = exit_code(run.status);
        write_string(out_run_json, serde_json::to_string(&run).expect("runs always serialize"))
    })
}

/// Replays the run recorded in `run_dir` into `out_dir`; `out_identical`
/// receives 1 when the replay reproduced the recorded records exactly.
///
/// # Safety
/// String arguments must be valid C strings; `out_identical` writable.
#[no_mangle]
pub unsafe extern "C" fn akm_replay(
    run_dir: *const c_char,
    out_dir: *const c_char,
    out_identical: *mut i32,
) -> AkmStatus {
    guard(|| {
        let (run_dir, out_dir) = (str_arg(run_dir, "run_dir")?, str_arg(out_dir, "out_dir")?);
        if out_identical.is_null() {
            return Err(Failure::new(AkmStatus::NullArgument, "`out_identical` is NULL"));
        }
        let outcome = replay(Path::new(run_dir), Path::new(out_dir)).map_err(|e| Failure::new(AkmStatus::Run, e))?;
        *out_identical = i32::from(outcome.identical());
        Ok(())
    })
}
