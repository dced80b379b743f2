//! C interface to the geosync server, calendar importer and simulator.
//!
//! Every entry point returns a [`GsStatus`]. Strings handed out through
//! `out` parameters are owned by the caller and must be released with
//! [`gs_string_free`]. When a call fails, [`gs_last_error`] describes why.
//!
//! Structured values cross the boundary as canonical JSON text, the same
//! encoding used on the wire, so bindings need nothing beyond a JSON parser.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use geosync::calendar::parse_ics_bytes;
use geosync::server::Server;
use geosync::sim::{run_scenario, Scenario};
use geosync::wire::{decode_client, server_value, status_value, to_canonical, ErrorCode};
use geosync::{ActivityId, ActivitySpec, GeoPoint, ParticipantId, ServerMessage, Timestamp};
use serde_json::json;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A JSON argument did not parse or did not have the expected shape.
    InvalidJson = 3,
    /// A client frame could not be decoded. An `ERR` reply is still produced.
    BadFrame = 4,
    /// The request was well formed but violates a domain rule.
    Invalid = 5,
    /// The named activity does not exist.
    NotFound = 6,
    /// Reading or writing the event log failed.
    Io = 7,
    /// The calendar could not be imported.
    Calendar = 8,
    /// Internal failure. The handle should be discarded.
    Panic = 9,
}

/// Opaque server handle.
pub struct GsServer {
    inner: Server,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GsStatus, String);

impl Failure {
    fn new(status: GsStatus, detail: impl ToString) -> Self {
        Failure(status, detail.to_string())
    }
}

type Out<T> = Result<T, Failure>;

fn set_last_error(detail: &str) {
    let c = CString::new(detail.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Out<()>) -> GsStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure(status, detail))) => {
            set_last_error(&detail);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            GsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Out<&'a str> {
    if p.is_null() {
        return Err(Failure::new(GsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(GsStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a>(p: *mut GsServer) -> Out<&'a mut Server> {
    p.as_mut()
        .map(|s| &mut s.inner)
        .ok_or_else(|| Failure::new(GsStatus::NullArgument, "server is null"))
}

unsafe fn emit(out: *mut *mut c_char, s: String) -> Out<()> {
    if out.is_null() {
        return Err(Failure::new(GsStatus::NullArgument, "out is null"));
    }
    let c = CString::new(s).map_err(|_| Failure::new(GsStatus::Invalid, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Out<()> {
    if out.is_null() {
        Err(Failure::new(GsStatus::NullArgument, "out is null"))
    } else {
        Ok(())
    }
}

fn deliveries(messages: &[(ParticipantId, ServerMessage)]) -> String {
    messages
        .iter()
        .map(|(to, msg)| to_canonical(&json!({ "to": to.as_str(), "msg": server_value(msg) })) + "\n")
        .collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Detail for the last failed call on this thread. Empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Create an in-memory server.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_server_new(out: *mut *mut GsServer) -> GsStatus {
    guard(|| {
        check_out(out)?;
        *out = Box::into_raw(Box::new(GsServer { inner: Server::new() }));
        Ok(())
    })
}

/// Open a server backed by an event log file, replaying its contents.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_server_open(path: *const c_char, out: *mut *mut GsServer) -> GsStatus {
    guard(|| {
        let path = text(path, "path")?;
        check_out(out)?;
        let inner = Server::open(Path::new(path)).map_err(|e| Failure::new(GsStatus::Io, format!("{e:#}")))?;
        *out = Box::into_raw(Box::new(GsServer { inner }));
        Ok(())
    })
}

/// Destroy a server. Null is ignored.
///
/// # Safety
/// `server` must come from `gs_server_new` or `gs_server_open` and not have
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn gs_server_free(server: *mut GsServer) {
    if !server.is_null() {
        drop(Box::from_raw(server));
    }
}

/// Create an activity from a JSON specification. Writes the new activity id
/// to `out_id` and the resulting invitations, one delivery per line, to
/// `out_jsonl` when it is not null.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_server_create_activity(
    server: *mut GsServer,
    spec_json: *const c_char,
    now: u64,
    out_id: *mut *mut c_char,
    out_jsonl: *mut *mut c_char,
) -> GsStatus {
    guard(|| {
        let s = handle(server)?;
        let spec: ActivitySpec = serde_json::from_str(text(spec_json, "spec_json")?)
            .map_err(|e| Failure::new(GsStatus::InvalidJson, e))?;
        check_out(out_id)?;
        let (id, outcome) = s.create_activity(spec, Timestamp(now), None).map_err(|e| match e {
            geosync::server::CreateError::Io(e) => Failure::new(GsStatus::Io, e),
            e => Failure::new(GsStatus::Invalid, e),
        })?;
        emit(out_id, id.to_string())?;
        if !out_jsonl.is_null() {
            emit(out_jsonl, deliveries(&outcome.outbound))?;
        }
        Ok(())
    })
}

/// Process one client frame from `participant` at time `now`. Every message
/// the server sends in response is written to `out_jsonl` as a line
/// `{"msg":...,"to":...}`. Protocol rejections are ordinary `ERR` messages
/// and still return `GS_STATUS_OK`; an undecodable frame yields an `ERR`
/// line and `GS_STATUS_BAD_FRAME`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_server_handle(
    server: *mut GsServer,
    participant: *const c_char,
    frame: *const c_char,
    now: u64,
    out_jsonl: *mut *mut c_char,
) -> GsStatus {
    guard(|| {
        let s = handle(server)?;
        let who = ParticipantId::from(text(participant, "participant")?);
        let frame = text(frame, "frame")?;
        check_out(out_jsonl)?;
        let msg = match decode_client(frame.trim_end_matches(['\r', '\n'])) {
            Ok(msg) => msg,
            Err(e) => {
                let reply = ServerMessage::Err { code: ErrorCode::BadFrame, detail: e.to_string() };
                emit(out_jsonl, deliveries(&[(who, reply)]))?;
                return Err(Failure::new(GsStatus::BadFrame, e));
            }
        };
        let outcome = s.handle(&msg, &who, Timestamp(now)).map_err(|e| Failure::new(GsStatus::Io, e))?;
        emit(out_jsonl, deliveries(&outcome.outbound))
    })
}

/// Notifications queued for `participant` with sequence above `cursor`, as
/// encoded server frames one per line. `out_cursor` receives the cursor to
/// report next.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_server_pending(
    server: *mut GsServer,
    participant: *const c_char,
    cursor: u64,
    out_jsonl: *mut *mut c_char,
    out_cursor: *mut u64,
) -> GsStatus {
    guard(|| {
        let s = handle(server)?;
        let who = ParticipantId::from(text(participant, "participant")?);
        check_out(out_cursor)?;
        let (messages, next) = s.state().pending(&who, cursor);
        let frames: String = messages.iter().map(geosync::wire::encode_server).collect();
        emit(out_jsonl, frames)?;
        *out_cursor = next;
        Ok(())
    })
}

/// Full status of an activity at `now` as a `STATUS_VIEW` object.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_server_status(
    server: *mut GsServer,
    activity: *const c_char,
    now: u64,
    out_json: *mut *mut c_char,
) -> GsStatus {
    guard(|| {
        let s = handle(server)?;
        let id = ActivityId::from(text(activity, "activity")?);
        let view = s
            .state()
            .status(&id, Timestamp(now))
            .map_err(|r| Failure::new(GsStatus::NotFound, r.detail))?;
        emit(out_json, to_canonical(&status_value(&view)))
    })
}

/// The event log, one record per line, as it would appear on disk.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gs_server_log(server: *mut GsServer, out_text: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let s = handle(server)?;
        emit(out_text, s.log_text())
    })
}

/// Great-circle distance in metres.
///
/// # Safety
/// `out_m` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64, out_m: *mut f64) -> GsStatus {
    guard(|| {
        check_out(out_m)?;
        let a = GeoPoint::new(lat1, lon1).map_err(|e| Failure::new(GsStatus::Invalid, e))?;
        let b = GeoPoint::new(lat2, lon2).map_err(|e| Failure::new(GsStatus::Invalid, e))?;
        *out_m = geosync::geo::haversine_m(a, b);
        Ok(())
    })
}

/// Import an iCalendar document. The result is a JSON object
/// `{"activities":[{"spec":...,"uid":...}],"skipped":n,"warnings":[...]}`
/// where each spec is ready for `gs_server_create_activity`.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_parse_ics(
    bytes: *const u8,
    len: usize,
    system_address: *const c_char,
    out_json: *mut *mut c_char,
) -> GsStatus {
    guard(|| {
        if bytes.is_null() && len > 0 {
            return Err(Failure::new(GsStatus::NullArgument, "bytes is null"));
        }
        let data = if len == 0 { &[][..] } else { std::slice::from_raw_parts(bytes, len) };
        let system = text(system_address, "system_address")?;
        let import = parse_ics_bytes(data, system).map_err(|e| Failure::new(GsStatus::Calendar, e))?;
        let mut activities = Vec::new();
        for draft in &import.drafts {
            let spec = draft
                .to_spec()
                .map_err(|e| Failure::new(GsStatus::Calendar, format!("event {}: {e}", draft.uid)))?;
            let spec = serde_json::to_value(spec).map_err(|e| Failure::new(GsStatus::Invalid, e))?;
            activities.push(json!({ "uid": draft.uid, "spec": spec }));
        }
        let result = json!({
            "activities": activities,
            "skipped": import.skipped,
            "warnings": import.warnings,
        });
        emit(out_json, to_canonical(&result))
    })
}

/// Run a scenario given as JSON and return its transcript, one line per
/// delivered message. Relative calendar paths resolve against the current
/// directory.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_simulate(scenario_json: *const c_char, out_jsonl: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let scenario: Scenario = serde_json::from_str(text(scenario_json, "scenario_json")?)
            .map_err(|e| Failure::new(GsStatus::InvalidJson, e))?;
        check_out(out_jsonl)?;
        let transcript = run_scenario(&scenario).map_err(|e| Failure::new(GsStatus::Invalid, e))?;
        emit(out_jsonl, transcript.to_jsonl())
    })
}
