#ifndef GEOSYNC_H
#define GEOSYNC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  GS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  GS_STATUS_INVALID_UTF8 = 2,
  /**
   * A JSON argument did not parse or did not have the expected shape.
   */
  GS_STATUS_INVALID_JSON = 3,
  /**
   * A client frame could not be decoded. An `ERR` reply is still produced.
   */
  GS_STATUS_BAD_FRAME = 4,
  /**
   * The request was well formed but violates a domain rule.
   */
  GS_STATUS_INVALID = 5,
  /**
   * The named activity does not exist.
   */
  GS_STATUS_NOT_FOUND = 6,
  /**
   * Reading or writing the event log failed.
   */
  GS_STATUS_IO = 7,
  /**
   * The calendar could not be imported.
   */
  GS_STATUS_CALENDAR = 8,
  /**
   * Internal failure. The handle should be discarded.
   */
  GS_STATUS_PANIC = 9,
} GsStatus;

/**
 * Opaque server handle.
 */
typedef struct GsServer GsServer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Detail for the last failed call on this thread. Empty after a success.
 * Valid until the next call on the same thread.
 */
const char *gs_last_error(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void gs_string_free(char *s);

/**
 * Create an in-memory server.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GsStatus gs_server_new(struct GsServer **out);

/**
 * Open a server backed by an event log file, replaying its contents.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GsStatus gs_server_open(const char *path, struct GsServer **out);

/**
 * Destroy a server. Null is ignored.
 *
 * # Safety
 * `server` must come from `gs_server_new` or `gs_server_open` and not have
 * been freed already.
 */
void gs_server_free(struct GsServer *server);

/**
 * Create an activity from a JSON specification. Writes the new activity id
 * to `out_id` and the resulting invitations, one delivery per line, to
 * `out_jsonl` when it is not null.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum GsStatus gs_server_create_activity(struct GsServer *server,
                                        const char *spec_json,
                                        uint64_t now,
                                        char **out_id,
                                        char **out_jsonl);

/**
 * Process one client frame from `participant` at time `now`. Every message
 * the server sends in response is written to `out_jsonl` as a line
 * `{"msg":...,"to":...}`. Protocol rejections are ordinary `ERR` messages
 * and still return `GS_STATUS_OK`; an undecodable frame yields an `ERR`
 * line and `GS_STATUS_BAD_FRAME`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum GsStatus gs_server_handle(struct GsServer *server,
                               const char *participant,
                               const char *frame,
                               uint64_t now,
                               char **out_jsonl);

/**
 * Notifications queued for `participant` with sequence above `cursor`, as
 * encoded server frames one per line. `out_cursor` receives the cursor to
 * report next.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum GsStatus gs_server_pending(struct GsServer *server,
                                const char *participant,
                                uint64_t cursor,
                                char **out_jsonl,
                                uint64_t *out_cursor);

/**
 * Full status of an activity at `now` as a `STATUS_VIEW` object.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum GsStatus gs_server_status(struct GsServer *server,
                               const char *activity,
                               uint64_t now,
                               char **out_json);

/**
 * The event log, one record per line, as it would appear on disk.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GsStatus gs_server_log(struct GsServer *server, char **out_text);

/**
 * Great-circle distance in metres.
 *
 * # Safety
 * `out_m` must be a valid pointer.
 */
enum GsStatus gs_haversine_m(double lat1, double lon1, double lat2, double lon2, double *out_m);

/**
 * Import an iCalendar document. The result is a JSON object
 * `{"activities":[{"spec":...,"uid":...}],"skipped":n,"warnings":[...]}`
 * where each spec is ready for `gs_server_create_activity`.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; strings NUL-terminated.
 */
enum GsStatus gs_parse_ics(const uint8_t *bytes,
                           size_t len,
                           const char *system_address,
                           char **out_json);

/**
 * Run a scenario given as JSON and return its transcript, one line per
 * delivered message. Relative calendar paths resolve against the current
 * directory.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum GsStatus gs_simulate(const char *scenario_json, char **out_jsonl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSYNC_H */
