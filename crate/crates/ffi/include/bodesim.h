#ifndef BODESIM_H
#define BODESIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum BodesimStatus {
  BODESIM_STATUS_OK = 0,
  BODESIM_STATUS_NULL_POINTER = 1,
  BODESIM_STATUS_INVALID_UTF8 = 2,
  BODESIM_STATUS_IO = 3,
  BODESIM_STATUS_TRACE = 4,
  BODESIM_STATUS_SCENARIO = 5,
  BODESIM_STATUS_VALIDATION = 6,
  BODESIM_STATUS_USAGE = 7,
  BODESIM_STATUS_RUNTIME = 8,
  BODESIM_STATUS_OUT_OF_RANGE = 9,
  BODESIM_STATUS_PANIC = 99,
} BodesimStatus;

// A standalone BoDe queue driven directly by the caller.
typedef struct BodesimBodeQueue BodesimBodeQueue;

// The outcome of one simulation run.
typedef struct BodesimReport BodesimReport;

// A parsed, validated scenario.
typedef struct BodesimScenario BodesimScenario;

// Headline metrics for one class or for all classes together.
// Undefined delay metrics and power are NaN; `requirement_met` is -1 when
// the class has no delay requirement.
typedef struct BodesimSummary {
  uint64_t generated;
  uint64_t offered;
  uint64_t served;
  uint64_t dropped;
  uint64_t retransmissions;
  uint64_t drops_tail_overflow;
  uint64_t drops_head_overflow;
  uint64_t drops_expired_at_egress;
  uint64_t drops_codel;
  uint64_t drops_probabilistic_early;
  double throughput_mbps;
  double p99_queuing_delay_ms;
  double peak_queuing_delay_ms;
  double mean_queuing_delay_ms;
  double power;
  double drop_rate;
  double retransmission_fraction;
  int32_t requirement_met;
} BodesimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *bodesim_version(void);

// Size in bytes, including the terminating NUL, of the calling thread's
// last error message, or 0 when the last call succeeded.
size_t bodesim_last_error_length(void);

// Copies the last error message into `buf`. Returns the number of bytes
// written excluding the NUL, 0 when there is no error, or -1 when `buf`
// is null or shorter than [`bodesim_last_error_length`].
//
// # Safety
// `buf` must be valid for writes of `len` bytes.
ptrdiff_t bodesim_last_error_message(char *buf, size_t len);

// Parses scenario TOML held in memory. Relative trace paths resolve
// against the current directory.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum BodesimStatus bodesim_scenario_from_toml(const char *toml, struct BodesimScenario **out);

// Loads a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum BodesimStatus bodesim_scenario_from_file(const char *path, struct BodesimScenario **out);

// Loads a bundled scenario by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum BodesimStatus bodesim_scenario_from_preset(const char *name, struct BodesimScenario **out);

// Replaces the scenario's random seed.
//
// # Safety
// `scenario` must come from a `bodesim_scenario_from_*` call.
enum BodesimStatus bodesim_scenario_set_seed(struct BodesimScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must be null or come from a `bodesim_scenario_from_*` call,
// and must not be used afterwards.
void bodesim_scenario_free(struct BodesimScenario *scenario);

// Runs the scenario to completion.
//
// # Safety
// `scenario` must be a live scenario handle and `out` a valid pointer.
enum BodesimStatus bodesim_run(const struct BodesimScenario *scenario, struct BodesimReport **out);

// Number of traffic classes in the report.
//
// # Safety
// `report` must be null or a live report handle.
size_t bodesim_report_class_count(const struct BodesimReport *report);

// Summary over all classes.
//
// # Safety
// `report` must be a live report handle and `out` a valid pointer.
enum BodesimStatus bodesim_report_overall(const struct BodesimReport *report,
                                          struct BodesimSummary *out);

// Summary for one class.
//
// # Safety
// `report` must be a live report handle and `out` a valid pointer.
enum BodesimStatus bodesim_report_class_summary(const struct BodesimReport *report,
                                                size_t class_,
                                                struct BodesimSummary *out);

// Writes the summary CSV (overall row plus one row per class).
//
// # Safety
// `report` must be a live report handle and `path` a NUL-terminated
// string.
enum BodesimStatus bodesim_report_write_summary_csv(const struct BodesimReport *report,
                                                    const char *path);

// Writes the per-packet event log CSV.
//
// # Safety
// `report` must be a live report handle and `path` a NUL-terminated
// string.
enum BodesimStatus bodesim_report_write_events_csv(const struct BodesimReport *report,
                                                   const char *path);

// # Safety
// `report` must be null or come from [`bodesim_run`], and must not be
// used afterwards.
void bodesim_report_free(struct BodesimReport *report);

// Packets needed to hold `bounded_delay_us` worth of traffic at
// `max_rate_bps`.
//
// # Safety
// `out` must be a valid pointer.
enum BodesimStatus bodesim_buffer_requirement(double max_rate_bps,
                                              uint32_t packet_size_bytes,
                                              uint64_t bounded_delay_us,
                                              uint64_t *out);

// Creates a BoDe queue. `cap_bytes` of 0 means unbounded.
//
// # Safety
// `out` must be a valid pointer.
enum BodesimStatus bodesim_bode_queue_new(uint64_t bounded_delay_us,
                                          uint32_t protect_threshold,
                                          uint64_t cap_bytes,
                                          struct BodesimBodeQueue **out);

// Offers a packet at `now_us`. Writes its id to `out_id` and whether it
// was admitted (1) or rejected by the byte cap (0) to `out_accepted`.
// Times must not decrease across calls on one queue.
//
// # Safety
// `queue` must be a live queue handle; `out_id` and `out_accepted` must
// be valid pointers.
enum BodesimStatus bodesim_bode_queue_enqueue(struct BodesimBodeQueue *queue,
                                              uint32_t size_bytes,
                                              uint64_t now_us,
                                              uint64_t *out_id,
                                              int32_t *out_accepted);

// Runs one delivery opportunity at `now_us`. Writes the served packet's
// id to `out_served` (`UINT64_MAX` when the queue was empty), the number
// of packets dropped as expired to `out_drop_count`, and the first
// `drop_capacity` of their ids to `drop_ids` in drop order.
//
// # Safety
// `queue` must be a live queue handle; `out_served` and `out_drop_count`
// must be valid pointers; `drop_ids` must be valid for `drop_capacity`
// writes or null when `drop_capacity` is 0.
enum BodesimStatus bodesim_bode_queue_dequeue(struct BodesimBodeQueue *queue,
                                              uint64_t now_us,
                                              uint64_t *out_served,
                                              uint64_t *drop_ids,
                                              size_t drop_capacity,
                                              size_t *out_drop_count);

// Packets currently queued, or 0 for a null handle.
//
// # Safety
// `queue` must be null or a live queue handle.
size_t bodesim_bode_queue_len(const struct BodesimBodeQueue *queue);

// # Safety
// `queue` must be null or come from [`bodesim_bode_queue_new`], and must
// not be used afterwards.
void bodesim_bode_queue_free(struct BodesimBodeQueue *queue);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BODESIM_H */
