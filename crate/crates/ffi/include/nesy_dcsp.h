#ifndef NESY_DCSP_H
#define NESY_DCSP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Built-in knowledge bases.
typedef enum NdBuiltin {
  ND_BUILTIN_ADD = 0,
  ND_BUILTIN_MUL = 1,
  ND_BUILTIN_XOR = 2,
  ND_BUILTIN_MOD_ADD = 3,
} NdBuiltin;

// Result codes.
typedef enum NdStatus {
  ND_STATUS_OK = 0,
  ND_STATUS_NULL_POINTER = 1,
  ND_STATUS_INVALID_ARGUMENT = 2,
  // Arity or concept-range violation.
  ND_STATUS_DOMAIN = 3,
  // An enumeration cap fired; results are partial.
  ND_STATUS_CAP_EXCEEDED = 4,
  ND_STATUS_NO_SOLUTION = 5,
  // Malformed task file or table.
  ND_STATUS_TASK_FILE = 6,
  ND_STATUS_IO = 7,
  // The output buffer or index is out of range.
  ND_STATUS_OUT_OF_RANGE = 8,
  ND_STATUS_INTERNAL = 99,
} NdStatus;

// Enumerated solution space of a derived CSP.
typedef struct NdSpace NdSpace;

// A knowledge base with its candidate pool and sampling distribution.
typedef struct NdTask NdTask;

// Task-level learnability verdict.
typedef struct NdReport {
  bool learnable;
  size_t d;
  size_t concepts;
  double error_bound;
  size_t num_solutions;
} NdReport;

// Outcome of one seeded sampling + ERM trial.
typedef struct NdTrial {
  size_t num_solutions;
  // NaN when the sampled problem had no solution.
  double concept_error;
  double nesy_error;
  bool covered;
  bool complete;
} NdTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a task from a built-in knowledge base with a uniform distribution
// over its full candidate pool. `k` is only read for `ModAdd`; `concepts` and
// `digits` are ignored for `Xor`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NdStatus nd_task_new_builtin(enum NdBuiltin builtin,
                                  uint32_t k,
                                  size_t concepts,
                                  size_t digits,
                                  struct NdTask **out);

// Creates a task from task-file TOML text (NUL-terminated UTF-8).
//
// # Safety
// `toml` must be a valid C string and `out` writable storage for one handle.
enum NdStatus nd_task_from_toml(const char *toml, struct NdTask **out);

// Releases a task. Null is ignored.
//
// # Safety
// `task` must be null or a handle from this library that was not yet freed.
void nd_task_free(struct NdTask *task);

// Overrides the solver settings used by later calls on this task.
//
// # Safety
// `task` must be a live handle.
enum NdStatus nd_task_set_options(struct NdTask *task, bool injective, size_t solution_cap);

// Evaluates the knowledge base on `len` concepts.
//
// # Safety
// `task` must be a live handle, `z` must point to `len` readable values and
// `out` to one writable label.
enum NdStatus nd_task_forward(const struct NdTask *task,
                              const uint32_t *z,
                              size_t len,
                              int64_t *out);

// Candidate-pool size `|B|`.
//
// # Safety
// `task` must be a live handle and `out` writable.
enum NdStatus nd_task_pool_size(const struct NdTask *task, size_t *out);

// Enumerates the task-level derived CSP.
//
// # Safety
// `task` must be a live handle and `out` writable storage for one handle.
enum NdStatus nd_analyze(const struct NdTask *task, struct NdSpace **out);

// Enumerates the merged CSP of `count` tasks over the same concepts, using
// the first task's solver settings.
//
// # Safety
// `tasks` must point to `count` live handles and `out` to writable storage.
enum NdStatus nd_ensemble_analyze(const struct NdTask *const *tasks,
                                  size_t count,
                                  struct NdSpace **out);

// Releases a space. Null is ignored.
//
// # Safety
// `space` must be null or a handle from this library that was not yet freed.
void nd_space_free(struct NdSpace *space);

// Number of enumerated solutions (at most the cap when incomplete).
//
// # Safety
// `space` must be a live handle or null.
size_t nd_space_num_solutions(const struct NdSpace *space);

// Whether enumeration finished below the cap.
//
// # Safety
// `space` must be a live handle or null.
bool nd_space_is_complete(const struct NdSpace *space);

// Disagreement `d`: variables not fixed across all solutions.
//
// # Safety
// `space` must be a live handle and `out` writable.
enum NdStatus nd_space_disagreement(const struct NdSpace *space, size_t *out);

// Copies solution `i` into `buf` (capacity `len`, which must be at least `L`).
//
// # Safety
// `space` must be a live handle and `buf` must point to `len` writable values.
enum NdStatus nd_space_solution(const struct NdSpace *space, size_t i, uint32_t *buf, size_t len);

// Learnability verdict; fails with `CapExceeded` or `NoSolution` when none applies.
//
// # Safety
// `space` must be a live handle and `out` writable.
enum NdStatus nd_report(const struct NdSpace *space, struct NdReport *out);

// JSON summary of the space; listing at most `list_limit` solutions. Free
// the result with [`nd_string_free`].
//
// # Safety
// `space` must be a live handle and `out` writable.
enum NdStatus nd_space_to_json(const struct NdSpace *space, size_t list_limit, char **out);

// `(1/kappa) ln(|B|/epsilon)` for the task's distribution.
//
// # Safety
// `task` must be a live handle and `out` writable.
enum NdStatus nd_sample_complexity_bound(const struct NdTask *task, double epsilon, double *out);

// Draws `samples` labelled sequences with `seed` and picks a consistent
// solution uniformly at random.
//
// # Safety
// `task` must be a live handle and `out` writable.
enum NdStatus nd_erm_trial(const struct NdTask *task,
                           size_t samples,
                           uint64_t seed,
                           struct NdTrial *out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library that was not yet freed.
void nd_string_free(char *s);

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call into the library on the same thread.
const char *nd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NESY_DCSP_H */
