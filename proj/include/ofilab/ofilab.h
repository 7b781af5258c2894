/* C interface to the ofilab toolkit. All strings are UTF-8, NUL-terminated.
   Returned const char* pointers stay valid until the next call on the same
   session (or, for session-less calls, the next call on the same thread). */
#ifndef OFILAB_OFILAB_H
#define OFILAB_OFILAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(OFILAB_BUILDING_LIBRARY)
#define OFILAB_API __attribute__((visibility("default")))
#else
#define OFILAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ofilab_status {
  OFILAB_OK = 0,
  OFILAB_INVALID_ARGUMENT = 1,
  OFILAB_IO = 2,
  OFILAB_PARSE = 3,
  OFILAB_CONFIG = 4,
  OFILAB_NUMERIC = 5,
  OFILAB_INTERNAL = 99
} ofilab_status;

typedef struct ofilab_session ofilab_session;

OFILAB_API const char* ofilab_version(void);
OFILAB_API const char* ofilab_status_string(ofilab_status status);

OFILAB_API ofilab_status ofilab_session_create(ofilab_session** out);
OFILAB_API void ofilab_session_destroy(ofilab_session* session);

/* JSON object {"status","code","field","message"} of the last failure, or "" */
OFILAB_API const char* ofilab_session_last_error(const ofilab_session* session);

/* Overrides the config thread budget; 0 = all hardware threads, -1 = use config. */
OFILAB_API ofilab_status ofilab_session_set_threads(ofilab_session* session, int threads);
/* error | warn | info | debug; process-wide. */
OFILAB_API ofilab_status ofilab_session_set_log_level(ofilab_session* session, const char* level);

OFILAB_API ofilab_status ofilab_session_load_config(ofilab_session* session, const char* path);
OFILAB_API ofilab_status ofilab_session_load_config_json(ofilab_session* session, const char* json_text);
/* Effective configuration (defaults filled in) as JSON. */
OFILAB_API const char* ofilab_session_config(const ofilab_session* session);

/* subcommand: synth | features | contemporaneous | forward | backtest | network | all */
OFILAB_API ofilab_status ofilab_session_run(ofilab_session* session, const char* subcommand, const char* out_dir);
/* Manifest JSON of the last successful run, or "". */
OFILAB_API const char* ofilab_session_manifest(const ofilab_session* session);

/* Books are 4*levels integers per snapshot in LOBSTER column order
   (ask price, ask size, bid price, bid size for each level). */
OFILAB_API ofilab_status ofilab_level_ofi(const int64_t* prev_book, const int64_t* cur_book, int levels, int level,
                                          int64_t* out);

/* x is row-major n*p. lambda in unnormalized-loss units. beta_out holds p values. */
OFILAB_API ofilab_status ofilab_lasso_fit(const double* x, const double* y, size_t n, size_t p, double lambda,
                                          double* beta_out, double* intercept_out);

/* First principal vector (sign-normalized) and its explained-variance ratio. */
OFILAB_API ofilab_status ofilab_pca_first(const double* x, size_t n, size_t p, double* w_out, double* ratio_out);

#ifdef __cplusplus
}
#endif

#endif
