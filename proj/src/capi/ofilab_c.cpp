#include "ofilab/ofilab.h"

#include <exception>
#include <new>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ofilab/error.hpp"
#include "ofilab/factor.hpp"
#include "ofilab/features.hpp"
#include "ofilab/log.hpp"
#include "ofilab/pipeline.hpp"
#include "ofilab/regression.hpp"

struct ofilab_session {
  std::optional<ofilab::pipeline::RunConfig> config;
  int threads = -1;
  std::string error;
  std::string manifest;
  std::string config_text;
};

namespace {

thread_local std::string g_error;

std::string error_json(ofilab_status status, const std::string& field, const std::string& message) {
  return nlohmann::json{{"status", "error"}, {"code", ofilab_status_string(status)}, {"field", field}, {"message", message}}
      .dump();
}

// Runs fn, translating exceptions into status codes and an error report.
template <class Fn>
ofilab_status guarded(std::string& error_slot, Fn&& fn) {
  error_slot.clear();
  try {
    fn();
    return OFILAB_OK;
  } catch (const ofilab::Error& e) {
    const auto s = static_cast<ofilab_status>(static_cast<int>(e.code()));
    error_slot = error_json(s, e.field(), e.what());
    return s;
  } catch (const std::bad_alloc&) {
    error_slot = error_json(OFILAB_INTERNAL, "", "out of memory");
    return OFILAB_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    error_slot = error_json(OFILAB_IO, e.path1().string(), e.what());
    return OFILAB_IO;
  } catch (const std::exception& e) {
    error_slot = error_json(OFILAB_INTERNAL, "", e.what());
    return OFILAB_INTERNAL;
  }
}

ofilab::lob::BookSnapshot book_from(const int64_t* data, int levels) {
  ofilab::lob::BookSnapshot s;
  s.levels.resize(static_cast<std::size_t>(levels));
  for (int m = 0; m < levels; ++m) {
    auto& l = s.levels[static_cast<std::size_t>(m)];
    l.ask_price = data[4 * m];
    l.ask_size = data[4 * m + 1];
    l.bid_price = data[4 * m + 2];
    l.bid_size = data[4 * m + 3];
  }
  ofilab::lob::classify(s);
  return s;
}

}  // namespace

extern "C" {

const char* ofilab_version(void) { return "0.3.0"; }

const char* ofilab_status_string(ofilab_status status) {
  switch (status) {
    case OFILAB_OK: return "ok";
    case OFILAB_INVALID_ARGUMENT: return "invalid_argument";
    case OFILAB_IO: return "io";
    case OFILAB_PARSE: return "parse";
    case OFILAB_CONFIG: return "config";
    case OFILAB_NUMERIC: return "numeric";
    case OFILAB_INTERNAL: return "internal";
  }
  return "unknown";
}

ofilab_status ofilab_session_create(ofilab_session** out) {
  if (!out) return OFILAB_INVALID_ARGUMENT;
  *out = new (std::nothrow) ofilab_session();
  return *out ? OFILAB_OK : OFILAB_INTERNAL;
}

void ofilab_session_destroy(ofilab_session* session) { delete session; }

const char* ofilab_session_last_error(const ofilab_session* session) {
  return session ? session->error.c_str() : g_error.c_str();
}

ofilab_status ofilab_session_set_threads(ofilab_session* session, int threads) {
  if (!session) return OFILAB_INVALID_ARGUMENT;
  return guarded(session->error, [&] {
    if (threads < -1) ofilab::fail(ofilab::ErrorCode::config, "threads must be >= -1", "threads");
    session->threads = threads;
  });
}

ofilab_status ofilab_session_set_log_level(ofilab_session* session, const char* level) {
  if (!session || !level) return OFILAB_INVALID_ARGUMENT;
  return guarded(session->error, [&] { ofilab::log::set_level(ofilab::log::parse_level(level)); });
}

ofilab_status ofilab_session_load_config(ofilab_session* session, const char* path) {
  if (!session || !path) return OFILAB_INVALID_ARGUMENT;
  return guarded(session->error, [&] { session->config = ofilab::pipeline::load_config(path); });
}

ofilab_status ofilab_session_load_config_json(ofilab_session* session, const char* json_text) {
  if (!session || !json_text) return OFILAB_INVALID_ARGUMENT;
  return guarded(session->error, [&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      ofilab::fail(ofilab::ErrorCode::parse, std::string("config is not valid JSON: ") + e.what(), "config");
    }
    session->config = ofilab::pipeline::parse_config(j);
  });
}

const char* ofilab_session_config(const ofilab_session* session) {
  if (!session || !session->config) return "";
  auto* s = const_cast<ofilab_session*>(session);
  s->config_text = ofilab::pipeline::to_json(*session->config).dump(2);
  return s->config_text.c_str();
}

ofilab_status ofilab_session_run(ofilab_session* session, const char* subcommand, const char* out_dir) {
  if (!session || !subcommand || !out_dir) return OFILAB_INVALID_ARGUMENT;
  return guarded(session->error, [&] {
    if (!session->config) ofilab::fail(ofilab::ErrorCode::config, "no configuration loaded", "config");
    auto cfg = *session->config;
    if (session->threads >= 0) cfg.threads = session->threads;
    const auto stage = ofilab::pipeline::parse_stage(subcommand);
    session->manifest.clear();
    const auto result = ofilab::pipeline::run(cfg, stage, out_dir);
    session->manifest = result.manifest.dump(2);
  });
}

const char* ofilab_session_manifest(const ofilab_session* session) { return session ? session->manifest.c_str() : ""; }

ofilab_status ofilab_level_ofi(const int64_t* prev_book, const int64_t* cur_book, int levels, int level, int64_t* out) {
  if (!prev_book || !cur_book || !out) return OFILAB_INVALID_ARGUMENT;
  return guarded(g_error, [&] {
    if (levels < 1 || level < 1 || level > levels) {
      ofilab::fail(ofilab::ErrorCode::invalid_argument, "level must lie in [1, levels]", "level");
    }
    *out = ofilab::features::transition_ofi(book_from(prev_book, levels), book_from(cur_book, levels), level);
  });
}

ofilab_status ofilab_lasso_fit(const double* x, const double* y, size_t n, size_t p, double lambda, double* beta_out,
                               double* intercept_out) {
  if (!x || !y || !beta_out || !intercept_out) return OFILAB_INVALID_ARGUMENT;
  return guarded(g_error, [&] {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd xm = Eigen::Map<const RowMajor>(x, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    const Eigen::VectorXd ym = Eigen::Map<const Eigen::VectorXd>(y, static_cast<Eigen::Index>(n));
    const auto fit = ofilab::regression::lasso_fit(xm, ym, lambda);
    for (size_t j = 0; j < p; ++j) beta_out[j] = fit.beta(static_cast<Eigen::Index>(j));
    *intercept_out = fit.intercept;
  });
}

ofilab_status ofilab_pca_first(const double* x, size_t n, size_t p, double* w_out, double* ratio_out) {
  if (!x || !w_out || !ratio_out) return OFILAB_INVALID_ARGUMENT;
  return guarded(g_error, [&] {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd xm = Eigen::Map<const RowMajor>(x, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    const auto pca = ofilab::factor::fit_pca(xm);
    for (size_t j = 0; j < p; ++j) w_out[j] = pca.vectors(static_cast<Eigen::Index>(j), 0);
    *ratio_out = pca.ratios(0);
  });
}

}  // extern "C"
