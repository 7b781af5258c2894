// Command-line front end; talks to the toolkit only through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ofilab/ofilab.h"

namespace {

int report_error(ofilab_session* s, ofilab_status status) {
  std::string text = s ? ofilab_session_last_error(s) : "";
  if (text.empty()) {
    text = nlohmann::json{{"status", "error"}, {"code", ofilab_status_string(status)}, {"field", ""}, {"message", ""}}.dump();
  }
  std::fprintf(stderr, "%s\n", text.c_str());
  return static_cast<int>(status);
}

int usage_error(const std::string& field, const std::string& message) {
  std::fprintf(stderr, "%s\n",
               nlohmann::json{{"status", "error"}, {"code", "invalid_argument"}, {"field", field}, {"message", message}}
                   .dump()
                   .c_str());
  return OFILAB_INVALID_ARGUMENT;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ofilab: order-flow imbalance price-impact toolkit"};
  app.set_version_flag("--version", std::string(ofilab_version()));
  std::string config, out = "ofilab_out", log_level;
  int threads = -2;
  app.require_subcommand(1);
  for (const char* name : {"synth", "features", "contemporaneous", "forward", "backtest", "network", "all"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "thread budget, 0 = all hardware threads");
    sub->add_option("--log-level", log_level, "error | warn | info | debug");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage_error("arguments", e.what());
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  // Flags beat the environment, which beats the config file.
  if (threads == -2) {
    if (const char* env = std::getenv("OFI_LAB_THREADS"); env && *env) {
      try {
        std::size_t used = 0;
        threads = std::stoi(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        return usage_error("OFI_LAB_THREADS", std::string("not an integer: ") + env);
      }
    } else {
      threads = -1;
    }
  }
  if (threads < -1) return usage_error("threads", "threads must be >= 0");

  ofilab_session* s = nullptr;
  if (auto st = ofilab_session_create(&s); st != OFILAB_OK) return report_error(nullptr, st);
  auto finish = [&](int code) {
    ofilab_session_destroy(s);
    return code;
  };
  ofilab_status st = OFILAB_OK;
  if (!log_level.empty() && (st = ofilab_session_set_log_level(s, log_level.c_str())) != OFILAB_OK) {
    return finish(report_error(s, st));
  }
  if ((st = ofilab_session_load_config(s, config.c_str())) != OFILAB_OK) return finish(report_error(s, st));
  if ((st = ofilab_session_set_threads(s, threads)) != OFILAB_OK) return finish(report_error(s, st));
  if ((st = ofilab_session_run(s, subcommand.c_str(), out.c_str())) != OFILAB_OK) return finish(report_error(s, st));

  const auto manifest = nlohmann::json::parse(ofilab_session_manifest(s));
  std::printf("%s\n", nlohmann::json{{"status", "ok"},
                                     {"subcommand", subcommand},
                                     {"out", out},
                                     {"outputs", manifest["outputs"].size()}}
                          .dump()
                          .c_str());
  return finish(0);
}
