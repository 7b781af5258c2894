#include "ofilab/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "ofilab/error.hpp"

namespace ofilab::log {

namespace {
std::atomic<int> g_level{static_cast<int>(Level::warn)};
std::mutex g_mu;
const char* names[] = {"error", "warn", "info", "debug"};
}  // namespace

void set_level(Level level) { g_level = static_cast<int>(level); }
Level level() { return static_cast<Level>(g_level.load()); }

Level parse_level(std::string_view text) {
  for (int i = 0; i < 4; ++i)
    if (text == names[i]) return static_cast<Level>(i);
  fail(ErrorCode::config, "unknown log level '" + std::string(text) + "' (error|warn|info|debug)", "log_level");
}

void write(Level lvl, std::string_view message) {
  if (static_cast<int>(lvl) > g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mu);
  std::fprintf(stderr, "[ofilab %s] %.*s\n", names[static_cast<int>(lvl)], static_cast<int>(message.size()),
               message.data());
}

}  // namespace ofilab::log
