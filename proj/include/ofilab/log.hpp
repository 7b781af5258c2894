#pragma once

#include <string>
#include <string_view>

namespace ofilab::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

void set_level(Level level);
Level level();
/// Accepts error|warn|info|debug; throws Error(config) otherwise.
Level parse_level(std::string_view text);

void write(Level level, std::string_view message);

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace ofilab::log
