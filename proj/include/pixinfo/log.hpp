#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

namespace pixinfo {

enum class LogLevel { quiet = 0, error = 1, warn = 2, info = 3, debug = 4 };

/// stderr logger; verbosity comes from PIXINFO_LOG (quiet|error|warn|info|debug).
class Logger {
 public:
  explicit Logger(LogLevel level = LogLevel::warn) : level_(level) {}

  static Logger from_env() {
    const char* v = std::getenv("PIXINFO_LOG");
    if (!v) return Logger();
    const std::string_view s(v);
    if (s == "quiet") return Logger(LogLevel::quiet);
    if (s == "error") return Logger(LogLevel::error);
    if (s == "info") return Logger(LogLevel::info);
    if (s == "debug") return Logger(LogLevel::debug);
    return Logger();
  }

  void error(const std::string& m) const { emit(LogLevel::error, "error", m); }
  void warn(const std::string& m) const { emit(LogLevel::warn, "warn", m); }
  void info(const std::string& m) const { emit(LogLevel::info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::debug, "debug", m); }

 private:
  void emit(LogLevel at, const char* tag, const std::string& m) const {
    if (static_cast<int>(at) <= static_cast<int>(level_)) std::fprintf(stderr, "[pixinfo %s] %s\n", tag, m.c_str());
  }

  LogLevel level_;
};

}  // namespace pixinfo
