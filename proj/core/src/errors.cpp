#include "betae/errors.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>

namespace betae {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* raw = std::getenv("BETAE_LOG");
    if (raw == nullptr) return LogLevel::kWarn;
    if (std::strcmp(raw, "quiet") == 0 || std::strcmp(raw, "0") == 0)
      return LogLevel::kQuiet;
    if (std::strcmp(raw, "info") == 0 || std::strcmp(raw, "2") == 0)
      return LogLevel::kInfo;
    if (std::strcmp(raw, "debug") == 0 || std::strcmp(raw, "3") == 0)
      return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

namespace {
void emit(LogLevel at_least, const char* tag, const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(at_least)) {
    std::cerr << tag << message << '\n';
  }
}
}  // namespace

void log_warn(const std::string& message) {
  emit(LogLevel::kWarn, "[warn] ", message);
}
void log_info(const std::string& message) {
  emit(LogLevel::kInfo, "[info] ", message);
}
void log_debug(const std::string& message) {
  emit(LogLevel::kDebug, "[debug] ", message);
}

}  // namespace betae
