#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace betae {

// Malformed input data (vocabulary files, triple files, dataset files,
// checkpoints). Carries enough context to print "file:line: message".
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string file, std::size_t line, const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line) {}

  explicit FormatError(const std::string& message)
      : std::runtime_error(message), line_(0) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_ = 0;
};

// Syntax error in the query DSL; position is a 0-based byte offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : std::runtime_error("at offset " + std::to_string(position) + ": " +
                           message),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_ = 0;
};

// Training produced a non-finite loss twice in a row.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Log verbosity, controlled by the BETAE_LOG environment variable:
// "quiet"/"0", "warn"/"1" (default), "info"/"2", "debug"/"3".
enum class LogLevel : int { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level();
void log_warn(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace betae
