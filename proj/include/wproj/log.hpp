#pragma once

#include <functional>
#include <string>

namespace wproj {

enum class LogLevel { Debug, Info, Warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink (default: warnings to stderr). Returns
/// the previous sink so tests can restore it.
LogSink set_log_sink(LogSink sink);
void set_verbose(bool verbose);

void log_debug(const std::string& message);
void log_info(const std::string& message);
void log_warning(const std::string& message);

}  // namespace wproj
