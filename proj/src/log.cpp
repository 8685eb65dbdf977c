#include "wproj/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace wproj {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

std::atomic<bool> g_verbose{false};

void default_sink(LogLevel level, const std::string& message) {
  if (level == LogLevel::Warning) {
    std::cerr << "warning: " << message << '\n';
  } else if (g_verbose.load()) {
    std::cerr << message << '\n';
  }
}

LogSink& current_sink() {
  static LogSink sink = default_sink;
  return sink;
}

void emit(LogLevel level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex());
  LogSink previous = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : LogSink(default_sink);
  return previous;
}

void set_verbose(bool verbose) { g_verbose.store(verbose); }

void log_debug(const std::string& message) { emit(LogLevel::Debug, message); }
void log_info(const std::string& message) { emit(LogLevel::Info, message); }
void log_warning(const std::string& message) { emit(LogLevel::Warning, message); }

}  // namespace wproj
