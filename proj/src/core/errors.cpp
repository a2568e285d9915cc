#include "rlsf/core/errors.hpp"

#include <iostream>
#include <mutex>

namespace rlsf {
namespace {

std::mutex g_log_mutex;
LogLevel g_level = LogLevel::warn;
LogSink g_sink;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
  }
  return "?";
}

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_log_mutex);
  g_sink = std::move(sink);
}

void set_log_level(LogLevel level) {
  std::lock_guard lock(g_log_mutex);
  g_level = level;
}

LogLevel log_level() {
  std::lock_guard lock(g_log_mutex);
  return g_level;
}

void log(LogLevel level, std::string_view message) {
  std::lock_guard lock(g_log_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  if (level < g_level) return;
  std::clog << "[rlsf " << level_name(level) << "] " << message << '\n';
}

}  // namespace rlsf
