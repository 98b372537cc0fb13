#include "threshold/log.hpp"

#include <iostream>
#include <mutex>

namespace threshold {

namespace {

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

LogSink& current_sink() {
  static LogSink sink;
  return sink;
}

void emit(const std::string& line) {
  std::lock_guard lock(log_mutex());
  if (current_sink()) {
    current_sink()(line);
  } else {
    std::clog << line << '\n';
  }
}

}  // namespace

void log_warning(const std::string& message) { emit("warning: " + message); }
void log_info(const std::string& message) { emit(message); }

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(log_mutex());
  auto previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

}  // namespace threshold
