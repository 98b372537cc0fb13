#pragma once

#include <functional>
#include <string>

namespace threshold {

/// Messages go to std::clog unless a sink is installed.
using LogSink = std::function<void(const std::string&)>;

void log_warning(const std::string& message);
void log_info(const std::string& message);
/// Install a sink for warnings and info messages; an empty sink restores stderr.
/// Returns the previously installed sink.
LogSink set_log_sink(LogSink sink);

}  // namespace threshold
