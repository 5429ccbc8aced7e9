#pragma once

#include <functional>
#include <string>

namespace toolsmith::log {

using Sink = std::function<void(const std::string& level, const std::string& message)>;

// Replaces the process-wide sink; returns the previous one. Default writes to stderr.
Sink set_sink(Sink sink);

void warn(const std::string& message);
void info(const std::string& message);

}  // namespace toolsmith::log
