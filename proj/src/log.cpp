#include "toolsmith/log.hpp"

#include <iostream>
#include <mutex>

namespace toolsmith::log {
namespace {

std::mutex g_mutex;

Sink& sink() {
  static Sink s = [](const std::string& level, const std::string& message) {
    std::cerr << "[" << level << "] " << message << '\n';
  };
  return s;
}

void emit(const char* level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (sink()) sink()(level, message);
}

}  // namespace

Sink set_sink(Sink s) {
  std::lock_guard lock(g_mutex);
  Sink previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

void warn(const std::string& message) { emit("warn", message); }
void info(const std::string& message) { emit("info", message); }

}  // namespace toolsmith::log
