#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <utility>

namespace avq {

// Diagnostics go to stderr by default; tests and embedders may redirect.
inline std::function<void(const std::string&)>& log_sink() {
  static std::function<void(const std::string&)> sink =
      [](const std::string& msg) { std::fprintf(stderr, "avq: %s\n", msg.c_str()); };
  return sink;
}

inline void set_log_sink(std::function<void(const std::string&)> sink) {
  log_sink() = std::move(sink);
}

inline void log_message(const std::string& msg) {
  if (log_sink()) log_sink()(msg);
}

}  // namespace avq
