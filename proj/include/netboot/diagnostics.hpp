#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace netboot {

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {

struct WarningSink {
  std::mutex mutex;
  WarningHandler handler = [](const std::string& message) {
    std::cerr << "netboot: warning: " << message << '\n';
  };
};

inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace detail

/// Replace the process-wide warning handler. Pass an empty function to silence warnings.
inline void set_warning_handler(WarningHandler handler) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  sink.handler = std::move(handler);
}

inline void warn(const std::string& message) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mutex);
  if (sink.handler) sink.handler(message);
}

}  // namespace netboot
