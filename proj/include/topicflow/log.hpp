#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace topicflow::log {

using Sink = std::function<void(const std::string& level, const std::string& message)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](const std::string& level, const std::string& message) {
    std::cerr << "[" << level << "] " << message << "\n";
  };
  return s;
}
inline std::atomic<std::size_t>& warning_count() {
  static std::atomic<std::size_t> n{0};
  return n;
}
}  // namespace detail

// Replaces the process-wide sink; returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void write(const std::string& level, const std::string& message) {
  std::lock_guard lock(detail::mutex());
  if (detail::sink()) detail::sink()(level, message);
}

inline void warn(const std::string& message) {
  ++detail::warning_count();
  write("warn", message);
}

inline void info(const std::string& message) { write("info", message); }

inline std::size_t warnings() { return detail::warning_count().load(); }

// Captures messages for the lifetime of the guard.
class ScopedCapture {
 public:
  ScopedCapture() {
    previous_ = set_sink([this](const std::string& level, const std::string& message) {
      lines_.push_back(level + ": " + message);
    });
  }
  ~ScopedCapture() { set_sink(std::move(previous_)); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  const std::vector<std::string>& lines() const { return lines_; }
  bool contains(const std::string& needle) const {
    for (const auto& l : lines_)
      if (l.find(needle) != std::string::npos) return true;
    return false;
  }

 private:
  Sink previous_;
  std::vector<std::string> lines_;
};

}  // namespace topicflow::log
