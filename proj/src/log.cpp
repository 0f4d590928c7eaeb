#include "catrag/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace catrag::log {

namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;

void emit(Level at, std::string_view tag, std::string_view message) {
  if (at < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[catrag] " << tag << ": " << message << '\n';
}
}  // namespace

void set_level(Level level) noexcept { g_level.store(level); }
Level level() noexcept { return g_level.load(); }

void debug(std::string_view m) { emit(Level::Debug, "debug", m); }
void info(std::string_view m) { emit(Level::Info, "info", m); }
void warn(std::string_view m) { emit(Level::Warn, "warn", m); }
void error(std::string_view m) { emit(Level::Error, "error", m); }

}  // namespace catrag::log
