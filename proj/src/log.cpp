#include "scagan/log.hpp"

#include <atomic>
#include <iostream>

namespace scagan {
namespace {
std::atomic<LogLevel> g_level{LogLevel::Warning};
}

void set_log_level(LogLevel level) noexcept { g_level.store(level); }
LogLevel log_level() noexcept { return g_level.load(); }

void log_warning(std::string_view message) {
  if (g_level.load() >= LogLevel::Warning) std::cerr << "warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_level.load() >= LogLevel::Info) std::cerr << message << '\n';
}

}  // namespace scagan
