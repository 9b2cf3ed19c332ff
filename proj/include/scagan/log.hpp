#pragma once

#include <string_view>

namespace scagan {

enum class LogLevel { Quiet = 0, Warning = 1, Info = 2 };

void set_log_level(LogLevel level) noexcept;
LogLevel log_level() noexcept;
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace scagan
