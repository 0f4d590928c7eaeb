#pragma once

#include <string_view>

namespace catrag::log {

enum class Level { Debug, Info, Warn, Error, Off };

void set_level(Level level) noexcept;
Level level() noexcept;

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace catrag::log
