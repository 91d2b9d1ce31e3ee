#pragma once

#include <string>

namespace siv::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2 };

void set_level(Level level);
Level level();

void warn(const std::string& message);
void info(const std::string& message);

}  // namespace siv::log
