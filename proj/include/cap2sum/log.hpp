// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace cap2sum {

enum class LogLevel { quiet, warning, info };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace cap2sum
