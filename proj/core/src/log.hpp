#pragma once

#include <spdlog/spdlog.h>

#include <memory>

namespace cts::detail {

spdlog::logger& logger();

}  // namespace cts::detail
