#include "log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include "cts/logging.hpp"

namespace cts {

namespace detail {

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>(
        "cts", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *instance;
}

}  // namespace detail

void set_log_level(LogLevel level) {
  using spdlog::level::level_enum;
  static constexpr level_enum map[] = {
      level_enum::trace, level_enum::debug, level_enum::info,
      level_enum::warn,  level_enum::err,   level_enum::off};
  detail::logger().set_level(map[static_cast<int>(level)]);
}

}  // namespace cts
