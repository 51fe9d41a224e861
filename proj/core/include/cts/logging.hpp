#pragma once

namespace cts {

enum class LogLevel { trace, debug, info, warn, error, off };

/// Library diagnostics go to stderr through a single named logger.
void set_log_level(LogLevel level);

}  // namespace cts
