#pragma once

#include <spdlog/spdlog.h>

namespace midmile {

// Reads MIDMILE_LOG (trace|debug|info|warn|error|off); default warn.
void init_logging();

}  // namespace midmile
