#include "midmile/log.hpp"

#include <cstdlib>
#include <string>

namespace midmile {

void init_logging() {
  const char* env = std::getenv("MIDMILE_LOG");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (env != nullptr) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

}  // namespace midmile
