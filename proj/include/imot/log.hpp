#pragma once

#include <spdlog/spdlog.h>

namespace imot {

// Reads IMOT_LOG={error,info,debug} once; defaults to info.
void init_logging();

}  // namespace imot
