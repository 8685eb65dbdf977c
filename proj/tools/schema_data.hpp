#pragma once

#include <span>
#include <string_view>
#include <utility>

namespace wproj::cli {

/// Schema files from tools/schemas, embedded at configure time. Names are
/// the file names without the final ".json".
std::span<const std::pair<std::string_view, std::string_view>> embedded_schemas();

}  // namespace wproj::cli
