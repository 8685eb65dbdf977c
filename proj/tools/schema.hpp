#pragma once

#include <string>

#include <json.hpp>

namespace wproj::cli {

using nlohmann::json;

/// Published schema for a config ("project", "synth", ...) or an output
/// file ("weights.output", ...). Throws Config for an unknown name.
const json& schema(const std::string& name);

/// Checks `value` against the schema subset used here (type, enum,
/// properties, required, additionalProperties, items, minItems, minLength,
/// minimum, maximum, exclusiveMinimum, local $ref) and fills in defaults.
/// Throws Config naming the offending JSON path.
json validate(const json& value, const std::string& schema_name);

}  // namespace wproj::cli
