#include "schema.hpp"

#include <map>
#include <string_view>

#include "schema_data.hpp"
#include "wproj/error.hpp"

namespace wproj::cli {

namespace {

const std::map<std::string, json>& registry() {
  static const std::map<std::string, json> schemas = [] {
    std::map<std::string, json> out;
    for (const auto& [name, text] : embedded_schemas()) out.emplace(std::string(name), json::parse(text));
    return out;
  }();
  return schemas;
}

std::string type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool has_type(const json& v, const std::string& type) {
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    // 1e6 style integers written as floats are accepted when exact.
    return v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()));
  }
  return type_name(v) == type;
}

class Validator {
 public:
  explicit Validator(const json& definitions) : definitions_(definitions) {}

  json check(const json& value, const json& schema, const std::string& path) const {
    const json& s = resolve(schema);
    if (s.contains("type")) {
      bool ok = false;
      if (s["type"].is_array()) {
        for (const auto& t : s["type"]) ok = ok || has_type(value, t.get<std::string>());
      } else {
        ok = has_type(value, s["type"].get<std::string>());
      }
      if (!ok) fail(path, "expected " + s["type"].dump() + ", found " + type_name(value));
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == value;
      if (!found) fail(path, "must be one of " + s["enum"].dump());
    }
    if (value.is_number()) {
      const double v = value.get<double>();
      if (s.contains("minimum") && v < s["minimum"].get<double>()) fail(path, "must be >= " + s["minimum"].dump());
      if (s.contains("maximum") && v > s["maximum"].get<double>()) fail(path, "must be <= " + s["maximum"].dump());
      if (s.contains("exclusiveMinimum") && !(v > s["exclusiveMinimum"].get<double>())) {
        fail(path, "must be > " + s["exclusiveMinimum"].dump());
      }
    }
    if (value.is_string() && s.contains("minLength") &&
        value.get<std::string>().size() < s["minLength"].get<std::size_t>()) {
      fail(path, "must have at least " + s["minLength"].dump() + " characters");
    }
    if (value.is_array()) {
      if (s.contains("minItems") && value.size() < s["minItems"].get<std::size_t>()) {
        fail(path, "must have at least " + s["minItems"].dump() + " items");
      }
      if (s.contains("maxItems") && value.size() > s["maxItems"].get<std::size_t>()) {
        fail(path, "must have at most " + s["maxItems"].dump() + " items");
      }
      if (s.contains("items")) {
        json out = json::array();
        for (std::size_t k = 0; k < value.size(); ++k) {
          out.push_back(check(value[k], s["items"], path + "/" + std::to_string(k)));
        }
        return out;
      }
    }
    if (value.is_object()) return check_object(value, s, path);
    return value;
  }

 private:
  const json& resolve(const json& schema) const {
    if (!schema.contains("$ref")) return schema;
    const std::string ref = schema["$ref"].get<std::string>();
    constexpr std::string_view prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0 || !definitions_.contains(ref.substr(prefix.size()))) {
      throw Error(ErrorCode::Config, "schema reference '" + ref + "' cannot be resolved");
    }
    return resolve(definitions_[ref.substr(prefix.size())]);
  }

  json check_object(const json& value, const json& s, const std::string& path) const {
    json out = json::object();
    const json empty = json::object();
    const json& props = s.contains("properties") ? s["properties"] : empty;
    for (const auto& [key, v] : value.items()) {
      const std::string child = path + "/" + key;
      if (props.contains(key)) {
        out[key] = check(v, props[key], child);
      } else if (s.contains("additionalProperties") && s["additionalProperties"].is_object()) {
        out[key] = check(v, s["additionalProperties"], child);
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        fail(child, "unknown key");
      } else {
        out[key] = v;
      }
    }
    if (s.contains("required")) {
      for (const auto& r : s["required"]) {
        if (!value.contains(r.get<std::string>())) fail(path + "/" + r.get<std::string>(), "required key is missing");
      }
    }
    for (const auto& [key, sub] : props.items()) {
      if (out.contains(key)) continue;
      const json& rs = resolve(sub);
      if (rs.contains("default")) out[key] = check(rs["default"], rs, path + "/" + key);
    }
    return out;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& message) {
    throw Error(ErrorCode::Config, (path.empty() ? "/" : path) + ": " + message);
  }

  const json& definitions_;
};

}  // namespace

const json& schema(const std::string& name) {
  const auto& all = registry();
  const auto it = all.find(name);
  if (it == all.end()) throw Error(ErrorCode::Config, "no schema named '" + name + "'");
  return it->second;
}

json validate(const json& value, const std::string& schema_name) {
  const json& common = schema("common");
  return Validator(common["definitions"]).check(value, schema(schema_name), "");
}

}  // namespace wproj::cli
