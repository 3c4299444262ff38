#pragma once

// Validator for the JSON-schema subset used by the recognizer's structured
// output: type, enum, properties, required, additionalProperties (boolean),
// items, minItems, maxItems, minimum, maximum.

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acsr/error.hpp"

namespace acsr::schema {

namespace detail {

inline bool is_integer(const nlohmann::json& v) {
  if (v.is_number_integer()) return true;
  if (v.is_number_float()) {
    const double d = v.get<double>();
    return std::isfinite(d) && std::floor(d) == d;
  }
  return false;
}

inline bool matches_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") return is_integer(v);
  throw ValidationError("schema: unsupported type '" + type + "'");
}

inline void validate_at(const nlohmann::json& schema, const nlohmann::json& v, const std::string& where,
                        std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = matches_type(v, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || matches_type(v, alt.get<std::string>());
    }
    if (!ok) {
      errors.push_back(where + ": expected type " + t.dump());
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& option : schema["enum"]) found = found || option == v;
    if (!found) errors.push_back(where + ": value " + v.dump() + " not in enum");
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (schema.contains("minimum") && d < schema["minimum"].get<double>()) {
      errors.push_back(where + ": " + v.dump() + " is below minimum " + schema["minimum"].dump());
    }
    if (schema.contains("maximum") && d > schema["maximum"].get<double>()) {
      errors.push_back(where + ": " + v.dump() + " is above maximum " + schema["maximum"].dump());
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
      errors.push_back(where + ": " + std::to_string(v.size()) + " items, fewer than minItems " +
                       schema["minItems"].dump());
    }
    if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>()) {
      errors.push_back(where + ": " + std::to_string(v.size()) + " items, more than maxItems " +
                       schema["maxItems"].dump());
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        validate_at(schema["items"], v[i], where + "[" + std::to_string(i) + "]", errors);
      }
    }
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!v.contains(key.get<std::string>())) {
          errors.push_back(where + ": missing required property '" + key.get<std::string>() + "'");
        }
      }
    }
    const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
    for (const auto& [key, value] : v.items()) {
      if (schema.contains("properties") && schema["properties"].contains(key)) {
        validate_at(schema["properties"][key], value, where + "." + key, errors);
      } else if (closed) {
        errors.push_back(where + ": unexpected property '" + key + "'");
      }
    }
  }
}

}  // namespace detail

// Returns one message per violation; empty means the instance is valid.
inline std::vector<std::string> validate(const nlohmann::json& schema, const nlohmann::json& instance) {
  std::vector<std::string> errors;
  detail::validate_at(schema, instance, "$", errors);
  return errors;
}

}  // namespace acsr::schema
