#pragma once

#include "spdregime/error.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

namespace spdregime::detail {

using Json = nlohmann::ordered_json;

inline Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
}

inline void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

inline void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(what + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_as(const Json& j, const std::string& key, const std::string& what) {
  const Json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(what + ": key '" + key + "' must be a boolean");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned())
      throw ConfigError(what + ": key '" + key + "' must be a non-negative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(what + ": key '" + key + "' must be an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(what + ": key '" + key + "' must be a number");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(what + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
void read_if(const Json& j, const std::string& key, T& out, const std::string& what) {
  if (j.contains(key)) out = get_as<T>(j, key, what);
}

}  // namespace spdregime::detail
