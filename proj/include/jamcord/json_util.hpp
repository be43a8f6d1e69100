#pragma once

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "jamcord/errors.hpp"

namespace jamcord::json_util {

using nlohmann::json;

inline void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw InvalidInput(std::string(what) + ": expected a JSON object");
}

/// Rejects any key not in `allowed`.
inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view what) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || (a == key);
    if (!known) throw InvalidInput(std::string(what) + ": unknown field '" + key + "'");
  }
}

inline const json& field(const json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(std::string(what) + ": missing field '" + key + "'");
  return *it;
}

inline double number(const json& j, const char* key, std::string_view what) {
  const auto& v = field(j, key, what);
  if (!v.is_number()) throw InvalidInput(std::string(what) + "." + key + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw InvalidInput(std::string(what) + "." + key + ": not finite");
  return d;
}

inline double number_or(const json& j, const char* key, double fallback, std::string_view what) {
  return j.contains(key) ? number(j, key, what) : fallback;
}

inline long long integer(const json& j, const char* key, std::string_view what) {
  const auto& v = field(j, key, what);
  if (!v.is_number_integer()) throw InvalidInput(std::string(what) + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline bool boolean(const json& j, const char* key, std::string_view what) {
  const auto& v = field(j, key, what);
  if (!v.is_boolean()) throw InvalidInput(std::string(what) + "." + key + ": expected a boolean");
  return v.get<bool>();
}

inline std::string string(const json& j, const char* key, std::string_view what) {
  const auto& v = field(j, key, what);
  if (!v.is_string()) throw InvalidInput(std::string(what) + "." + key + ": expected a string");
  return v.get<std::string>();
}

/// Parse failures and unreadable files both surface as InvalidInput; callers
/// that need to tell them apart check the stream themselves.
inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void save_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace jamcord::json_util
