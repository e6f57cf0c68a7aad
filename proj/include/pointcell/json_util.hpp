// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "pointcell/errors.hpp"

namespace pointcell::json_util {

/// Rejects keys outside `allowed`; `context` prefixes error messages.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
  if (!j.is_object()) throw ValidationError(context + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError(context + ": unknown key '" + key + "'");
  }
}

/// Reads `key` into `out` when present; type errors name the field.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + "." + key + ": " + e.what());
  }
}

}  // namespace pointcell::json_util
