// Copyright 2026 The adrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Internal JSON helpers shared by the record, transition and config codecs.

#include <cmath>
#include <string>

#include "adrl/types.hpp"
#include "json.hpp"

namespace adrl::detail {

using nlohmann::json;

[[noreturn]] inline void field_error(std::size_t line, const std::string& field,
                                     const std::string& what) {
  std::string msg;
  if (line > 0) msg = "line " + std::to_string(line) + ": ";
  msg += "field '" + field + "': " + what;
  throw DataError(msg);
}

inline const json& require(const json& j, const char* field, std::size_t line) {
  if (!j.is_object()) field_error(line, field, "enclosing value is not an object");
  auto it = j.find(field);
  if (it == j.end()) field_error(line, field, "missing");
  return *it;
}

inline double get_real(const json& j, const char* field, std::size_t line) {
  const json& v = require(j, field, line);
  if (!v.is_number()) field_error(line, field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) field_error(line, field, "not finite");
  return x;
}

inline std::uint64_t get_uint(const json& j, const char* field, std::size_t line) {
  const json& v = require(j, field, line);
  if (!v.is_number_unsigned()) field_error(line, field, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::uint32_t get_u32(const json& j, const char* field, std::size_t line) {
  const std::uint64_t v = get_uint(j, field, line);
  if (v > 0xFFFFFFFFULL) field_error(line, field, "out of range");
  return static_cast<std::uint32_t>(v);
}

json context_to_json(const SearchContext& c);
SearchContext context_from_json(const json& j, std::size_t line);

json action_to_json(const ActionVector& a);
ActionVector action_from_json(const json& j, std::size_t line, const char* field = "action");

}  // namespace adrl::detail
