/* Copyright 2026 The xplan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace xplan {

/// One data quantum at runtime. Records and key groups are nested value
/// lists; numeric vectors get a dedicated representation so ML-style UDFs
/// stay cheap.
struct Value {
  using List = std::vector<Value>;
  using Variant =
      std::variant<std::monostate, std::int64_t, double, std::string, std::vector<double>, List>;

  Variant v;

  Value() = default;
  Value(std::int64_t i) : v(i) {}            // NOLINT(google-explicit-constructor)
  Value(double d) : v(d) {}                  // NOLINT(google-explicit-constructor)
  Value(std::string s) : v(std::move(s)) {}  // NOLINT(google-explicit-constructor)
  Value(std::vector<double> vec) : v(std::move(vec)) {}  // NOLINT
  Value(List fields) : v(std::move(fields)) {}           // NOLINT

  static Value record(List fields) { return Value(std::move(fields)); }

  bool is_int() const { return std::holds_alternative<std::int64_t>(v); }
  bool is_real() const { return std::holds_alternative<double>(v); }
  bool is_text() const { return std::holds_alternative<std::string>(v); }
  bool is_vec() const { return std::holds_alternative<std::vector<double>>(v); }
  bool is_list() const { return std::holds_alternative<List>(v); }

  std::int64_t as_int() const { return std::get<std::int64_t>(v); }
  double as_real() const { return std::get<double>(v); }
  const std::string& as_text() const { return std::get<std::string>(v); }
  const std::vector<double>& as_vec() const { return std::get<std::vector<double>>(v); }
  const List& as_list() const { return std::get<List>(v); }
  List& as_list() { return std::get<List>(v); }

  /// Numeric view: int and real both convert.
  double as_number() const { return is_int() ? static_cast<double>(as_int()) : as_real(); }

  const Value& field(std::size_t i) const { return as_list().at(i); }

  friend bool operator==(const Value& a, const Value& b) { return a.v == b.v; }
};

/// Total order over values (by alternative index, then content); used for
/// canonical key-sorted operator output.
int compare(const Value& a, const Value& b);
inline bool value_less(const Value& a, const Value& b) { return compare(a, b) < 0; }

std::size_t hash_value(const Value& v);

/// Canonical printable form; also the on-disk form for text sinks.
std::string to_string(const Value& v);

/// Parses what to_string produced for flat values (int/real/text); used by
/// file channels. Lists/vectors round-trip via their bracketed form.
Value parse_value(const std::string& s);

}  // namespace xplan
