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
#include "xplan/value.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

namespace xplan {

int compare(const Value& a, const Value& b) {
  if (a.v.index() != b.v.index()) return a.v.index() < b.v.index() ? -1 : 1;
  switch (a.v.index()) {
    case 0:
      return 0;
    case 1: {
      auto x = a.as_int(), y = b.as_int();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case 2: {
      auto x = a.as_real(), y = b.as_real();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case 3:
      return a.as_text().compare(b.as_text());
    case 4: {
      const auto& x = a.as_vec();
      const auto& y = b.as_vec();
      for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (x[i] != y[i]) return x[i] < y[i] ? -1 : 1;
      }
      return x.size() < y.size() ? -1 : (x.size() > y.size() ? 1 : 0);
    }
    default: {
      const auto& x = a.as_list();
      const auto& y = b.as_list();
      for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        int c = compare(x[i], y[i]);
        if (c != 0) return c;
      }
      return x.size() < y.size() ? -1 : (x.size() > y.size() ? 1 : 0);
    }
  }
}

std::size_t hash_value(const Value& v) {
  auto mix = [](std::size_t h, std::size_t k) {
    return h ^ (k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  };
  switch (v.v.index()) {
    case 0:
      return 0x5f0e;
    case 1:
      return std::hash<std::int64_t>{}(v.as_int());
    case 2:
      return std::hash<double>{}(v.as_real());
    case 3:
      return std::hash<std::string>{}(v.as_text());
    case 4: {
      std::size_t h = 0x9277;
      for (double d : v.as_vec()) h = mix(h, std::hash<double>{}(d));
      return h;
    }
    default: {
      std::size_t h = 0x41c3;
      for (const auto& f : v.as_list()) h = mix(h, hash_value(f));
      return h;
    }
  }
}

namespace {

void format_real(std::string& out, double d) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", d);
  out += buf;
}

void append(std::string& out, const Value& v) {
  switch (v.v.index()) {
    case 0:
      out += "null";
      break;
    case 1:
      out += std::to_string(v.as_int());
      break;
    case 2:
      format_real(out, v.as_real());
      break;
    case 3:
      out += v.as_text();
      break;
    case 4: {
      out += '<';
      const auto& vec = v.as_vec();
      for (std::size_t i = 0; i < vec.size(); ++i) {
        if (i) out += ',';
        format_real(out, vec[i]);
      }
      out += '>';
      break;
    }
    default: {
      out += '[';
      const auto& fs = v.as_list();
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (i) out += '|';
        append(out, fs[i]);
      }
      out += ']';
      break;
    }
  }
}

}  // namespace

std::string to_string(const Value& v) {
  std::string out;
  append(out, v);
  return out;
}

Value parse_value(const std::string& s) {
  if (s == "null") return Value();
  std::int64_t i = 0;
  auto [p1, ec1] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ec1 == std::errc() && p1 == s.data() + s.size()) return Value(i);
  try {
    std::size_t pos = 0;
    double d = std::stod(s, &pos);
    if (pos == s.size()) return Value(d);
  } catch (...) {
  }
  return Value(s);
}

}  // namespace xplan
