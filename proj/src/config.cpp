// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "splitsim/error.hpp"

namespace splitsim {

FlatConfig FlatConfig::parse(std::istream& in) {
  FlatConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = line;
    if (auto hash = row.find('#'); hash != std::string_view::npos) row = row.substr(0, hash);
    row = detail::trim(row);
    if (row.empty()) continue;
    auto eq = row.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    std::string_view key = detail::trim(row.substr(0, eq));
    std::string_view value = detail::trim(row.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (key.find('.') == std::string_view::npos)
      throw ParseError(line_no, fmt::format("key '{}' needs a section prefix", key));
    cfg.set(std::string(key), std::string(value));
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  return parse(in);
}

void FlatConfig::set(std::string key, std::string value) {
  entries_.insert_or_assign(std::move(key), std::move(value));
}

bool FlatConfig::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> FlatConfig::get(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> FlatConfig::get_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  if (*v == "inf" || *v == "infinity") return std::numeric_limits<double>::infinity();
  auto d = detail::to_double(*v);
  if (!d) throw ConfigError(fmt::format("'{}' must be a number, got '{}'", key, *v));
  return d;
}

std::optional<std::int64_t> FlatConfig::get_int(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  auto i = detail::to_int(*v);
  if (!i) throw ConfigError(fmt::format("'{}' must be an integer, got '{}'", key, *v));
  return i;
}

std::optional<bool> FlatConfig::get_bool(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(fmt::format("'{}' must be true or false, got '{}'", key, *v));
}

void FlatConfig::reject_unknown(std::span<const std::string_view> allowed) const {
  for (const auto& [key, value] : entries_)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("unknown config key '{}'", key));
}

}  // namespace splitsim
