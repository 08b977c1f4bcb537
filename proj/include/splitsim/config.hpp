// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace splitsim {

/// `section.key = value` lines; `#` starts a comment, blank lines are
/// ignored. Later assignments override earlier ones.
class FlatConfig {
 public:
  static FlatConfig parse(std::istream& in);
  static FlatConfig load(const std::string& path);

  void set(std::string key, std::string value);
  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  std::optional<double> get_double(std::string_view key) const;
  std::optional<std::int64_t> get_int(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;

  /// Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(std::span<const std::string_view> allowed) const;

  const std::map<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace splitsim
