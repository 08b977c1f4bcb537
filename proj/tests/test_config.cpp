// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <array>
#include <sstream>

#include "splitsim/config.hpp"
#include "splitsim/error.hpp"

namespace splitsim {
namespace {

FlatConfig parse(const std::string& text) {
  std::istringstream in(text);
  return FlatConfig::parse(in);
}

TEST(FlatConfig, ParsesAndOverrides) {
  FlatConfig c = parse(
      "# comment\n"
      "\n"
      "workload.rate = 2.5   # trailing\n"
      "cluster.design=splitwise-ha\n"
      "workload.rate = 3\n");
  EXPECT_EQ(c.get("cluster.design"), "splitwise-ha");
  EXPECT_EQ(c.get_double("workload.rate"), 3.0);
  EXPECT_EQ(c.get_int("workload.rate"), 3);
  EXPECT_FALSE(c.has("workload.seed"));
  EXPECT_EQ(c.get_int("workload.seed"), std::nullopt);
  c.set("workload.seed", "9");
  EXPECT_EQ(c.get_int("workload.seed"), 9);
}

TEST(FlatConfig, TypedAccessorsReject) {
  FlatConfig c = parse("a.x = abc\na.flag = maybe\na.y = 1.5\n");
  EXPECT_THROW(c.get_double("a.x"), ConfigError);
  EXPECT_THROW(c.get_int("a.y"), ConfigError);
  EXPECT_THROW(c.get_bool("a.flag"), ConfigError);
  c.set("a.flag", "yes");
  EXPECT_EQ(c.get_bool("a.flag"), true);
}

TEST(FlatConfig, SyntaxErrorsCarryLine) {
  try {
    parse("a.x = 1\nnot a pair\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("= 3\n"), ParseError);
  EXPECT_THROW(parse("nosection = 3\n"), ParseError);
}

TEST(FlatConfig, UnknownKeysNamed) {
  FlatConfig c = parse("workload.rate = 1\nworkload.rte = 2\n");
  constexpr std::array<std::string_view, 1> allowed = {"workload.rate"};
  try {
    c.reject_unknown(allowed);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("workload.rte"), std::string::npos);
  }
}

TEST(FlatConfig, MissingFile) {
  EXPECT_THROW(FlatConfig::load("/nonexistent/splitsim.conf"), ConfigError);
}

}  // namespace
}  // namespace splitsim
