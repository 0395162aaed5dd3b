#include <gtest/gtest.h>

#include "fhirdx/common.hpp"

using namespace fhirdx;

TEST(Timestamp, ParsesBothSeparators) {
  auto a = parse_timestamp("2150-03-01 12:30:05");
  auto b = parse_timestamp("2150-03-01T12:30:05");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(format_timestamp(*a), "2150-03-01T12:30:05");
}

TEST(Timestamp, DateOnlyIsMidnight) {
  auto d = parse_timestamp("2150-03-01");
  auto t = parse_timestamp("2150-03-01 00:00:00");
  ASSERT_TRUE(d && t);
  EXPECT_EQ(*d, *t);
}

TEST(Timestamp, EpochAndLeapDay) {
  EXPECT_EQ(*parse_timestamp("1970-01-01 00:00:00"), 0);
  auto leap = parse_timestamp("2152-02-29 00:00:00");
  ASSERT_TRUE(leap);
  EXPECT_EQ(format_timestamp(*leap + 24 * kHour), "2152-03-01T00:00:00");
}

TEST(Timestamp, RejectsGarbage) {
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_FALSE(parse_timestamp("2150-13-01 00:00:00"));
  EXPECT_FALSE(parse_timestamp("2150-02-30 00:00:00"));
  EXPECT_FALSE(parse_timestamp(""));
}

TEST(Hash, Fnv1aKnownVector) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
    auto k = r.range(-3, 3);
    EXPECT_GE(k, -3);
    EXPECT_LE(k, 3);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(9);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal(1.0, 2.0);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 1.0, 0.03);
  EXPECT_NEAR(var, 4.0, 0.08);
}

TEST(Rng, DerivedSeedsDifferByStage) {
  EXPECT_NE(derive_seed(1, "split"), derive_seed(1, "synth"));
  EXPECT_NE(derive_seed(1, "split"), derive_seed(2, "split"));
  EXPECT_EQ(derive_seed(5, "split"), derive_seed(5, "split"));
}

TEST(Errors, ExitCodesByFamily) {
  EXPECT_EQ(exit_code_for(ErrorCode::UsageError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::InvalidConfig), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::InvalidSpec), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::SchemaMismatch), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::IoFailure), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::ShapeMismatch), 5);
  EXPECT_EQ(exit_code_for(ErrorCode::NonFiniteValue), 5);
}

TEST(Errors, MessageCarriesCode) {
  Error e(ErrorCode::EmptyType, "type 3");
  EXPECT_EQ(e.code(), ErrorCode::EmptyType);
  EXPECT_NE(std::string(e.what()).find("EmptyType"), std::string::npos);
}

TEST(Strings, ParseNumbers) {
  EXPECT_EQ(*parse_int(" 12 "), 12);
  EXPECT_FALSE(parse_int("12a"));
  EXPECT_DOUBLE_EQ(*parse_double("-1.5e2"), -150.0);
  EXPECT_FALSE(parse_double("abc"));
  EXPECT_FALSE(parse_double(""));
}
