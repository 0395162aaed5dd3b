#include <gtest/gtest.h>

#include <cmath>

#include "fhirdx/metrics.hpp"

using namespace fhirdx;
using namespace fhirdx::metrics;

namespace {

double concordance(const std::vector<double>& s, const std::vector<std::uint8_t>& t) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (t[i] && !t[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

// mean over positives of the precision among everything scored at least as high
double average_precision(const std::vector<double>& s, const std::vector<std::uint8_t>& t) {
  double sum = 0;
  int pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!t[i]) continue;
    ++pos;
    int hit = 0, all = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j] >= s[i]) {
        ++all;
        hit += t[j];
      }
    sum += static_cast<double>(hit) / all;
  }
  return sum / pos;
}

void random_case(Rng& rng, std::vector<double>& s, std::vector<std::uint8_t>& t, std::size_t n, int levels) {
  s.resize(n);
  t.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = levels ? static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) : rng.uniform();
    t[i] = rng.bernoulli(0.3);
  }
  t[0] = 1;
  t[1] = 0;
}

template <class F>
ErrorCode code_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::UsageError;
}

}  // namespace

TEST(Metrics, DocumentedExample) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  std::vector<std::uint8_t> t{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, t), 0.75);
  EXPECT_NEAR(pr_auc(s, t), 0.8333333333333333, 1e-12);
  EXPECT_DOUBLE_EQ(recall_at_precision(s, t), 0.5);
}

TEST(Metrics, PerfectAndTiedRankings) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  std::vector<std::uint8_t> t{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, t), 1.0);
  EXPECT_DOUBLE_EQ(pr_auc(s, t), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_precision(s, t), 1.0);
  std::vector<double> flat(4, 0.5);
  EXPECT_DOUBLE_EQ(roc_auc(flat, t), 0.5);
  EXPECT_DOUBLE_EQ(pr_auc(flat, t), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_precision(flat, t), 0.0);
  EXPECT_DOUBLE_EQ(recall_at_precision(flat, t, 0.5), 1.0);
}

TEST(Metrics, DegenerateLabels) {
  std::vector<double> s{0.1, 0.2};
  std::vector<std::uint8_t> none{0, 0}, all{1, 1};
  EXPECT_EQ(code_of([&] { roc_auc(s, none); }), ErrorCode::DegenerateLabels);
  EXPECT_EQ(code_of([&] { roc_auc(s, all); }), ErrorCode::DegenerateLabels);
  EXPECT_EQ(code_of([&] { pr_auc(s, none); }), ErrorCode::DegenerateLabels);
  EXPECT_EQ(code_of([&] { recall_at_precision(s, none); }), ErrorCode::DegenerateLabels);
  EXPECT_DOUBLE_EQ(pr_auc(s, all), 1.0);
  std::vector<std::uint8_t> t{1};
  EXPECT_EQ(code_of([&] { roc_auc(s, t); }), ErrorCode::ShapeMismatch);
}

TEST(Metrics, MatchesBruteForceOracles) {
  Rng rng(11);
  std::vector<double> s;
  std::vector<std::uint8_t> t;
  for (int i = 0; i < 300; ++i) {
    random_case(rng, s, t, 2 + rng.below(120), i % 3 == 0 ? 5 : 0);
    EXPECT_NEAR(roc_auc(s, t), concordance(s, t), 1e-12);
    EXPECT_NEAR(pr_auc(s, t), average_precision(s, t), 1e-12);
  }
}

TEST(Metrics, RankInvariance) {
  Rng rng(12);
  std::vector<double> s;
  std::vector<std::uint8_t> t;
  for (int i = 0; i < 50; ++i) {
    random_case(rng, s, t, 40, 0);
    std::vector<double> m(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) m[k] = std::exp(3 * s[k]) - 7;
    EXPECT_DOUBLE_EQ(roc_auc(s, t), roc_auc(m, t));
    EXPECT_DOUBLE_EQ(pr_auc(s, t), pr_auc(m, t));
    EXPECT_DOUBLE_EQ(recall_at_precision(s, t), recall_at_precision(m, t));
  }
}

TEST(Metrics, RecallNonIncreasingInTarget) {
  Rng rng(13);
  std::vector<double> s;
  std::vector<std::uint8_t> t;
  for (int i = 0; i < 50; ++i) {
    random_case(rng, s, t, 60, 0);
    double prev = 1.0;
    for (double p = 0.0; p <= 1.0; p += 0.05) {
      const double r = recall_at_precision(s, t, p);
      EXPECT_LE(r, prev);
      prev = r;
    }
  }
}

TEST(Micro, SingleCategoryEqualsColumnMetric) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  std::vector<std::uint8_t> t{1, 0, 1, 0};
  auto r = micro_average(s, t, 1);
  EXPECT_DOUBLE_EQ(r.micro.auroc, 0.75);
  EXPECT_DOUBLE_EQ(r.micro.aupr, pr_auc(s, t));
  ASSERT_EQ(r.per_category.size(), 1u);
  EXPECT_DOUBLE_EQ(*r.per_category[0].auroc, 0.75);
  EXPECT_DOUBLE_EQ(r.positive_ratio, 0.5);
  EXPECT_EQ(r.samples, 4u);
}

TEST(Micro, DuplicatedColumnsKeepMicroValues) {
  Rng rng(14);
  std::vector<double> s, s2;
  std::vector<std::uint8_t> t, t2;
  random_case(rng, s, t, 30, 0);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      s2.push_back(s[i]);
      t2.push_back(t[i]);
    }
  auto a = micro_average(s, t, 1), b = micro_average(s2, t2, 3);
  EXPECT_NEAR(a.micro.auroc, b.micro.auroc, 1e-12);
  EXPECT_NEAR(a.micro.aupr, b.micro.aupr, 1e-12);
  EXPECT_NEAR(a.micro.recall_at_prec80, b.micro.recall_at_prec80, 1e-12);
  EXPECT_EQ(b.per_category.size(), 3u);
}

TEST(Micro, PoolsCellsAndSkipsUnsupportedColumns) {
  // 3 x 2, column 1 has no positives
  std::vector<double> s{0.9, 0.1, 0.2, 0.7, 0.6, 0.3};
  std::vector<std::uint8_t> t{1, 0, 0, 0, 1, 0};
  auto r = micro_average(s, t, 2);
  EXPECT_NEAR(r.micro.auroc, concordance(s, t), 1e-12);
  EXPECT_EQ(r.unsupported, std::vector<std::size_t>{1});
  ASSERT_EQ(r.per_category.size(), 1u);
  EXPECT_DOUBLE_EQ(*r.per_category[0].auroc, 1.0);
  EXPECT_NEAR(r.positive_ratio, 2.0 / 6.0, 1e-15);
  auto j = to_json(r, std::vector<std::int64_t>{98, 108});
  EXPECT_EQ(j["per_category"][0]["ccs_category"], 98);
  EXPECT_EQ(j["unsupported_categories"][0], 1);
}

TEST(Micro, ShapeMismatch) {
  std::vector<double> s{0.1, 0.2, 0.3};
  std::vector<std::uint8_t> t{1, 0, 1};
  EXPECT_EQ(code_of([&] { micro_average(s, t, 2); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { micro_average(s, t, 0); }), ErrorCode::ShapeMismatch);
}
