// Threshold-free ranking metrics: AU-ROC, step-wise AU-PR, recall at a
// precision floor, per category and micro-averaged over pooled cells.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "json.hpp"

namespace fhirdx::metrics {

/// One point per distinct score threshold, descending: predictions are
/// positive for every score >= the threshold.
struct CurvePoint {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

struct Curve {
  std::vector<CurvePoint> points;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline Curve threshold_curve(std::span<const double> scores, std::span<const std::uint8_t> truths) {
  if (scores.size() != truths.size())
    throw Error(ErrorCode::ShapeMismatch, "scores and truths differ in length");
  if (scores.empty()) throw Error(ErrorCode::DegenerateLabels, "no samples");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteValue, "non-finite score");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Curve c;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (truths[order[i]]) ++tp;
    else ++fp;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]])
      c.points.push_back({scores[order[i]], tp, fp});
  }
  c.positives = tp;
  c.negatives = fp;
  return c;
}

/// Trapezoidal ROC area; tied scores form one step, so this equals the
/// probability that a random positive outranks a random negative with ties
/// counted 1/2.
inline double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truths) {
  Curve c = threshold_curve(scores, truths);
  if (c.positives == 0 || c.negatives == 0)
    throw Error(ErrorCode::DegenerateLabels, "AU-ROC needs both classes");
  double area = 0.0;
  std::size_t prev_tp = 0, prev_fp = 0;
  for (const auto& p : c.points) {
    area += static_cast<double>(p.fp - prev_fp) * (static_cast<double>(prev_tp) + 0.5 * static_cast<double>(p.tp - prev_tp));
    prev_tp = p.tp;
    prev_fp = p.fp;
  }
  return area / (static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

/// Step-wise PR area: sum over thresholds of (recall gain) x precision, with
/// no interpolation between points.
inline double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> truths) {
  Curve c = threshold_curve(scores, truths);
  if (c.positives == 0) throw Error(ErrorCode::DegenerateLabels, "AU-PR needs at least one positive");
  double area = 0.0;
  std::size_t prev_tp = 0;
  for (const auto& p : c.points) {
    if (p.tp != prev_tp) {
      const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
      area += static_cast<double>(p.tp - prev_tp) / static_cast<double>(c.positives) * precision;
    }
    prev_tp = p.tp;
  }
  return area;
}

/// Largest recall among thresholds whose precision reaches `target`; 0 when
/// none does.
inline double recall_at_precision(std::span<const double> scores, std::span<const std::uint8_t> truths,
                                  double target = 0.8) {
  Curve c = threshold_curve(scores, truths);
  if (c.positives == 0) throw Error(ErrorCode::DegenerateLabels, "recall needs at least one positive");
  double best = 0.0;
  for (const auto& p : c.points) {
    const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
    if (precision >= target)
      best = std::max(best, static_cast<double>(p.tp) / static_cast<double>(c.positives));
  }
  return best;
}

// ---------------------------------------------------------------------------

struct CategoryMetrics {
  std::size_t category = 0;
  std::optional<double> auroc;  // absent when the column has no negatives
  double aupr = 0.0;
  double recall_at_prec80 = 0.0;
  std::size_t support = 0;
};

struct MicroMetrics {
  double auroc = 0.0;
  double aupr = 0.0;
  double recall_at_prec80 = 0.0;
};

struct MetricReport {
  std::vector<CategoryMetrics> per_category;
  std::vector<std::size_t> unsupported;  // columns without positives
  MicroMetrics micro;
  double positive_ratio = 0.0;  // also the expected AU-PR of a random ranking
  std::size_t samples = 0;
  std::size_t categories = 0;
};

/// Micro metrics pool all N*C cells; per-category metrics are column-wise.
/// `scores` and `truths` are row-major N x C.
inline MetricReport micro_average(std::span<const double> scores, std::span<const std::uint8_t> truths,
                                  std::size_t n_categories) {
  if (scores.size() != truths.size() || n_categories == 0 || scores.size() % n_categories != 0)
    throw Error(ErrorCode::ShapeMismatch, "score and truth matrices must share an N x C shape");
  MetricReport rep;
  rep.categories = n_categories;
  rep.samples = scores.size() / n_categories;
  const std::size_t positives = static_cast<std::size_t>(std::count(truths.begin(), truths.end(), 1));
  rep.positive_ratio = static_cast<double>(positives) / static_cast<double>(truths.size());
  rep.micro.auroc = roc_auc(scores, truths);
  rep.micro.aupr = pr_auc(scores, truths);
  rep.micro.recall_at_prec80 = recall_at_precision(scores, truths, 0.8);

  std::vector<double> col_s(rep.samples);
  std::vector<std::uint8_t> col_t(rep.samples);
  for (std::size_t c = 0; c < n_categories; ++c) {
    for (std::size_t i = 0; i < rep.samples; ++i) {
      col_s[i] = scores[i * n_categories + c];
      col_t[i] = truths[i * n_categories + c];
    }
    const std::size_t support = static_cast<std::size_t>(std::count(col_t.begin(), col_t.end(), 1));
    if (support == 0) {
      rep.unsupported.push_back(c);
      continue;
    }
    CategoryMetrics m;
    m.category = c;
    m.support = support;
    if (support < rep.samples) m.auroc = roc_auc(col_s, col_t);
    m.aupr = pr_auc(col_s, col_t);
    m.recall_at_prec80 = recall_at_precision(col_s, col_t, 0.8);
    rep.per_category.push_back(m);
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const MetricReport& r,
                                      std::span<const std::int64_t> category_ids = {}) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["categories"] = r.categories;
  j["positive_ratio"] = r.positive_ratio;
  j["random_aupr_baseline"] = r.positive_ratio;
  j["micro"] = {{"auroc", r.micro.auroc},
                {"aupr", r.micro.aupr},
                {"recall_at_prec80", r.micro.recall_at_prec80}};
  auto per = nlohmann::ordered_json::array();
  for (const auto& m : r.per_category) {
    nlohmann::ordered_json e;
    e["category_index"] = m.category;
    if (m.category < category_ids.size()) e["ccs_category"] = category_ids[m.category];
    e["support"] = m.support;
    e["auroc"] = m.auroc ? nlohmann::ordered_json(*m.auroc) : nlohmann::ordered_json(nullptr);
    e["aupr"] = m.aupr;
    e["recall_at_prec80"] = m.recall_at_prec80;
    per.push_back(std::move(e));
  }
  j["per_category"] = std::move(per);
  j["unsupported_categories"] = r.unsupported;
  return j;
}

}  // namespace fhirdx::metrics
