// Admission x category probability matrices on disk, and their evaluation
// against a label file.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/data_split.hpp"
#include "fhirdx/io.hpp"
#include "fhirdx/label_codec.hpp"
#include "fhirdx/metrics.hpp"
#include "fhirdx/tensor_nn.hpp"
#include "json.hpp"

namespace fhirdx {

struct PredictionMatrix {
  std::string source;  // producing model, free text
  std::vector<std::int64_t> categories;
  std::vector<std::int64_t> admission_ids;
  nn::Matrix probabilities;  // admissions x categories
};

inline void write_predictions(const std::string& path, const PredictionMatrix& p) {
  if (p.probabilities.rows() != static_cast<Eigen::Index>(p.admission_ids.size()) ||
      p.probabilities.cols() != static_cast<Eigen::Index>(p.categories.size()))
    throw Error(ErrorCode::ShapeMismatch, "prediction matrix does not match its ids");
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < p.probabilities.rows(); ++r)
    rows.push_back(std::vector<double>(p.probabilities.row(r).data(),
                                       p.probabilities.row(r).data() + p.probabilities.cols()));
  write_json(path,
             nlohmann::json{{"format", "fhirdx.predictions.v1"},
                            {"source", p.source},
                            {"categories", p.categories},
                            {"admission_ids", p.admission_ids},
                            {"probabilities", std::move(rows)}},
             -1);
}

inline PredictionMatrix read_predictions(const std::string& path) {
  auto j = read_json(path);
  try {
    if (j.at("format") != "fhirdx.predictions.v1")
      throw Error(ErrorCode::MalformedJson, path + ": unsupported prediction format");
    PredictionMatrix p;
    p.source = j.value("source", "");
    p.categories = j.at("categories").get<std::vector<std::int64_t>>();
    p.admission_ids = j.at("admission_ids").get<std::vector<std::int64_t>>();
    const auto& rows = j.at("probabilities");
    if (rows.size() != p.admission_ids.size())
      throw Error(ErrorCode::ShapeMismatch, path + ": row count differs from admission count");
    const auto c = static_cast<Eigen::Index>(p.categories.size());
    p.probabilities.resize(static_cast<Eigen::Index>(rows.size()), c);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != c)
        throw Error(ErrorCode::ShapeMismatch, path + ": row width differs from category count");
      for (Eigen::Index k = 0; k < c; ++k)
        p.probabilities(static_cast<Eigen::Index>(r), k) = rows[r][static_cast<std::size_t>(k)].get<double>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
}

/// Joins predictions with labels on admission id (optionally restricted to one
/// partition) and computes the metric report. Predicted admissions without a
/// label are an error; labelled admissions without a prediction are ignored.
inline metrics::MetricReport evaluate(const PredictionMatrix& pred, const labels::LabelFile& lf,
                                      const std::map<std::int64_t, split::Partition>* assignment = nullptr,
                                      std::optional<split::Partition> partition = std::nullopt) {
  if (pred.categories != lf.categories)
    throw Error(ErrorCode::CatalogMismatch, "prediction categories differ from the label file");
  std::map<std::int64_t, const labels::LabelVector*> by_id;
  for (const auto& v : lf.vectors) by_id[v.admission_id] = &v;
  const std::size_t c = pred.categories.size();
  std::vector<double> scores;
  std::vector<std::uint8_t> truths;
  for (std::size_t i = 0; i < pred.admission_ids.size(); ++i) {
    const auto id = pred.admission_ids[i];
    if (assignment && partition) {
      auto it = assignment->find(id);
      if (it == assignment->end() || it->second != *partition) continue;
    }
    auto lv = by_id.find(id);
    if (lv == by_id.end())
      throw Error(ErrorCode::UnknownAdmission, "no labels for predicted admission " + std::to_string(id));
    for (std::size_t k = 0; k < c; ++k) {
      scores.push_back(pred.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
      truths.push_back(lv->second->bits[k]);
    }
  }
  if (scores.empty()) throw Error(ErrorCode::EmptyPartition, "no predicted admissions in the evaluated partition");
  return metrics::micro_average(scores, truths, c);
}

}  // namespace fhirdx
