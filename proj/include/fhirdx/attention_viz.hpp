// Scaled dot-product attention weights, softmax(Q K^T / sqrt(d)) V, and
// query/key alignment export for heat-map rendering.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "json.hpp"

namespace fhirdx::attention {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct AttentionInput {
  Matrix queries;  // n_q x d
  Matrix keys;     // n_k x d
  Matrix values;   // n_k x d_v
  std::vector<std::string> query_tokens;
  std::vector<std::string> key_tokens;
};

struct AttentionWeights {
  Matrix weights;  // n_q x n_k, rows sum to 1
  Matrix output;   // n_q x d_v
};

inline void validate(const AttentionInput& in) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ShapeMismatch, "attention: " + m); };
  if (in.queries.cols() < 1) fail("key dimension d must be >= 1");
  if (in.keys.cols() != in.queries.cols()) fail("queries and keys differ in dimension");
  if (in.keys.rows() < 1) fail("need at least one key");
  if (in.values.rows() != in.keys.rows()) fail("values and keys differ in row count");
  if (!in.query_tokens.empty() && in.query_tokens.size() != static_cast<std::size_t>(in.queries.rows()))
    fail("query tokens do not match query rows");
  if (!in.key_tokens.empty() && in.key_tokens.size() != static_cast<std::size_t>(in.keys.rows()))
    fail("key tokens do not match key rows");
}

/// Row softmax with the row maximum subtracted first.
inline Matrix row_softmax(const Matrix& logits) {
  Matrix w(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    w.row(r) = (logits.row(r).array() - m).exp().matrix();
    w.row(r) /= w.row(r).sum();
  }
  return w;
}

inline AttentionWeights attention(const AttentionInput& in) {
  validate(in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in.queries.cols()));
  Matrix logits = (in.queries * in.keys.transpose()) * scale;
  AttentionWeights out;
  out.weights = row_softmax(logits);
  out.output = out.weights * in.values;
  if (!out.weights.allFinite() || !out.output.allFinite())
    throw Error(ErrorCode::NonFiniteValue, "attention produced a non-finite value");
  return out;
}

struct AlignmentRecord {
  std::size_t query_index = 0;
  std::string query_token;
  std::size_t key_index = 0;
  std::string key_token;
  double weight = 0.0;
};

/// Every (query, key, weight) triple; within a query, heaviest key first
/// (ties by key index).
inline std::vector<AlignmentRecord> export_alignment(const Matrix& weights,
                                                     const std::vector<std::string>& query_tokens,
                                                     const std::vector<std::string>& key_tokens) {
  if (query_tokens.size() != static_cast<std::size_t>(weights.rows()) ||
      key_tokens.size() != static_cast<std::size_t>(weights.cols()))
    throw Error(ErrorCode::ShapeMismatch, "alignment tokens do not match the weight matrix");
  std::vector<AlignmentRecord> out;
  out.reserve(static_cast<std::size_t>(weights.size()));
  std::vector<std::size_t> order(key_tokens.size());
  for (Eigen::Index q = 0; q < weights.rows(); ++q) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights(q, a) > weights(q, b); });
    for (std::size_t k : order)
      out.push_back({static_cast<std::size_t>(q), query_tokens[q], k, key_tokens[k], weights(q, k)});
  }
  return out;
}

inline void write_alignment_csv(const std::string& path, const std::vector<AlignmentRecord>& recs) {
  CsvWriter w(path);
  w.row({"query_index", "query_token", "key_index", "key_token", "weight"});
  for (const auto& r : recs)
    w.row({std::to_string(r.query_index), r.query_token, std::to_string(r.key_index), r.key_token,
           format_double(r.weight)});
  w.close();
}

inline std::vector<AlignmentRecord> read_alignment_csv(const std::string& path) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f) || f.size() != 5) throw Error(ErrorCode::SchemaMismatch, path + ": bad header");
  std::vector<AlignmentRecord> out;
  while (csv.next(f)) {
    if (f.size() != 5) throw Error(ErrorCode::MalformedRow, path + ": line " + std::to_string(csv.line()));
    auto qi = parse_int(f[0]);
    auto ki = parse_int(f[2]);
    auto w = parse_double(f[4]);
    if (!qi || !ki || !w || *qi < 0 || *ki < 0)
      throw Error(ErrorCode::MalformedRow, path + ": line " + std::to_string(csv.line()));
    out.push_back({static_cast<std::size_t>(*qi), f[1], static_cast<std::size_t>(*ki), f[3], *w});
  }
  return out;
}

/// Rebuilds the n_q x n_k weight matrix from alignment records.
inline Matrix weights_from_alignment(const std::vector<AlignmentRecord>& recs) {
  std::size_t nq = 0, nk = 0;
  for (const auto& r : recs) {
    nq = std::max(nq, r.query_index + 1);
    nk = std::max(nk, r.key_index + 1);
  }
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(nk));
  for (const auto& r : recs)
    w(static_cast<Eigen::Index>(r.query_index), static_cast<Eigen::Index>(r.key_index)) = r.weight;
  return w;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::MalformedJson, std::string(what) + " must be a non-empty array");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw Error(ErrorCode::ShapeMismatch, std::string(what) + " rows differ in length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

/// Reads {"queries","keys","values","query_tokens","key_tokens"} or, for
/// multi-head dumps, {"heads":[{"layer","head",...same keys...}]} selecting the
/// requested layer/head.
inline AttentionInput input_from_json(const nlohmann::json& root, int layer = 0, int head = 0) {
  try {
    const nlohmann::json* j = &root;
    if (root.contains("heads")) {
      j = nullptr;
      for (const auto& h : root.at("heads"))
        if (h.value("layer", 0) == layer && h.value("head", 0) == head) j = &h;
      if (!j)
        throw Error(ErrorCode::ConfigError, "no head " + std::to_string(head) + " in layer " +
                                                std::to_string(layer));
    }
    AttentionInput in;
    in.queries = matrix_from_json(j->at("queries"), "queries");
    in.keys = matrix_from_json(j->at("keys"), "keys");
    in.values = j->contains("values") ? matrix_from_json(j->at("values"), "values") : in.keys;
    in.query_tokens = j->value("query_tokens", std::vector<std::string>{});
    in.key_tokens = j->value("key_tokens", std::vector<std::string>{});
    auto fill = [](std::vector<std::string>& toks, Eigen::Index n, const char* prefix) {
      if (toks.empty())
        for (Eigen::Index i = 0; i < n; ++i) toks.push_back(prefix + std::to_string(i));
    };
    fill(in.query_tokens, in.queries.rows(), "q");
    fill(in.key_tokens, in.keys.rows(), "k");
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("attention input: ") + e.what());
  }
}

}  // namespace fhirdx::attention
