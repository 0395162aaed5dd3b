// Clinical note pipeline: cleaning, admission subsets (discharge summaries,
// first 3 / 2 days), fixed-budget chunking, per-chunk category scoring and
// chunk -> admission probability aggregation.
//
// The chunk scorer is a seam: anything that maps an admission's chunks to an
// n_chunks x C probability matrix can stand in for the hashed bag-of-words
// logistic model provided here.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "fhirdx/label_codec.hpp"
#include "fhirdx/tensor_nn.hpp"
#include "json.hpp"

namespace fhirdx::notes {

using AdmissionId = std::int64_t;
using nn::Matrix;

inline constexpr std::string_view kClassificationMarker = "[CLS]";
inline constexpr std::string_view kDischargeCategory = "discharge summary";

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

using Replacements = std::vector<std::pair<std::string, std::string>>;

inline Replacements default_replacements() { return {{"dr.", "doctor"}}; }

/// Lower-cases, applies `replacements` in order (a pattern only matches at the
/// start of a word), turns line breaks into spaces, and collapses whitespace.
inline std::string clean_text(std::string_view raw, const Replacements& replacements = default_replacements()) {
  std::string s = to_lower(raw);
  for (const auto& [from, to] : replacements) {
    if (from.empty()) continue;
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      const bool at_word_start = i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
      if (at_word_start && s.compare(i, from.size(), from) == 0) {
        out += to;
        i += from.size();
      } else {
        out.push_back(s[i++]);
      }
    }
    s = std::move(out);
  }
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subsets
// ---------------------------------------------------------------------------

struct NoteEvent {
  AdmissionId admission_id = 0;
  std::string category;
  std::optional<Timestamp> charttime;
  std::string text;
};

struct AdmissionTimes {
  Timestamp admit = 0;
  Timestamp discharge = 0;
};

enum class SubsetKind { disch, days3, days2 };

inline const char* to_string(SubsetKind k) {
  switch (k) {
    case SubsetKind::disch: return "disch";
    case SubsetKind::days3: return "days3";
    case SubsetKind::days2: return "days2";
  }
  return "?";
}

inline SubsetKind parse_subset(std::string_view s) {
  if (s == "disch") return SubsetKind::disch;
  if (s == "days3") return SubsetKind::days3;
  if (s == "days2") return SubsetKind::days2;
  throw Error(ErrorCode::InvalidConfig, "unknown note subset \"" + std::string(s) + "\"");
}

inline bool is_discharge_summary(const NoteEvent& n) {
  return to_lower(trim(n.category)) == kDischargeCategory;
}

/// Per admission, the cleaned texts of the qualifying notes ordered by
/// charttime and joined by single spaces:
///   disch         discharge summaries only;
///   days3 / days2 every other note with charttime < admit + 72h / 48h.
/// Admissions without qualifying notes are absent.
inline std::map<AdmissionId, std::string> build_subset(
    std::span<const NoteEvent> notes, const std::unordered_map<AdmissionId, AdmissionTimes>& admissions,
    SubsetKind kind, const Replacements& replacements = default_replacements()) {
  const Timestamp window = kind == SubsetKind::days3 ? 72 * kHour : 48 * kHour;
  std::map<AdmissionId, std::vector<std::pair<Timestamp, std::size_t>>> picked;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const auto& n = notes[i];
    auto it = admissions.find(n.admission_id);
    if (it == admissions.end())
      throw Error(ErrorCode::UnknownAdmission, "note for unknown admission " + std::to_string(n.admission_id));
    const bool disch = is_discharge_summary(n);
    Timestamp t = n.charttime.value_or(it->second.discharge);
    if (kind == SubsetKind::disch) {
      if (!disch) continue;
    } else {
      if (disch || !n.charttime || *n.charttime >= it->second.admit + window) continue;
    }
    picked[n.admission_id].emplace_back(t, i);
  }
  std::map<AdmissionId, std::string> out;
  for (auto& [id, list] : picked) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string text;
    for (const auto& [t, i] : list) {
      std::string c = clean_text(notes[i].text, replacements);
      if (c.empty()) continue;
      if (!text.empty()) text.push_back(' ');
      text += c;
    }
    if (!text.empty()) out.emplace(id, std::move(text));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

struct ChunkTokenSequence {
  AdmissionId admission_id = 0;
  std::size_t chunk_index = 0;
  std::vector<std::string> tokens;  // tokens[0] is the classification marker

  friend bool operator==(const ChunkTokenSequence&, const ChunkTokenSequence&) = default;
};

inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Greedy split into chunks of at most `max_len` tokens, each led by the
/// classification marker, so ceil(tokens / (max_len - 1)) chunks.
inline std::vector<ChunkTokenSequence> chunk(std::string_view text, std::size_t max_len,
                                             AdmissionId admission_id = 0) {
  if (max_len < 2) throw Error(ErrorCode::InvalidConfig, "max_len must leave room for the marker and a token");
  auto tokens = whitespace_tokens(text);
  std::vector<ChunkTokenSequence> out;
  const std::size_t slots = max_len - 1;
  for (std::size_t start = 0; start < tokens.size(); start += slots) {
    ChunkTokenSequence c{admission_id, out.size(), {std::string(kClassificationMarker)}};
    const std::size_t end = std::min(tokens.size(), start + slots);
    for (std::size_t i = start; i < end; ++i) c.tokens.push_back(std::move(tokens[i]));
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashed bag-of-words features
// ---------------------------------------------------------------------------

struct HasherConfig {
  std::size_t dim = std::size_t{1} << 15;
};

struct SparseFeatures {
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;
};

/// Signed feature hashing of a chunk's content tokens (the marker is skipped).
/// Each bucket holds sign(s) * log(1 + |s|) where s is its signed count.
inline SparseFeatures hash_features(std::span<const std::string> tokens, const HasherConfig& cfg) {
  std::map<std::uint32_t, double> acc;
  for (const auto& t : tokens) {
    if (t == kClassificationMarker) continue;
    const std::uint64_t h = fnv1a64(t);
    const auto idx = static_cast<std::uint32_t>(h % cfg.dim);
    acc[idx] += (h >> 63) ? -1.0 : 1.0;
  }
  SparseFeatures f;
  for (const auto& [i, s] : acc) {
    if (s == 0.0) continue;
    f.index.push_back(i);
    f.value.push_back((s > 0 ? 1.0 : -1.0) * std::log1p(std::abs(s)));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// W: C x feature_dim, bias: C. P(category c | chunk) = sigmoid(W_c . x + b_c).
struct LinearClassifierParams {
  nn::Param weights;
  nn::Param bias;
  HasherConfig hasher;

  LinearClassifierParams() = default;
  LinearClassifierParams(std::size_t n_categories, const HasherConfig& h)
      : weights("weights", static_cast<Eigen::Index>(n_categories), static_cast<Eigen::Index>(h.dim)),
        bias("bias", 1, static_cast<Eigen::Index>(n_categories)),
        hasher(h) {}

  std::size_t n_categories() const { return static_cast<std::size_t>(weights.value.rows()); }
};

struct ChunkScoreMatrix {
  AdmissionId admission_id = 0;
  Matrix probabilities;  // n_chunks x C
};

class ChunkScorer {
 public:
  virtual ~ChunkScorer() = default;
  virtual std::size_t n_categories() const = 0;
  virtual ChunkScoreMatrix score(AdmissionId admission, std::span<const ChunkTokenSequence> chunks) const = 0;
};

inline Eigen::RowVectorXd chunk_logits(const LinearClassifierParams& p, const SparseFeatures& f) {
  Eigen::RowVectorXd z = p.bias.value.row(0);
  for (std::size_t k = 0; k < f.index.size(); ++k) z += f.value[k] * p.weights.value.col(f.index[k]).transpose();
  return z;
}

/// Scores every chunk of one admission: n_chunks x C sigmoid probabilities.
inline ChunkScoreMatrix score_chunks(std::span<const ChunkTokenSequence> chunks,
                                     const LinearClassifierParams& params) {
  ChunkScoreMatrix out;
  out.admission_id = chunks.empty() ? 0 : chunks.front().admission_id;
  Matrix z(static_cast<Eigen::Index>(chunks.size()), static_cast<Eigen::Index>(params.n_categories()));
  for (std::size_t i = 0; i < chunks.size(); ++i)
    z.row(static_cast<Eigen::Index>(i)) = chunk_logits(params, hash_features(chunks[i].tokens, params.hasher));
  out.probabilities = nn::sigmoid(z);
  return out;
}

class BagOfWordsScorer final : public ChunkScorer {
 public:
  explicit BagOfWordsScorer(const LinearClassifierParams& params) : params_(params) {}
  std::size_t n_categories() const override { return params_.n_categories(); }
  ChunkScoreMatrix score(AdmissionId admission, std::span<const ChunkTokenSequence> chunks) const override {
    ChunkScoreMatrix m = score_chunks(chunks, params_);
    m.admission_id = admission;
    return m;
  }

 private:
  const LinearClassifierParams& params_;
};

struct ScorerTrainingConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  HasherConfig hasher;
};

struct ScorerTrainingResult {
  LinearClassifierParams params;
  std::vector<double> epoch_loss;
};

/// Logistic regression per category over hashed chunk features, trained with
/// mean BCE and Adam. Every chunk takes its admission's label vector. Weights
/// start at zero.
inline ScorerTrainingResult train_scorer(std::span<const ChunkTokenSequence> chunks,
                                         std::span<const labels::LabelVector> admission_labels,
                                         std::size_t n_categories, const ScorerTrainingConfig& cfg) {
  if (chunks.empty()) throw Error(ErrorCode::EmptyPartition, "no training chunks");
  if (cfg.batch_size == 0 || cfg.hasher.dim == 0 || !(cfg.lr > 0.0))
    throw Error(ErrorCode::InvalidConfig, "scorer batch size, feature dimension and lr must be positive");
  std::unordered_map<AdmissionId, const labels::LabelVector*> by_id;
  for (const auto& v : admission_labels) by_id[v.admission_id] = &v;

  std::vector<SparseFeatures> feats;
  feats.reserve(chunks.size());
  Matrix targets(static_cast<Eigen::Index>(chunks.size()), static_cast<Eigen::Index>(n_categories));
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto it = by_id.find(chunks[i].admission_id);
    if (it == by_id.end())
      throw Error(ErrorCode::UnknownAdmission,
                  "chunk of admission " + std::to_string(chunks[i].admission_id) + " has no labels");
    if (it->second->bits.size() != n_categories)
      throw Error(ErrorCode::ShapeMismatch, "label width differs from the category count");
    for (std::size_t c = 0; c < n_categories; ++c)
      targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (*it->second)[c] ? 1.0 : 0.0;
    feats.push_back(hash_features(chunks[i].tokens, cfg.hasher));
  }

  ScorerTrainingResult res{LinearClassifierParams(n_categories, cfg.hasher), {}};
  auto& p = res.params;
  nn::Param* params[] = {&p.weights, &p.bias};
  nn::AdamState adam;
  adam.lr = cfg.lr;
  Rng rng(derive_seed(cfg.seed, "scorer.shuffle"));
  std::vector<std::size_t> order(chunks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Matrix z(rows, static_cast<Eigen::Index>(n_categories));
      Matrix y(rows, static_cast<Eigen::Index>(n_categories));
      for (std::size_t b = start; b < end; ++b) {
        z.row(static_cast<Eigen::Index>(b - start)) = chunk_logits(p, feats[order[b]]);
        y.row(static_cast<Eigen::Index>(b - start)) = targets.row(static_cast<Eigen::Index>(order[b]));
      }
      auto loss = nn::bce_loss(nn::sigmoid(z), y);
      p.weights.grad.setZero();
      p.bias.grad.setZero();
      for (std::size_t b = start; b < end; ++b) {
        const auto& f = feats[order[b]];
        const auto g = loss.grad_logits.row(static_cast<Eigen::Index>(b - start));
        for (std::size_t k = 0; k < f.index.size(); ++k)
          p.weights.grad.col(f.index[k]) += f.value[k] * g.transpose();
        p.bias.grad.row(0) += g;
      }
      nn::adam_step(adam, params);
      loss_sum += loss.loss * static_cast<double>(rows);
    }
    res.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct AggregationParams {
  double c = 2.0;
};

/// Per category: (P_max + P_mean * n/c) / (1 + n/c) over the admission's n
/// chunks, evaluated as P_max + (P_mean - P_max) * (n/c) / (1 + n/c).
inline std::vector<double> aggregate(const ChunkScoreMatrix& m, const AggregationParams& params = {}) {
  if (!(params.c > 0.0)) throw Error(ErrorCode::InvalidConfig, "aggregation scale c must be positive");
  const auto n = m.probabilities.rows();
  if (n < 1) throw Error(ErrorCode::EmptyChunkSet, "admission " + std::to_string(m.admission_id) + " has no chunks");
  const double w = static_cast<double>(n) / params.c;
  std::vector<double> out(static_cast<std::size_t>(m.probabilities.cols()));
  for (Eigen::Index c = 0; c < m.probabilities.cols(); ++c) {
    const auto col = m.probabilities.col(c);
    const double pmax = col.maxCoeff();
    const double pmean = std::clamp(col.mean(), col.minCoeff(), pmax);
    out[static_cast<std::size_t>(c)] = pmax + (pmean - pmax) * (w / (1.0 + w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (to_lower(trim(header[i])) == name) return i;
  return std::nullopt;
}

inline std::size_t need_column(const std::vector<std::string>& header, std::string_view name,
                               const std::string& path) {
  auto i = find_column(header, name);
  if (!i) throw Error(ErrorCode::SchemaMismatch, path + ": header lacks column " + std::string(name));
  return *i;
}

}  // namespace detail

inline std::unordered_map<AdmissionId, AdmissionTimes> load_admission_times(const std::string& path) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f)) throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
  const auto hadm = detail::need_column(f, "hadm_id", path);
  const auto admit = detail::need_column(f, "admittime", path);
  const auto disch = detail::need_column(f, "dischtime", path);
  const std::size_t width = f.size();
  std::unordered_map<AdmissionId, AdmissionTimes> out;
  std::size_t row = 0;
  while (csv.next(f)) {
    ++row;
    if (f.size() != width) throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " arity");
    auto id = parse_int(f[hadm]);
    auto a = parse_timestamp(trim(f[admit]));
    auto d = parse_timestamp(trim(f[disch]));
    if (!id || !a || !d) throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row));
    out[*id] = {*a, *d};
  }
  return out;
}

/// Reads noteevents rows; charttime falls back to chartdate, rows flagged
/// iserror=1 or without hadm_id are skipped.
inline std::vector<NoteEvent> load_notes(const std::string& path) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f)) throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
  const auto hadm = detail::need_column(f, "hadm_id", path);
  const auto category = detail::need_column(f, "category", path);
  const auto text = detail::need_column(f, "text", path);
  const auto charttime = detail::find_column(f, "charttime");
  const auto chartdate = detail::find_column(f, "chartdate");
  const auto iserror = detail::find_column(f, "iserror");
  const std::size_t width = f.size();
  std::vector<NoteEvent> out;
  std::size_t row = 0;
  while (csv.next(f)) {
    ++row;
    if (f.size() != width) throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " arity");
    if (iserror && trim(f[*iserror]) == "1") continue;
    auto id = parse_int(f[hadm]);
    if (!id) continue;
    NoteEvent n{*id, f[category], std::nullopt, std::move(f[text])};
    if (charttime) n.charttime = parse_timestamp(trim(f[*charttime]));
    if (!n.charttime && chartdate) n.charttime = parse_timestamp(trim(f[*chartdate]));
    out.push_back(std::move(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

struct ChunkFile {
  SubsetKind subset = SubsetKind::disch;
  std::size_t max_len = 512;
  std::map<AdmissionId, std::vector<ChunkTokenSequence>> admissions;

  std::vector<ChunkTokenSequence> all_chunks() const {
    std::vector<ChunkTokenSequence> out;
    for (const auto& [id, cs] : admissions) out.insert(out.end(), cs.begin(), cs.end());
    return out;
  }
};

inline void write_chunk_file(const std::string& path, const ChunkFile& cf) {
  nlohmann::json adm = nlohmann::json::array();
  for (const auto& [id, cs] : cf.admissions) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : cs) chunks.push_back(c.tokens);
    adm.push_back({{"admission_id", id}, {"chunks", std::move(chunks)}});
  }
  write_json(path,
             nlohmann::json{{"format", "fhirdx.chunks.v1"},
                            {"subset", to_string(cf.subset)},
                            {"max_len", cf.max_len},
                            {"marker", kClassificationMarker},
                            {"admissions", std::move(adm)}},
             -1);
}

inline ChunkFile read_chunk_file(const std::string& path) {
  auto j = read_json(path);
  ChunkFile cf;
  try {
    cf.subset = parse_subset(j.at("subset").get<std::string>());
    cf.max_len = j.at("max_len");
    for (const auto& a : j.at("admissions")) {
      const AdmissionId id = a.at("admission_id");
      auto& list = cf.admissions[id];
      for (const auto& c : a.at("chunks"))
        list.push_back({id, list.size(), c.get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
  return cf;
}

inline nlohmann::json matrix_rows_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  return rows;
}

inline void write_chunk_scores(const std::string& path, std::span<const std::int64_t> categories,
                               std::span<const ChunkScoreMatrix> scores) {
  nlohmann::json adm = nlohmann::json::array();
  for (const auto& s : scores)
    adm.push_back({{"admission_id", s.admission_id}, {"probabilities", matrix_rows_json(s.probabilities)}});
  write_json(path,
             nlohmann::json{{"format", "fhirdx.chunk_scores.v1"},
                            {"categories", std::vector<std::int64_t>(categories.begin(), categories.end())},
                            {"admissions", std::move(adm)}},
             -1);
}

struct ChunkScoreFile {
  std::vector<std::int64_t> categories;
  std::vector<ChunkScoreMatrix> admissions;
};

inline ChunkScoreFile read_chunk_scores(const std::string& path) {
  auto j = read_json(path);
  ChunkScoreFile f;
  try {
    f.categories = j.at("categories").get<std::vector<std::int64_t>>();
    const auto c = static_cast<Eigen::Index>(f.categories.size());
    for (const auto& a : j.at("admissions")) {
      const auto& rows = a.at("probabilities");
      ChunkScoreMatrix m{a.at("admission_id").get<AdmissionId>(), Matrix(static_cast<Eigen::Index>(rows.size()), c)};
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != c)
          throw Error(ErrorCode::ShapeMismatch, path + ": chunk row width differs from category count");
        for (Eigen::Index k = 0; k < c; ++k)
          m.probabilities(static_cast<Eigen::Index>(r), k) = rows[r][static_cast<std::size_t>(k)].get<double>();
      }
      f.admissions.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
  return f;
}

/// Weights are stored column-sparse: only feature buckets with a non-zero
/// weight for some category are written.
inline void save_scorer(const std::string& path, const LinearClassifierParams& p,
                        std::span<const std::int64_t> categories, std::span<const double> epoch_loss = {}) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index k = 0; k < p.weights.value.cols(); ++k) {
    const auto col = p.weights.value.col(k);
    if (col.isZero(0.0)) continue;
    std::vector<double> v(static_cast<std::size_t>(col.size()));
    for (Eigen::Index c = 0; c < col.size(); ++c) v[static_cast<std::size_t>(c)] = col(c);
    cols.push_back({{"feature", k}, {"weights", std::move(v)}});
  }
  write_json(path,
             nlohmann::json{{"format", "fhirdx.bow_scorer.v1"},
                            {"feature_dim", p.hasher.dim},
                            {"categories", std::vector<std::int64_t>(categories.begin(), categories.end())},
                            {"bias", std::vector<double>(p.bias.value.data(), p.bias.value.data() + p.bias.value.size())},
                            {"columns", std::move(cols)},
                            {"epoch_loss", std::vector<double>(epoch_loss.begin(), epoch_loss.end())}},
             -1);
}

struct ScorerFile {
  LinearClassifierParams params;
  std::vector<std::int64_t> categories;
};

inline ScorerFile load_scorer(const std::string& path) {
  auto j = read_json(path);
  try {
    if (j.at("format") != "fhirdx.bow_scorer.v1")
      throw Error(ErrorCode::MalformedJson, path + ": unsupported scorer format");
    ScorerFile f;
    f.categories = j.at("categories").get<std::vector<std::int64_t>>();
    HasherConfig h{j.at("feature_dim").get<std::size_t>()};
    f.params = LinearClassifierParams(f.categories.size(), h);
    auto bias = j.at("bias").get<std::vector<double>>();
    if (bias.size() != f.categories.size()) throw Error(ErrorCode::ShapeMismatch, path + ": bias length");
    for (std::size_t c = 0; c < bias.size(); ++c) f.params.bias.value(0, static_cast<Eigen::Index>(c)) = bias[c];
    for (const auto& col : j.at("columns")) {
      const auto k = col.at("feature").get<Eigen::Index>();
      auto w = col.at("weights").get<std::vector<double>>();
      if (k < 0 || k >= f.params.weights.value.cols() || w.size() != f.categories.size())
        throw Error(ErrorCode::ShapeMismatch, path + ": weight column out of range");
      for (std::size_t c = 0; c < w.size(); ++c) f.params.weights.value(static_cast<Eigen::Index>(c), k) = w[c];
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
}

}  // namespace fhirdx::notes
