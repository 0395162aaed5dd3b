// ICD-9-CM -> CCS crosswalk, multi-label admission targets, binary projections
// and majority-class under-sampling.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "json.hpp"

namespace fhirdx::labels {

using AdmissionId = std::int64_t;

/// ICD codes are compared without surrounding quotes, whitespace or dots.
inline std::string normalize_icd(std::string_view raw) {
  std::string out;
  for (char c : trim(raw))
    if (c != '\'' && c != '"' && c != '.' && !std::isspace(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

class CcsCrosswalk {
 public:
  CcsCrosswalk() = default;

  /// Builds from (icd code, ccs category) pairs. Categories are indexed in
  /// ascending numeric order.
  static CcsCrosswalk from_pairs(std::span<const std::pair<std::string, std::int64_t>> pairs) {
    CcsCrosswalk x;
    std::map<std::string, std::int64_t> code_to_cat;
    for (const auto& [code, cat] : pairs) {
      auto [it, inserted] = code_to_cat.emplace(normalize_icd(code), cat);
      if (!inserted && it->second != cat)
        throw Error(ErrorCode::DuplicateIcdCode, "ICD code " + code + " maps to CCS " +
                                                     std::to_string(it->second) + " and " +
                                                     std::to_string(cat));
    }
    std::vector<std::int64_t> cats;
    for (const auto& [code, cat] : code_to_cat) cats.push_back(cat);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    x.categories_ = cats;
    std::unordered_map<std::int64_t, std::size_t> cat_index;
    for (std::size_t i = 0; i < cats.size(); ++i) cat_index[cats[i]] = i;
    for (const auto& [code, cat] : code_to_cat) x.code_index_[code] = cat_index[cat];
    return x;
  }

  std::size_t category_count() const { return categories_.size(); }
  std::size_t code_count() const { return code_index_.size(); }
  const std::vector<std::int64_t>& categories() const { return categories_; }

  std::optional<std::size_t> index_of_code(const std::string& code) const {
    auto it = code_index_.find(code);
    if (it == code_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> index_of_category(std::int64_t ccs) const {
    auto it = std::lower_bound(categories_.begin(), categories_.end(), ccs);
    if (it == categories_.end() || *it != ccs) return std::nullopt;
    return static_cast<std::size_t>(it - categories_.begin());
  }

 private:
  std::vector<std::int64_t> categories_;
  std::unordered_map<std::string, std::size_t> code_index_;
};


/// Loads the single-level CCS crosswalk layout: first column the quoted ICD
/// code, second column the CCS category number, further columns ignored.
/// Lines before the first parsable data line are treated as headers.
inline CcsCrosswalk load_crosswalk(const std::string& path) {
  CsvReader csv(path, '\'');
  std::vector<std::string> f;
  std::vector<std::pair<std::string, std::int64_t>> pairs;
  bool in_data = false;
  while (csv.next(f)) {
    if (f.size() == 1 && trim(f[0]).empty()) continue;
    std::optional<std::int64_t> cat;
    std::string code;
    if (f.size() >= 2) {
      code = normalize_icd(f[0]);
      std::string c = normalize_icd(f[1]);
      cat = parse_int(c);
    }
    if (!cat || code.empty()) {
      if (!in_data) continue;
      throw Error(ErrorCode::MalformedCrosswalk,
                  path + ": line " + std::to_string(csv.line()) + " is not a code,category row");
    }
    in_data = true;
    pairs.emplace_back(std::move(code), *cat);
  }
  if (pairs.empty()) throw Error(ErrorCode::MalformedCrosswalk, path + ": no data rows");
  return CcsCrosswalk::from_pairs(pairs);
}

struct LabelVector {
  AdmissionId admission_id = 0;
  std::vector<std::uint8_t> bits;

  bool operator[](std::size_t c) const { return bits[c] != 0; }
  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

struct AdmissionDiagnoses {
  AdmissionId admission_id = 0;
  std::vector<std::string> icd_codes;
};

struct EncodeResult {
  std::vector<LabelVector> vectors;
  std::map<std::string, std::size_t> unknown_codes;  // code -> occurrences

  std::size_t unknown_total() const {
    std::size_t n = 0;
    for (const auto& [c, k] : unknown_codes) n += k;
    return n;
  }
};

/// Bit c is set iff the admission has at least one code in category c.
/// Codes missing from the crosswalk are tallied and skipped.
inline EncodeResult encode_labels(std::span<const AdmissionDiagnoses> diagnoses,
                                  const CcsCrosswalk& xwalk) {
  EncodeResult res;
  res.vectors.reserve(diagnoses.size());
  for (const auto& d : diagnoses) {
    LabelVector v{d.admission_id, std::vector<std::uint8_t>(xwalk.category_count(), 0)};
    for (const auto& raw : d.icd_codes) {
      std::string code = normalize_icd(raw);
      if (auto idx = xwalk.index_of_code(code)) v.bits[*idx] = 1;
      else ++res.unknown_codes[code];
    }
    res.vectors.push_back(std::move(v));
  }
  return res;
}

inline std::vector<std::pair<AdmissionId, bool>> binary_labels(std::span<const LabelVector> vectors,
                                                               std::size_t category) {
  std::vector<std::pair<AdmissionId, bool>> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (category >= v.bits.size())
      throw Error(ErrorCode::CategoryOutOfRange, "category " + std::to_string(category) +
                                                     " >= " + std::to_string(v.bits.size()));
    out.emplace_back(v.admission_id, v[category]);
  }
  return out;
}

/// Drops majority-class samples uniformly at random until both classes have
/// the minority count. Kept samples stay in input order.
inline std::vector<std::pair<AdmissionId, bool>> undersample(
    std::span<const std::pair<AdmissionId, bool>> samples, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].second ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw Error(ErrorCode::DegenerateClassBalance,
                pos.empty() ? "no positive samples" : "no negative samples");
  auto& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(keep);
  std::vector<std::size_t> idx(pos);
  idx.insert(idx.end(), neg.begin(), neg.end());
  std::sort(idx.begin(), idx.end());
  std::vector<std::pair<AdmissionId, bool>> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Groups a diagnoses_icd CSV by hadm_id (ascending). `admissions`, when
/// given, adds code-less entries for admissions with no diagnosis rows.
inline std::vector<AdmissionDiagnoses> load_diagnoses(const std::string& path,
                                                      std::span<const AdmissionId> admissions = {}) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f)) throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
  std::optional<std::size_t> hadm, code;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto n = to_lower(trim(f[i]));
    if (n == "hadm_id") hadm = i;
    if (n == "icd9_code") code = i;
  }
  if (!hadm || !code) throw Error(ErrorCode::SchemaMismatch, path + ": needs hadm_id and icd9_code");
  const std::size_t width = f.size();
  std::map<AdmissionId, std::vector<std::string>> grouped;
  for (auto a : admissions) grouped[a];
  std::size_t row = 0;
  while (csv.next(f)) {
    ++row;
    if (f.size() != width)
      throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " arity");
    auto id = parse_int(f[*hadm]);
    if (!id) throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " hadm_id");
    auto& codes = grouped[*id];
    if (!trim(f[*code]).empty()) codes.push_back(f[*code]);
  }
  std::vector<AdmissionDiagnoses> out;
  for (auto& [id, codes] : grouped) out.push_back({id, std::move(codes)});
  return out;
}

struct LabelFile {
  std::vector<std::int64_t> categories;
  std::vector<LabelVector> vectors;
};

inline void write_label_file(const std::string& path, const CcsCrosswalk& xwalk,
                             const EncodeResult& enc) {
  nlohmann::json adm = nlohmann::json::array();
  for (const auto& v : enc.vectors) {
    std::vector<std::size_t> pos;
    for (std::size_t c = 0; c < v.bits.size(); ++c)
      if (v[c]) pos.push_back(c);
    adm.push_back({{"admission_id", v.admission_id}, {"positives", pos}});
  }
  write_json(path, nlohmann::json{{"format", "fhirdx.labels.v1"},
                                  {"categories", xwalk.categories()},
                                  {"admissions", std::move(adm)},
                                  {"unknown_codes", enc.unknown_codes}});
}

inline LabelFile read_label_file(const std::string& path) {
  auto j = read_json(path);
  LabelFile lf;
  try {
    lf.categories = j.at("categories").get<std::vector<std::int64_t>>();
    const std::size_t c = lf.categories.size();
    for (const auto& a : j.at("admissions")) {
      LabelVector v{a.at("admission_id").get<AdmissionId>(), std::vector<std::uint8_t>(c, 0)};
      for (auto p : a.at("positives").get<std::vector<std::size_t>>()) {
        if (p >= c) throw Error(ErrorCode::CategoryOutOfRange, path + ": positive index out of range");
        v.bits[p] = 1;
      }
      lf.vectors.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
  return lf;
}

}  // namespace fhirdx::labels
