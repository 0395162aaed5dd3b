// Chart events -> per-admission (observation type x 4 time bin) tensors.
//
// Bin layout relative to discharge time d (index 0 is oldest):
//   0: (-inf, d-24h]   1: (d-24h, d-16h]   2: (d-16h, d-8h]   3: (d-8h, d]
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/fhir_etl.hpp"
#include "fhirdx/io.hpp"
#include "json.hpp"

namespace fhirdx::chart {

inline constexpr int kBins = 4;
inline constexpr Timestamp kBinWidth = 8 * kHour;

using AdmissionId = std::int64_t;
using ObservationTypeId = std::int64_t;

struct ObservationEvent {
  AdmissionId admission_id = 0;
  ObservationTypeId type_id = 0;
  std::optional<double> value;  // absent when the payload does not parse as a number
  std::string text;             // original payload
  Timestamp charttime = 0;
};

/// Retained observation types in ascending id order, with a reverse index.
class TypeCatalog {
 public:
  TypeCatalog() = default;
  explicit TypeCatalog(std::vector<ObservationTypeId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    for (std::size_t i = 0; i < ids_.size(); ++i) index_[ids_[i]] = i;
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<ObservationTypeId>& ids() const { return ids_; }
  std::optional<std::size_t> index_of(ObservationTypeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  friend bool operator==(const TypeCatalog& a, const TypeCatalog& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<ObservationTypeId> ids_;
  std::unordered_map<ObservationTypeId, std::size_t> index_;
};

/// n_types x 4 grid of values plus a contribution mask, row-major.
struct BinGrid {
  AdmissionId admission_id = 0;
  std::size_t n_types = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  BinGrid() = default;
  BinGrid(AdmissionId id, std::size_t types)
      : admission_id(id), n_types(types), values(types * kBins, 0.0), mask(types * kBins, 0) {}

  double& at(std::size_t type, int bin) { return values[type * kBins + bin]; }
  double at(std::size_t type, int bin) const { return values[type * kBins + bin]; }
  bool masked(std::size_t type, int bin) const { return mask[type * kBins + bin] != 0; }

  friend bool operator==(const BinGrid&, const BinGrid&) = default;
};

/// Per-cell means before normalization.
struct RawBins : BinGrid {
  using BinGrid::BinGrid;
};

/// Z-normalized tensor; unmasked cells hold 0.
struct AdmissionTensor : BinGrid {
  using BinGrid::BinGrid;
};

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::size_t> count;

  std::size_t size() const { return mean.size(); }
  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

// ---------------------------------------------------------------------------

struct FilterResult {
  std::vector<ObservationEvent> retained;
  TypeCatalog catalog;
};

/// Keeps observation types whose values parse as numbers in at least
/// `numeric_fraction` of their rows; the non-parsing rows of a kept type are
/// dropped.
inline FilterResult filter_numeric(std::span<const ObservationEvent> events,
                                   double numeric_fraction = 0.9) {
  std::map<ObservationTypeId, std::pair<std::size_t, std::size_t>> tally;  // numeric, total
  for (const auto& e : events) {
    auto& t = tally[e.type_id];
    if (e.value) ++t.first;
    ++t.second;
  }
  std::vector<ObservationTypeId> kept;
  for (const auto& [id, t] : tally)
    if (static_cast<double>(t.first) >= numeric_fraction * static_cast<double>(t.second))
      kept.push_back(id);
  FilterResult out{{}, TypeCatalog(kept)};
  for (const auto& e : events)
    if (e.value && out.catalog.index_of(e.type_id)) out.retained.push_back(e);
  return out;
}

inline int assign_bin(Timestamp charttime, Timestamp discharge_time) {
  if (charttime > discharge_time)
    throw Error(ErrorCode::EventAfterDischarge,
                format_timestamp(charttime) + " is after discharge " + format_timestamp(discharge_time));
  const Timestamp before = discharge_time - charttime;
  if (before < kBinWidth) return 3;
  if (before < 2 * kBinWidth) return 2;
  if (before < 3 * kBinWidth) return 1;
  return 0;
}

/// Averages one admission's events per (type, bin). Each cell's running mean
/// is taken in sorted order, so the result does not depend on event order.
inline RawBins aggregate_bins(AdmissionId admission_id, std::span<const ObservationEvent> events,
                              Timestamp discharge_time, const TypeCatalog& catalog) {
  std::vector<std::vector<double>> cells(catalog.size() * kBins);
  for (const auto& e : events) {
    if (!e.value) continue;
    auto t = catalog.index_of(e.type_id);
    if (!t)
      throw Error(ErrorCode::CatalogMismatch,
                  "observation type " + std::to_string(e.type_id) + " is not in the catalog");
    cells[*t * kBins + assign_bin(e.charttime, discharge_time)].push_back(*e.value);
  }
  RawBins out(admission_id, catalog.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& c = cells[i];
    if (c.empty()) continue;
    std::sort(c.begin(), c.end());
    double mean = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) mean += (c[k] - mean) / static_cast<double>(k + 1);
    out.values[i] = mean;
    out.mask[i] = 1;
  }
  return out;
}

namespace detail {

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

/// Per-type mean and population standard deviation over every masked cell of
/// the fit set.
inline NormalizationStats fit_normalization(std::span<const RawBins> fit_set, std::size_t n_types) {
  std::vector<detail::CompensatedSum> sums(n_types);
  std::vector<std::size_t> counts(n_types, 0);
  for (const auto& r : fit_set) {
    if (r.n_types != n_types)
      throw Error(ErrorCode::CatalogMismatch, "admission " + std::to_string(r.admission_id) +
                                                  " has " + std::to_string(r.n_types) + " types, expected " +
                                                  std::to_string(n_types));
    for (std::size_t t = 0; t < n_types; ++t)
      for (int b = 0; b < kBins; ++b)
        if (r.masked(t, b)) {
          sums[t].add(r.at(t, b));
          ++counts[t];
        }
  }
  NormalizationStats s;
  s.mean.resize(n_types);
  s.stddev.resize(n_types);
  s.count = counts;
  for (std::size_t t = 0; t < n_types; ++t) {
    if (counts[t] == 0)
      throw Error(ErrorCode::EmptyType, "catalog type index " + std::to_string(t) +
                                            " has no contributing cells in the fit set");
    s.mean[t] = sums[t].value() / static_cast<double>(counts[t]);
  }
  std::vector<detail::CompensatedSum> sq(n_types);
  for (const auto& r : fit_set)
    for (std::size_t t = 0; t < n_types; ++t)
      for (int b = 0; b < kBins; ++b)
        if (r.masked(t, b)) {
          double d = r.at(t, b) - s.mean[t];
          sq[t].add(d * d);
        }
  for (std::size_t t = 0; t < n_types; ++t)
    s.stddev[t] = std::sqrt(sq[t].value() / static_cast<double>(counts[t]));
  return s;
}

/// Masked cells become (x - mean) / stddev; zero-variance types and unmasked
/// cells become 0.
inline AdmissionTensor apply_normalization(const RawBins& raw, const NormalizationStats& stats) {
  if (raw.n_types != stats.size())
    throw Error(ErrorCode::CatalogMismatch, "raw matrix has " + std::to_string(raw.n_types) +
                                                " types, stats cover " + std::to_string(stats.size()));
  AdmissionTensor out(raw.admission_id, raw.n_types);
  out.mask = raw.mask;
  for (std::size_t t = 0; t < raw.n_types; ++t)
    for (int b = 0; b < kBins; ++b)
      if (raw.masked(t, b) && stats.stddev[t] > 0.0)
        out.at(t, b) = (raw.at(t, b) - stats.mean[t]) / stats.stddev[t];
  return out;
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t require_column(const std::vector<std::string>& header, std::string_view name,
                                  const std::string& path) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (to_lower(trim(header[i])) == name) return i;
  throw Error(ErrorCode::SchemaMismatch, path + ": header lacks column " + std::string(name));
}

}  // namespace detail

/// Reads hadm_id -> dischtime from an admissions CSV.
inline std::unordered_map<AdmissionId, Timestamp> load_discharge_times(const std::string& path) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f)) throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
  const auto hadm = detail::require_column(f, "hadm_id", path);
  const auto disch = detail::require_column(f, "dischtime", path);
  const std::size_t width = f.size();
  std::unordered_map<AdmissionId, Timestamp> out;
  std::size_t row = 0;
  while (csv.next(f)) {
    ++row;
    if (f.size() != width)
      throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " arity");
    auto id = parse_int(f[hadm]);
    auto t = parse_timestamp(trim(f[disch]));
    if (!id || !t) throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row));
    out[*id] = *t;
  }
  return out;
}

/// Reads (hadm_id, itemid, charttime, value/valuenum) from a chartevents CSV.
/// valuenum wins when present; otherwise value is tried as a number.
inline std::vector<ObservationEvent> load_chart_events(const std::string& path) {
  CsvReader csv(path);
  std::vector<std::string> f;
  if (!csv.next(f)) throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
  const auto hadm = detail::require_column(f, "hadm_id", path);
  const auto item = detail::require_column(f, "itemid", path);
  const auto time = detail::require_column(f, "charttime", path);
  const auto value = detail::require_column(f, "value", path);
  const auto valuenum = detail::require_column(f, "valuenum", path);
  const std::size_t width = f.size();
  std::vector<ObservationEvent> out;
  std::size_t row = 0;
  while (csv.next(f)) {
    ++row;
    if (f.size() != width)
      throw Error(ErrorCode::MalformedRow, path + ": row " + std::to_string(row) + " arity");
    ObservationEvent e;
    auto id = parse_int(f[hadm]);
    auto it = parse_int(f[item]);
    auto t = parse_timestamp(trim(f[time]));
    if (!id || !it || !t) continue;  // rows without admission, item or time cannot be binned
    e.admission_id = *id;
    e.type_id = *it;
    e.charttime = *t;
    e.value = parse_double(f[valuenum]);
    if (!e.value) e.value = parse_double(f[value]);
    e.text = std::move(f[value]);
    out.push_back(std::move(e));
  }
  return out;
}

/// Same as load_chart_events but from a FHIR observation collection.
inline std::vector<ObservationEvent> events_from_collection(const fhir::ResourceCollection& coll) {
  std::vector<ObservationEvent> out;
  for (const auto& r : coll.records) {
    const auto* enc = r.find("encounter");
    const auto* code = r.find("code");
    const auto* time = r.find("effectiveDateTime");
    if (!enc || !code || !time) continue;
    const auto* id = std::get_if<std::int64_t>(enc);
    const auto* item = std::get_if<std::int64_t>(code);
    const auto* t = std::get_if<fhir::TimestampValue>(time);
    if (!id || !item || !t) continue;
    ObservationEvent e{*id, *item, std::nullopt, {}, t->seconds};
    if (const auto* q = r.find("valueQuantity"))
      if (const auto* d = std::get_if<double>(q)) e.value = *d;
    if (const auto* s = r.find("valueString"))
      if (const auto* str = std::get_if<std::string>(s)) {
        e.text = *str;
        if (!e.value) e.value = parse_double(*str);
      }
    out.push_back(std::move(e));
  }
  return out;
}

struct PreprocessResult {
  TypeCatalog catalog;
  std::vector<RawBins> admissions;  // ascending admission id; only admissions with events
  std::size_t dropped_after_discharge = 0;
  std::size_t dropped_unknown_admission = 0;
  std::size_t dropped_non_numeric = 0;
};

/// filter_numeric -> reject post-discharge events -> aggregate_bins per
/// admission.
inline PreprocessResult preprocess(std::span<const ObservationEvent> events,
                                   const std::unordered_map<AdmissionId, Timestamp>& discharge,
                                   double numeric_fraction = 0.9) {
  PreprocessResult res;
  std::vector<ObservationEvent> admissible;
  admissible.reserve(events.size());
  for (const auto& e : events) {
    auto it = discharge.find(e.admission_id);
    if (it == discharge.end()) {
      ++res.dropped_unknown_admission;
    } else if (e.charttime > it->second) {
      ++res.dropped_after_discharge;
    } else {
      admissible.push_back(e);
    }
  }
  FilterResult filtered = filter_numeric(admissible, numeric_fraction);
  res.dropped_non_numeric = admissible.size() - filtered.retained.size();
  res.catalog = std::move(filtered.catalog);

  std::map<AdmissionId, std::vector<ObservationEvent>> by_admission;
  for (auto& e : filtered.retained) by_admission[e.admission_id].push_back(std::move(e));
  for (const auto& [id, evs] : by_admission)
    res.admissions.push_back(aggregate_bins(id, evs, discharge.at(id), res.catalog));
  return res;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json grid_to_json(const BinGrid& g) {
  nlohmann::json values = nlohmann::json::array(), mask = nlohmann::json::array();
  for (std::size_t t = 0; t < g.n_types; ++t) {
    nlohmann::json vr = nlohmann::json::array(), mr = nlohmann::json::array();
    for (int b = 0; b < kBins; ++b) {
      vr.push_back(g.at(t, b));
      mr.push_back(g.masked(t, b) ? 1 : 0);
    }
    values.push_back(std::move(vr));
    mask.push_back(std::move(mr));
  }
  return {{"admission_id", g.admission_id}, {"values", std::move(values)}, {"mask", std::move(mask)}};
}

template <class Grid>
Grid grid_from_json(const nlohmann::json& j) {
  try {
    const auto& values = j.at("values");
    const auto& mask = j.at("mask");
    Grid g(j.at("admission_id").get<AdmissionId>(), values.size());
    if (mask.size() != values.size())
      throw Error(ErrorCode::MalformedJson, "mask/value row count differ");
    for (std::size_t t = 0; t < g.n_types; ++t) {
      if (values[t].size() != kBins || mask[t].size() != kBins)
        throw Error(ErrorCode::MalformedJson, "tensor rows must have 4 bins");
      for (int b = 0; b < kBins; ++b) {
        g.at(t, b) = values[t][b].get<double>();
        g.mask[t * kBins + b] = mask[t][b].get<int>() != 0;
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("tensor: ") + e.what());
  }
}

inline nlohmann::json stats_to_json(const NormalizationStats& s, const TypeCatalog& catalog) {
  return {{"catalog", catalog.ids()}, {"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
}

inline NormalizationStats stats_from_json(const nlohmann::json& j) {
  try {
    NormalizationStats s{j.at("mean").get<std::vector<double>>(),
                         j.at("stddev").get<std::vector<double>>(),
                         j.at("count").get<std::vector<std::size_t>>()};
    if (s.stddev.size() != s.mean.size() || s.count.size() != s.mean.size())
      throw Error(ErrorCode::MalformedJson, "stats arrays differ in length");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("stats: ") + e.what());
  }
}

struct TensorFile {
  TypeCatalog catalog;
  std::vector<RawBins> admissions;
};

inline void write_tensor_file(const std::string& path, const TypeCatalog& catalog,
                              std::span<const RawBins> admissions) {
  nlohmann::json adm = nlohmann::json::array();
  for (const auto& a : admissions) adm.push_back(grid_to_json(a));
  write_json(path, nlohmann::json{{"format", "fhirdx.raw_bins.v1"},
                                  {"catalog", catalog.ids()},
                                  {"admissions", std::move(adm)}},
             -1);
}

inline TensorFile read_tensor_file(const std::string& path) {
  auto j = read_json(path);
  TensorFile tf;
  try {
    tf.catalog = TypeCatalog(j.at("catalog").get<std::vector<ObservationTypeId>>());
    for (const auto& a : j.at("admissions")) {
      auto g = grid_from_json<RawBins>(a);
      if (g.n_types != tf.catalog.size())
        throw Error(ErrorCode::CatalogMismatch, path + ": tensor width differs from catalog");
      tf.admissions.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
  return tf;
}

}  // namespace fhirdx::chart
