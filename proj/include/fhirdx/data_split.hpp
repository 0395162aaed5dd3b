// Iterative stratification of multi-label samples into train/val/test.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "fhirdx/label_codec.hpp"
#include "json.hpp"

namespace fhirdx::split {

using labels::AdmissionId;
using labels::LabelVector;

enum class Partition : std::uint8_t { train = 0, val = 1, test = 2 };
inline constexpr std::size_t kPartitions = 3;

inline const char* to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "?";
}

inline Partition parse_partition(std::string_view s) {
  if (s == "train") return Partition::train;
  if (s == "val") return Partition::val;
  if (s == "test") return Partition::test;
  throw Error(ErrorCode::MalformedJson, "unknown partition \"" + std::string(s) + "\"");
}

struct SplitSpec {
  std::array<double, kPartitions> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool refine = true;  // swap pass after the greedy assignment

  void validate() const {
    double sum = 0.0;
    for (double r : ratios) {
      if (!(r > 0.0 && r < 1.0))
        throw Error(ErrorCode::InvalidSpec, "split ratios must lie in (0,1)");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::InvalidSpec, "split ratios must sum to 1");
  }
};

struct SplitResult {
  std::vector<Partition> assignment;  // aligned with the input vectors
  std::map<AdmissionId, Partition> by_admission;
  std::array<std::size_t, kPartitions> sizes{};
  std::vector<std::array<std::size_t, kPartitions>> label_counts;  // [label][partition]

  std::vector<std::size_t> members(Partition p) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == p) out.push_back(i);
    return out;
  }
};

/// Largest-remainder apportionment of `total` over `ratios`. Equal remainders
/// go to the larger ratio, then to the lower partition index.
inline std::array<std::int64_t, kPartitions> apportion(std::size_t total,
                                                       const std::array<double, kPartitions>& ratios) {
  std::array<std::int64_t, kPartitions> out{};
  std::array<double, kPartitions> rem{};
  std::int64_t assigned = 0;
  for (std::size_t j = 0; j < kPartitions; ++j) {
    double exact = ratios[j] * static_cast<double>(total);
    out[j] = static_cast<std::int64_t>(std::floor(exact + 1e-9));
    rem[j] = exact - static_cast<double>(out[j]);
    assigned += out[j];
  }
  std::array<std::size_t, kPartitions> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(rem[a] - rem[b]) > 1e-9) return rem[a] > rem[b];
    return ratios[a] > ratios[b];
  });
  for (std::size_t k = 0; assigned < static_cast<std::int64_t>(total); ++k, ++assigned)
    ++out[order[k % kPartitions]];
  return out;
}

/// Greedy iterative stratification:
///  1. desired sample counts per partition and desired positives per
///     (label, partition), both by largest-remainder rounding;
///  2. repeatedly take the label with the fewest unassigned positive samples;
///  3. send each of its unassigned samples to the partition with the largest
///     remaining desire for that label, ties by remaining capacity, then by
///     seeded random choice, and debit every label the sample carries;
///  4. samples without labels fill remaining capacity last;
///  5. (refine) seeded random swaps between partitions, kept only when they
///     lower the squared distance of per-label counts from the step-1 desired
///     counts. Sizes never change.
inline SplitResult iterative_stratified_split(std::span<const LabelVector> vectors,
                                              const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = vectors.size();
  if (n < kPartitions) throw Error(ErrorCode::InvalidSpec, "need at least 3 samples to split");
  const std::size_t n_labels = vectors.front().bits.size();
  for (const auto& v : vectors)
    if (v.bits.size() != n_labels) throw Error(ErrorCode::InvalidSpec, "label vectors differ in width");

  std::vector<std::vector<std::size_t>> label_samples(n_labels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n_labels; ++l)
      if (vectors[i][l]) label_samples[l].push_back(i);
  std::vector<std::size_t> remaining(n_labels);
  bool any_label = false;
  for (std::size_t l = 0; l < n_labels; ++l) {
    remaining[l] = label_samples[l].size();
    any_label = any_label || remaining[l] > 0;
  }
  if (!any_label) throw Error(ErrorCode::InvalidSpec, "no sample carries any label");

  auto capacity = apportion(n, spec.ratios);
  std::vector<std::array<std::int64_t, kPartitions>> desired(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l) desired[l] = apportion(remaining[l], spec.ratios);

  Rng rng(spec.seed);
  constexpr std::uint8_t kUnassigned = 0xff;
  std::vector<std::uint8_t> part(n, kUnassigned);

  auto place = [&](std::size_t i, std::size_t j) {
    part[i] = static_cast<std::uint8_t>(j);
    --capacity[j];
    for (std::size_t l = 0; l < n_labels; ++l)
      if (vectors[i][l]) {
        --desired[l][j];
        --remaining[l];
      }
  };
  auto pick = [&](auto&& primary) {
    std::array<std::size_t, kPartitions> tied{};
    std::size_t n_tied = 0;
    std::int64_t best_p = std::numeric_limits<std::int64_t>::min();
    std::int64_t best_c = std::numeric_limits<std::int64_t>::min();
    for (std::size_t j = 0; j < kPartitions; ++j) {
      if (capacity[j] <= 0) continue;
      const std::int64_t p = primary(j), c = capacity[j];
      if (p > best_p || (p == best_p && c > best_c)) {
        best_p = p;
        best_c = c;
        n_tied = 0;
      }
      if (p == best_p && c == best_c) tied[n_tied++] = j;
    }
    return n_tied == 1 ? tied[0] : tied[rng.below(n_tied)];
  };

  for (;;) {
    std::size_t label = n_labels;
    for (std::size_t l = 0; l < n_labels; ++l)
      if (remaining[l] > 0 && (label == n_labels || remaining[l] < remaining[label])) label = l;
    if (label == n_labels) break;
    for (std::size_t i : label_samples[label]) {
      if (part[i] != kUnassigned) continue;
      place(i, pick([&](std::size_t j) { return desired[label][j]; }));
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (part[i] == kUnassigned) place(i, pick([](std::size_t) { return std::int64_t{0}; }));

  if (spec.refine) {
    std::vector<std::array<std::int64_t, kPartitions>> target(n_labels), count(n_labels);
    for (std::size_t l = 0; l < n_labels; ++l) {
      target[l] = apportion(label_samples[l].size(), spec.ratios);
      count[l] = {};
      for (std::size_t i : label_samples[l]) ++count[l][part[i]];
    }
    std::vector<std::size_t> labelled;
    for (std::size_t i = 0; i < n; ++i)
      if (std::find(vectors[i].bits.begin(), vectors[i].bits.end(), 1) != vectors[i].bits.end())
        labelled.push_back(i);
    // change in sum of squared excess when i moves a -> b and k moves b -> a
    auto gain = [&](std::size_t i, std::size_t k) {
      const std::size_t a = part[i], b = part[k];
      std::int64_t delta = 0;
      for (std::size_t l = 0; l < n_labels; ++l) {
        const int d = int(vectors[i].bits[l] != 0) - int(vectors[k].bits[l] != 0);
        if (d == 0) continue;
        const std::int64_t ea = count[l][a] - target[l][a], eb = count[l][b] - target[l][b];
        delta += (ea - d) * (ea - d) - ea * ea + (eb + d) * (eb + d) - eb * eb;
      }
      return delta;
    };
    constexpr int kTries = 8, kMaxRounds = 100;
    for (int round = 0; round < kMaxRounds && labelled.size() > 1; ++round) {
      bool improved = false;
      rng.shuffle(labelled);
      for (std::size_t i : labelled)
        for (int t = 0; t < kTries; ++t) {
          const std::size_t k = labelled[rng.below(labelled.size())];
          if (part[k] == part[i] || gain(i, k) >= 0) continue;
          const std::size_t a = part[i], b = part[k];
          for (std::size_t l = 0; l < n_labels; ++l) {
            const int d = int(vectors[i].bits[l] != 0) - int(vectors[k].bits[l] != 0);
            count[l][a] -= d;
            count[l][b] += d;
          }
          std::swap(part[i], part[k]);
          improved = true;
          break;
        }
      if (!improved) break;
    }
  }

  SplitResult res;
  res.assignment.resize(n);
  res.label_counts.assign(n_labels, {});
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<Partition>(part[i]);
    res.assignment[i] = p;
    res.by_admission[vectors[i].admission_id] = p;
    ++res.sizes[part[i]];
    for (std::size_t l = 0; l < n_labels; ++l)
      if (vectors[i][l]) ++res.label_counts[l][part[i]];
  }
  return res;
}

struct DeviationEntry {
  std::size_t label = 0;
  Partition partition = Partition::train;
  std::size_t support = 0;
  double global_fraction = 0.0;
  double partition_fraction = 0.0;
  double deviation = 0.0;
  bool flagged = false;
};

struct DistributionReport {
  std::vector<DeviationEntry> entries;
  double max_deviation = 0.0;
  std::size_t flagged = 0;
};

/// |partition positive fraction - global positive fraction| for every label
/// with at least `min_support` positives and every non-empty partition.
inline DistributionReport verify_distribution(const SplitResult& result,
                                              std::span<const LabelVector> vectors, double tolerance,
                                              std::size_t min_support = 1) {
  DistributionReport rep;
  if (vectors.empty()) return rep;
  const std::size_t n = vectors.size();
  const std::size_t n_labels = vectors.front().bits.size();
  std::array<std::size_t, kPartitions> sizes{};
  std::vector<std::array<std::size_t, kPartitions>> counts(n_labels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(result.assignment.at(i));
    ++sizes[j];
    for (std::size_t l = 0; l < n_labels; ++l)
      if (vectors[i][l]) ++counts[l][j];
  }
  for (std::size_t l = 0; l < n_labels; ++l) {
    std::size_t support = counts[l][0] + counts[l][1] + counts[l][2];
    if (support < min_support || support == 0) continue;
    const double global = static_cast<double>(support) / static_cast<double>(n);
    for (std::size_t j = 0; j < kPartitions; ++j) {
      if (sizes[j] == 0) continue;
      DeviationEntry e;
      e.label = l;
      e.partition = static_cast<Partition>(j);
      e.support = support;
      e.global_fraction = global;
      e.partition_fraction = static_cast<double>(counts[l][j]) / static_cast<double>(sizes[j]);
      e.deviation = std::abs(e.partition_fraction - global);
      e.flagged = e.deviation > tolerance;
      rep.max_deviation = std::max(rep.max_deviation, e.deviation);
      rep.flagged += e.flagged;
      rep.entries.push_back(e);
    }
  }
  return rep;
}

inline void write_assignment(const std::string& path, const SplitResult& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, p] : r.by_admission) j[std::to_string(id)] = to_string(p);
  write_json(path, j);
}

inline std::map<AdmissionId, Partition> read_assignment(const std::string& path) {
  auto j = read_json(path);
  if (!j.is_object()) throw Error(ErrorCode::MalformedJson, path + ": expected an object");
  std::map<AdmissionId, Partition> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto id = parse_int(it.key());
    if (!id || !it->is_string()) throw Error(ErrorCode::MalformedJson, path + ": bad entry " + it.key());
    out[*id] = parse_partition(it->get<std::string>());
  }
  return out;
}

}  // namespace fhirdx::split
