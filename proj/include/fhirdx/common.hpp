// Shared error type, timestamps, hashing and the deterministic RNG used by
// every stage of the toolkit.
#pragma once

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fhirdx {

enum class ErrorCode {
  // usage / config
  UsageError,
  ConfigError,
  InvalidConfig,
  InvalidSpec,
  // data / schema
  IoFailure,
  UnmappedTable,
  SchemaMismatch,
  MalformedRow,
  MalformedJson,
  UnknownResourceType,
  EventAfterDischarge,
  EmptyType,
  CatalogMismatch,
  DuplicateIcdCode,
  MalformedCrosswalk,
  CategoryOutOfRange,
  DegenerateClassBalance,
  EmptyPartition,
  UnknownAdmission,
  EmptyChunkSet,
  DegenerateLabels,
  // numeric
  ShapeMismatch,
  NonFiniteValue,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnmappedTable: return "UnmappedTable";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::UnknownResourceType: return "UnknownResourceType";
    case ErrorCode::EventAfterDischarge: return "EventAfterDischarge";
    case ErrorCode::EmptyType: return "EmptyType";
    case ErrorCode::CatalogMismatch: return "CatalogMismatch";
    case ErrorCode::DuplicateIcdCode: return "DuplicateIcdCode";
    case ErrorCode::MalformedCrosswalk: return "MalformedCrosswalk";
    case ErrorCode::CategoryOutOfRange: return "CategoryOutOfRange";
    case ErrorCode::DegenerateClassBalance: return "DegenerateClassBalance";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::UnknownAdmission: return "UnknownAdmission";
    case ErrorCode::EmptyChunkSet: return "EmptyChunkSet";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
  }
  return "Unknown";
}

/// Process exit status for an error family: 2 usage, 3 config, 4 data/schema,
/// 5 numeric fault.
inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::UsageError: return 2;
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSpec: return 3;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteValue: return 5;
    default: return 4;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Timestamps: seconds since 1970-01-01T00:00:00, proleptic Gregorian, no zone.
// MIMIC shifts dates into the 2100-2200 range, well inside int64 seconds.
// ---------------------------------------------------------------------------

using Timestamp = std::int64_t;

inline constexpr Timestamp kHour = 3600;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" and "YYYY-MM-DDTHH:MM:SS".
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h = 0, mi = 0, sec = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' ||
      !detail::parse_fixed_int(s, 8, 2, d))
    return std::nullopt;
  if (s.size() != 10) {
    if (s.size() != 19 || (s[10] != ' ' && s[10] != 'T') ||
        !detail::parse_fixed_int(s, 11, 2, h) || s[13] != ':' ||
        !detail::parse_fixed_int(s, 14, 2, mi) || s[16] != ':' ||
        !detail::parse_fixed_int(s, 17, 2, sec))
      return std::nullopt;
    if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  Timestamp days = sys_days{ymd}.time_since_epoch().count();
  return days * 86400 + h * 3600 + mi * 60 + sec;
}

/// Canonical ISO-8601 rendering with seconds precision.
inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  Timestamp days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
  Timestamp rem = t - days * 86400;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                static_cast<int>(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-stage seed: the stage name is hashed into the global seed.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
  return splitmix64(global_seed ^ fnv1a64(stage));
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Rng: xoshiro256** seeded through splitmix64. The distributions are written
// out here so that streams are bit-identical across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(x);
    }
    has_spare_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

// ---------------------------------------------------------------------------
// Small string helpers
// ---------------------------------------------------------------------------

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Strict full-string parse; surrounding whitespace is allowed.
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(tmp.c_str(), &end, 10);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
  return static_cast<std::int64_t>(v);
}

}  // namespace fhirdx
