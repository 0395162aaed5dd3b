// Seeded synthetic MIMIC-III-shaped tables: patients, admissions,
// diagnoses_icd, chartevents, noteevents, plus an ICD-9 -> CCS crosswalk in
// the AHRQ single-quoted layout and a manifest.
//
// Category k < planted_categories carries a planted signal: its positive
// admissions see observation type (k mod n_observation_types) shifted by
// signal_strength standard deviations, and their notes contain "mark<k>".
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "json.hpp"

namespace fhirdx::synth {

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_patients = 100;
  std::size_t n_admissions = 120;
  std::size_t n_observation_types = 450;
  std::size_t n_ccs_categories = 281;
  double positive_rate_target = 0.043;
  double signal_strength = 3.0;
  std::size_t planted_categories = 0;  // 0 plants every category
  std::size_t notes_min = 2;           // non-discharge notes per admission
  std::size_t notes_max = 4;
  std::size_t vocabulary_size = 2000;
  std::size_t codes_per_category = 3;
  double observation_presence = 0.8;
  std::size_t events_min = 1;  // per present observation type
  std::size_t events_max = 3;
  double marker_noise = 0.02;  // chance a negative admission's notes carry the marker anyway

  std::size_t planted() const {
    return planted_categories == 0 ? n_ccs_categories : std::min(planted_categories, n_ccs_categories);
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, "synth: " + m); };
    if (n_patients == 0) bad("n_patients must be positive");
    if (n_admissions < n_patients) bad("n_admissions must be >= n_patients");
    if (n_observation_types == 0 || n_ccs_categories == 0) bad("type and category counts must be positive");
    if (!(positive_rate_target > 0.0 && positive_rate_target < 1.0)) bad("positive_rate_target must lie in (0,1)");
    if (!(signal_strength >= 0.0)) bad("signal_strength must be non-negative");
    if (notes_min > notes_max || events_min > events_max || events_min == 0) bad("empty count range");
    if (vocabulary_size == 0 || codes_per_category == 0) bad("vocabulary and code counts must be positive");
    if (!(observation_presence > 0.0 && observation_presence <= 1.0)) bad("observation_presence must lie in (0,1]");
    if (!(marker_noise >= 0.0 && marker_noise < 1.0)) bad("marker_noise must lie in [0,1)");
  }
};

struct PlantedSignal {
  std::size_t category_index = 0;
  std::size_t observation_type_index = 0;
  double mean_shift = 0.0;
  std::string marker_token;
};

struct ManifestEntry {
  std::string table;
  std::string path;
  std::size_t rows = 0;
};

struct SynthManifest {
  std::vector<ManifestEntry> files;
  std::vector<PlantedSignal> planted;

  const ManifestEntry* find(std::string_view table) const {
    for (const auto& f : files)
      if (f.table == table) return &f;
    return nullptr;
  }
};

inline constexpr std::int64_t kSubjectBase = 10000;
inline constexpr std::int64_t kAdmissionBase = 100000;
inline constexpr std::int64_t kItemBase = 200;
inline constexpr std::int64_t kTextItemBase = 100;  // two text-valued item ids
inline constexpr std::string_view kUnknownCode = "99999";

inline std::int64_t ccs_id(std::size_t k) { return static_cast<std::int64_t>(k) + 1; }
inline std::string icd_code(std::size_t k, std::size_t j) {
  return "S" + std::to_string(ccs_id(k)) + "0" + std::to_string(j);
}
inline std::string marker_token(std::size_t k) { return "mark" + std::to_string(k); }

inline std::vector<PlantedSignal> planted_signals(const SynthConfig& cfg) {
  std::vector<PlantedSignal> out;
  for (std::size_t k = 0; k < cfg.planted(); ++k)
    out.push_back({k, k % cfg.n_observation_types, cfg.signal_strength, marker_token(k)});
  return out;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Admission {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  Timestamp admit = 0;
  Timestamp discharge = 0;
  std::vector<std::uint8_t> labels;
};

inline std::string sentence(Rng& rng, const SynthConfig& cfg, std::size_t n_tokens) {
  std::string s;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (i) s += rng.bernoulli(0.05) ? "\n" : " ";
    if (rng.bernoulli(0.01)) s += "Dr.";
    else s += "w" + std::to_string(rng.below(cfg.vocabulary_size));
  }
  return s;
}

}  // namespace detail

/// Writes the tables into `output_dir` (created if missing) and returns the
/// manifest, also written as manifest.json. Output is a pure function of cfg.
inline SynthManifest generate(const SynthConfig& cfg, const std::string& output_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + output_dir + ": " + ec.message());
  auto path = [&](const char* name) { return (fs::path(output_dir) / name).string(); };

  SynthManifest manifest;
  manifest.planted = planted_signals(cfg);
  const std::size_t C = cfg.n_ccs_categories, T = cfg.n_observation_types;

  // Crosswalk.
  {
    OutputFile out(path("ccs_crosswalk.csv"));
    out.write("'ICD-9-CM CODE','CCS CATEGORY','CCS CATEGORY DESCRIPTION'\n");
    std::size_t rows = 0;
    for (std::size_t k = 0; k < C; ++k)
      for (std::size_t j = 0; j < cfg.codes_per_category; ++j) {
        std::string code = icd_code(k, j), cat = std::to_string(ccs_id(k));
        code.resize(std::max<std::size_t>(code.size(), 8), ' ');
        cat.resize(std::max<std::size_t>(cat.size(), 6), ' ');
        out.write("'" + code + "','" + cat + "','Synthetic category " + std::to_string(ccs_id(k)) + "'\n");
        ++rows;
      }
    out.close();
    manifest.files.push_back({"ccs_crosswalk", path("ccs_crosswalk.csv"), rows});
  }

  Rng rng(derive_seed(cfg.seed, "synth"));

  // Patients.
  std::vector<Timestamp> dob(cfg.n_patients);
  {
    CsvWriter w(path("patients.csv"));
    w.row({"row_id", "subject_id", "gender", "dob", "dod", "dod_hosp", "dod_ssn", "expire_flag"});
    const Timestamp base = *parse_timestamp("2050-01-01");
    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
      dob[i] = base + static_cast<Timestamp>(rng.below(50 * 365)) * 24 * kHour;
      w.row({std::to_string(i + 1), std::to_string(kSubjectBase + static_cast<std::int64_t>(i)),
             rng.bernoulli(0.5) ? "F" : "M", format_timestamp(dob[i]), "", "", "", "0"});
    }
    w.close();
    manifest.files.push_back({"patients", path("patients.csv"), cfg.n_patients});
  }

  // Admissions: every patient gets one, the rest go to random patients.
  std::vector<std::size_t> owner(cfg.n_admissions);
  for (std::size_t j = 0; j < cfg.n_admissions; ++j)
    owner[j] = j < cfg.n_patients ? j : static_cast<std::size_t>(rng.below(cfg.n_patients));
  std::vector<detail::Admission> adm(cfg.n_admissions);
  {
    CsvWriter w(path("admissions.csv"));
    w.row({"row_id", "subject_id", "hadm_id", "admittime", "dischtime", "deathtime", "admission_type",
           "admission_location", "discharge_location", "insurance", "language", "religion", "marital_status",
           "ethnicity", "edregtime", "edouttime", "diagnosis", "hospital_expire_flag", "has_chartevents_data"});
    static const char* kTypes[] = {"EMERGENCY", "ELECTIVE", "URGENT"};
    for (std::size_t j = 0; j < cfg.n_admissions; ++j) {
      auto& a = adm[j];
      a.hadm_id = kAdmissionBase + static_cast<std::int64_t>(j);
      a.subject_id = kSubjectBase + static_cast<std::int64_t>(owner[j]);
      a.admit = dob[owner[j]] + (18 * 365 + static_cast<Timestamp>(rng.below(60 * 365))) * 24 * kHour +
                static_cast<Timestamp>(rng.below(24 * 3600));
      a.discharge = a.admit + static_cast<Timestamp>(rng.uniform(36.0, 240.0) * static_cast<double>(kHour));
      a.labels.assign(C, 0);
      for (std::size_t k = 0; k < C; ++k) a.labels[k] = rng.bernoulli(cfg.positive_rate_target);
      w.row({std::to_string(j + 1), std::to_string(a.subject_id), std::to_string(a.hadm_id),
             format_timestamp(a.admit), format_timestamp(a.discharge), "", kTypes[rng.below(3)],
             "EMERGENCY ROOM ADMIT", "HOME", "Medicare", "ENGL", "NOT SPECIFIED", "SINGLE", "WHITE", "", "",
             "SYNTHETIC", "0", "1"});
    }
    w.close();
    manifest.files.push_back({"admissions", path("admissions.csv"), cfg.n_admissions});
  }

  // Diagnoses.
  {
    CsvWriter w(path("diagnoses_icd.csv"));
    w.row({"row_id", "subject_id", "hadm_id", "seq_num", "icd9_code"});
    std::size_t row = 0;
    for (const auto& a : adm) {
      std::size_t seq = 0;
      auto emit = [&](const std::string& code) {
        w.row({std::to_string(++row), std::to_string(a.subject_id), std::to_string(a.hadm_id),
               std::to_string(++seq), code});
      };
      for (std::size_t k = 0; k < C; ++k)
        if (a.labels[k]) emit(icd_code(k, static_cast<std::size_t>(rng.below(cfg.codes_per_category))));
      if (rng.bernoulli(0.05)) emit(std::string(kUnknownCode));
    }
    w.close();
    manifest.files.push_back({"diagnoses_icd", path("diagnoses_icd.csv"), row});
  }

  // Chart events.
  {
    std::vector<double> type_mean(T), type_sd(T);
    for (std::size_t t = 0; t < T; ++t) {
      type_mean[t] = rng.uniform(-50.0, 150.0);
      type_sd[t] = rng.uniform(1.0, 20.0);
    }
    std::vector<std::vector<std::size_t>> shifted_by(T);  // type -> planted categories
    for (const auto& p : manifest.planted) shifted_by[p.observation_type_index].push_back(p.category_index);

    CsvWriter w(path("chartevents.csv"));
    w.row({"row_id", "subject_id", "hadm_id", "icustay_id", "itemid", "charttime", "storetime", "cgid", "value",
           "valuenum", "valueuom", "warning", "error", "resultstatus", "stopped"});
    std::size_t row = 0;
    static const char* kTextValues[] = {"Normal", "Abnormal", "Not assessed"};
    for (const auto& a : adm) {
      const double span = static_cast<double>(a.discharge - a.admit);
      auto when = [&] { return a.admit + static_cast<Timestamp>(rng.uniform() * span); };
      for (std::size_t t = 0; t < T; ++t) {
        if (!rng.bernoulli(cfg.observation_presence)) continue;
        double shift = 0.0;
        for (auto k : shifted_by[t])
          if (a.labels[k]) shift += cfg.signal_strength;
        const auto n = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(cfg.events_min),
                                                          static_cast<std::int64_t>(cfg.events_max)));
        for (std::size_t e = 0; e < n; ++e) {
          const Timestamp ts = when();
          const std::string v = detail::fmt_num(rng.normal(type_mean[t] + shift * type_sd[t], type_sd[t]));
          w.row({std::to_string(++row), std::to_string(a.subject_id), std::to_string(a.hadm_id), "",
                 std::to_string(kItemBase + static_cast<std::int64_t>(t)), format_timestamp(ts),
                 format_timestamp(ts + 600), "", v, v, "units", "0", "0", "", ""});
        }
      }
      for (std::int64_t item = kTextItemBase; item < kTextItemBase + 2; ++item) {
        const Timestamp ts = when();
        w.row({std::to_string(++row), std::to_string(a.subject_id), std::to_string(a.hadm_id), "",
               std::to_string(item), format_timestamp(ts), format_timestamp(ts + 600), "",
               kTextValues[rng.below(3)], "", "", "0", "0", "", ""});
      }
    }
    w.close();
    manifest.files.push_back({"chartevents", path("chartevents.csv"), row});
  }

  // Notes: an early note within 24h of admission, further notes anywhere in
  // the stay, and one discharge summary dated on the discharge day.
  {
    CsvWriter w(path("noteevents.csv"));
    w.row({"row_id", "subject_id", "hadm_id", "chartdate", "charttime", "storetime", "category", "description",
           "cgid", "iserror", "text"});
    static const char* kCategories[] = {"Nursing", "Radiology", "Physician ", "ECG", "Nursing/other"};
    std::size_t row = 0;
    for (const auto& a : adm) {
      std::vector<std::string> markers;
      if (cfg.signal_strength > 0.0)
        for (const auto& p : manifest.planted)
          if (a.labels[p.category_index] || rng.bernoulli(cfg.marker_noise)) markers.push_back(p.marker_token);
      auto text = [&](bool marked) {
        std::string s = detail::sentence(rng, cfg, static_cast<std::size_t>(rng.range(30, 120)));
        if (marked)
          for (const auto& m : markers) s += " " + m + " " + detail::sentence(rng, cfg, 3);
        return s;
      };
      const auto n_notes = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(cfg.notes_min),
                                                              static_cast<std::int64_t>(cfg.notes_max)));
      const double span = static_cast<double>(a.discharge - a.admit);
      for (std::size_t i = 0; i < n_notes; ++i) {
        const Timestamp ts = i == 0 ? a.admit + static_cast<Timestamp>(rng.uniform() * 24.0 * kHour)
                                    : a.admit + static_cast<Timestamp>(rng.uniform() * span);
        w.row({std::to_string(++row), std::to_string(a.subject_id), std::to_string(a.hadm_id),
               format_timestamp(ts - ts % (24 * kHour)), format_timestamp(ts), format_timestamp(ts + 900),
               kCategories[rng.below(5)], "Report", "", "", text(i == 0)});
      }
      w.row({std::to_string(++row), std::to_string(a.subject_id), std::to_string(a.hadm_id),
             format_timestamp(a.discharge - a.discharge % (24 * kHour)), "", "", "Discharge summary", "Report",
             "", "", text(true)});
    }
    w.close();
    manifest.files.push_back({"noteevents", path("noteevents.csv"), row});
  }

  nlohmann::ordered_json j;
  j["format"] = "fhirdx.synth_manifest.v1";
  j["seed"] = cfg.seed;
  auto files = nlohmann::ordered_json::array();
  for (const auto& f : manifest.files)
    files.push_back({{"table", f.table}, {"path", fs::path(f.path).filename().string()}, {"rows", f.rows}});
  j["files"] = std::move(files);
  auto planted = nlohmann::ordered_json::array();
  for (const auto& p : manifest.planted)
    planted.push_back({{"category_index", p.category_index},
                       {"ccs_category", ccs_id(p.category_index)},
                       {"observation_type_index", p.observation_type_index},
                       {"itemid", kItemBase + static_cast<std::int64_t>(p.observation_type_index)},
                       {"mean_shift", p.mean_shift},
                       {"marker_token", p.marker_token}});
  j["planted"] = std::move(planted);
  write_json(path("manifest.json"), j);
  return manifest;
}

}  // namespace fhirdx::synth
