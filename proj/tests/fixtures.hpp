#pragma once

#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/fhir_etl.hpp"
#include "fhirdx/io.hpp"

namespace fhirdx::testing {

/// Table 1 as written down independently of the library: MIMIC-III table ->
/// FHIR resource type, empty for the three unmapped tables.
inline const std::vector<std::pair<std::string, std::string>>& expected_table_mapping() {
  static const std::vector<std::pair<std::string, std::string>> rows = {
      {"patients", "patient"},
      {"admissions", "encounter"},
      {"diagnoses_icd", "encounter"},
      {"icustays", "encounter"},
      {"cptevents", "claim"},
      {"noteevents", "diagnosticReport"},
      {"inputevents_cv", "medicationDispense"},
      {"inputevents_mv", "medicationDispense"},
      {"prescriptions", "medicationRequest"},
      {"chartevents", "observation"},
      {"datetimeevents", "observation"},
      {"labevents", "observation"},
      {"caregivers", "practitioner"},
      {"procedures_icd", "procedure"},
      {"procedureevents_mv", "procedure"},
      {"microbiologyevents", "specimen"},
      {"outputevents", "specimen"},
      {"services", "serviceRequest"},
      {"callout", ""},
      {"transfers", ""},
      {"drgcodes", ""},
  };
  return rows;
}

struct RandomTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string random_text(Rng& rng) {
  static const char* pieces[] = {"alpha", "beta", "x, y", "say \"hi\"", "two\nlines", "  pad ", "42",
                                 "3.5",   "",     "é",    "NULL",       "a;b"};
  std::string s;
  const auto n = rng.range(1, 3);
  for (int i = 0; i < n; ++i) s += pieces[rng.below(std::size(pieces))];
  return s;
}

/// Cells conforming to the table's declared column types, with random empty
/// cells and awkward text, plus an extra undeclared column.
inline RandomTable random_table(fhir::TableKind t, std::size_t n_rows, Rng& rng) {
  RandomTable out;
  auto schema = fhir::table_schema(t);
  for (const auto& c : schema) out.header.emplace_back(c.column);
  out.header.push_back("extra_note");
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<std::string> row;
    for (const auto& c : schema) {
      if (rng.bernoulli(0.1)) {
        row.emplace_back();
        continue;
      }
      switch (c.type) {
        case fhir::ColumnType::text: row.push_back(random_text(rng)); break;
        case fhir::ColumnType::integer: row.push_back(std::to_string(rng.range(-5, 1000000))); break;
        case fhir::ColumnType::decimal: row.push_back(format_double(rng.normal(0, 100))); break;
        case fhir::ColumnType::timestamp: {
          Timestamp ts = 5'000'000'000LL + static_cast<Timestamp>(rng.below(3'000'000'000ULL));
          std::string s = format_timestamp(ts);
          s[10] = ' ';
          row.push_back(s);
          break;
        }
      }
    }
    row.push_back(random_text(rng));
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline void write_table(const std::string& path, const RandomTable& t) {
  CsvWriter w(path);
  w.row(t.header);
  for (const auto& r : t.rows) w.row(r);
}

}  // namespace fhirdx::testing
