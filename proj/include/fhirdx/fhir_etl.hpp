// MIMIC-III table -> flat FHIR resource collections.
//
// Every source row becomes one single-level JSON object carrying
// "resource_type", "mimic_source_table" and one attribute per column. Column
// names are rendered as the FHIR element they correspond to where one exists
// (admittime -> periodStart) and as "mimic_<column>" otherwise. Timestamps are
// canonicalized to ISO-8601 seconds precision; empty cells become null.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "json.hpp"

namespace fhirdx::fhir {

enum class TableKind {
  patients,
  admissions,
  diagnoses_icd,
  icustays,
  cptevents,
  noteevents,
  inputevents_cv,
  inputevents_mv,
  prescriptions,
  chartevents,
  datetimeevents,
  labevents,
  caregivers,
  procedures_icd,
  procedureevents_mv,
  microbiologyevents,
  outputevents,
  services,
  callout,
  transfers,
  drgcodes,
};

inline constexpr std::array<TableKind, 21> kAllTables = {
    TableKind::patients,       TableKind::admissions,         TableKind::diagnoses_icd,
    TableKind::icustays,       TableKind::cptevents,          TableKind::noteevents,
    TableKind::inputevents_cv, TableKind::inputevents_mv,     TableKind::prescriptions,
    TableKind::chartevents,    TableKind::datetimeevents,     TableKind::labevents,
    TableKind::caregivers,     TableKind::procedures_icd,     TableKind::procedureevents_mv,
    TableKind::microbiologyevents, TableKind::outputevents,   TableKind::services,
    TableKind::callout,        TableKind::transfers,          TableKind::drgcodes,
};

inline constexpr std::array<std::string_view, 11> kResourceTypes = {
    "patient",     "encounter",   "claim",     "diagnosticReport", "medicationDispense",
    "medicationRequest", "observation", "practitioner", "procedure", "specimen",
    "serviceRequest",
};

inline bool is_resource_type(std::string_view s) {
  return std::find(kResourceTypes.begin(), kResourceTypes.end(), s) != kResourceTypes.end();
}

inline std::string_view table_name(TableKind t) {
  switch (t) {
    case TableKind::patients: return "patients";
    case TableKind::admissions: return "admissions";
    case TableKind::diagnoses_icd: return "diagnoses_icd";
    case TableKind::icustays: return "icustays";
    case TableKind::cptevents: return "cptevents";
    case TableKind::noteevents: return "noteevents";
    case TableKind::inputevents_cv: return "inputevents_cv";
    case TableKind::inputevents_mv: return "inputevents_mv";
    case TableKind::prescriptions: return "prescriptions";
    case TableKind::chartevents: return "chartevents";
    case TableKind::datetimeevents: return "datetimeevents";
    case TableKind::labevents: return "labevents";
    case TableKind::caregivers: return "caregivers";
    case TableKind::procedures_icd: return "procedures_icd";
    case TableKind::procedureevents_mv: return "procedureevents_mv";
    case TableKind::microbiologyevents: return "microbiologyevents";
    case TableKind::outputevents: return "outputevents";
    case TableKind::services: return "services";
    case TableKind::callout: return "callout";
    case TableKind::transfers: return "transfers";
    case TableKind::drgcodes: return "drgcodes";
  }
  return "";
}

/// Canonical MIMIC-III names, case-insensitive. Also accepts the short
/// spellings "microbiology" and "service".
inline std::optional<TableKind> parse_table_kind(std::string_view name) {
  const std::string n = to_lower(trim(name));
  if (n == "microbiology") return TableKind::microbiologyevents;
  if (n == "service") return TableKind::services;
  for (TableKind t : kAllTables)
    if (table_name(t) == n) return t;
  return std::nullopt;
}

inline std::optional<std::string_view> map_table_kind(TableKind t) {
  switch (t) {
    case TableKind::patients: return "patient";
    case TableKind::admissions:
    case TableKind::diagnoses_icd:
    case TableKind::icustays: return "encounter";
    case TableKind::cptevents: return "claim";
    case TableKind::noteevents: return "diagnosticReport";
    case TableKind::inputevents_cv:
    case TableKind::inputevents_mv: return "medicationDispense";
    case TableKind::prescriptions: return "medicationRequest";
    case TableKind::chartevents:
    case TableKind::datetimeevents:
    case TableKind::labevents: return "observation";
    case TableKind::caregivers: return "practitioner";
    case TableKind::procedures_icd:
    case TableKind::procedureevents_mv: return "procedure";
    case TableKind::microbiologyevents:
    case TableKind::outputevents: return "specimen";
    case TableKind::services: return "serviceRequest";
    case TableKind::callout:
    case TableKind::transfers:
    case TableKind::drgcodes: return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Values and records
// ---------------------------------------------------------------------------

struct TimestampValue {
  Timestamp seconds = 0;
  friend bool operator==(const TimestampValue&, const TimestampValue&) = default;
};

using Value = std::variant<std::monostate, std::string, std::int64_t, double, TimestampValue>;

struct ResourceRecord {
  std::string resource_type;
  std::vector<std::pair<std::string, Value>> attributes;

  const Value* find(std::string_view name) const {
    for (const auto& [k, v] : attributes)
      if (k == name) return &v;
    return nullptr;
  }

  friend bool operator==(const ResourceRecord&, const ResourceRecord&) = default;
};

struct ResourceCollection {
  std::string resource_type;
  std::vector<ResourceRecord> records;
  std::optional<TableKind> source_table;

  friend bool operator==(const ResourceCollection&, const ResourceCollection&) = default;
};

// ---------------------------------------------------------------------------
// Table schemas
// ---------------------------------------------------------------------------

enum class ColumnType { text, integer, decimal, timestamp };

struct ColumnSpec {
  std::string_view column;  // lower-case MIMIC column name
  std::string_view attribute;
  ColumnType type;
};

namespace detail {

using enum ColumnType;

// Prefix shorthand: an empty attribute means "mimic_" + column.
inline constexpr ColumnSpec kPatients[] = {
    {"row_id", "", integer},          {"subject_id", "id", integer},
    {"gender", "gender", text},       {"dob", "birthDate", timestamp},
    {"dod", "deceasedDateTime", timestamp}, {"dod_hosp", "", timestamp},
    {"dod_ssn", "", timestamp},       {"expire_flag", "", integer},
};

inline constexpr ColumnSpec kAdmissions[] = {
    {"row_id", "", integer},
    {"subject_id", "subject", integer},
    {"hadm_id", "id", integer},
    {"admittime", "periodStart", timestamp},
    {"dischtime", "periodEnd", timestamp},
    {"deathtime", "", timestamp},
    {"admission_type", "type", text},
    {"admission_location", "hospitalizationAdmitSource", text},
    {"discharge_location", "hospitalizationDischargeDisposition", text},
    {"insurance", "", text},
    {"language", "", text},
    {"religion", "", text},
    {"marital_status", "", text},
    {"ethnicity", "", text},
    {"edregtime", "", timestamp},
    {"edouttime", "", timestamp},
    {"diagnosis", "reasonCode", text},
    {"hospital_expire_flag", "", integer},
    {"has_chartevents_data", "", integer},
};

inline constexpr ColumnSpec kDiagnosesIcd[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "id", integer},       {"seq_num", "diagnosisRank", integer},
    {"icd9_code", "diagnosisCondition", text},
};

inline constexpr ColumnSpec kIcustays[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "partOf", integer},   {"icustay_id", "id", integer},
    {"dbsource", "", text},           {"first_careunit", "", text},
    {"last_careunit", "", text},      {"first_wardid", "", integer},
    {"last_wardid", "", integer},     {"intime", "periodStart", timestamp},
    {"outtime", "periodEnd", timestamp}, {"los", "length", decimal},
};

inline constexpr ColumnSpec kCptevents[] = {
    {"row_id", "", integer},          {"subject_id", "patient", integer},
    {"hadm_id", "encounter", integer}, {"costcenter", "", text},
    {"chartdate", "created", timestamp}, {"cpt_cd", "code", text},
    {"cpt_number", "", integer},      {"cpt_suffix", "", text},
    {"ticket_id_seq", "", integer},   {"sectionheader", "", text},
    {"subsectionheader", "", text},   {"description", "", text},
};

inline constexpr ColumnSpec kNoteevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"chartdate", "", timestamp},
    {"charttime", "effectiveDateTime", timestamp}, {"storetime", "issued", timestamp},
    {"category", "category", text},   {"description", "", text},
    {"cgid", "performer", integer},   {"iserror", "", text},
    {"text", "presentedForm", text},
};

inline constexpr ColumnSpec kInputeventsCv[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"charttime", "whenHandedOver", timestamp}, {"itemid", "medication", integer},
    {"amount", "quantityValue", decimal}, {"amountuom", "quantityUnit", text},
    {"rate", "", decimal},            {"rateuom", "", text},
    {"storetime", "", timestamp},     {"cgid", "performer", integer},
    {"orderid", "", integer},         {"linkorderid", "", integer},
    {"stopped", "", text},            {"newbottle", "", integer},
    {"originalamount", "", decimal},  {"originalamountuom", "", text},
    {"originalroute", "", text},      {"originalrate", "", decimal},
    {"originalrateuom", "", text},    {"originalsite", "", text},
};

inline constexpr ColumnSpec kInputeventsMv[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"starttime", "whenPrepared", timestamp}, {"endtime", "whenHandedOver", timestamp},
    {"itemid", "medication", integer}, {"amount", "quantityValue", decimal},
    {"amountuom", "quantityUnit", text}, {"rate", "", decimal},
    {"rateuom", "", text},            {"storetime", "", timestamp},
    {"cgid", "performer", integer},   {"orderid", "", integer},
    {"linkorderid", "", integer},     {"ordercategoryname", "", text},
    {"secondaryordercategoryname", "", text}, {"ordercomponenttypedescription", "", text},
    {"ordercategorydescription", "", text}, {"patientweight", "", decimal},
    {"totalamount", "", decimal},     {"totalamountuom", "", text},
    {"isopenbag", "", integer},       {"continueinnextdept", "", integer},
    {"cancelreason", "", integer},    {"statusdescription", "status", text},
    {"comments_editedby", "", text},  {"comments_canceledby", "", text},
    {"comments_date", "", timestamp}, {"originalamount", "", decimal},
    {"originalrate", "", decimal},
};

inline constexpr ColumnSpec kPrescriptions[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"startdate", "dispenseRequestValidityStart", timestamp},
    {"enddate", "dispenseRequestValidityEnd", timestamp},
    {"drug_type", "", text},          {"drug", "medication", text},
    {"drug_name_poe", "", text},      {"drug_name_generic", "", text},
    {"formulary_drug_cd", "", text},  {"gsn", "", text},
    {"ndc", "", text},                {"prod_strength", "", text},
    {"dose_val_rx", "", text},        {"dose_unit_rx", "", text},
    {"form_val_disp", "", text},      {"form_unit_disp", "", text},
    {"route", "dosageInstructionRoute", text},
};

inline constexpr ColumnSpec kChartevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"itemid", "code", integer},      {"charttime", "effectiveDateTime", timestamp},
    {"storetime", "issued", timestamp}, {"cgid", "performer", integer},
    {"value", "valueString", text},   {"valuenum", "valueQuantity", decimal},
    {"valueuom", "valueUnit", text},  {"warning", "", integer},
    {"error", "", integer},           {"resultstatus", "", text},
    {"stopped", "", text},
};

inline constexpr ColumnSpec kDatetimeevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"itemid", "code", integer},      {"charttime", "effectiveDateTime", timestamp},
    {"storetime", "issued", timestamp}, {"cgid", "performer", integer},
    {"value", "valueDateTime", timestamp}, {"valueuom", "valueUnit", text},
    {"warning", "", integer},         {"error", "", integer},
    {"resultstatus", "", text},       {"stopped", "", text},
};

inline constexpr ColumnSpec kLabevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"itemid", "code", integer},
    {"charttime", "effectiveDateTime", timestamp}, {"value", "valueString", text},
    {"valuenum", "valueQuantity", decimal}, {"valueuom", "valueUnit", text},
    {"flag", "interpretation", text},
};

inline constexpr ColumnSpec kCaregivers[] = {
    {"row_id", "", integer},
    {"cgid", "id", integer},
    {"label", "qualificationCode", text},
    {"description", "qualificationText", text},
};

inline constexpr ColumnSpec kProceduresIcd[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"seq_num", "", integer},
    {"icd9_code", "code", text},
};

inline constexpr ColumnSpec kProcedureeventsMv[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"starttime", "performedPeriodStart", timestamp},
    {"endtime", "performedPeriodEnd", timestamp},
    {"itemid", "code", integer},      {"value", "", decimal},
    {"valueuom", "", text},           {"location", "bodySite", text},
    {"locationcategory", "", text},   {"storetime", "", timestamp},
    {"cgid", "performer", integer},   {"orderid", "", integer},
    {"linkorderid", "", integer},     {"ordercategoryname", "", text},
    {"secondaryordercategoryname", "", text}, {"ordercategorydescription", "", text},
    {"isopenbag", "", integer},       {"continueinnextdept", "", integer},
    {"cancelreason", "", integer},    {"statusdescription", "status", text},
    {"comments_editedby", "", text},  {"comments_canceledby", "", text},
    {"comments_date", "", timestamp},
};

inline constexpr ColumnSpec kMicrobiologyevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"chartdate", "", timestamp},
    {"charttime", "collectedDateTime", timestamp}, {"spec_itemid", "type", integer},
    {"spec_type_desc", "typeText", text}, {"org_itemid", "", integer},
    {"org_name", "", text},           {"isolate_num", "", integer},
    {"ab_itemid", "", integer},       {"ab_name", "", text},
    {"dilution_text", "", text},      {"dilution_comparison", "", text},
    {"dilution_value", "", decimal},  {"interpretation", "", text},
};

inline constexpr ColumnSpec kOutputevents[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"icustay_id", "", integer},
    {"charttime", "collectedDateTime", timestamp}, {"itemid", "type", integer},
    {"value", "collectedQuantityValue", decimal}, {"valueuom", "collectedQuantityUnit", text},
    {"storetime", "", timestamp},     {"cgid", "collector", integer},
    {"stopped", "", text},            {"newbottle", "", integer},
    {"iserror", "", integer},
};

inline constexpr ColumnSpec kServices[] = {
    {"row_id", "", integer},          {"subject_id", "subject", integer},
    {"hadm_id", "encounter", integer}, {"transfertime", "authoredOn", timestamp},
    {"prev_service", "", text},       {"curr_service", "code", text},
};

}  // namespace detail

/// Declared columns of a mapped table; empty for the unmapped ones.
inline std::span<const ColumnSpec> table_schema(TableKind t) {
  using namespace detail;
  switch (t) {
    case TableKind::patients: return kPatients;
    case TableKind::admissions: return kAdmissions;
    case TableKind::diagnoses_icd: return kDiagnosesIcd;
    case TableKind::icustays: return kIcustays;
    case TableKind::cptevents: return kCptevents;
    case TableKind::noteevents: return kNoteevents;
    case TableKind::inputevents_cv: return kInputeventsCv;
    case TableKind::inputevents_mv: return kInputeventsMv;
    case TableKind::prescriptions: return kPrescriptions;
    case TableKind::chartevents: return kChartevents;
    case TableKind::datetimeevents: return kDatetimeevents;
    case TableKind::labevents: return kLabevents;
    case TableKind::caregivers: return kCaregivers;
    case TableKind::procedures_icd: return kProceduresIcd;
    case TableKind::procedureevents_mv: return kProcedureeventsMv;
    case TableKind::microbiologyevents: return kMicrobiologyevents;
    case TableKind::outputevents: return kOutputevents;
    case TableKind::services: return kServices;
    default: return {};
  }
}

inline std::string attribute_name(const ColumnSpec& c) {
  return c.attribute.empty() ? "mimic_" + std::string(c.column) : std::string(c.attribute);
}

/// Column names of a table's declared schema in order, lower-case.
inline std::vector<std::string> schema_columns(TableKind t) {
  std::vector<std::string> out;
  for (const auto& c : table_schema(t)) out.emplace_back(c.column);
  return out;
}

// ---------------------------------------------------------------------------
// JSON conversion
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ResourceRecord& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  j["resource_type"] = r.resource_type;
  for (const auto& [k, v] : r.attributes) {
    std::visit(
        [&, &key = k](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::monostate>) j[key] = nullptr;
          else if constexpr (std::is_same_v<T, TimestampValue>) j[key] = format_timestamp(x.seconds);
          else j[key] = x;
        },
        v);
  }
  return j;
}

namespace detail {

inline bool is_canonical_timestamp(std::string_view s) {
  return s.size() == 19 && s[10] == 'T' && parse_timestamp(s).has_value();
}

}  // namespace detail

/// Inverse of to_json. Strings in canonical "YYYY-MM-DDTHH:MM:SS" form are read
/// back as timestamps.
inline ResourceRecord record_from_json(const nlohmann::ordered_json& j, std::size_t index) {
  if (!j.is_object())
    throw Error(ErrorCode::MalformedJson, "record " + std::to_string(index) + " is not an object");
  auto rt = j.find("resource_type");
  if (rt == j.end() || !rt->is_string())
    throw Error(ErrorCode::MalformedJson, "record " + std::to_string(index) + " lacks resource_type");
  ResourceRecord r;
  r.resource_type = rt->get<std::string>();
  if (!is_resource_type(r.resource_type))
    throw Error(ErrorCode::UnknownResourceType,
                "record " + std::to_string(index) + " has resource_type \"" + r.resource_type + "\"");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "resource_type") continue;
    const auto& v = it.value();
    Value val;
    if (v.is_null()) val = std::monostate{};
    else if (v.is_number_integer()) val = v.get<std::int64_t>();
    else if (v.is_number_float()) val = v.get<double>();
    else if (v.is_string()) {
      const auto& s = v.get_ref<const std::string&>();
      if (detail::is_canonical_timestamp(s)) val = TimestampValue{*parse_timestamp(s)};
      else val = s;
    } else {
      throw Error(ErrorCode::MalformedJson, "record " + std::to_string(index) + " attribute \"" +
                                                it.key() + "\" is not a scalar");
    }
    r.attributes.emplace_back(it.key(), std::move(val));
  }
  return r;
}

// ---------------------------------------------------------------------------
// transform / read_collection
// ---------------------------------------------------------------------------

namespace detail {

struct BoundColumn {
  std::size_t csv_index;
  std::string attribute;
  ColumnType type;
  std::string column;
};

inline Value parse_cell(const std::string& raw, const BoundColumn& col, std::size_t row) {
  if (raw.empty()) return std::monostate{};
  auto bad = [&](const char* what) {
    return Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": column " + col.column +
                                              " value \"" + raw + "\" is not " + what);
  };
  switch (col.type) {
    case ColumnType::text: return raw;
    case ColumnType::integer: {
      auto v = parse_int(raw);
      if (!v) throw bad("an integer");
      return *v;
    }
    case ColumnType::decimal: {
      auto v = parse_double(raw);
      if (!v) throw bad("a decimal");
      return *v;
    }
    case ColumnType::timestamp: {
      auto v = parse_timestamp(trim(raw));
      if (!v) throw bad("a timestamp");
      return TimestampValue{*v};
    }
  }
  return std::monostate{};
}

}  // namespace detail

/// Streams `input_path` row by row into a JSON array at `output_path`, calling
/// `sink` (if set) for every record. Returns the record count. Memory use is
/// one row plus the output buffers.
inline std::size_t transform_stream(const std::string& input_path, const std::string& output_path,
                                    TableKind table,
                                    const std::function<void(ResourceRecord&&)>& sink = {}) {
  auto resource = map_table_kind(table);
  if (!resource)
    throw Error(ErrorCode::UnmappedTable,
                std::string(table_name(table)) + " has no corresponding FHIR resource type");

  CsvReader csv(input_path);
  std::vector<std::string> fields;
  if (!csv.next(fields)) throw Error(ErrorCode::SchemaMismatch, input_path + ": missing header");

  std::vector<std::string> header;
  for (auto& f : fields) header.push_back(to_lower(trim(f)));

  std::vector<detail::BoundColumn> bound;
  std::vector<bool> used(header.size(), false);
  for (const auto& spec : table_schema(table)) {
    auto it = std::find(header.begin(), header.end(), spec.column);
    if (it == header.end())
      throw Error(ErrorCode::SchemaMismatch,
                  input_path + ": header lacks required column " + std::string(spec.column));
    auto idx = static_cast<std::size_t>(it - header.begin());
    used[idx] = true;
    bound.push_back({idx, attribute_name(spec), spec.type, std::string(spec.column)});
  }
  for (std::size_t i = 0; i < header.size(); ++i)
    if (!used[i]) bound.push_back({i, "mimic_" + header[i], ColumnType::text, header[i]});

  const std::string source(table_name(table));
  OutputFile out(output_path);
  out.write("[");
  std::size_t count = 0;
  while (csv.next(fields)) {
    const std::size_t row = count + 1;
    // A blank trailing line yields a single empty field.
    if (fields.size() == 1 && fields[0].empty() && header.size() > 1) continue;
    if (fields.size() != header.size())
      throw Error(ErrorCode::MalformedRow,
                  "row " + std::to_string(row) + " (line " + std::to_string(csv.line()) + ") has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    ResourceRecord rec;
    rec.resource_type = std::string(*resource);
    rec.attributes.reserve(bound.size() + 1);
    rec.attributes.emplace_back("mimic_source_table", source);
    for (const auto& col : bound)
      rec.attributes.emplace_back(col.attribute, detail::parse_cell(fields[col.csv_index], col, row));
    out.write(count == 0 ? "\n" : ",\n");
    out.write(to_json(rec).dump());
    ++count;
    if (sink) sink(std::move(rec));
  }
  out.write(count == 0 ? "]\n" : "\n]\n");
  out.close();
  return count;
}

/// Persists the collection and also returns it in memory.
inline ResourceCollection transform(const std::string& input_path, const std::string& output_path,
                                    TableKind table) {
  ResourceCollection coll;
  auto resource = map_table_kind(table);
  coll.resource_type = resource ? std::string(*resource) : std::string();
  coll.source_table = table;
  transform_stream(input_path, output_path, table,
                   [&](ResourceRecord&& r) { coll.records.push_back(std::move(r)); });
  return coll;
}

inline ResourceCollection read_collection(const std::string& path) {
  nlohmann::ordered_json j = read_ordered_json(path);
  if (!j.is_array()) throw Error(ErrorCode::MalformedJson, path + ": top level is not an array");
  ResourceCollection coll;
  coll.records.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    ResourceRecord r = record_from_json(j[i], i);
    if (i == 0) coll.resource_type = r.resource_type;
    else if (r.resource_type != coll.resource_type)
      throw Error(ErrorCode::MalformedJson, path + ": mixed resource types in one collection");
    coll.records.push_back(std::move(r));
  }
  if (!coll.records.empty())
    if (const Value* v = coll.records.front().find("mimic_source_table"))
      if (const auto* s = std::get_if<std::string>(v)) coll.source_table = parse_table_kind(*s);
  return coll;
}

}  // namespace fhirdx::fhir
