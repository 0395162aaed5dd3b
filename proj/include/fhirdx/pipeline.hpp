// File-to-file pipeline stages, the end-to-end `pipeline` run and the per
// invocation run manifest.
//
// Stage seeds are derived from one global seed: derive_seed(seed, stage) with
// stage names "synth", "split", "deep_observer", "note_scorer".
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fhirdx/attention_viz.hpp"
#include "fhirdx/chart_preprocess.hpp"
#include "fhirdx/common.hpp"
#include "fhirdx/data_split.hpp"
#include "fhirdx/deep_observer.hpp"
#include "fhirdx/fhir_etl.hpp"
#include "fhirdx/io.hpp"
#include "fhirdx/label_codec.hpp"
#include "fhirdx/metrics.hpp"
#include "fhirdx/note_pipeline.hpp"
#include "fhirdx/prediction_file.hpp"
#include "fhirdx/synth_gen.hpp"
#include "json.hpp"

namespace fhirdx::pipeline {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed, std::string config_text)
      : command_(std::move(command)), seed_(seed), config_(std::move(config_text)) {}

  void input(const std::string& path) {
    if (std::find(inputs_.begin(), inputs_.end(), path) == inputs_.end()) inputs_.push_back(path);
  }
  void output(const std::string& path) { outputs_.push_back(path); }
  void note(const std::string& key, ordered_json value) { summary_[key] = std::move(value); }

  std::uint64_t config_hash() const { return fnv1a64(config_); }

  /// Artifact path -> FNV-1a of its bytes.
  std::map<std::string, std::string> output_hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& p : outputs_) out[p] = hex64(hash_file(p));
    return out;
  }

  void write(const std::string& path) const {
    ordered_json j;
    j["format"] = "fhirdx.run_manifest.v1";
    j["command"] = command_;
    j["seed"] = seed_;
    j["config_hash"] = hex64(config_hash());
    j["config"] = config_;
    auto files = [](const std::vector<std::string>& paths) {
      auto arr = ordered_json::array();
      for (const auto& p : paths) {
        ordered_json e;
        e["path"] = p;
        e["fnv1a64"] = fs::exists(p) ? hex64(hash_file(p)) : "";
        arr.push_back(std::move(e));
      }
      return arr;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["summary"] = summary_;
    const auto now = std::chrono::system_clock::now();
    j["created_at"] = format_timestamp(
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
    write_json(path, j);
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string config_;
  std::vector<std::string> inputs_, outputs_;
  ordered_json summary_ = ordered_json::object();
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline bool is_json_path(const std::string& p) {
  return ends_with(p, ".json") || ends_with(p, ".json.gz");
}

inline ordered_json run_transform(const std::string& table, const std::string& in, const std::string& out) {
  auto kind = fhir::parse_table_kind(table);
  if (!kind) throw Error(ErrorCode::UsageError, "unknown table \"" + table + "\"");
  std::size_t n = fhir::transform_stream(in, out, *kind, [](const fhir::ResourceRecord&) {});
  ordered_json s;
  s["table"] = fhir::table_name(*kind);
  s["resource_type"] = *fhir::map_table_kind(*kind);
  s["records"] = n;
  return s;
}

/// hadm_id -> dischtime from an admissions CSV or an encounter collection.
inline std::unordered_map<chart::AdmissionId, Timestamp> discharge_times(const std::string& path) {
  if (!is_json_path(path)) return chart::load_discharge_times(path);
  std::unordered_map<chart::AdmissionId, Timestamp> out;
  for (const auto& r : fhir::read_collection(path).records) {
    const auto* id = r.find("id");
    const auto* end = r.find("periodEnd");
    if (!id || !end || !std::holds_alternative<std::int64_t>(*id) ||
        !std::holds_alternative<fhir::TimestampValue>(*end))
      throw Error(ErrorCode::SchemaMismatch, path + ": encounter without id or periodEnd");
    out[std::get<std::int64_t>(*id)] = std::get<fhir::TimestampValue>(*end).seconds;
  }
  return out;
}

inline ordered_json run_preprocess(const std::string& chart_path, const std::string& admissions_path,
                                   const std::string& out, double numeric_fraction = 0.9) {
  auto discharge = discharge_times(admissions_path);
  auto events = is_json_path(chart_path) ? chart::events_from_collection(fhir::read_collection(chart_path))
                                         : chart::load_chart_events(chart_path);
  auto res = chart::preprocess(events, discharge, numeric_fraction);
  chart::write_tensor_file(out, res.catalog, res.admissions);
  ordered_json s;
  s["events"] = events.size();
  s["observation_types"] = res.catalog.size();
  s["admissions"] = res.admissions.size();
  s["dropped_after_discharge"] = res.dropped_after_discharge;
  s["dropped_unknown_admission"] = res.dropped_unknown_admission;
  s["dropped_non_numeric"] = res.dropped_non_numeric;
  return s;
}

inline ordered_json run_labels(const std::string& crosswalk, const std::string& diagnoses,
                               const std::string& admissions, const std::string& out) {
  auto xwalk = labels::load_crosswalk(crosswalk);
  std::vector<labels::AdmissionId> ids;
  if (!admissions.empty()) {
    for (const auto& [id, t] : discharge_times(admissions)) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
  }
  auto enc = labels::encode_labels(labels::load_diagnoses(diagnoses, ids), xwalk);
  labels::write_label_file(out, xwalk, enc);
  std::size_t positives = 0;
  for (const auto& v : enc.vectors) positives += v.positives();
  ordered_json s;
  s["admissions"] = enc.vectors.size();
  s["categories"] = xwalk.category_count();
  s["positive_ratio"] = enc.vectors.empty() ? 0.0
                                             : static_cast<double>(positives) /
                                                   static_cast<double>(enc.vectors.size() * xwalk.category_count());
  s["unknown_codes"] = enc.unknown_total();
  return s;
}

inline ordered_json run_split(const std::string& labels_path, const split::SplitSpec& spec, const std::string& out,
                              double tolerance = 0.02, std::size_t min_support = 50) {
  auto lf = labels::read_label_file(labels_path);
  auto res = split::iterative_stratified_split(lf.vectors, spec);
  split::write_assignment(out, res);
  auto rep = split::verify_distribution(res, lf.vectors, tolerance, min_support);
  ordered_json s;
  s["train"] = res.sizes[0];
  s["val"] = res.sizes[1];
  s["test"] = res.sizes[2];
  s["max_label_deviation"] = rep.max_deviation;
  s["flagged_labels"] = rep.flagged;
  return s;
}

namespace detail {

struct Joined {
  std::vector<chart::RawBins> raw;
  nn::Matrix y;
  std::vector<std::size_t> train, val, test;
};

inline Joined join(chart::TensorFile& tf, const labels::LabelFile& lf,
                   const std::map<std::int64_t, split::Partition>& asg) {
  std::map<std::int64_t, const labels::LabelVector*> by_id;
  for (const auto& v : lf.vectors) by_id[v.admission_id] = &v;
  Joined j;
  for (auto& r : tf.admissions) {
    auto lv = by_id.find(r.admission_id);
    auto p = asg.find(r.admission_id);
    if (lv == by_id.end() || p == asg.end()) continue;
    const std::size_t i = j.raw.size();
    (p->second == split::Partition::train ? j.train : p->second == split::Partition::val ? j.val : j.test)
        .push_back(i);
    j.raw.push_back(std::move(r));
  }
  const auto c = static_cast<Eigen::Index>(lf.categories.size());
  j.y = nn::Matrix::Zero(static_cast<Eigen::Index>(j.raw.size()), c);
  for (std::size_t i = 0; i < j.raw.size(); ++i) {
    const auto& bits = by_id.at(j.raw[i].admission_id)->bits;
    for (Eigen::Index k = 0; k < c; ++k) j.y(static_cast<Eigen::Index>(i), k) = bits[static_cast<std::size_t>(k)];
  }
  return j;
}

inline nn::Matrix normalized_design(std::span<const chart::RawBins> raw, const chart::NormalizationStats& stats,
                                    std::size_t n_types) {
  std::vector<chart::AdmissionTensor> t;
  t.reserve(raw.size());
  for (const auto& r : raw) t.push_back(chart::apply_normalization(r, stats));
  return observer::design_matrix(t, n_types);
}

}  // namespace detail

/// Joins tensors, labels and the split; fits normalization on the train
/// partition; trains; writes the checkpoint. n_types and n_categories are
/// taken from the data.
inline ordered_json run_train(const std::string& tensors, const std::string& labels_path,
                              const std::string& assignment, observer::DeepObserverConfig cfg,
                              const std::string& out) {
  auto tf = chart::read_tensor_file(tensors);
  auto lf = labels::read_label_file(labels_path);
  auto joined = detail::join(tf, lf, split::read_assignment(assignment));
  if (joined.train.empty()) throw Error(ErrorCode::EmptyPartition, "no training admissions with tensors");
  std::vector<chart::RawBins> fit;
  for (auto i : joined.train) fit.push_back(joined.raw[i]);
  cfg.n_types = tf.catalog.size();
  cfg.n_categories = lf.categories.size();

  observer::TrainedModel tm;
  tm.config = cfg;
  tm.catalog = tf.catalog.ids();
  tm.categories = lf.categories;
  tm.stats = chart::fit_normalization(fit, cfg.n_types);
  tm.model = std::make_unique<observer::DeepObserver>(cfg);
  const auto x = detail::normalized_design(joined.raw, tm.stats, cfg.n_types);
  tm.log = observer::train(*tm.model, x, joined.y, joined.train, joined.val);
  observer::save_checkpoint(out, tm);

  ordered_json s;
  s["variant"] = observer::to_string(cfg.variant);
  s["train_admissions"] = joined.train.size();
  s["val_admissions"] = joined.val.size();
  s["log"] = ordered_json::parse(observer::log_to_json(tm.log).dump());
  return s;
}

inline PredictionMatrix predict(observer::TrainedModel& tm, const chart::TensorFile& tf) {
  if (tf.catalog.ids() != tm.catalog)
    throw Error(ErrorCode::CatalogMismatch, "tensor catalog differs from the checkpoint catalog");
  PredictionMatrix p;
  p.source = std::string("deep_observer:") + observer::to_string(tm.config.variant);
  p.categories = tm.categories;
  for (const auto& r : tf.admissions) p.admission_ids.push_back(r.admission_id);
  p.probabilities = tm.model->predict(detail::normalized_design(tf.admissions, tm.stats, tm.config.n_types));
  return p;
}

inline ordered_json run_predict(const std::string& checkpoint, const std::string& tensors, const std::string& out) {
  auto tm = observer::load_checkpoint(checkpoint);
  auto p = predict(tm, chart::read_tensor_file(tensors));
  write_predictions(out, p);
  ordered_json s;
  s["source"] = p.source;
  s["admissions"] = p.admission_ids.size();
  return s;
}

inline ordered_json run_notes_prep(const std::string& notes_path, const std::string& admissions,
                                   notes::SubsetKind subset, std::size_t max_len, const std::string& out) {
  auto times = notes::load_admission_times(admissions);
  auto ns = notes::load_notes(notes_path);
  auto texts = notes::build_subset(ns, times, subset);
  notes::ChunkFile cf;
  cf.subset = subset;
  cf.max_len = max_len;
  std::size_t n_chunks = 0;
  for (const auto& [id, text] : texts) {
    auto cs = notes::chunk(text, max_len, id);
    n_chunks += cs.size();
    if (!cs.empty()) cf.admissions.emplace(id, std::move(cs));
  }
  notes::write_chunk_file(out, cf);
  ordered_json s;
  s["notes"] = ns.size();
  s["admissions"] = cf.admissions.size();
  s["chunks"] = n_chunks;
  return s;
}

struct ScoreNotesOptions {
  std::string scorer_in;   // load instead of training
  std::string scorer_out;  // where a trained scorer is saved
  std::string labels;      // required for training
  std::string assignment;  // training uses the train partition only
  notes::ScorerTrainingConfig train;
};

inline ordered_json run_score_notes(const std::string& chunks_path, const std::string& out,
                                    const ScoreNotesOptions& opt) {
  auto cf = notes::read_chunk_file(chunks_path);
  ordered_json s;
  notes::ScorerFile scorer;
  if (!opt.scorer_in.empty()) {
    scorer = notes::load_scorer(opt.scorer_in);
  } else {
    if (opt.labels.empty()) throw Error(ErrorCode::ConfigError, "training a scorer needs a label file");
    auto lf = labels::read_label_file(opt.labels);
    std::optional<std::map<std::int64_t, split::Partition>> asg;
    if (!opt.assignment.empty()) asg = split::read_assignment(opt.assignment);
    std::vector<notes::ChunkTokenSequence> train_chunks;
    for (const auto& [id, cs] : cf.admissions) {
      if (asg) {
        auto it = asg->find(id);
        if (it == asg->end() || it->second != split::Partition::train) continue;
      }
      train_chunks.insert(train_chunks.end(), cs.begin(), cs.end());
    }
    auto res = notes::train_scorer(train_chunks, lf.vectors, lf.categories.size(), opt.train);
    scorer.params = std::move(res.params);
    scorer.categories = lf.categories;
    if (!opt.scorer_out.empty()) notes::save_scorer(opt.scorer_out, scorer.params, scorer.categories, res.epoch_loss);
    s["train_chunks"] = train_chunks.size();
    s["epoch_loss"] = res.epoch_loss;
  }
  notes::BagOfWordsScorer bow(scorer.params);
  std::vector<notes::ChunkScoreMatrix> scores;
  for (const auto& [id, cs] : cf.admissions) scores.push_back(bow.score(id, cs));
  notes::write_chunk_scores(out, scorer.categories, scores);
  s["admissions"] = scores.size();
  return s;
}

inline PredictionMatrix aggregate_scores(const notes::ChunkScoreFile& f, const notes::AggregationParams& params) {
  PredictionMatrix p;
  p.source = "note_chunks:c=" + format_double(params.c);
  p.categories = f.categories;
  p.probabilities.resize(static_cast<Eigen::Index>(f.admissions.size()), static_cast<Eigen::Index>(f.categories.size()));
  for (std::size_t i = 0; i < f.admissions.size(); ++i) {
    p.admission_ids.push_back(f.admissions[i].admission_id);
    auto v = notes::aggregate(f.admissions[i], params);
    for (std::size_t k = 0; k < v.size(); ++k)
      p.probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
  }
  return p;
}

inline ordered_json run_aggregate(const std::string& scores, double c, const std::string& out) {
  auto p = aggregate_scores(notes::read_chunk_scores(scores), notes::AggregationParams{c});
  write_predictions(out, p);
  ordered_json s;
  s["admissions"] = p.admission_ids.size();
  s["c"] = c;
  return s;
}

inline ordered_json run_eval(const std::string& predictions, const std::string& labels_path,
                             const std::string& assignment, const std::string& partition, const std::string& out) {
  auto pred = read_predictions(predictions);
  auto lf = labels::read_label_file(labels_path);
  std::optional<std::map<std::int64_t, split::Partition>> asg;
  std::optional<split::Partition> part;
  if (!assignment.empty() && partition != "all") {
    asg = split::read_assignment(assignment);
    part = split::parse_partition(partition);
  }
  auto rep = evaluate(pred, lf, asg ? &*asg : nullptr, part);
  ordered_json j;
  j["source"] = pred.source;
  j["partition"] = part ? partition : "all";
  const auto body = metrics::to_json(rep, lf.categories);
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  write_json(out, j);
  ordered_json s;
  s["samples"] = rep.samples;
  s["micro_aupr"] = rep.micro.aupr;
  s["micro_auroc"] = rep.micro.auroc;
  s["positive_ratio"] = rep.positive_ratio;
  return s;
}

inline ordered_json run_attention(const std::string& input, int layer, int head, const std::string& out_csv,
                                  const std::string& out_json) {
  auto in = attention::input_from_json(read_json(input), layer, head);
  auto w = attention::attention(in);
  attention::write_alignment_csv(out_csv, attention::export_alignment(w.weights, in.query_tokens, in.key_tokens));
  if (!out_json.empty())
    write_json(out_json, nlohmann::json{{"query_tokens", in.query_tokens},
                                         {"key_tokens", in.key_tokens},
                                         {"weights", attention::matrix_to_json(w.weights)},
                                         {"output", attention::matrix_to_json(w.output)}});
  ordered_json s;
  s["queries"] = w.weights.rows();
  s["keys"] = w.weights.cols();
  return s;
}

// ---------------------------------------------------------------------------
// End to end
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  std::string data_dir;  // empty: generate synthetic tables under out_dir/data
  synth::SynthConfig synth;
  std::array<double, split::kPartitions> ratios{0.8, 0.1, 0.1};
  observer::DeepObserverConfig observer;
  std::vector<observer::Variant> variants{observer::Variant::cnn};
  notes::SubsetKind subset = notes::SubsetKind::disch;
  std::size_t max_len = 512;
  double aggregation_c = 2.0;
  notes::ScorerTrainingConfig scorer;
  std::string eval_partition = "test";
  double numeric_fraction = 0.9;
};

/// Runs synth -> transform -> preprocess -> labels -> split -> train ->
/// predict -> eval for each variant, and notes-prep -> score-notes ->
/// aggregate -> eval. Every artifact is recorded as a manifest output.
inline void run_pipeline(const PipelineConfig& cfg, RunManifest& manifest) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "fhir");
  auto p = [&](const fs::path& rel) { return (out / rel).string(); };
  auto produced = [&](const std::string& path) {
    manifest.output(path);
    return path;
  };

  fs::path data = cfg.data_dir.empty() ? out / "data" : fs::path(cfg.data_dir);
  if (cfg.data_dir.empty()) {
    auto sc = cfg.synth;
    sc.seed = derive_seed(cfg.seed, "synth");
    auto m = synth::generate(sc, data.string());
    for (const auto& f : m.files) produced(f.path);
    produced((data / "manifest.json").string());
  }
  auto table = [&](const char* name) {
    std::string s = (data / (std::string(name) + ".csv")).string();
    if (!cfg.data_dir.empty()) manifest.input(s);
    return s;
  };
  const std::string admissions = table("admissions"), chartevents = table("chartevents"),
                    diagnoses = table("diagnoses_icd"), noteevents = table("noteevents"),
                    crosswalk = table("ccs_crosswalk");

  ordered_json transformed = ordered_json::object();
  for (const char* t : {"patients", "admissions", "diagnoses_icd", "chartevents", "noteevents"}) {
    transformed[t] = run_transform(t, table(t), produced(p(fs::path("fhir") / (std::string(t) + ".json.gz"))));
  }
  manifest.note("transform", transformed);

  const std::string encounters = p("fhir/admissions.json.gz");
  manifest.note("preprocess", run_preprocess(p("fhir/chartevents.json.gz"), encounters,
                                             produced(p("tensors.json.gz")), cfg.numeric_fraction));
  manifest.note("labels", run_labels(crosswalk, diagnoses, admissions, produced(p("labels.json"))));
  split::SplitSpec spec{cfg.ratios, derive_seed(cfg.seed, "split")};
  manifest.note("split", run_split(p("labels.json"), spec, produced(p("split.json"))));

  ordered_json models = ordered_json::object();
  for (auto v : cfg.variants) {
    const std::string name = observer::to_string(v);
    auto oc = cfg.observer;
    oc.variant = v;
    oc.seed = derive_seed(cfg.seed, "deep_observer");
    ordered_json m;
    m["train"] = run_train(p("tensors.json.gz"), p("labels.json"), p("split.json"), oc,
                           produced(p("model_" + name + ".json.gz")));
    m["predict"] = run_predict(p("model_" + name + ".json.gz"), p("tensors.json.gz"),
                               produced(p("predictions_" + name + ".json")));
    m["eval"] = run_eval(p("predictions_" + name + ".json"), p("labels.json"), p("split.json"),
                         cfg.eval_partition, produced(p("report_" + name + ".json")));
    models[name] = std::move(m);
  }
  manifest.note("deep_observer", models);

  ordered_json n;
  n["notes_prep"] = run_notes_prep(noteevents, admissions, cfg.subset, cfg.max_len, produced(p("chunks.json.gz")));
  ScoreNotesOptions so;
  so.labels = p("labels.json");
  so.assignment = p("split.json");
  so.scorer_out = produced(p("scorer.json.gz"));
  so.train = cfg.scorer;
  so.train.seed = derive_seed(cfg.seed, "note_scorer");
  n["score_notes"] = run_score_notes(p("chunks.json.gz"), produced(p("chunk_scores.json.gz")), so);
  n["aggregate"] = run_aggregate(p("chunk_scores.json.gz"), cfg.aggregation_c, produced(p("predictions_notes.json")));
  n["eval"] = run_eval(p("predictions_notes.json"), p("labels.json"), p("split.json"), cfg.eval_partition,
                       produced(p("report_notes.json")));
  manifest.note("notes", n);
}

}  // namespace fhirdx::pipeline
