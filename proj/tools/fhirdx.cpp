// fhirdx command-line entry point.
//
// Exit codes: 0 success, 2 usage, 3 configuration, 4 data/schema, 5 numeric.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fhirdx/pipeline.hpp"

namespace {

using namespace fhirdx;
using pipeline::ordered_json;

struct Common {
  std::uint64_t seed = 0;
  std::string manifest;
};

void add_synth_options(CLI::App* sub, synth::SynthConfig& c) {
  sub->add_option("--n-patients", c.n_patients, "patients to generate")->capture_default_str();
  sub->add_option("--n-admissions", c.n_admissions, "admissions (>= patients)")->capture_default_str();
  sub->add_option("--n-observation-types", c.n_observation_types)->capture_default_str();
  sub->add_option("--n-ccs-categories", c.n_ccs_categories)->capture_default_str();
  sub->add_option("--positive-rate", c.positive_rate_target, "per admission-category positive rate")
      ->capture_default_str();
  sub->add_option("--signal-strength", c.signal_strength, "planted mean shift in standard deviations")
      ->capture_default_str();
  sub->add_option("--planted-categories", c.planted_categories, "0 plants every category")->capture_default_str();
  sub->add_option("--notes-min", c.notes_min)->capture_default_str();
  sub->add_option("--notes-max", c.notes_max)->capture_default_str();
  sub->add_option("--vocabulary-size", c.vocabulary_size)->capture_default_str();
  sub->add_option("--observation-presence", c.observation_presence)->capture_default_str();
}

void add_observer_options(CLI::App* sub, observer::DeepObserverConfig& c, bool with_variant) {
  if (with_variant)
    sub->add_option_function<std::string>(
           "--variant", [&c](const std::string& v) { c.variant = observer::parse_variant(v); },
           "fcnn, cnn or rnn")
        ->default_str("cnn");
  sub->add_option("--epochs", c.epochs)->capture_default_str();
  sub->add_option("--batch-size", c.batch_size)->capture_default_str();
  sub->add_option("--lr", c.lr)->capture_default_str();
  sub->add_option("--dropout", c.dropout)->capture_default_str();
  sub->add_option("--hidden", c.hidden_size, "width of the two hidden dense layers")->capture_default_str();
  sub->add_option("--first-width", c.first_width, "fcnn first dense layer width")->capture_default_str();
  sub->add_option("--filters", c.n_filters, "cnn filters")->capture_default_str();
  sub->add_option("--rnn-hidden", c.rnn_hidden)->capture_default_str();
}

void add_scorer_options(CLI::App* sub, notes::ScorerTrainingConfig& c) {
  sub->add_option("--scorer-epochs", c.epochs)->capture_default_str();
  sub->add_option("--scorer-batch-size", c.batch_size)->capture_default_str();
  sub->add_option("--scorer-lr", c.lr)->capture_default_str();
  sub->add_option("--feature-dim", c.hasher.dim, "hashed feature buckets")->capture_default_str();
}

CLI::Option* add_subset(CLI::App* sub, notes::SubsetKind& k) {
  return sub
      ->add_option_function<std::string>(
          "--subset", [&k](const std::string& v) { k = notes::parse_subset(v); }, "disch, days3 or days2")
      ->default_str("disch");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "global seed; stages derive their own")->capture_default_str();
  sub->add_option("--manifest", c.manifest, "run manifest path (default: <output>.manifest.json)");
}

int fail(int code, const std::string& what) {
  std::cerr << "fhirdx: " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EHR to FHIR conversion and diagnosis prediction toolkit", "fhirdx"};
  app.set_config("--config", "", "INI file; [subcommand] sections hold that subcommand's options");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);

  Common common;
  std::string in, out, out2, admissions, diagnoses, crosswalk, labels_path, split_path, model, partition = "test";
  double numeric_fraction = 0.9, tolerance = 0.02, agg_c = 2.0;
  std::size_t max_len = 512;
  int layer = 0, head = 0;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  synth::SynthConfig sc;
  observer::DeepObserverConfig oc;
  notes::ScorerTrainingConfig scorer;
  notes::SubsetKind subset = notes::SubsetKind::disch;
  pipeline::ScoreNotesOptions so;
  pipeline::PipelineConfig pc;
  std::string table;
  std::vector<std::string> variants{"cnn"};

  auto* transform = app.add_subcommand("transform", "MIMIC-III CSV table -> flat FHIR JSON (.gz compresses)");
  transform->add_option("--table", table, "MIMIC-III table name")->required();
  transform->add_option("input", in, "input CSV (.csv or .csv.gz)")->required();
  transform->add_option("output", out, "output JSON (.json or .json.gz)")->required();
  transform->add_option("--manifest", common.manifest);

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic MIMIC-III-shaped tables");
  synth_cmd->add_option("--out-dir", out, "output directory")->required();
  add_synth_options(synth_cmd, sc);
  add_common(synth_cmd, common);

  auto* prep = app.add_subcommand("preprocess", "chart events -> per-admission (types x 4 bins) raw tensors");
  prep->add_option("--chartevents", in, "chartevents CSV or observation collection JSON")->required();
  prep->add_option("--admissions", admissions, "admissions CSV or encounter collection JSON")->required();
  prep->add_option("--out", out, "tensor file")->required();
  prep->add_option("--numeric-fraction", numeric_fraction, "minimum numeric share to keep a type")
      ->capture_default_str();
  prep->add_option("--manifest", common.manifest);

  auto* lab = app.add_subcommand("labels", "diagnoses + CCS crosswalk -> multi-label vectors");
  lab->add_option("--crosswalk", crosswalk, "ICD-9-CM -> CCS file")->required();
  lab->add_option("--diagnoses", diagnoses, "diagnoses_icd CSV")->required();
  lab->add_option("--admissions", admissions, "admissions CSV; admissions without diagnoses get empty labels");
  lab->add_option("--out", out, "label file")->required();
  lab->add_option("--manifest", common.manifest);

  auto* spl = app.add_subcommand("split", "iterative stratified train/val/test split");
  spl->add_option("--labels", labels_path)->required();
  spl->add_option("--out", out, "assignment file")->required();
  spl->add_option("--ratios", ratios, "train val test")->expected(3)->capture_default_str();
  spl->add_option("--tolerance", tolerance, "reported per-label deviation threshold")->capture_default_str();
  add_common(spl, common);

  auto* trn = app.add_subcommand("train", "train a DeepObserver variant");
  trn->add_option("--tensors", in)->required();
  trn->add_option("--labels", labels_path)->required();
  trn->add_option("--split", split_path)->required();
  trn->add_option("--out", out, "checkpoint")->required();
  add_observer_options(trn, oc, true);
  add_common(trn, common);

  auto* prd = app.add_subcommand("predict", "checkpoint + tensors -> prediction matrix");
  prd->add_option("--model", model)->required();
  prd->add_option("--tensors", in)->required();
  prd->add_option("--out", out)->required();
  prd->add_option("--manifest", common.manifest);

  auto* nprep = app.add_subcommand("notes-prep", "clean, subset and chunk clinical notes");
  nprep->add_option("--notes", in, "noteevents CSV")->required();
  nprep->add_option("--admissions", admissions, "admissions CSV")->required();
  add_subset(nprep, subset);
  nprep->add_option("--max-len", max_len, "tokens per chunk including the marker")->capture_default_str();
  nprep->add_option("--out", out, "chunk file")->required();
  nprep->add_option("--manifest", common.manifest);

  auto* snotes = app.add_subcommand("score-notes", "score every chunk; trains the bag-of-words scorer unless --scorer");
  snotes->add_option("--chunks", in)->required();
  snotes->add_option("--out", out, "chunk score file")->required();
  snotes->add_option("--scorer", so.scorer_in, "load this scorer instead of training");
  snotes->add_option("--save-scorer", so.scorer_out);
  snotes->add_option("--labels", so.labels);
  snotes->add_option("--split", so.assignment, "train on the train partition only");
  add_scorer_options(snotes, scorer);
  add_common(snotes, common);

  auto* agg = app.add_subcommand("aggregate", "chunk scores -> admission probabilities");
  agg->add_option("--scores", in)->required();
  agg->add_option("--c", agg_c, "scaling factor")->capture_default_str();
  agg->add_option("--out", out)->required();
  agg->add_option("--manifest", common.manifest);

  auto* ev = app.add_subcommand("eval", "micro-averaged and per-category metrics");
  ev->add_option("--predictions", in)->required();
  ev->add_option("--labels", labels_path)->required();
  ev->add_option("--split", split_path);
  ev->add_option("--partition", partition, "train, val, test or all")->capture_default_str();
  ev->add_option("--out", out, "report JSON")->required();
  ev->add_option("--manifest", common.manifest);

  auto* att = app.add_subcommand("attention", "attention weights and query/key alignment export");
  att->add_option("--input", in, "JSON with queries/keys/values (optionally a heads list)")->required();
  att->add_option("--layer", layer)->capture_default_str();
  att->add_option("--head", head)->capture_default_str();
  att->add_option("--out", out, "alignment CSV")->required();
  att->add_option("--out-json", out2, "weights and output matrices");
  att->add_option("--manifest", common.manifest);

  auto* pipe = app.add_subcommand("pipeline", "run every stage end to end");
  pipe->add_option("--out-dir", pc.out_dir)->capture_default_str();
  pipe->add_option("--data-dir", pc.data_dir, "existing tables; synthetic data is generated when absent");
  add_synth_options(pipe, pc.synth);
  pipe->add_option("--ratios", ratios, "train val test")->expected(3)->capture_default_str();
  pipe->add_option("--variants", variants, "DeepObserver variants to train")->capture_default_str();
  add_observer_options(pipe, pc.observer, false);
  add_subset(pipe, pc.subset);
  pipe->add_option("--max-len", pc.max_len)->capture_default_str();
  pipe->add_option("--c", pc.aggregation_c)->capture_default_str();
  add_scorer_options(pipe, pc.scorer);
  pipe->add_option("--eval-partition", pc.eval_partition)->capture_default_str();
  pipe->add_option("--numeric-fraction", pc.numeric_fraction)->capture_default_str();
  add_common(pipe, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    return fail(3, e.what());
  } catch (const CLI::FileError& e) {
    return fail(3, e.what());
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return fail(2, e.what());
  } catch (const Error& e) {
    return fail(exit_code_for(e.code()), e.what());
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string config_text = cmd->config_to_str(true, false);
  pipeline::RunManifest manifest(cmd->get_name(), common.seed, config_text);
  auto record = [&](std::initializer_list<std::string> inputs, std::initializer_list<std::string> outputs) {
    for (const auto& p : inputs)
      if (!p.empty()) manifest.input(p);
    for (const auto& p : outputs)
      if (!p.empty()) manifest.output(p);
  };

  try {
    const std::string name = cmd->get_name();
    std::string manifest_path = common.manifest.empty() ? out + ".manifest.json" : common.manifest;
    ordered_json summary;
    if (name == "transform") {
      record({in}, {});
      summary = pipeline::run_transform(table, in, out);
      record({}, {out});
    } else if (name == "synth") {
      sc.seed = derive_seed(common.seed, "synth");
      auto m = synth::generate(sc, out);
      for (const auto& f : m.files) manifest.output(f.path);
      if (common.manifest.empty())
        manifest_path = (std::filesystem::path(out) / "run_manifest.json").string();
      summary["admissions"] = sc.n_admissions;
      summary["planted"] = m.planted.size();
    } else if (name == "preprocess") {
      record({in, admissions}, {});
      summary = pipeline::run_preprocess(in, admissions, out, numeric_fraction);
      record({}, {out});
    } else if (name == "labels") {
      record({crosswalk, diagnoses, admissions}, {});
      summary = pipeline::run_labels(crosswalk, diagnoses, admissions, out);
      record({}, {out});
    } else if (name == "split") {
      record({labels_path}, {});
      split::SplitSpec spec{{ratios[0], ratios[1], ratios[2]}, derive_seed(common.seed, "split")};
      spec.validate();
      summary = pipeline::run_split(labels_path, spec, out, tolerance);
      record({}, {out});
    } else if (name == "train") {
      record({in, labels_path, split_path}, {});
      oc.seed = derive_seed(common.seed, "deep_observer");
      summary = pipeline::run_train(in, labels_path, split_path, oc, out);
      record({}, {out});
    } else if (name == "predict") {
      record({model, in}, {});
      summary = pipeline::run_predict(model, in, out);
      record({}, {out});
    } else if (name == "notes-prep") {
      record({in, admissions}, {});
      summary = pipeline::run_notes_prep(in, admissions, subset, max_len, out);
      record({}, {out});
    } else if (name == "score-notes") {
      record({in, so.scorer_in, so.labels, so.assignment}, {});
      so.train = scorer;
      so.train.seed = derive_seed(common.seed, "note_scorer");
      summary = pipeline::run_score_notes(in, out, so);
      record({}, {out, so.scorer_in.empty() ? so.scorer_out : std::string()});
    } else if (name == "aggregate") {
      record({in}, {});
      summary = pipeline::run_aggregate(in, agg_c, out);
      record({}, {out});
    } else if (name == "eval") {
      record({in, labels_path, split_path}, {});
      summary = pipeline::run_eval(in, labels_path, split_path, partition, out);
      record({}, {out});
    } else if (name == "attention") {
      record({in}, {});
      summary = pipeline::run_attention(in, layer, head, out, out2);
      record({}, {out, out2});
    } else if (name == "pipeline") {
      if (ratios.size() != 3) throw Error(ErrorCode::ConfigError, "--ratios needs three values");
      pc.seed = common.seed;
      pc.ratios = {ratios[0], ratios[1], ratios[2]};
      split::SplitSpec{pc.ratios, 0}.validate();
      pc.variants.clear();
      for (const auto& v : variants) pc.variants.push_back(observer::parse_variant(v));
      pc.synth.validate();
      pipeline::run_pipeline(pc, manifest);
      if (common.manifest.empty())
        manifest_path = (std::filesystem::path(pc.out_dir) / "run_manifest.json").string();
    }
    if (!summary.is_null()) manifest.note(name, summary);
    manifest.write(manifest_path);
    std::cout << (summary.is_null() ? std::string("ok") : summary.dump()) << "\n";
  } catch (const Error& e) {
    return fail(exit_code_for(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(4, std::string("MalformedJson: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(4, std::string("IoFailure: ") + e.what());
  }
  return 0;
}
