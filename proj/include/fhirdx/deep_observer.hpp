// DeepObserver: multi-label diagnosis prediction from binned chart events.
//
//   first layer (fcnn | cnn | rnn) -> dropout
//   -> dense 512 -> relu -> dropout -> dense 512 -> relu -> dropout
//   -> dense C -> sigmoid
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fhirdx/chart_preprocess.hpp"
#include "fhirdx/common.hpp"
#include "fhirdx/io.hpp"
#include "fhirdx/metrics.hpp"
#include "fhirdx/tensor_nn.hpp"
#include "json.hpp"

namespace fhirdx::observer {

using nn::Matrix;

enum class Variant { fcnn, cnn, rnn };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::fcnn: return "fcnn";
    case Variant::cnn: return "cnn";
    case Variant::rnn: return "rnn";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "fcnn") return Variant::fcnn;
  if (s == "cnn") return Variant::cnn;
  if (s == "rnn") return Variant::rnn;
  throw Error(ErrorCode::InvalidConfig, "unknown DeepObserver variant \"" + std::string(s) + "\"");
}

struct DeepObserverConfig {
  Variant variant = Variant::cnn;
  std::size_t n_types = 450;
  std::size_t n_categories = 281;
  std::size_t hidden_size = 512;
  std::size_t first_width = 512;  // fcnn first dense layer
  std::size_t n_filters = 8;      // cnn
  std::size_t rnn_hidden = 64;    // rnn
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr = 2e-5;
  double dropout = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_types == 0 || n_categories == 0 || hidden_size == 0 || first_width == 0 || n_filters == 0 ||
        rnn_hidden == 0 || batch_size == 0)
      throw Error(ErrorCode::InvalidConfig, "DeepObserver sizes must be positive");
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw Error(ErrorCode::InvalidConfig, "dropout must lie in [0,1)");
  }
};

inline nlohmann::json to_json(const DeepObserverConfig& c) {
  return {{"variant", to_string(c.variant)}, {"n_types", c.n_types},      {"n_categories", c.n_categories},
          {"hidden_size", c.hidden_size},    {"first_width", c.first_width}, {"n_filters", c.n_filters},
          {"rnn_hidden", c.rnn_hidden},      {"epochs", c.epochs},        {"batch_size", c.batch_size},
          {"lr", c.lr},                      {"dropout", c.dropout},      {"seed", c.seed}};
}

inline DeepObserverConfig config_from_json(const nlohmann::json& j) {
  DeepObserverConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.n_types = j.at("n_types");
  c.n_categories = j.at("n_categories");
  c.hidden_size = j.at("hidden_size");
  c.first_width = j.at("first_width");
  c.n_filters = j.at("n_filters");
  c.rnn_hidden = j.at("rnn_hidden");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.lr = j.at("lr");
  c.dropout = j.at("dropout");
  c.seed = j.at("seed");
  return c;
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_micro_aupr;
};

class DeepObserver {
 public:
  /// Builds the layer stack with seeded Glorot-uniform weights and zero biases.
  explicit DeepObserver(const DeepObserverConfig& cfg)
      : cfg_(cfg), dropout_rng_(derive_seed(cfg.seed, "dropout")) {
    cfg_.validate();
    Rng init(derive_seed(cfg_.seed, "init"));
    const auto types = static_cast<Eigen::Index>(cfg_.n_types);
    const auto hidden = static_cast<Eigen::Index>(cfg_.hidden_size);
    Eigen::Index width = 0;
    switch (cfg_.variant) {
      case Variant::fcnn: {
        auto& d = net_.add<nn::DenseLayer>(types * nn::kTimeBins, static_cast<Eigen::Index>(cfg_.first_width));
        d.init(init);
        net_.add<nn::ReluLayer>();
        width = d.out_width();
        break;
      }
      case Variant::cnn: {
        auto& c = net_.add<nn::TimeConvLayer>(types, static_cast<Eigen::Index>(cfg_.n_filters));
        c.init(init);
        net_.add<nn::ReluLayer>();
        width = c.output_width(0);
        break;
      }
      case Variant::rnn: {
        auto& r = net_.add<nn::SimpleRnnLayer>(types, static_cast<Eigen::Index>(cfg_.rnn_hidden));
        r.init(init);
        width = r.hidden();
        break;
      }
    }
    first_output_width_ = width;
    net_.add<nn::DropoutLayer>(cfg_.dropout, &dropout_rng_);
    net_.add<nn::DenseLayer>(width, hidden).init(init);
    net_.add<nn::ReluLayer>();
    net_.add<nn::DropoutLayer>(cfg_.dropout, &dropout_rng_);
    net_.add<nn::DenseLayer>(hidden, hidden).init(init);
    net_.add<nn::ReluLayer>();
    net_.add<nn::DropoutLayer>(cfg_.dropout, &dropout_rng_);
    head_ = &net_.add<nn::DenseLayer>(hidden, static_cast<Eigen::Index>(cfg_.n_categories));
    head_->init(init);
  }

  DeepObserver(const DeepObserver&) = delete;
  DeepObserver& operator=(const DeepObserver&) = delete;

  const DeepObserverConfig& config() const { return cfg_; }
  Eigen::Index input_width() const { return static_cast<Eigen::Index>(cfg_.n_types) * nn::kTimeBins; }
  /// Width of the representation the first layer hands to the 512 stack.
  Eigen::Index first_output_width() const { return first_output_width_; }
  nn::DenseLayer& head() { return *head_; }
  nn::Sequential& network() { return net_; }

  Matrix logits(const Matrix& x, bool train) {
    if (x.cols() != input_width())
      throw Error(ErrorCode::CatalogMismatch, "input has " + std::to_string(x.cols()) +
                                                  " columns, model expects " + std::to_string(input_width()));
    return net_.forward(x, train);
  }

  /// N x C probabilities, evaluation mode.
  Matrix predict(const Matrix& x) { return nn::sigmoid(logits(x, false)); }

 private:
  DeepObserverConfig cfg_;
  Rng dropout_rng_;
  nn::Sequential net_;
  nn::DenseLayer* head_ = nullptr;
  Eigen::Index first_output_width_ = 0;
};

/// Flattens normalized tensors into an N x (types*4) design matrix.
inline Matrix design_matrix(std::span<const chart::AdmissionTensor> tensors, std::size_t n_types) {
  Matrix x(static_cast<Eigen::Index>(tensors.size()), static_cast<Eigen::Index>(n_types * chart::kBins));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].n_types != n_types)
      throw Error(ErrorCode::CatalogMismatch, "tensor width differs from the model catalog");
    for (std::size_t k = 0; k < tensors[i].values.size(); ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = tensors[i].values[k];
  }
  return x;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline std::optional<double> micro_aupr(const Matrix& probs, const Matrix& targets) {
  std::vector<std::uint8_t> truth(static_cast<std::size_t>(targets.size()));
  bool any = false;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    truth[static_cast<std::size_t>(i)] = targets.data()[i] > 0.5;
    any = any || truth[static_cast<std::size_t>(i)];
  }
  if (!any) return std::nullopt;
  return metrics::pr_auc(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), truth);
}

/// Seeded-shuffle minibatch Adam for a fixed number of epochs. Logs the mean
/// training loss and the validation micro AU-PR of every epoch; no early
/// stopping or model selection.
inline std::vector<EpochLog> train(DeepObserver& model, const Matrix& x, const Matrix& y,
                                   std::span<const std::size_t> train_rows,
                                   std::span<const std::size_t> val_rows) {
  const auto& cfg = model.config();
  if (train_rows.empty()) throw Error(ErrorCode::EmptyPartition, "training partition is empty");
  if (x.rows() != y.rows() || y.cols() != static_cast<Eigen::Index>(cfg.n_categories))
    throw Error(ErrorCode::ShapeMismatch, "inputs and labels are not aligned");

  nn::AdamState adam;
  adam.lr = cfg.lr;
  Rng shuffle(derive_seed(cfg.seed, "shuffle"));
  auto params = model.network().params();
  Matrix x_val, y_val;
  if (!val_rows.empty()) {
    x_val = gather_rows(x, val_rows);
    y_val = gather_rows(y, val_rows);
  }

  std::vector<EpochLog> log;
  std::vector<std::size_t> order(train_rows.begin(), train_rows.end());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      Matrix xb = gather_rows(x, batch), yb = gather_rows(y, batch);
      model.network().zero_grad();
      Matrix z = model.logits(xb, true);
      auto loss = nn::bce_loss(nn::sigmoid(z), yb);
      model.network().backward(loss.grad_logits);
      nn::adam_step(adam, params);
      loss_sum += loss.loss * static_cast<double>(batch.size());
    }
    EpochLog e{epoch + 1, loss_sum / static_cast<double>(order.size()), std::nullopt};
    if (!val_rows.empty()) e.val_micro_aupr = micro_aupr(model.predict(x_val), y_val);
    log.push_back(e);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoint: config, catalog, category ids, normalization stats, parameters
// and training log. Doubles are written with round-trip precision, so a
// reloaded model predicts bit-identically.
// ---------------------------------------------------------------------------

struct TrainedModel {
  DeepObserverConfig config;
  std::vector<std::int64_t> catalog;     // observation type ids
  std::vector<std::int64_t> categories;  // CCS category ids
  chart::NormalizationStats stats;
  std::vector<EpochLog> log;
  std::unique_ptr<DeepObserver> model;
};

inline nlohmann::json log_to_json(std::span<const EpochLog> log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : log)
    j.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"val_micro_aupr", e.val_micro_aupr ? nlohmann::json(*e.val_micro_aupr) : nlohmann::json(nullptr)}});
  return j;
}

inline void save_checkpoint(const std::string& path, TrainedModel& tm) {
  nlohmann::json params = nlohmann::json::array();
  for (auto* p : tm.model->network().params()) params.push_back(nn::param_to_json(*p));
  nlohmann::json j{{"format", "fhirdx.deep_observer.v1"},
                   {"config", to_json(tm.config)},
                   {"catalog", tm.catalog},
                   {"categories", tm.categories},
                   {"stats", chart::stats_to_json(tm.stats, chart::TypeCatalog(tm.catalog))},
                   {"log", log_to_json(tm.log)},
                   {"params", std::move(params)}};
  write_json(path, j, -1);
}

inline TrainedModel load_checkpoint(const std::string& path) {
  auto j = read_json(path);
  try {
    if (j.at("format") != "fhirdx.deep_observer.v1")
      throw Error(ErrorCode::MalformedJson, path + ": unsupported checkpoint format");
    TrainedModel tm;
    tm.config = config_from_json(j.at("config"));
    tm.catalog = j.at("catalog").get<std::vector<std::int64_t>>();
    tm.categories = j.at("categories").get<std::vector<std::int64_t>>();
    tm.stats = chart::stats_from_json(j.at("stats"));
    for (const auto& e : j.at("log")) {
      EpochLog l{e.at("epoch"), e.at("train_loss"), std::nullopt};
      if (!e.at("val_micro_aupr").is_null()) l.val_micro_aupr = e.at("val_micro_aupr").get<double>();
      tm.log.push_back(l);
    }
    tm.model = std::make_unique<DeepObserver>(tm.config);
    auto params = tm.model->network().params();
    const auto& jp = j.at("params");
    if (jp.size() != params.size())
      throw Error(ErrorCode::ShapeMismatch, path + ": parameter count differs from the architecture");
    for (std::size_t i = 0; i < params.size(); ++i) nn::param_from_json(*params[i], jp[i]);
    return tm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, path + ": " + e.what());
  }
}

}  // namespace fhirdx::observer
