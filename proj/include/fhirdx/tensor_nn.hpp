// Small deterministic neural-network kernel: dense, (1,4) time convolution,
// simple tanh RNN over the four bins, ReLU, dropout, sigmoid + binary
// cross-entropy and Adam. All layers carry exact analytic gradients.
//
// Activations are batch-major: one row per sample. Time-binned inputs are
// flattened per sample as [type0 bin0..3, type1 bin0..3, ...].
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fhirdx/common.hpp"
#include "json.hpp"

namespace fhirdx::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr int kTimeBins = 4;

inline void check_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFiniteValue, std::string("non-finite value in ") + where);
}

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

/// A trainable tensor and its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

inline void glorot_uniform(Matrix& w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
}

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Matrix forward(const Matrix& x, bool train) = 0;
  /// Accumulates parameter gradients and returns the input gradient. Uses the
  /// activations cached by the most recent forward call.
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual Eigen::Index output_width(Eigen::Index input_width) const { return input_width; }
};

// ---------------------------------------------------------------------------

/// y = W x + b with W: [out][in].
class DenseLayer final : public Layer {
 public:
  DenseLayer(Eigen::Index in, Eigen::Index out)
      : weights_("weights", out, in), bias_("bias", 1, out) {}

  std::string kind() const override { return "dense"; }
  Param& weights() { return weights_; }
  Param& bias() { return bias_; }
  Eigen::Index in_width() const { return weights_.value.cols(); }
  Eigen::Index out_width() const { return weights_.value.rows(); }

  void init(Rng& rng) {
    glorot_uniform(weights_.value, in_width(), out_width(), rng);
    bias_.value.setZero();
  }

  Matrix forward(const Matrix& x, bool) override {
    check_shape(x.cols() == in_width(), "dense: input width " + std::to_string(x.cols()) +
                                            " != " + std::to_string(in_width()));
    input_ = x;
    Matrix y = x * weights_.value.transpose();
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  Matrix backward(const Matrix& g) override {
    check_shape(g.cols() == out_width() && g.rows() == input_.rows(), "dense: gradient shape");
    weights_.grad.noalias() += g.transpose() * input_;
    bias_.grad.row(0) += g.colwise().sum();
    return g * weights_.value;
  }

  std::vector<Param*> params() override { return {&weights_, &bias_}; }
  Eigen::Index output_width(Eigen::Index) const override { return out_width(); }

 private:
  Param weights_, bias_;
  Matrix input_;
};

/// Per observation type t and filter f: out[t][f] = sum_k filter[f][k] x[t][k] + b[f].
class TimeConvLayer final : public Layer {
 public:
  TimeConvLayer(Eigen::Index n_types, Eigen::Index n_filters)
      : n_types_(n_types), filters_("filters", n_filters, kTimeBins), bias_("bias", 1, n_filters) {}

  std::string kind() const override { return "time_conv"; }
  Param& filters() { return filters_; }
  Param& bias() { return bias_; }
  Eigen::Index n_filters() const { return filters_.value.rows(); }

  void init(Rng& rng) {
    glorot_uniform(filters_.value, kTimeBins, n_filters(), rng);
    bias_.value.setZero();
  }

  Matrix forward(const Matrix& x, bool) override {
    check_shape(x.cols() == n_types_ * kTimeBins, "time_conv: input width " + std::to_string(x.cols()) +
                                                      " != types*4");
    input_ = x;
    const Eigen::Index f = n_filters();
    Matrix y(x.rows(), n_types_ * f);
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      Eigen::Map<const Matrix> xb(x.row(b).data(), n_types_, kTimeBins);
      Eigen::Map<Matrix> yb(y.row(b).data(), n_types_, f);
      yb.noalias() = xb * filters_.value.transpose();
      yb.rowwise() += bias_.value.row(0);
    }
    return y;
  }

  Matrix backward(const Matrix& g) override {
    const Eigen::Index f = n_filters();
    check_shape(g.cols() == n_types_ * f && g.rows() == input_.rows(), "time_conv: gradient shape");
    Matrix dx(input_.rows(), input_.cols());
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      Eigen::Map<const Matrix> gb(g.row(b).data(), n_types_, f);
      Eigen::Map<const Matrix> xb(input_.row(b).data(), n_types_, kTimeBins);
      Eigen::Map<Matrix> dxb(dx.row(b).data(), n_types_, kTimeBins);
      filters_.grad.noalias() += gb.transpose() * xb;
      bias_.grad.row(0) += gb.colwise().sum();
      dxb.noalias() = gb * filters_.value;
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&filters_, &bias_}; }
  Eigen::Index output_width(Eigen::Index) const override { return n_types_ * n_filters(); }

 private:
  Eigen::Index n_types_;
  Param filters_, bias_;
  Matrix input_;
};

/// h_k = tanh(U x_k + V h_{k-1} + b) over the four bins with h_{-1} = 0;
/// the output is h_3. x_k is the column of bin k across all types.
class SimpleRnnLayer final : public Layer {
 public:
  SimpleRnnLayer(Eigen::Index n_types, Eigen::Index hidden)
      : n_types_(n_types),
        input_weights_("input_weights", hidden, n_types),
        recurrent_weights_("recurrent_weights", hidden, hidden),
        bias_("bias", 1, hidden) {}

  std::string kind() const override { return "rnn"; }
  Param& input_weights() { return input_weights_; }
  Param& recurrent_weights() { return recurrent_weights_; }
  Param& bias() { return bias_; }
  Eigen::Index hidden() const { return recurrent_weights_.value.rows(); }

  void init(Rng& rng) {
    glorot_uniform(input_weights_.value, n_types_, hidden(), rng);
    glorot_uniform(recurrent_weights_.value, hidden(), hidden(), rng);
    bias_.value.setZero();
  }

  Matrix forward(const Matrix& x, bool) override {
    check_shape(x.cols() == n_types_ * kTimeBins, "rnn: input width " + std::to_string(x.cols()) +
                                                      " != types*4");
    for (int k = 0; k < kTimeBins; ++k) {
      steps_[k] = bin_slice(x, k);
      Matrix a = steps_[k] * input_weights_.value.transpose();
      if (k > 0) a.noalias() += states_[k - 1] * recurrent_weights_.value.transpose();
      a.rowwise() += bias_.value.row(0);
      states_[k] = a.array().tanh().matrix();
    }
    return states_[kTimeBins - 1];
  }

  Matrix backward(const Matrix& g) override {
    check_shape(g.cols() == hidden() && g.rows() == states_[kTimeBins - 1].rows(), "rnn: gradient shape");
    const Eigen::Index batch = g.rows();
    Matrix dx = Matrix::Zero(batch, n_types_ * kTimeBins);
    Matrix dh = g;
    for (int k = kTimeBins - 1; k >= 0; --k) {
      Matrix da = (dh.array() * (1.0 - states_[k].array().square())).matrix();
      input_weights_.grad.noalias() += da.transpose() * steps_[k];
      if (k > 0) recurrent_weights_.grad.noalias() += da.transpose() * states_[k - 1];
      bias_.grad.row(0) += da.colwise().sum();
      Matrix dxk = da * input_weights_.value;
      for (Eigen::Index t = 0; t < n_types_; ++t) dx.col(t * kTimeBins + k) = dxk.col(t);
      if (k > 0) dh = da * recurrent_weights_.value;
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&input_weights_, &recurrent_weights_, &bias_}; }
  Eigen::Index output_width(Eigen::Index) const override { return hidden(); }

 private:
  Matrix bin_slice(const Matrix& x, int k) const {
    Matrix s(x.rows(), n_types_);
    for (Eigen::Index t = 0; t < n_types_; ++t) s.col(t) = x.col(t * kTimeBins + k);
    return s;
  }

  Eigen::Index n_types_;
  Param input_weights_, recurrent_weights_, bias_;
  Matrix steps_[kTimeBins], states_[kTimeBins];
};

class ReluLayer final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Matrix forward(const Matrix& x, bool) override {
    input_ = x;
    return x.cwiseMax(0.0);
  }
  Matrix backward(const Matrix& g) override {
    check_shape(g.rows() == input_.rows() && g.cols() == input_.cols(), "relu: gradient shape");
    return (input_.array() > 0.0).select(g, 0.0);
  }

 private:
  Matrix input_;
};

/// Inverted dropout: at train time each unit is zeroed with probability p and
/// survivors are scaled by 1/(1-p); evaluation is the identity.
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(double p, Rng* rng) : p_(p), rng_(rng) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0,1)");
  }

  std::string kind() const override { return "dropout"; }
  double rate() const { return p_; }

  /// Keeps the current mask for subsequent train-mode forwards (finite
  /// difference checks need a fixed mask).
  void freeze_mask(bool on) { frozen_ = on; }

  Matrix forward(const Matrix& x, bool train) override {
    train_ = train && p_ > 0.0;
    if (!train_) return x;
    if (!frozen_ || mask_.rows() != x.rows() || mask_.cols() != x.cols()) {
      mask_.resize(x.rows(), x.cols());
      const double scale = 1.0 / (1.0 - p_);
      for (Eigen::Index i = 0; i < mask_.size(); ++i)
        mask_.data()[i] = rng_->uniform() < p_ ? 0.0 : scale;
    }
    return x.cwiseProduct(mask_);
  }

  Matrix backward(const Matrix& g) override {
    if (!train_) return g;
    check_shape(g.rows() == mask_.rows() && g.cols() == mask_.cols(), "dropout: gradient shape");
    return g.cwiseProduct(mask_);
  }

 private:
  double p_;
  Rng* rng_;
  bool train_ = false;
  bool frozen_ = false;
  Matrix mask_;
};

// ---------------------------------------------------------------------------

inline Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

inline constexpr double kProbClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;  // gradient w.r.t. the pre-sigmoid logits
};

/// Mean binary cross-entropy over every (sample, label) cell. Probabilities
/// are clamped to [1e-7, 1-1e-7]; the logit gradient is (p - y) / cells.
inline LossResult bce_loss(const Matrix& probabilities, const Matrix& targets) {
  check_shape(probabilities.rows() == targets.rows() && probabilities.cols() == targets.cols(),
              "bce: probability/target shapes differ");
  check_finite(probabilities, "bce probabilities");
  const double cells = static_cast<double>(probabilities.size());
  Matrix p = probabilities.cwiseMax(kProbClamp).cwiseMin(1.0 - kProbClamp);
  const double total =
      -(targets.array() * p.array().log() + (1.0 - targets.array()) * (1.0 - p.array()).log()).sum();
  LossResult r{cells > 0 ? total / cells : 0.0, (p - targets) / (cells > 0 ? cells : 1.0)};
  if (!std::isfinite(r.loss)) throw Error(ErrorCode::NonFiniteValue, "bce loss");
  return r;
}

// ---------------------------------------------------------------------------

struct AdamState {
  std::size_t step = 0;
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Bias-corrected Adam update of every parameter from its accumulated grad.
inline void adam_step(AdamState& s, std::span<Param* const> params) {
  if (s.first_moment.empty()) {
    for (auto* p : params) {
      s.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      s.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  check_shape(s.first_moment.size() == params.size(), "adam: parameter count changed");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    Matrix& m = s.first_moment[i];
    Matrix& v = s.second_moment[i];
    check_shape(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols() &&
                    m.rows() == p.value.rows() && m.cols() == p.value.cols(),
                "adam: shape mismatch for " + p.name);
    m = s.beta1 * m + (1.0 - s.beta1) * p.grad;
    v = s.beta2 * v + (1.0 - s.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= s.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  }
}

// ---------------------------------------------------------------------------

/// Layer stack with a shared forward/backward pass.
class Sequential {
 public:
  template <class L, class... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Matrix forward(const Matrix& x, bool train) {
    Matrix h = x;
    for (auto& l : layers_) {
      h = l->forward(h, train);
      check_finite(h, l->kind().c_str());
    }
    return h;
  }

  Matrix backward(const Matrix& grad) {
    Matrix g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }

  std::size_t size() const { return layers_.size(); }
  Layer& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

inline nlohmann::json param_to_json(const Param& p) {
  return {{"name", p.name},
          {"rows", p.value.rows()},
          {"cols", p.value.cols()},
          {"data", std::vector<double>(p.value.data(), p.value.data() + p.value.size())}};
}

inline void param_from_json(Param& p, const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  check_shape(rows == p.value.rows() && cols == p.value.cols(),
              "checkpoint shape for " + p.name + " is " + std::to_string(rows) + "x" +
                  std::to_string(cols));
  auto data = j.at("data").get<std::vector<double>>();
  check_shape(data.size() == static_cast<std::size_t>(rows * cols), "checkpoint data length for " + p.name);
  std::copy(data.begin(), data.end(), p.value.data());
}

}  // namespace fhirdx::nn
