#include "sewa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "sewa/error.hpp"
#include "sewa/rng.hpp"

namespace sewa {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::cross_entropy_softmax: return "cross_entropy_softmax";
    case LossKind::mse: return "mse";
    case LossKind::logistic_binary: return "logistic_binary";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross_entropy_softmax") return LossKind::cross_entropy_softmax;
  if (name == "mse") return LossKind::mse;
  if (name == "logistic_binary") return LossKind::logistic_binary;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("MlpSpec needs at least an input and an output layer");
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] == 0) {
      throw ConfigError("MlpSpec layer " + std::to_string(i) + " has size 0");
    }
  }
  if (loss == LossKind::logistic_binary && output_dim() != 1) {
    throw ConfigError("logistic_binary loss requires output dimension 1");
  }
  if (loss == LossKind::cross_entropy_softmax && output_dim() < 2) {
    throw ConfigError("cross_entropy_softmax loss requires output dimension >= 2");
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    d += layer_sizes[l] * layer_sizes[l + 1] + (bias ? layer_sizes[l + 1] : 0);
  }
  return d;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    off += layer_sizes[l] * layer_sizes[l + 1] + (bias ? layer_sizes[l + 1] : 0);
  }
  return off;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

bool WeightVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool bit_equal(const WeightVector& a, const WeightVector& b) {
  return a.dim() == b.dim() &&
         (a.dim() == 0 ||
          std::memcmp(a.values().data(), b.values().data(), a.dim() * sizeof(double)) == 0);
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("l2_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Dataset::Dataset(std::vector<double> features, std::size_t feature_dim,
                 std::vector<double> targets, std::size_t target_dim)
    : feature_dim_(feature_dim),
      target_dim_(target_dim),
      features_(std::move(features)),
      targets_(std::move(targets)) {
  if (feature_dim_ == 0 || target_dim_ == 0) {
    throw ConfigError("Dataset: feature and target dimensions must be positive");
  }
  if (features_.size() % feature_dim_ != 0) {
    throw DimensionError("Dataset: feature buffer is not a multiple of feature_dim");
  }
  rows_ = features_.size() / feature_dim_;
  if (rows_ == 0) throw ConfigError("Dataset: at least one row is required");
  if (targets_.size() != rows_ * target_dim_) {
    throw DimensionError("Dataset: " + std::to_string(rows_) + " feature rows but " +
                         std::to_string(targets_.size()) + " target values");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    max_feature_norm_ = std::max(max_feature_norm_, l2_norm(x(i)));
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<double> f;
  std::vector<double> t;
  f.reserve(rows.size() * feature_dim_);
  t.reserve(rows.size() * target_dim_);
  for (std::size_t r : rows) {
    if (r >= rows_) throw DimensionError("Dataset::subset: row out of range");
    const auto xr = x(r);
    const auto yr = y(r);
    f.insert(f.end(), xr.begin(), xr.end());
    t.insert(t.end(), yr.begin(), yr.end());
  }
  return Dataset(std::move(f), feature_dim_, std::move(t), target_dim_);
}

Dataset Dataset::with_row_replaced(std::size_t row, std::span<const double> xr,
                                   std::span<const double> yr) const {
  if (row >= rows_ || xr.size() != feature_dim_ || yr.size() != target_dim_) {
    throw DimensionError("Dataset::with_row_replaced: bad row or sample shape");
  }
  std::vector<double> f = features_;
  std::vector<double> t = targets_;
  std::copy(xr.begin(), xr.end(), f.begin() + static_cast<std::ptrdiff_t>(row * feature_dim_));
  std::copy(yr.begin(), yr.end(), t.begin() + static_cast<std::ptrdiff_t>(row * target_dim_));
  return Dataset(std::move(f), feature_dim_, std::move(t), target_dim_);
}

void check_compatible(const MlpSpec& spec, const Dataset& data) {
  spec.validate();
  if (data.feature_dim() != spec.input_dim()) {
    throw DimensionError("dataset has " + std::to_string(data.feature_dim()) +
                         " features but layer 0 expects " + std::to_string(spec.input_dim()));
  }
  const std::size_t out = spec.output_dim();
  switch (spec.loss) {
    case LossKind::mse:
      if (data.target_dim() != out) {
        throw DimensionError("mse targets have dimension " + std::to_string(data.target_dim()) +
                             " but the output layer has " + std::to_string(out));
      }
      break;
    case LossKind::cross_entropy_softmax:
    case LossKind::logistic_binary: {
      if (data.target_dim() != 1) {
        throw DimensionError("classification targets must be one label per row");
      }
      const double limit = spec.loss == LossKind::logistic_binary ? 2.0 : static_cast<double>(out);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double label = data.y(i)[0];
        if (!(label >= 0.0) || label >= limit || label != std::floor(label)) {
          throw ConfigError("row " + std::to_string(i) + " has label " + std::to_string(label) +
                            " outside [0, " + std::to_string(static_cast<int>(limit)) + ")");
        }
      }
      break;
    }
  }
}

WeightVector mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightVector w(spec.parameter_count(), 0.0);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    rng::Stream stream(rng::derive(seed, 0x494e4954u /* "INIT" */, l));
    const std::size_t off = spec.weight_offset(l);
    for (std::size_t j = 0; j < fan_in * fan_out; ++j) {
      w[off + j] = stream.uniform(-limit, limit);
    }
  }
  return w;
}

namespace {

void check_weights(const WeightVector& w, const MlpSpec& spec) {
  spec.validate();
  if (w.dim() != spec.parameter_count()) {
    // Name the first layer whose parameters do not fit exactly.
    std::size_t layer = spec.layer_count() - 1;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
      const std::size_t end = l + 1 < spec.layer_count() ? spec.weight_offset(l + 1)
                                                          : spec.parameter_count();
      if (end > w.dim()) {
        layer = l;
        break;
      }
    }
    throw DimensionError("weight vector has " + std::to_string(w.dim()) +
                         " entries but the spec needs " + std::to_string(spec.parameter_count()) +
                         "; mismatch at layer " + std::to_string(layer));
  }
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::identity: return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and activation value a.
double activate_deriv(Activation act, double z, double a) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - a * a;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

// Per-sample scratch space: pre-activations and activations for every layer.
struct Workspace {
  std::vector<std::vector<double>> pre;  // pre[l] for l = 1..L
  std::vector<std::vector<double>> act;  // act[0] = input
  std::vector<double> delta;
  std::vector<double> delta_prev;

  explicit Workspace(const MlpSpec& spec) {
    pre.resize(spec.layer_sizes.size());
    act.resize(spec.layer_sizes.size());
    for (std::size_t l = 0; l < spec.layer_sizes.size(); ++l) {
      pre[l].assign(spec.layer_sizes[l], 0.0);
      act[l].assign(spec.layer_sizes[l], 0.0);
    }
  }
};

void forward_one(const WeightVector& w, const MlpSpec& spec, std::span<const double> x,
                 Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  const std::size_t layers = spec.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double* W = w.values().data() + spec.weight_offset(l);
    const double* b = spec.bias ? w.values().data() + spec.bias_offset(l) : nullptr;
    const auto& a_in = ws.act[l];
    auto& z = ws.pre[l + 1];
    auto& a_out = ws.act[l + 1];
    const bool hidden = l + 1 < layers;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b ? b[o] : 0.0;
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * a_in[i];
      z[o] = acc;
      a_out[o] = hidden ? activate(spec.activation, acc) : acc;
    }
  }
}

// Loss for one sample from the logits; writes dloss/dlogits into dz.
double sample_loss(const MlpSpec& spec, std::span<const double> logits, std::span<const double> y,
                   std::span<double> dz) {
  switch (spec.loss) {
    case LossKind::cross_entropy_softmax: {
      const auto label = static_cast<std::size_t>(y[0]);
      const double zmax = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double z : logits) sum += std::exp(z - zmax);
      const double lse = zmax + std::log(sum);
      if (!dz.empty()) {
        for (std::size_t o = 0; o < logits.size(); ++o) {
          dz[o] = std::exp(logits[o] - lse) - (o == label ? 1.0 : 0.0);
        }
      }
      return lse - logits[label];
    }
    case LossKind::mse: {
      double loss = 0.0;
      for (std::size_t o = 0; o < logits.size(); ++o) {
        const double r = logits[o] - y[o];
        loss += r * r;
        if (!dz.empty()) dz[o] = 2.0 * r;
      }
      return loss;
    }
    case LossKind::logistic_binary: {
      const double z = logits[0];
      const double label = y[0];
      // softplus(z) - y z, stable for large |z|.
      const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
      if (!dz.empty()) {
        const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                    : std::exp(z) / (1.0 + std::exp(z));
        dz[0] = sig - label;
      }
      return softplus - label * z;
    }
  }
  return 0.0;
}

[[noreturn]] void throw_non_finite(const WeightVector& w, const MlpSpec& spec,
                                   const Dataset& data, std::size_t row) {
  Workspace ws(spec);
  forward_one(w, spec, data.x(row), ws);
  for (std::size_t l = 1; l < ws.act.size(); ++l) {
    for (double v : ws.act[l]) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite loss: layer " + std::to_string(l) +
                           " output is non-finite for row " + std::to_string(row));
      }
    }
  }
  throw NumericError("non-finite loss at row " + std::to_string(row) +
                     " (all layer outputs finite; loss evaluation overflowed)");
}

template <class RowAt>
LossAndGrad loss_and_grad_impl(const WeightVector& w, const MlpSpec& spec, const Dataset& data,
                               std::size_t count, RowAt row_at, bool want_grad) {
  check_weights(w, spec);
  check_compatible(spec, data);
  if (count == 0) throw ConfigError("loss_and_grad: empty batch");

  Workspace ws(spec);
  LossAndGrad result;
  if (want_grad) result.grad = WeightVector(w.dim(), 0.0);
  const std::size_t layers = spec.layer_count();
  std::vector<double> dz(spec.output_dim());
  double total = 0.0;

  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t row = row_at(s);
    forward_one(w, spec, data.x(row), ws);
    const double loss = sample_loss(spec, ws.act[layers], data.y(row),
                                    want_grad ? std::span<double>(dz) : std::span<double>());
    if (!std::isfinite(loss)) throw_non_finite(w, spec, data, row);
    total += loss;
    if (!want_grad) continue;

    ws.delta.assign(dz.begin(), dz.end());
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = spec.layer_sizes[l];
      const std::size_t out = spec.layer_sizes[l + 1];
      double* gW = result.grad.values().data() + spec.weight_offset(l);
      const auto& a_in = ws.act[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = ws.delta[o];
        double* grow = gW + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * a_in[i];
      }
      if (spec.bias) {
        double* gb = result.grad.values().data() + spec.bias_offset(l);
        for (std::size_t o = 0; o < out; ++o) gb[o] += ws.delta[o];
      }
      if (l == 0) break;
      const double* W = w.values().data() + spec.weight_offset(l);
      ws.delta_prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = ws.delta[o];
        const double* row_w = W + o * in;
        for (std::size_t i = 0; i < in; ++i) ws.delta_prev[i] += row_w[i] * d;
      }
      for (std::size_t i = 0; i < in; ++i) {
        ws.delta_prev[i] *= activate_deriv(spec.activation, ws.pre[l][i], ws.act[l][i]);
      }
      ws.delta.swap(ws.delta_prev);
    }
  }

  const double inv = 1.0 / static_cast<double>(count);
  result.loss = total * inv;
  if (want_grad) {
    for (double& g : result.grad.values()) g *= inv;
  }
  return result;
}

}  // namespace

Matrix mlp_forward(const WeightVector& w, const MlpSpec& spec, const Matrix& x_batch) {
  check_weights(w, spec);
  if (x_batch.cols != spec.input_dim()) {
    throw DimensionError("mlp_forward: input has " + std::to_string(x_batch.cols) +
                         " columns but layer 0 expects " + std::to_string(spec.input_dim()));
  }
  if (x_batch.data.size() != x_batch.rows * x_batch.cols) {
    throw DimensionError("mlp_forward: matrix buffer does not match rows x cols");
  }
  Matrix out{x_batch.rows, spec.output_dim(), std::vector<double>(x_batch.rows * spec.output_dim())};
  Workspace ws(spec);
  const std::size_t layers = spec.layer_count();
  for (std::size_t r = 0; r < x_batch.rows; ++r) {
    forward_one(w, spec, {x_batch.data.data() + r * x_batch.cols, x_batch.cols}, ws);
    for (std::size_t l = 1; l <= layers; ++l) {
      for (double v : ws.act[l]) {
        if (!std::isfinite(v)) {
          throw NumericError("mlp_forward: layer " + std::to_string(l) +
                             " output is non-finite for row " + std::to_string(r));
        }
      }
    }
    std::copy(ws.act[layers].begin(), ws.act[layers].end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * out.cols));
  }
  return out;
}

LossAndGrad loss_and_grad(const WeightVector& w, const MlpSpec& spec, const Dataset& data) {
  return loss_and_grad_impl(w, spec, data, data.size(), [](std::size_t s) { return s; }, true);
}

LossAndGrad loss_and_grad(const WeightVector& w, const MlpSpec& spec, const Dataset& data,
                          std::span<const std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= data.size()) throw DimensionError("loss_and_grad: row index out of range");
  }
  return loss_and_grad_impl(w, spec, data, rows.size(), [rows](std::size_t s) { return rows[s]; },
                            true);
}

double mean_loss(const WeightVector& w, const MlpSpec& spec, const Dataset& data) {
  return loss_and_grad_impl(w, spec, data, data.size(), [](std::size_t s) { return s; }, false)
      .loss;
}

Evaluation evaluate(const WeightVector& w, const MlpSpec& spec, const Dataset& data) {
  check_weights(w, spec);
  check_compatible(spec, data);
  Workspace ws(spec);
  const std::size_t layers = spec.layer_count();
  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    forward_one(w, spec, data.x(r), ws);
    const auto& logits = ws.act[layers];
    const double loss = sample_loss(spec, logits, data.y(r), {});
    if (!std::isfinite(loss)) throw_non_finite(w, spec, data, r);
    total += loss;
    const double label = data.y(r)[0];
    if (spec.loss == LossKind::cross_entropy_softmax) {
      const auto pred = static_cast<std::size_t>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
      correct += pred == static_cast<std::size_t>(label) ? 1 : 0;
    } else if (spec.loss == LossKind::logistic_binary) {
      correct += (logits[0] > 0.0) == (label > 0.5) ? 1 : 0;
    }
  }
  const double n = static_cast<double>(data.size());
  return {total / n, spec.loss == LossKind::mse ? std::numeric_limits<double>::quiet_NaN()
                                                : static_cast<double>(correct) / n};
}

}  // namespace sewa
