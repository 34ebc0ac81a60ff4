#pragma once

// Dense feed-forward network with manual reverse-mode gradients.
//
// Parameter flattening order (fixed; checkpoint files depend on it):
//   for each layer l = 0 .. L-1:
//     weights W_l, shape [out][in], row-major: W_l[o][i] at offset + o*in + i
//     biases  b_l, length out (omitted when MlpSpec::bias is false)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sewa {

enum class Activation { relu, tanh, identity };

enum class LossKind { cross_entropy_softmax, mse, logistic_binary };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind k);
Activation parse_activation(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  LossKind loss = LossKind::cross_entropy_softmax;
  // Bias-free layers are used by the convex theory probes, where the
  // Lipschitz and smoothness constants are max|x| and max|x|^2/4.
  bool bias = true;

  // Throws ConfigError.
  void validate() const;

  std::size_t layer_count() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
};

class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit WeightVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& vec() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> values_;
};

// Bitwise equality, distinguishing -0.0 from 0.0 and comparing NaN payloads.
bool bit_equal(const WeightVector& a, const WeightVector& b);

double l2_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b);

// Row-major n x p features plus n x target_dim targets. Classification
// targets hold class indices (or 0/1 for logistic_binary) as doubles.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> features, std::size_t feature_dim,
          std::vector<double> targets, std::size_t target_dim = 1);

  std::size_t size() const { return rows_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t target_dim() const { return target_dim_; }
  double max_feature_norm() const { return max_feature_norm_; }

  std::span<const double> x(std::size_t i) const {
    return {features_.data() + i * feature_dim_, feature_dim_};
  }
  std::span<const double> y(std::size_t i) const {
    return {targets_.data() + i * target_dim_, target_dim_};
  }
  const std::vector<double>& features() const { return features_; }
  const std::vector<double>& targets() const { return targets_; }

  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset with_row_replaced(std::size_t row, std::span<const double> x,
                            std::span<const double> y) const;

 private:
  std::size_t rows_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t target_dim_ = 1;
  std::vector<double> features_;
  std::vector<double> targets_;
  double max_feature_norm_ = 0.0;
};

// Throws DimensionError / ConfigError when the data cannot feed the network.
void check_compatible(const MlpSpec& spec, const Dataset& data);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Glorot-uniform weights, zero biases. Same (spec, seed) gives identical bits.
WeightVector mlp_init(const MlpSpec& spec, std::uint64_t seed);

// Returns logits (no output activation), one row per input row.
Matrix mlp_forward(const WeightVector& w, const MlpSpec& spec, const Matrix& x_batch);

struct LossAndGrad {
  double loss = 0.0;
  WeightVector grad;
};

// Mean loss over all rows and its exact gradient.
LossAndGrad loss_and_grad(const WeightVector& w, const MlpSpec& spec, const Dataset& data);
// Mean loss over the listed rows (repeats allowed) and its exact gradient.
LossAndGrad loss_and_grad(const WeightVector& w, const MlpSpec& spec, const Dataset& data,
                          std::span<const std::size_t> rows);

double mean_loss(const WeightVector& w, const MlpSpec& spec, const Dataset& data);

struct Evaluation {
  double loss = 0.0;
  // Fraction correct; NaN for mse, where accuracy is undefined.
  double accuracy = 0.0;
};

Evaluation evaluate(const WeightVector& w, const MlpSpec& spec, const Dataset& data);

}  // namespace sewa
