#pragma once

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "sewa/mask_learning.hpp"
#include "sewa/nn.hpp"
#include "sewa/rng.hpp"
#include "sewa/trajectory.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sewa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Per-coordinate comparison: relative where |expected| >= floor, absolute otherwise.
inline ::testing::AssertionResult close_coordinates(const std::vector<double>& actual,
                                                    const std::vector<double>& expected,
                                                    double rel_tol, double floor) {
  if (actual.size() != expected.size()) {
    return ::testing::AssertionFailure() << "length " << actual.size() << " vs "
                                         << expected.size();
  }
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double diff = std::fabs(actual[i] - expected[i]);
    const bool ok = std::fabs(expected[i]) < floor ? diff <= floor
                                                   : diff <= rel_tol * std::fabs(expected[i]);
    if (!ok) {
      return ::testing::AssertionFailure()
             << "coordinate " << i << ": " << actual[i] << " vs " << expected[i];
    }
  }
  return ::testing::AssertionSuccess();
}

// Random data compatible with spec: features in [-1, 1], labels valid for the loss.
inline sewa::Dataset random_dataset(const sewa::MlpSpec& spec, std::size_t rows,
                                    std::uint64_t seed) {
  sewa::rng::Stream st(seed);
  const std::size_t p = spec.input_dim();
  std::vector<double> x(rows * p);
  for (auto& v : x) v = st.uniform(-1.0, 1.0);
  if (spec.loss == sewa::LossKind::mse) {
    std::vector<double> y(rows * spec.output_dim());
    for (auto& v : y) v = st.uniform(-1.0, 1.0);
    return sewa::Dataset(std::move(x), p, std::move(y), spec.output_dim());
  }
  const std::size_t classes = spec.loss == sewa::LossKind::logistic_binary ? 2 : spec.output_dim();
  std::vector<double> y(rows);
  for (auto& v : y) v = static_cast<double>(st.below(classes));
  return sewa::Dataset(std::move(x), p, std::move(y), 1);
}

// Scalar checkpoints for a [1,1] identity, bias-free model.
inline sewa::TrajectoryWindow scalar_window(const std::vector<double>& values) {
  sewa::TrajectoryWindow window(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    window.push({i + 1, sewa::WeightVector(std::vector<double>{values[i]}), 0.0});
  }
  return window;
}

// Model [1,1], identity, mse, no bias; with x = 1, y = 0 the loss is w^2.
inline sewa::MlpSpec scalar_spec() {
  sewa::MlpSpec spec;
  spec.layer_sizes = {1, 1};
  spec.activation = sewa::Activation::identity;
  spec.loss = sewa::LossKind::mse;
  spec.bias = false;
  return spec;
}

inline sewa::Dataset unit_sample(double x = 1.0, double y = 0.0) {
  return sewa::Dataset(std::vector<double>{x}, 1, std::vector<double>{y}, 1);
}

// Window of k checkpoints drawn around a random center for spec.
inline sewa::TrajectoryWindow random_window(const sewa::MlpSpec& spec, std::size_t k,
                                            double spread, std::uint64_t seed) {
  const sewa::WeightVector center = sewa::mlp_init(spec, seed);
  sewa::TrajectoryWindow window(k);
  sewa::rng::Stream st(sewa::rng::derive(seed, 77));
  for (std::size_t i = 0; i < k; ++i) {
    sewa::WeightVector w = center;
    for (std::size_t j = 0; j < w.dim(); ++j) w[j] += spread * st.normal();
    window.push({(i + 1) * 10, std::move(w), 0.0});
  }
  return window;
}

}  // namespace testing_support
