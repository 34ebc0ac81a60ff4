#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sewa/nn.hpp"
#include "sewa/trajectory.hpp"

namespace sewa {

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(std::vector<std::uint8_t> bits);
  static BinaryMask all_ones(std::size_t k);
  static BinaryMask from_indices(std::size_t k, std::span<const std::size_t> selected);

  std::size_t size() const { return bits_.size(); }
  std::size_t selected_count() const { return selected_; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<std::size_t> selected_indices() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t selected_ = 0;
};

enum class AverageKind { uniform, swa, ema, lawa, random, sewa };

std::string_view to_string(AverageKind kind);

struct AveragedWeights {
  WeightVector weights;
  AverageKind kind = AverageKind::uniform;
  std::optional<BinaryMask> mask;
  double decay = 0.0;           // ema only
  std::size_t every = 1;        // ema / swa cadence, in checkpoints
  double start_fraction = 0.0;  // swa only
};

// (1/K) sum of the selected checkpoints, K = mask.selected_count(). Summation
// runs in ascending window order.
AveragedWeights apply_mask(const TrajectoryWindow& window, const BinaryMask& mask);

AveragedWeights uniform_average(const TrajectoryWindow& window);

// Starts at the first checkpoint, then folds in every `every`-th checkpoint:
// ema <- decay * ema + (1 - decay) * w.
AveragedWeights ema_average(std::span<const Checkpoint> stream, double decay, std::size_t every);

// Equal-interval selection: 0-based indices ceil(k*j/K) - 1 for j = 1..K.
BinaryMask lawa_select(std::size_t k, std::size_t budget);

// Uniform K-subset via a partial Fisher-Yates shuffle on the seeded stream.
BinaryMask random_select(std::size_t k, std::size_t budget, std::uint64_t seed);

// Uniform average of checkpoints with step >= floor(start_fraction * last_step),
// taking every `every`-th qualifying checkpoint starting from the first.
AveragedWeights swa_average(std::span<const Checkpoint> stream, double start_fraction,
                            std::size_t every);

}  // namespace sewa
