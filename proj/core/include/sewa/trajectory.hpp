#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "sewa/nn.hpp"

namespace sewa {

struct ConstantRate {
  double alpha = 0.1;
};

// alpha_max until start_step, then cosine annealing down to alpha_min at the
// final step.
struct CosineRate {
  double alpha_max = 0.1;
  double alpha_min = 0.0;
  std::size_t start_step = 0;
};

using LrSchedule = std::variant<ConstantRate, CosineRate>;

// Rate used by update number `update` (0-based) of a run with `total_steps` updates.
double learning_rate(const LrSchedule& schedule, std::size_t update, std::size_t total_steps);

struct SgdConfig {
  std::size_t steps = 1;
  LrSchedule schedule = ConstantRate{};
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t capture_every = 1;
  // Every update uses all rows instead of a sampled batch.
  bool full_batch = false;

  // Throws ConfigError.
  void validate() const;
};

// Indices drawn uniformly with replacement for update number `update`.
// Keyed by (seed, update) only, so independent of capture cadence.
std::vector<std::size_t> sample_indices(std::uint64_t seed, std::size_t update,
                                        std::size_t batch_size, std::size_t n);

struct Checkpoint {
  std::size_t step = 0;  // number of SGD updates applied
  WeightVector weights;
  double train_loss = 0.0;  // full training-set loss at capture time
};

class TrajectoryWindow {
 public:
  explicit TrajectoryWindow(std::size_t capacity = 1);

  // Appends, evicting the oldest checkpoint when full. Throws on a
  // non-increasing step or a dimension change.
  void push(Checkpoint checkpoint);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return checkpoints_.size(); }
  bool empty() const { return checkpoints_.empty(); }
  std::size_t dim() const { return empty() ? 0 : checkpoints_.front().weights.dim(); }

  const Checkpoint& operator[](std::size_t i) const { return checkpoints_[i]; }
  std::span<const Checkpoint> checkpoints() const { return checkpoints_; }
  const Checkpoint& back() const { return checkpoints_.back(); }

 private:
  std::size_t capacity_;
  std::vector<Checkpoint> checkpoints_;
};

struct TrainResult {
  WeightVector final_weights;
  std::vector<Checkpoint> stream;
};

// SGD from mlp_init(spec, cfg.seed).
TrainResult sgd_train(const MlpSpec& spec, const Dataset& data, const SgdConfig& cfg);
TrainResult sgd_train(const MlpSpec& spec, const Dataset& data, const SgdConfig& cfg,
                      WeightVector initial);

// Last min(k, stream.size()) checkpoints, in order.
TrajectoryWindow window_collect(std::span<const Checkpoint> stream, std::size_t k);

// Directory layout: manifest.json plus one ckpt_NNNNNN.bin per checkpoint.
void save_window(const TrajectoryWindow& window, const std::filesystem::path& dir);
TrajectoryWindow load_window(const std::filesystem::path& dir);

// Single checkpoint binary: "SEWACKPT" | u32 version | u64 step | u64 dim | dim x f64, all LE.
void write_checkpoint_file(const std::filesystem::path& path, std::size_t step,
                           const WeightVector& weights);
struct CheckpointFile {
  std::size_t step = 0;
  WeightVector weights;
};
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

}  // namespace sewa
