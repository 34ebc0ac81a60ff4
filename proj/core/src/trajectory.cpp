#include "sewa/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sewa/error.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {
constexpr double kDivergenceLimit = 1e12;
constexpr std::uint64_t kSampleTag = 0x53414d50u;  // "SAMP"
}  // namespace

double learning_rate(const LrSchedule& schedule, std::size_t update, std::size_t total_steps) {
  if (const auto* c = std::get_if<ConstantRate>(&schedule)) return c->alpha;
  const auto& cos = std::get<CosineRate>(schedule);
  if (update < cos.start_step) return cos.alpha_max;
  const double span = static_cast<double>(total_steps - cos.start_step);
  const double progress = static_cast<double>(update - cos.start_step) / span;
  return cos.alpha_min +
         0.5 * (cos.alpha_max - cos.alpha_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void SgdConfig::validate() const {
  if (steps == 0) throw ConfigError("SgdConfig: steps must be positive");
  if (batch_size == 0) throw ConfigError("SgdConfig: batch_size must be positive");
  if (capture_every == 0) throw ConfigError("SgdConfig: capture_every must be positive");
  if (capture_every > steps) {
    throw ConfigError("SgdConfig: capture_every (" + std::to_string(capture_every) +
                      ") exceeds steps (" + std::to_string(steps) + ")");
  }
  if (const auto* c = std::get_if<ConstantRate>(&schedule)) {
    if (!(c->alpha >= 0.0) || !std::isfinite(c->alpha)) {
      throw ConfigError("SgdConfig: constant learning rate must be finite and >= 0");
    }
  } else {
    const auto& cos = std::get<CosineRate>(schedule);
    if (!(cos.alpha_max >= cos.alpha_min) || !(cos.alpha_min >= 0.0) ||
        !std::isfinite(cos.alpha_max)) {
      throw ConfigError("SgdConfig: cosine schedule needs alpha_max >= alpha_min >= 0");
    }
    if (cos.start_step >= steps) {
      throw ConfigError("SgdConfig: cosine start_step must be < steps");
    }
  }
}

std::vector<std::size_t> sample_indices(std::uint64_t seed, std::size_t update,
                                        std::size_t batch_size, std::size_t n) {
  rng::Stream stream(rng::derive(seed, kSampleTag, update));
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(stream.below(n));
  return idx;
}

TrajectoryWindow::TrajectoryWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("TrajectoryWindow: capacity must be positive");
  checkpoints_.reserve(capacity_);
}

void TrajectoryWindow::push(Checkpoint checkpoint) {
  if (!checkpoints_.empty()) {
    if (checkpoint.step <= checkpoints_.back().step) {
      throw ConfigError("TrajectoryWindow: step " + std::to_string(checkpoint.step) +
                        " does not follow step " + std::to_string(checkpoints_.back().step));
    }
    if (checkpoint.weights.dim() != dim()) {
      throw DimensionError("TrajectoryWindow: checkpoint dimension " +
                           std::to_string(checkpoint.weights.dim()) + " differs from " +
                           std::to_string(dim()));
    }
  }
  if (checkpoints_.size() == capacity_) checkpoints_.erase(checkpoints_.begin());
  checkpoints_.push_back(std::move(checkpoint));
}

TrainResult sgd_train(const MlpSpec& spec, const Dataset& data, const SgdConfig& cfg) {
  return sgd_train(spec, data, cfg, mlp_init(spec, cfg.seed));
}

TrainResult sgd_train(const MlpSpec& spec, const Dataset& data, const SgdConfig& cfg,
                      WeightVector initial) {
  cfg.validate();
  check_compatible(spec, data);
  if (initial.dim() != spec.parameter_count()) {
    throw DimensionError("sgd_train: initial weights have dimension " +
                         std::to_string(initial.dim()) + ", spec needs " +
                         std::to_string(spec.parameter_count()));
  }

  TrainResult result;
  result.final_weights = std::move(initial);
  result.stream.reserve(cfg.steps / cfg.capture_every + 1);
  WeightVector& w = result.final_weights;

  for (std::size_t update = 0; update < cfg.steps; ++update) {
    const std::size_t step = update + 1;
    LossAndGrad lg;
    try {
      lg = cfg.full_batch
               ? loss_and_grad(w, spec, data)
               : loss_and_grad(w, spec, data,
                               sample_indices(cfg.seed, update, cfg.batch_size, data.size()));
    } catch (const NumericError& e) {
      throw NumericError("sgd_train diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (!(lg.loss <= kDivergenceLimit)) {
      throw NumericError("sgd_train diverged at step " + std::to_string(step) +
                         ": batch loss " + std::to_string(lg.loss));
    }
    const double alpha = learning_rate(cfg.schedule, update, cfg.steps);
    auto wv = w.values();
    const auto gv = lg.grad.values();
    for (std::size_t j = 0; j < wv.size(); ++j) wv[j] -= alpha * gv[j];

    if (step % cfg.capture_every == 0 || step == cfg.steps) {
      double full_loss = 0.0;
      try {
        full_loss = mean_loss(w, spec, data);
      } catch (const NumericError& e) {
        throw NumericError("sgd_train diverged at step " + std::to_string(step) + ": " +
                           e.what());
      }
      if (!(full_loss <= kDivergenceLimit)) {
        throw NumericError("sgd_train diverged at step " + std::to_string(step) +
                           ": train loss " + std::to_string(full_loss));
      }
      result.stream.push_back({step, w, full_loss});
    }
  }
  return result;
}

TrajectoryWindow window_collect(std::span<const Checkpoint> stream, std::size_t k) {
  if (stream.empty()) throw ConfigError("window_collect: empty checkpoint stream");
  TrajectoryWindow window(k);
  const std::size_t start = stream.size() > k ? stream.size() - k : 0;
  for (std::size_t i = start; i < stream.size(); ++i) window.push(stream[i]);
  return window;
}

}  // namespace sewa
