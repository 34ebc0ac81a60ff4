#include "sewa/averagers.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sewa/error.hpp"
#include "sewa/rng.hpp"

namespace sewa {

BinaryMask::BinaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw ConfigError("BinaryMask: entries must be 0 or 1");
    selected_ += b;
  }
}

BinaryMask BinaryMask::all_ones(std::size_t k) {
  return BinaryMask(std::vector<std::uint8_t>(k, 1));
}

BinaryMask BinaryMask::from_indices(std::size_t k, std::span<const std::size_t> selected) {
  std::vector<std::uint8_t> bits(k, 0);
  for (std::size_t i : selected) {
    if (i >= k) throw ConfigError("BinaryMask: index " + std::to_string(i) + " out of range");
    bits[i] = 1;
  }
  return BinaryMask(std::move(bits));
}

std::vector<std::size_t> BinaryMask::selected_indices() const {
  std::vector<std::size_t> out;
  out.reserve(selected_);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

std::string_view to_string(AverageKind kind) {
  switch (kind) {
    case AverageKind::uniform: return "uniform";
    case AverageKind::swa: return "swa";
    case AverageKind::ema: return "ema";
    case AverageKind::lawa: return "lawa";
    case AverageKind::random: return "random";
    case AverageKind::sewa: return "sewa";
  }
  return "?";
}

namespace {

void check_budget(std::size_t k, std::size_t budget, const char* who) {
  if (budget < 1 || budget > k) {
    throw ConfigError(std::string(who) + ": budget K=" + std::to_string(budget) +
                      " must lie in [1, k=" + std::to_string(k) + "]");
  }
}

WeightVector mean_of(std::span<const Checkpoint* const> picked) {
  const std::size_t dim = picked.front()->weights.dim();
  WeightVector acc(dim, 0.0);
  auto av = acc.values();
  for (const Checkpoint* c : picked) {
    const auto wv = c->weights.values();
    for (std::size_t j = 0; j < dim; ++j) av[j] += wv[j];
  }
  const double inv = static_cast<double>(picked.size());
  for (double& v : av) v /= inv;
  return acc;
}

}  // namespace

AveragedWeights apply_mask(const TrajectoryWindow& window, const BinaryMask& mask) {
  if (window.empty()) throw ConfigError("apply_mask: empty window");
  if (mask.size() != window.size()) {
    throw DimensionError("apply_mask: mask length " + std::to_string(mask.size()) +
                         " differs from window length " + std::to_string(window.size()));
  }
  if (mask.selected_count() == 0) {
    throw ConfigError("apply_mask: degenerate selection (all-zero mask)");
  }
  std::vector<const Checkpoint*> picked;
  picked.reserve(mask.selected_count());
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (mask[i]) picked.push_back(&window[i]);
  }
  AveragedWeights out;
  out.weights = mean_of(picked);
  out.kind = AverageKind::sewa;
  out.mask = mask;
  return out;
}

AveragedWeights uniform_average(const TrajectoryWindow& window) {
  if (window.empty()) throw ConfigError("uniform_average: empty window");
  auto out = apply_mask(window, BinaryMask::all_ones(window.size()));
  out.kind = AverageKind::uniform;
  return out;
}

AveragedWeights ema_average(std::span<const Checkpoint> stream, double decay, std::size_t every) {
  if (stream.empty()) throw ConfigError("ema_average: empty stream");
  if (!(decay >= 0.0 && decay < 1.0)) throw ConfigError("ema_average: decay must lie in [0, 1)");
  if (every == 0) throw ConfigError("ema_average: every must be positive");
  WeightVector ema = stream.front().weights;
  auto ev = ema.values();
  for (std::size_t i = every; i < stream.size(); i += every) {
    const auto wv = stream[i].weights.values();
    if (wv.size() != ev.size()) throw DimensionError("ema_average: dimension changes in stream");
    for (std::size_t j = 0; j < ev.size(); ++j) ev[j] = decay * ev[j] + (1.0 - decay) * wv[j];
  }
  AveragedWeights out;
  out.weights = std::move(ema);
  out.kind = AverageKind::ema;
  out.decay = decay;
  out.every = every;
  return out;
}

BinaryMask lawa_select(std::size_t k, std::size_t budget) {
  check_budget(k, budget, "lawa_select");
  std::vector<std::size_t> idx;
  idx.reserve(budget);
  for (std::size_t j = 1; j <= budget; ++j) {
    // ceil(k*j/K) - 1 in integer arithmetic.
    idx.push_back((k * j + budget - 1) / budget - 1);
  }
  return BinaryMask::from_indices(k, idx);
}

BinaryMask random_select(std::size_t k, std::size_t budget, std::uint64_t seed) {
  check_budget(k, budget, "random_select");
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Stream stream(rng::derive(seed, 0x52414e44u /* "RAND" */));
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(k - i));
    std::swap(perm[i], perm[j]);
  }
  return BinaryMask::from_indices(k, std::span(perm).first(budget));
}

AveragedWeights swa_average(std::span<const Checkpoint> stream, double start_fraction,
                            std::size_t every) {
  if (stream.empty()) throw ConfigError("swa_average: empty stream");
  if (!(start_fraction >= 0.0 && start_fraction <= 1.0)) {
    throw ConfigError("swa_average: start_fraction must lie in [0, 1]");
  }
  if (every == 0) throw ConfigError("swa_average: every must be positive");
  const auto threshold = static_cast<std::size_t>(
      std::floor(start_fraction * static_cast<double>(stream.back().step)));
  std::vector<const Checkpoint*> picked;
  std::size_t qualifying = 0;
  for (const auto& c : stream) {
    if (c.step < threshold) continue;
    if (qualifying % every == 0) picked.push_back(&c);
    ++qualifying;
  }
  if (picked.empty()) {
    throw ConfigError("swa_average: no checkpoint at or after step " + std::to_string(threshold));
  }
  AveragedWeights out;
  out.weights = mean_of(picked);
  out.kind = AverageKind::swa;
  out.every = every;
  out.start_fraction = start_fraction;
  return out;
}

}  // namespace sewa
