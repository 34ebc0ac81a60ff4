#include <cmath>
#include <string>

#include "sewa/error.hpp"
#include "sewa/mask_learning.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {

constexpr std::uint64_t kGumbelTag = 0x47554d42u;  // "GUMB"

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

GumbelPair gumbel_pair_from_uniforms(double u0, double u1) {
  return {u0, u1, gumbel_from_uniform(u0), gumbel_from_uniform(u1)};
}

GumbelPair gumbel_sample(std::uint64_t seed, std::uint64_t index) {
  rng::Stream stream(rng::derive(seed, kGumbelTag, index));
  const double u0 = stream.uniform();
  const double u1 = stream.uniform();
  return gumbel_pair_from_uniforms(u0, u1);
}

GumbelDraws gumbel_draws(std::uint64_t seed, std::uint64_t sample, std::size_t k) {
  const std::uint64_t sample_seed = rng::derive(seed, kGumbelTag, sample);
  GumbelDraws draws(k);
  for (std::size_t i = 0; i < k; ++i) draws[i] = gumbel_sample(sample_seed, i);
  return draws;
}

double relaxed_entry(double s, const GumbelPair& g, double t) {
  const double gap = (std::log(s) + g.g1 - (std::log1p(-s) + g.g0)) / t;
  return stable_sigmoid(gap);
}

double relaxed_entry_softmax(double s, const GumbelPair& g, double t) {
  const double a = (std::log(s) + g.g1) / t;
  const double b = (std::log(1.0 - s) + g.g0) / t;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  return ea / (ea + eb);
}

RelaxedMask gs_relax(std::span<const double> s, const GumbelDraws& draws, double t) {
  if (!(t > 0.0)) throw ConfigError("gs_relax: temperature must be positive");
  if (draws.size() != s.size()) {
    throw DimensionError("gs_relax: " + std::to_string(draws.size()) + " draws for " +
                         std::to_string(s.size()) + " probabilities");
  }
  RelaxedMask out;
  out.values.resize(s.size());
  out.temperature = t;
  out.draws = draws;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0 && s[i] < 1.0)) {
      throw ConfigError("gs_relax: s_" + std::to_string(i) + " is not in (0, 1)");
    }
    out.values[i] = relaxed_entry(s[i], draws[i], t);
  }
  return out;
}

WeightVector relaxed_average(const TrajectoryWindow& window, std::span<const double> m) {
  if (window.empty()) throw ConfigError("relaxed_average: empty window");
  if (m.size() != window.size()) {
    throw DimensionError("relaxed_average: mask length " + std::to_string(m.size()) +
                         " differs from window length " + std::to_string(window.size()));
  }
  const std::size_t dim = window.dim();
  double total = 0.0;
  for (double v : m) total += v;
  WeightVector acc(dim, 0.0);
  auto av = acc.values();
  // Offsets from the last checkpoint, which also carries weight kNormFloor so an
  // all-but-zero relaxed mask tends to the discrete fallback. Identical
  // checkpoints reproduce it exactly.
  const auto anchor = window.back().weights.values();
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto wv = window[i].weights.values();
    for (std::size_t j = 0; j < dim; ++j) av[j] += m[i] * (wv[j] - anchor[j]);
  }
  const double denom = total + kNormFloor;
  for (std::size_t j = 0; j < dim; ++j) av[j] = anchor[j] + av[j] / denom;
  return acc;
}

WeightVector discrete_average(const TrajectoryWindow& window, std::span<const std::uint8_t> bits) {
  if (window.empty()) throw ConfigError("discrete_average: empty window");
  if (bits.size() != window.size()) {
    throw DimensionError("discrete_average: mask length differs from window length");
  }
  std::vector<std::uint8_t> copy(bits.begin(), bits.end());
  BinaryMask mask(std::move(copy));
  if (mask.selected_count() == 0) return window.back().weights;
  return apply_mask(window, mask).weights;
}

}  // namespace sewa
