#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sewa/error.hpp"
#include "sewa/io_util.hpp"
#include "sewa/mask_learning.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {

constexpr double kProjectionTolerance = 1e-12;
constexpr double kStallThreshold = 1e-8;

double clamp_sum(std::span<const double> s, double shift, double lo, double hi) {
  double sum = 0.0;
  for (double v : s) sum += std::clamp(v - shift, lo, hi);
  return sum;
}

}  // namespace

MaskProbs project_feasible(std::span<const double> s_raw, std::size_t budget, double eps) {
  if (s_raw.empty()) throw ConfigError("project_feasible: empty input");
  if (budget == 0) throw ConfigError("project_feasible: budget must be positive");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("project_feasible: eps must lie in (0, 0.5)");
  for (double v : s_raw) {
    if (!std::isfinite(v)) throw ConfigError("project_feasible: non-finite entry");
  }
  const double K = static_cast<double>(budget);
  if (static_cast<double>(s_raw.size()) * eps > K) {
    throw ConfigError("project_feasible: infeasible, k * eps = " +
                      std::to_string(static_cast<double>(s_raw.size()) * eps) + " exceeds K = " +
                      std::to_string(budget));
  }
  const double lo_bound = eps;
  const double hi_bound = 1.0 - eps;

  double shift = 0.0;
  if (clamp_sum(s_raw, 0.0, lo_bound, hi_bound) > K) {
    // The clamped sum is non-increasing in the shift; at max(s) - eps every
    // entry sits on the lower bound and the sum is k * eps <= K.
    double lo = 0.0;
    double hi = *std::max_element(s_raw.begin(), s_raw.end()) - eps;
    while (hi - lo > kProjectionTolerance) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (clamp_sum(s_raw, mid, lo_bound, hi_bound) > K) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    shift = hi;
  }
  std::vector<double> out(s_raw.size());
  for (std::size_t i = 0; i < s_raw.size(); ++i) {
    out[i] = std::clamp(s_raw[i] - shift, lo_bound, hi_bound);
  }
  return MaskProbs(std::move(out), budget, eps);
}

BinaryMask extract_topk(std::span<const double> s, std::size_t budget) {
  if (budget > s.size()) {
    throw ConfigError("extract_topk: K=" + std::to_string(budget) + " exceeds k=" +
                      std::to_string(s.size()));
  }
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return BinaryMask::from_indices(s.size(), std::span(order).first(budget));
}

BinaryMask bernoulli_select(std::span<const double> s, std::uint64_t seed) {
  if (s.empty()) throw ConfigError("bernoulli_select: empty probability vector");
  auto bits = bernoulli_mask(s, seed, 0);
  BinaryMask mask(bits);
  if (mask.selected_count() > 0) return mask;
  return extract_topk(s, 1);
}

double temperature_at(const TemperatureSchedule& schedule, std::size_t iteration) {
  if (const auto* c = std::get_if<ConstantTemperature>(&schedule)) return c->t;
  const auto& g = std::get<GeometricTemperature>(schedule);
  return std::max(g.t_min, g.t0 * std::pow(g.factor, static_cast<double>(iteration)));
}

void GsConfig::validate() const {
  if (const auto* c = std::get_if<ConstantTemperature>(&temperature)) {
    if (!(c->t > 0.0)) throw ConfigError("GsConfig: temperature must be positive");
  } else {
    const auto& g = std::get<GeometricTemperature>(temperature);
    if (!(g.t0 > 0.0 && g.t_min > 0.0)) {
      throw ConfigError("GsConfig: geometric temperatures must be positive");
    }
    if (!(g.factor > 0.0 && g.factor <= 1.0)) {
      throw ConfigError("GsConfig: geometric factor must lie in (0, 1]");
    }
  }
  if (samples == 0) throw ConfigError("GsConfig: samples (M) must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ConfigError("GsConfig: step_size must be positive");
  }
  if (iterations == 0) throw ConfigError("GsConfig: iterations must be positive");
  if (budget == 0) throw ConfigError("GsConfig: budget K must be positive");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("GsConfig: eps must lie in (0, 0.5)");
}

Dataset select_eval_rows(const Dataset& data, std::size_t eval_batch, std::uint64_t seed) {
  if (eval_batch == 0 || eval_batch >= data.size()) return data;
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Stream stream(rng::derive(seed, 0x4556414cu /* "EVAL" */));
  for (std::size_t i = 0; i < eval_batch; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(data.size() - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(eval_batch);
  std::sort(perm.begin(), perm.end());
  return data.subset(perm);
}

MaskOptimization optimize_mask(const TrajectoryWindow& window, const MlpSpec& spec,
                               const Dataset& data, const GsConfig& cfg) {
  cfg.validate();
  if (window.empty()) throw ConfigError("optimize_mask: empty window");
  const std::size_t k = window.size();
  const Dataset eval = select_eval_rows(data, cfg.eval_batch, cfg.seed);
  const MaskProblem problem{window, spec, eval};

  const double init = std::clamp(static_cast<double>(cfg.budget) / static_cast<double>(k),
                                 cfg.eps, 1.0 - cfg.eps);
  std::vector<double> start(k, init);
  MaskProbs s = project_feasible(start, cfg.budget, cfg.eps);

  MaskOptimization out{{}, s};
  std::vector<double> step(k);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double t = temperature_at(cfg.temperature, it);
    const ObjectiveGrad og =
        objective_grad(problem, s.values(), t, cfg.samples, rng::derive(cfg.seed, it));
    out.history.push_back({it, t, og.value, {s.values().begin(), s.values().end()}});
    for (std::size_t i = 0; i < k; ++i) step[i] = s[i] - cfg.step_size * og.grad[i];
    MaskProbs next = project_feasible(step, cfg.budget, cfg.eps);
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) change = std::max(change, std::abs(next[i] - s[i]));
    s = std::move(next);
    if (change < kStallThreshold) break;
  }
  out.final_probs = s;
  return out;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string out = "iteration,temperature,objective";
  const std::size_t k = history.empty() ? 0 : history.front().s.size();
  for (std::size_t i = 0; i < k; ++i) out += ",s_" + std::to_string(i);
  out += '\n';
  for (const auto& row : history) {
    out += std::to_string(row.iteration);
    out += ',' + format_double(row.temperature);
    out += ',' + format_double(row.objective);
    for (double v : row.s) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace sewa
