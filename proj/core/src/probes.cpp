#include <algorithm>
#include <cmath>
#include <string>

#include "sewa/error.hpp"
#include "sewa/io_util.hpp"
#include "sewa/rng.hpp"
#include "sewa/stability.hpp"

namespace sewa {

namespace {

constexpr std::uint64_t kStartTag = 0x45585057u;  // "EXPW"
constexpr std::uint64_t kHvpTag = 0x48565050u;    // "HVPP"
constexpr double kHvpStep = 1e-5;
constexpr double kResolvableSeparation = 1e-6;

std::vector<double> normal_vector(std::uint64_t key, std::size_t dim) {
  rng::Stream stream(key);
  std::vector<double> v(dim);
  for (double& x : v) x = stream.normal();
  return v;
}

void summarize(ProbeResult& r) {
  r.max = 0.0;
  r.mean = 0.0;
  for (const auto& p : r.series) {
    r.max = std::max(r.max, p.value);
    r.mean += p.value;
  }
  if (!r.series.empty()) r.mean /= static_cast<double>(r.series.size());
}

MlpSpec logistic_spec(std::size_t dim) {
  MlpSpec spec;
  spec.layer_sizes = {dim, 1};
  spec.activation = Activation::identity;
  spec.loss = LossKind::logistic_binary;
  spec.bias = false;
  return spec;
}

// Coupled gradient iteration; `grad(w, update)` returns the update direction.
template <class Grad>
void coupled_run(std::vector<double> w, std::vector<double> w2, double alpha, std::size_t steps,
                 Grad grad, ProbeResult& out,
                 std::vector<std::vector<double>>* points = nullptr,
                 std::size_t point_count = 0) {
  double dist = l2_distance(w, w2);
  if (!(dist > 0.0)) throw NumericError("expansiveness_probe: zero initial separation");
  std::size_t next_point = 0;
  for (std::size_t u = 0; u < steps; ++u) {
    // Below this separation the ratio is dominated by rounding; stop.
    if (dist < kResolvableSeparation * std::max(l2_norm(w), l2_norm(w2))) break;
    if (points != nullptr && next_point < point_count &&
        u == next_point * steps / point_count) {
      points->push_back(w);
      points->push_back(w2);
      ++next_point;
    }
    const std::vector<double> g = grad(w, u);
    const std::vector<double> g2 = grad(w2, u);
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= alpha * g[j];
      w2[j] -= alpha * g2[j];
    }
    const double next = l2_distance(w, w2);
    if (!std::isfinite(next)) {
      throw NumericError("expansiveness_probe: non-finite iterate at step " + std::to_string(u + 1));
    }
    out.series.push_back({u + 1, next / dist});
    dist = next;
  }
}

}  // namespace

LogisticConstants logistic_constants(const Dataset& data) {
  const double m = data.max_feature_norm();
  return {m, m * m / 4.0};
}

double empirical_curvature(const MlpSpec& spec, const Dataset& data,
                           const std::vector<WeightVector>& points, std::size_t iterations,
                           std::uint64_t seed) {
  if (iterations == 0) throw ConfigError("empirical_curvature: iterations must be positive");
  double best = 0.0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const WeightVector& w = points[p];
    std::vector<double> v = normal_vector(rng::derive(seed, kHvpTag, p), w.dim());
    double norm = l2_norm(v);
    for (double& x : v) x /= norm;
    WeightVector plus(w.dim()), minus(w.dim());
    for (std::size_t it = 0; it < iterations; ++it) {
      for (std::size_t j = 0; j < w.dim(); ++j) {
        plus[j] = w[j] + kHvpStep * v[j];
        minus[j] = w[j] - kHvpStep * v[j];
      }
      const auto gp = loss_and_grad(plus, spec, data).grad;
      const auto gm = loss_and_grad(minus, spec, data).grad;
      std::vector<double> hv(w.dim());
      for (std::size_t j = 0; j < w.dim(); ++j) hv[j] = (gp[j] - gm[j]) / (2.0 * kHvpStep);
      norm = l2_norm(hv);
      best = std::max(best, norm);
      if (!(norm > 0.0)) break;
      for (std::size_t j = 0; j < w.dim(); ++j) v[j] = hv[j] / norm;
    }
  }
  return best;
}

namespace {

std::size_t problem_dim(const ExpansivenessProblem& problem) {
  if (const auto* q = std::get_if<ConvexQuadratic>(&problem)) return q->dim;
  if (const auto* lg = std::get_if<ConvexLogistic>(&problem)) return lg->data.feature_dim();
  return std::get<NonconvexMlp>(problem).spec.parameter_count();
}

ProbeResult run_expansiveness(const ExpansivenessProblem& problem, double alpha,
                              std::size_t steps, std::uint64_t seed, std::vector<double> w,
                              std::vector<double> w2) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("expansiveness_probe: alpha must be positive");
  }
  if (steps == 0) throw ConfigError("expansiveness_probe: steps must be positive");
  if (w.size() != problem_dim(problem) || w2.size() != w.size()) {
    throw DimensionError("expansiveness_probe: starting points have the wrong dimension");
  }
  ProbeResult out;
  out.series.reserve(steps);

  if (const auto* q = std::get_if<ConvexQuadratic>(&problem)) {
    const double beta = q->beta;
    coupled_run(std::move(w), std::move(w2), alpha, steps,
                [beta](const std::vector<double>& x, std::size_t) {
                  std::vector<double> g(x.size());
                  for (std::size_t j = 0; j < x.size(); ++j) g[j] = beta * x[j];
                  return g;
                },
                out);
    out.curvature = beta;
  } else if (const auto* lg = std::get_if<ConvexLogistic>(&problem)) {
    const Dataset& data = lg->data;
    const MlpSpec spec = logistic_spec(data.feature_dim());
    check_compatible(spec, data);
    coupled_run(std::move(w), std::move(w2), alpha, steps,
                [&](const std::vector<double>& x, std::size_t u) {
                  const auto rows = sample_indices(seed, u, 1, data.size());
                  return loss_and_grad(WeightVector(x), spec, data, rows).grad.vec();
                },
                out);
    out.curvature = logistic_constants(data).smoothness;
  } else {
    const auto& mlp = std::get<NonconvexMlp>(problem);
    std::vector<std::vector<double>> points;
    coupled_run(std::move(w), std::move(w2), alpha, steps,
                [&](const std::vector<double>& x, std::size_t) {
                  return loss_and_grad(WeightVector(x), mlp.spec, mlp.data).grad.vec();
                },
                out, &points, mlp.curvature_points);
    std::vector<WeightVector> wpoints;
    wpoints.reserve(points.size());
    for (auto& p : points) wpoints.emplace_back(std::move(p));
    out.curvature =
        empirical_curvature(mlp.spec, mlp.data, wpoints, mlp.power_iterations, seed);
    out.bound_value = 1.0 + alpha * out.curvature;
    out.bound_label = "1 + alpha * beta_hat";
    summarize(out);
    return out;
  }

  if (alpha <= 2.0 / out.curvature) {
    out.bound_value = 1.0;
    out.bound_label = "1 (convex, alpha <= 2/beta)";
  } else {
    out.bound_value = 1.0 + alpha * out.curvature;
    out.bound_label = "1 + alpha * beta";
  }
  summarize(out);
  return out;
}

void check_problem(const ExpansivenessProblem& problem) {
  if (const auto* q = std::get_if<ConvexQuadratic>(&problem)) {
    if (!(q->beta > 0.0)) throw ConfigError("expansiveness_probe: beta must be positive");
    if (q->dim == 0) throw ConfigError("expansiveness_probe: dim must be positive");
  } else if (const auto* lg = std::get_if<ConvexLogistic>(&problem)) {
    if (lg->data.size() == 0) throw ConfigError("expansiveness_probe: empty dataset");
  } else {
    const auto& mlp = std::get<NonconvexMlp>(problem);
    mlp.spec.validate();
    check_compatible(mlp.spec, mlp.data);
  }
}

}  // namespace

ProbeResult expansiveness_probe(const ExpansivenessProblem& problem, double alpha,
                                std::size_t steps, std::uint64_t seed) {
  check_problem(problem);
  if (const auto* mlp = std::get_if<NonconvexMlp>(&problem)) {
    return run_expansiveness(problem, alpha, steps, seed,
                             mlp_init(mlp->spec, rng::derive(seed, kStartTag, 0)).vec(),
                             mlp_init(mlp->spec, rng::derive(seed, kStartTag, 1)).vec());
  }
  const std::size_t dim = problem_dim(problem);
  return run_expansiveness(problem, alpha, steps, seed,
                           normal_vector(rng::derive(seed, kStartTag, 0), dim),
                           normal_vector(rng::derive(seed, kStartTag, 1), dim));
}

ProbeResult expansiveness_probe(const ExpansivenessProblem& problem, double alpha,
                                std::size_t steps, std::uint64_t seed, const WeightVector& start,
                                const WeightVector& start_prime) {
  check_problem(problem);
  return run_expansiveness(problem, alpha, steps, seed, start.vec(), start_prime.vec());
}

ProbeResult divergence_probe(const MlpSpec& spec, const Dataset& data, std::size_t perturb_index,
                             std::span<const double> replacement_x,
                             std::span<const double> replacement_y, const SgdConfig& cfg,
                             std::size_t k) {
  spec.validate();
  cfg.validate();
  check_compatible(spec, data);
  if (k == 0) throw ConfigError("divergence_probe: k must be positive");
  if (perturb_index >= data.size()) {
    throw ConfigError("divergence_probe: perturb_index " + std::to_string(perturb_index) +
                      " out of range for n=" + std::to_string(data.size()));
  }
  if (replacement_x.size() != data.feature_dim() || replacement_y.size() != data.target_dim()) {
    throw DimensionError("divergence_probe: replacement row has the wrong shape");
  }
  const Dataset other = data.with_row_replaced(perturb_index, replacement_x, replacement_y);
  const TrainResult a = sgd_train(spec, data, cfg);
  const TrainResult b = sgd_train(spec, other, cfg);

  ProbeResult out;
  std::vector<double> dist(a.stream.size());
  for (std::size_t j = 0; j < a.stream.size(); ++j) {
    dist[j] = l2_distance(a.stream[j].weights.values(), b.stream[j].weights.values());
  }
  for (std::size_t j = 0; j < dist.size(); ++j) {
    double window = 0.0;
    for (std::size_t i = (j + 1 >= k ? j + 1 - k : 0); i <= j; ++i) window += dist[i];
    out.series.push_back({a.stream[j].step, window / static_cast<double>(k)});
  }
  summarize(out);

  if (cfg.full_batch) out.first_divergence_step = 1;
  for (std::size_t u = 0; u < cfg.steps && !cfg.full_batch; ++u) {
    const auto rows = sample_indices(cfg.seed, u, cfg.batch_size, data.size());
    if (std::find(rows.begin(), rows.end(), perturb_index) != rows.end()) {
      out.first_divergence_step = u + 1;
      break;
    }
  }

  const auto* rate = std::get_if<ConstantRate>(&cfg.schedule);
  if (spec.layer_count() == 1 && spec.loss == LossKind::logistic_binary && rate != nullptr) {
    double max_norm = std::max(data.max_feature_norm(), other.max_feature_norm());
    if (spec.bias) max_norm = std::sqrt(max_norm * max_norm + 1.0);
    const double T = static_cast<double>(cfg.steps);
    out.bound_value = 2.0 * rate->alpha * max_norm / static_cast<double>(data.size()) *
                      (T - static_cast<double>(k) / 2.0);
    out.bound_label = "(2 alpha L / n)(T - k/2)";
  }
  return out;
}

std::string probe_csv(const ProbeResult& result) {
  std::string out = "step,value\n";
  for (const auto& p : result.series) {
    out += std::to_string(p.step) + ',' + format_double(p.value) + '\n';
  }
  return out;
}

}  // namespace sewa
