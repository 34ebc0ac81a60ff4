#pragma once

// Learning which checkpoints to average.
//
// Each checkpoint i in the window gets a selection probability s_i. The
// discrete objective E_{m ~ Bern(s)} L(w(m)) is relaxed with a two-category
// Gumbel-softmax sample per checkpoint,
//
//   m~_i = sigmoid(((log s_i + g_i1) - (log(1 - s_i) + g_i0)) / t),
//
// the relaxed model is the normalized weighted average
//
//   w(m~) = (sum_i m~_i w_i + kNormFloor w_k) / (sum_i m~_i + kNormFloor),
//
// where w_k is the last checkpoint; as t -> 0 the relaxed model follows the
// discrete one including its all-zero fallback. s is trained by projected gradient descent on the Monte Carlo mean of
// L(w(m~)) over the feasible set {eps <= s_i <= 1 - eps, sum_i s_i <= K}. The
// final mask keeps the K largest probabilities.
//
// Discrete masks use w(m) = mean of the selected checkpoints. The all-zero
// mask falls back to the last checkpoint of the window.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sewa/averagers.hpp"
#include "sewa/nn.hpp"
#include "sewa/trajectory.hpp"

namespace sewa {

inline constexpr double kDefaultClamp = 1e-6;
inline constexpr double kNormFloor = 1e-12;
inline constexpr std::size_t kMaxEnumerationLength = 20;

class MaskProbs {
 public:
  // Throws ConfigError unless eps <= s_i <= 1 - eps and sum(s) <= budget + 1e-9.
  MaskProbs(std::vector<double> s, std::size_t budget, double eps = kDefaultClamp);

  std::size_t size() const { return s_.size(); }
  std::size_t budget() const { return budget_; }
  double eps() const { return eps_; }
  std::span<const double> values() const { return s_; }
  double operator[](std::size_t i) const { return s_[i]; }

 private:
  std::vector<double> s_;
  std::size_t budget_;
  double eps_;
};

// ---- Gumbel sampling and the relaxed mask ----

struct GumbelPair {
  double u0 = 0.5;
  double u1 = 0.5;
  double g0 = 0.0;  // perturbs the "not selected" logit log(1 - s)
  double g1 = 0.0;  // perturbs the "selected" logit log s
};

using GumbelDraws = std::vector<GumbelPair>;

// g = -log(-log u).
double gumbel_from_uniform(double u);

// Draw number `index` under `seed`; u is in (0, 1) by construction.
GumbelPair gumbel_sample(std::uint64_t seed, std::uint64_t index);

GumbelPair gumbel_pair_from_uniforms(double u0, double u1);

// The k draws used by Monte Carlo sample `sample` of an objective evaluation.
GumbelDraws gumbel_draws(std::uint64_t seed, std::uint64_t sample, std::size_t k);

struct RelaxedMask {
  std::vector<double> values;
  double temperature = 1.0;
  GumbelDraws draws;
};

// Stable sigmoid form of the relaxed Bernoulli sample.
double relaxed_entry(double s, const GumbelPair& g, double t);
// The same quantity written as a two-way softmax; used to cross-check.
double relaxed_entry_softmax(double s, const GumbelPair& g, double t);

RelaxedMask gs_relax(std::span<const double> s, const GumbelDraws& draws, double t);

WeightVector relaxed_average(const TrajectoryWindow& window, std::span<const double> m);

// Mean of the checkpoints whose bit is set; last checkpoint when none is.
WeightVector discrete_average(const TrajectoryWindow& window, std::span<const std::uint8_t> bits);

// ---- objectives ----

struct MaskProblem {
  const TrajectoryWindow& window;
  const MlpSpec& spec;
  const Dataset& data;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(M); 0 when M = 1
};

// F^(s) = (1/M) sum_m L(w(GS(s, u^(m), t))); sample m uses gumbel_draws(seed, m, k).
double objective_mc(const MaskProblem& problem, std::span<const double> s, double t,
                    std::size_t samples, std::uint64_t seed);
McEstimate objective_mc_estimate(const MaskProblem& problem, std::span<const double> s, double t,
                                 std::size_t samples, std::uint64_t seed);

struct ObjectiveGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Exact gradient of objective_mc with the same draws.
ObjectiveGrad objective_grad(const MaskProblem& problem, std::span<const double> s, double t,
                             std::size_t samples, std::uint64_t seed);

// Per-sample pathwise (reparameterized) gradients, one row per sample.
std::vector<std::vector<double>> pathwise_grad_samples(const MaskProblem& problem,
                                                       std::span<const double> s, double t,
                                                       std::size_t samples, std::uint64_t seed);

// Score-function estimator (1/M) sum_m L(w(m)) grad_s log p(m | s), m ~ Bern(s).
std::vector<double> pge_grad(const MaskProblem& problem, std::span<const double> s,
                             std::size_t samples, std::uint64_t seed);
std::vector<std::vector<double>> pge_grad_samples(const MaskProblem& problem,
                                                  std::span<const double> s, std::size_t samples,
                                                  std::uint64_t seed);

// Bernoulli mask draw used by pge sample `sample`.
std::vector<std::uint8_t> bernoulli_mask(std::span<const double> s, std::uint64_t seed,
                                         std::uint64_t sample);

// E_{p(m|s)} L(w(m)) by enumerating all 2^k masks. Refuses k > 20.
double exact_expected_loss(const MaskProblem& problem, std::span<const double> s);
// Gradient of exact_expected_loss with respect to s, also by enumeration.
std::vector<double> exact_expected_grad(const MaskProblem& problem, std::span<const double> s);

// ---- feasible set and optimizer ----

// Euclidean projection onto {eps <= s_i <= 1 - eps, sum s_i <= K}.
MaskProbs project_feasible(std::span<const double> s_raw, std::size_t budget,
                           double eps = kDefaultClamp);

// Ones at the K largest s_i; ties go to the smaller index.
BinaryMask extract_topk(std::span<const double> s, std::size_t budget);

// Inference-time alternative to top-K: m_i ~ Bern(s_i). An all-zero draw
// selects the largest s_i instead.
BinaryMask bernoulli_select(std::span<const double> s, std::uint64_t seed);

struct ConstantTemperature {
  double t = 1.0;
};

struct GeometricTemperature {
  double t0 = 1.0;
  double t_min = 0.1;
  double factor = 0.95;
};

using TemperatureSchedule = std::variant<ConstantTemperature, GeometricTemperature>;

double temperature_at(const TemperatureSchedule& schedule, std::size_t iteration);

struct GsConfig {
  TemperatureSchedule temperature = GeometricTemperature{};
  std::size_t samples = 8;  // M
  double step_size = 0.1;
  std::size_t iterations = 200;
  std::size_t budget = 1;   // K
  std::uint64_t seed = 0;
  std::size_t eval_batch = 0;  // rows of the evaluation data used; 0 = all
  double eps = kDefaultClamp;

  void validate() const;
};

struct HistoryRow {
  std::size_t iteration = 0;
  double temperature = 0.0;
  double objective = 0.0;
  std::vector<double> s;  // probabilities at which `objective` was evaluated
};

struct MaskOptimization {
  std::vector<HistoryRow> history;
  MaskProbs final_probs;
};

MaskOptimization optimize_mask(const TrajectoryWindow& window, const MlpSpec& spec,
                               const Dataset& data, const GsConfig& cfg);

// Rows of `data` used when cfg.eval_batch limits the evaluation set.
Dataset select_eval_rows(const Dataset& data, std::size_t eval_batch, std::uint64_t seed);

// Header "iteration,temperature,objective,s_0,..,s_{k-1}"; 17 significant digits.
std::string history_csv(const std::vector<HistoryRow>& history);

}  // namespace sewa
