#pragma once

// Generalization-bound calculators and empirical stability probes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sewa/nn.hpp"
#include "sewa/trajectory.hpp"

namespace sewa {

struct BoundInputs {
  double alpha = 0.01;     // constant step size
  double lipschitz = 1.0;  // L
  double smoothness = 1.0; // beta
  double c = 1.0;          // step-size numerator, alpha_t <= c / t
  std::size_t n = 100;     // training-set size
  std::size_t T = 1000;    // iterations
  std::size_t k = 1;       // window length
  double s = 1.0;          // largest selection probability in the window

  // Throws ConfigError.
  void validate() const;
  // alpha <= 2 / beta; the convex formula is still evaluated when false.
  bool step_size_admissible() const;
};

// 2 alpha L^2 s (T - k/2) / n.
double convex_bound(const BoundInputs& b);
// 2 alpha L^2 T / n, the plain SGD bound.
double sgd_convex_bound(const BoundInputs& b);

// ((1 + 1/(c beta)) / (n - 1)) * A^(k/(c beta + k)) * T^(c beta/(c beta + k))
// with A = 2 c s L^2 (1 + k e^(c beta)) / k, evaluated in log space.
// Throws NumericError naming the term that overflows. The bound assumes a
// loss with range [0, 1]; losses here are not rescaled, so for other ranges
// it holds up to that scale factor.
double nonconvex_bound(const BoundInputs& b);

// A^(k/(c beta + k)) * T^(c beta/(c beta + k)).
double optimal_t0(const BoundInputs& b);

// g(t) = t/n + (2 s L^2 (1 + k e^(c beta)) / ((n - 1) beta)) * (T/t)^(c beta / k).
double t0_tradeoff(const BoundInputs& b, double t);

struct T0Check {
  double closed_form = 0.0;
  double grid_minimizer = 0.0;
  double relative_gap = 0.0;  // |grid - closed| / closed
  bool within_one_percent = false;
};

// Minimizes t0_tradeoff over a log-spaced grid spanning closed_form * 10^(+-decades).
T0Check verify_optimal_t0(const BoundInputs& b, std::size_t grid_points = 200001,
                          double decades = 3.0);

// Exponent of T in the non-convex bound for a window of length k.
double nonconvex_t_exponent(double c, double beta, double k);

struct BoundRow {
  std::string setting;    // "convex" or "nonconvex"
  std::string algorithm;  // SGD, SWA, FWA, EMA, SeWA
  std::string tabulated_formula;
  std::optional<double> tabulated_value;
  std::string theorem_formula;
  std::optional<double> theorem_value;
  std::optional<double> t_exponent;
};

std::vector<BoundRow> bounds_table(const BoundInputs& b);
// Header: setting,algorithm,tabulated_formula,tabulated_value,theorem_formula,theorem_value,t_exponent
std::string bounds_table_csv(const std::vector<BoundRow>& rows);
std::string bounds_table_text(const std::vector<BoundRow>& rows);

// ---- probes ----

struct ProbePoint {
  std::size_t step = 0;
  double value = 0.0;
};

struct ProbeResult {
  std::vector<ProbePoint> series;
  double max = 0.0;
  double mean = 0.0;
  std::optional<double> bound_value;
  std::string bound_label;
  // Expansiveness: smoothness constant used in the ceiling.
  double curvature = 0.0;
  // Divergence: first step whose weights depend on the perturbed sample.
  std::optional<std::size_t> first_divergence_step;
};

// F(w) = (beta/2) |w|^2.
struct ConvexQuadratic {
  double beta = 1.0;
  std::size_t dim = 10;
};

// Single bias-free linear layer with logistic loss; per-sample steps.
struct ConvexLogistic {
  Dataset data;
};

// Full-batch gradient steps on an MLP loss.
struct NonconvexMlp {
  MlpSpec spec;
  Dataset data;
  std::size_t curvature_points = 50;  // trajectory points probed per iterate
  std::size_t power_iterations = 10;  // Hessian-vector products per point
};

using ExpansivenessProblem = std::variant<ConvexQuadratic, ConvexLogistic, NonconvexMlp>;

// Logistic constants from data: L = max |x|, beta = max |x|^2 / 4.
struct LogisticConstants {
  double lipschitz = 0.0;
  double smoothness = 0.0;
};
LogisticConstants logistic_constants(const Dataset& data);

// Coupled gradient steps from two random starts. Each series entry is
// |w_{t+1} - w'_{t+1}| / |w_t - w'_t|. The series ends early once the
// separation drops below 1e-6 of the iterate norm, where rounding dominates
// the ratio. Throws NumericError on zero separation.
ProbeResult expansiveness_probe(const ExpansivenessProblem& problem, double alpha,
                                std::size_t steps, std::uint64_t seed);
// Same, from the given starting pair.
ProbeResult expansiveness_probe(const ExpansivenessProblem& problem, double alpha,
                                std::size_t steps, std::uint64_t seed, const WeightVector& start,
                                const WeightVector& start_prime);

// Largest |H v| / |v| seen while running power iteration on finite-difference
// Hessian-vector products at each given point.
double empirical_curvature(const MlpSpec& spec, const Dataset& data,
                           const std::vector<WeightVector>& points, std::size_t iterations,
                           std::uint64_t seed);

// Runs sgd_train on data and on data with row perturb_index replaced, sharing
// cfg.seed. Series entry j is the mean of |w_i - w'_i| over the last k captures
// up to capture j (captures before the first count as 0). The ceiling
// (2 alpha L / n)(T - k/2) is attached for a constant-rate single-layer logistic model.
ProbeResult divergence_probe(const MlpSpec& spec, const Dataset& data, std::size_t perturb_index,
                             std::span<const double> replacement_x,
                             std::span<const double> replacement_y, const SgdConfig& cfg,
                             std::size_t k);

std::string probe_csv(const ProbeResult& result);

}  // namespace sewa
