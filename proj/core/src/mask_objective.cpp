#include <cmath>
#include <string>

#include "sewa/error.hpp"
#include "sewa/mask_learning.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {

constexpr std::uint64_t kBernoulliTag = 0x4245524eu;  // "BERN"

void check_interior(std::span<const double> s, std::size_t k, const char* who) {
  if (s.size() != k) {
    throw DimensionError(std::string(who) + ": " + std::to_string(s.size()) +
                         " probabilities for a window of " + std::to_string(k));
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0 && s[i] < 1.0)) {
      throw ConfigError(std::string(who) + ": s_" + std::to_string(i) + " = " +
                        std::to_string(s[i]) + " is not in (0, 1)");
    }
  }
}

void check_samples(std::size_t samples, double t, const char* who) {
  if (samples == 0) throw ConfigError(std::string(who) + ": need at least one sample");
  if (!(t > 0.0)) throw ConfigError(std::string(who) + ": temperature must be positive");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// One Monte Carlo sample of the relaxed objective and, optionally, its exact
// gradient with respect to s.
double relaxed_sample(const MaskProblem& p, std::span<const double> s, double t,
                      std::uint64_t seed, std::uint64_t sample, std::vector<double>* grad) {
  const std::size_t k = s.size();
  const GumbelDraws draws = gumbel_draws(seed, sample, k);

  // m~_i and m~_i (1 - m~_i), the latter from sigmoid(gap) sigmoid(-gap) to
  // keep relative accuracy when m~_i is close to 1.
  std::vector<double> m(k), m_var(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double gap = (std::log(s[i]) + draws[i].g1 - (std::log1p(-s[i]) + draws[i].g0)) / t;
    m[i] = sigmoid(gap);
    m_var[i] = m[i] * sigmoid(-gap);
  }
  const WeightVector w_bar = relaxed_average(p.window, m);
  if (grad == nullptr) return mean_loss(w_bar, p.spec, p.data);

  const LossAndGrad lg = loss_and_grad(w_bar, p.spec, p.data);
  double total = 0.0;
  for (double v : m) total += v;
  const double denom = total + kNormFloor;
  const auto gv = lg.grad.values();
  const auto wb = w_bar.values();
  grad->assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    // dL/dm~_i = <dL/dw, dw/dm~_i> with dw/dm~_i = (w_i - w_bar) / (S + floor).
    const auto wi = p.window[i].weights.values();
    double dot = 0.0;
    for (std::size_t j = 0; j < gv.size(); ++j) dot += gv[j] * (wi[j] - wb[j]);
    const double dL_dm = dot / denom;
    const double dm_ds = m_var[i] / t * (1.0 / s[i] + 1.0 / (1.0 - s[i]));
    (*grad)[i] = dL_dm * dm_ds;
  }
  return lg.loss;
}

McEstimate summarize(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  McEstimate out;
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

std::vector<double> column_means(const std::vector<std::vector<double>>& rows, std::size_t k) {
  std::vector<double> mean(k, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < k; ++i) mean[i] += r[i];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

MaskProbs::MaskProbs(std::vector<double> s, std::size_t budget, double eps)
    : s_(std::move(s)), budget_(budget), eps_(eps) {
  if (s_.empty()) throw ConfigError("MaskProbs: empty probability vector");
  if (budget_ == 0) throw ConfigError("MaskProbs: budget must be positive");
  if (!(eps_ > 0.0 && eps_ < 0.5)) throw ConfigError("MaskProbs: eps must lie in (0, 0.5)");
  double sum = 0.0;
  for (std::size_t i = 0; i < s_.size(); ++i) {
    if (!(s_[i] >= eps_ && s_[i] <= 1.0 - eps_)) {
      throw ConfigError("MaskProbs: s_" + std::to_string(i) + " = " + std::to_string(s_[i]) +
                        " outside [eps, 1 - eps]");
    }
    sum += s_[i];
  }
  if (sum > static_cast<double>(budget_) + 1e-9) {
    throw ConfigError("MaskProbs: sum of probabilities " + std::to_string(sum) +
                      " exceeds budget " + std::to_string(budget_));
  }
}

McEstimate objective_mc_estimate(const MaskProblem& problem, std::span<const double> s, double t,
                                 std::size_t samples, std::uint64_t seed) {
  check_interior(s, problem.window.size(), "objective_mc");
  check_samples(samples, t, "objective_mc");
  std::vector<double> values(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    values[m] = relaxed_sample(problem, s, t, seed, m, nullptr);
  }
  return summarize(values);
}

double objective_mc(const MaskProblem& problem, std::span<const double> s, double t,
                    std::size_t samples, std::uint64_t seed) {
  return objective_mc_estimate(problem, s, t, samples, seed).mean;
}

std::vector<std::vector<double>> pathwise_grad_samples(const MaskProblem& problem,
                                                       std::span<const double> s, double t,
                                                       std::size_t samples, std::uint64_t seed) {
  check_interior(s, problem.window.size(), "objective_grad");
  check_samples(samples, t, "objective_grad");
  std::vector<std::vector<double>> rows(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    relaxed_sample(problem, s, t, seed, m, &rows[m]);
  }
  return rows;
}

ObjectiveGrad objective_grad(const MaskProblem& problem, std::span<const double> s, double t,
                             std::size_t samples, std::uint64_t seed) {
  check_interior(s, problem.window.size(), "objective_grad");
  check_samples(samples, t, "objective_grad");
  std::vector<std::vector<double>> rows(samples);
  std::vector<double> values(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    values[m] = relaxed_sample(problem, s, t, seed, m, &rows[m]);
  }
  ObjectiveGrad out;
  out.value = summarize(values).mean;
  out.grad = column_means(rows, s.size());
  return out;
}

std::vector<std::uint8_t> bernoulli_mask(std::span<const double> s, std::uint64_t seed,
                                         std::uint64_t sample) {
  rng::Stream stream(rng::derive(seed, kBernoulliTag, sample));
  std::vector<std::uint8_t> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) bits[i] = stream.uniform() < s[i] ? 1 : 0;
  return bits;
}

std::vector<std::vector<double>> pge_grad_samples(const MaskProblem& problem,
                                                  std::span<const double> s, std::size_t samples,
                                                  std::uint64_t seed) {
  const std::size_t k = problem.window.size();
  check_interior(s, k, "pge_grad");
  if (samples == 0) throw ConfigError("pge_grad: need at least one sample");
  std::vector<std::vector<double>> rows(samples, std::vector<double>(k));
  for (std::size_t m = 0; m < samples; ++m) {
    const auto bits = bernoulli_mask(s, seed, m);
    const double loss = mean_loss(discrete_average(problem.window, bits), problem.spec, problem.data);
    for (std::size_t i = 0; i < k; ++i) {
      const double score = bits[i] ? 1.0 / s[i] : -1.0 / (1.0 - s[i]);
      rows[m][i] = loss * score;
    }
  }
  return rows;
}

std::vector<double> pge_grad(const MaskProblem& problem, std::span<const double> s,
                             std::size_t samples, std::uint64_t seed) {
  return column_means(pge_grad_samples(problem, s, samples, seed), s.size());
}

namespace {

template <class Visit>
void enumerate_masks(const MaskProblem& problem, std::span<const double> s, const char* who,
                     Visit visit) {
  const std::size_t k = problem.window.size();
  if (k > kMaxEnumerationLength) {
    throw ConfigError(std::string(who) + ": window length " + std::to_string(k) +
                      " would require enumerating 2^" + std::to_string(k) +
                      " masks (limit is 2^" + std::to_string(kMaxEnumerationLength) + ")");
  }
  check_interior(s, k, who);
  std::vector<std::uint8_t> bits(k);
  const std::uint64_t count = std::uint64_t{1} << k;
  for (std::uint64_t code = 0; code < count; ++code) {
    double prob = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      bits[i] = static_cast<std::uint8_t>((code >> i) & 1u);
      prob *= bits[i] ? s[i] : 1.0 - s[i];
    }
    const double loss =
        mean_loss(discrete_average(problem.window, bits), problem.spec, problem.data);
    visit(bits, prob, loss);
  }
}

}  // namespace

double exact_expected_loss(const MaskProblem& problem, std::span<const double> s) {
  double total = 0.0;
  enumerate_masks(problem, s, "exact_expected_loss",
                  [&](const std::vector<std::uint8_t>&, double prob, double loss) {
                    total += prob * loss;
                  });
  return total;
}

std::vector<double> exact_expected_grad(const MaskProblem& problem, std::span<const double> s) {
  std::vector<double> grad(s.size(), 0.0);
  enumerate_masks(problem, s, "exact_expected_grad",
                  [&](const std::vector<std::uint8_t>& bits, double prob, double loss) {
                    for (std::size_t i = 0; i < bits.size(); ++i) {
                      const double score = bits[i] ? 1.0 / s[i] : -1.0 / (1.0 - s[i]);
                      grad[i] += prob * loss * score;
                    }
                  });
  return grad;
}

}  // namespace sewa
