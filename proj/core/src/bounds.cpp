#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "sewa/error.hpp"
#include "sewa/io_util.hpp"
#include "sewa/stability.hpp"

namespace sewa {

namespace {

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

// log(1 + k e^x) without overflowing e^x.
double log_one_plus_k_exp(double k, double x) {
  if (x > 0.0) return x + std::log(k) + std::log1p(std::exp(-x) / k);
  return std::log1p(k * std::exp(x));
}

// log A, A = 2 c s L^2 (1 + k e^(c beta)) / k. Requires s > 0.
double log_window_constant(const BoundInputs& b) {
  const double k = static_cast<double>(b.k);
  const double v = std::log(2.0) + std::log(b.c) + std::log(b.s) + 2.0 * std::log(b.lipschitz) +
                   log_one_plus_k_exp(k, b.c * b.smoothness) - std::log(k);
  if (!std::isfinite(v)) {
    throw NumericError("non-finite term 2*c*s*L^2*(1+k*e^(c*beta))/k");
  }
  return v;
}

double checked_exp(double log_value, const char* term) {
  const double v = std::exp(log_value);
  if (!std::isfinite(v)) throw NumericError(std::string("overflow evaluating ") + term);
  return v;
}

}  // namespace

void BoundInputs::validate() const {
  if (!positive_finite(alpha)) throw ConfigError("BoundInputs: alpha must be positive");
  if (!positive_finite(lipschitz)) throw ConfigError("BoundInputs: L must be positive");
  if (!positive_finite(smoothness)) throw ConfigError("BoundInputs: beta must be positive");
  if (!positive_finite(c)) throw ConfigError("BoundInputs: c must be positive");
  if (n < 2) throw ConfigError("BoundInputs: n must be >= 2");
  if (T == 0) throw ConfigError("BoundInputs: T must be positive");
  if (k == 0) throw ConfigError("BoundInputs: k must be positive");
  if (k > T) {
    throw ConfigError("BoundInputs: k=" + std::to_string(k) + " exceeds T=" + std::to_string(T));
  }
  if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("BoundInputs: s must lie in [0, 1]");
}

bool BoundInputs::step_size_admissible() const { return alpha <= 2.0 / smoothness; }

double convex_bound(const BoundInputs& b) {
  b.validate();
  if (!b.step_size_admissible()) {
    std::fprintf(stderr, "warning: alpha=%g exceeds 2/beta=%g; convex bound assumptions fail\n",
                 b.alpha, 2.0 / b.smoothness);
  }
  const double T = static_cast<double>(b.T);
  const double k = static_cast<double>(b.k);
  return 2.0 * b.alpha * b.lipschitz * b.lipschitz * b.s * (T - k / 2.0) /
         static_cast<double>(b.n);
}

double sgd_convex_bound(const BoundInputs& b) {
  b.validate();
  return 2.0 * b.alpha * b.lipschitz * b.lipschitz * static_cast<double>(b.T) /
         static_cast<double>(b.n);
}

double nonconvex_t_exponent(double c, double beta, double k) {
  return c * beta / (c * beta + k);
}

double optimal_t0(const BoundInputs& b) {
  b.validate();
  if (b.s == 0.0) return 0.0;
  const double k = static_cast<double>(b.k);
  const double cb = b.c * b.smoothness;
  const double log_t0 = k / (cb + k) * log_window_constant(b) +
                        nonconvex_t_exponent(b.c, b.smoothness, k) *
                            std::log(static_cast<double>(b.T));
  return checked_exp(log_t0, "t0");
}

double nonconvex_bound(const BoundInputs& b) {
  b.validate();
  if (b.s == 0.0) return 0.0;
  const double k = static_cast<double>(b.k);
  const double cb = b.c * b.smoothness;
  const double log_prefactor =
      std::log1p(1.0 / cb) - std::log(static_cast<double>(b.n) - 1.0);
  const double log_value = log_prefactor + k / (cb + k) * log_window_constant(b) +
                           nonconvex_t_exponent(b.c, b.smoothness, k) *
                               std::log(static_cast<double>(b.T));
  return checked_exp(log_value, "the non-convex bound");
}

double t0_tradeoff(const BoundInputs& b, double t) {
  b.validate();
  if (!(t > 0.0)) throw ConfigError("t0_tradeoff: t must be positive");
  const double n = static_cast<double>(b.n);
  if (b.s == 0.0) return t / n;
  const double k = static_cast<double>(b.k);
  const double cb = b.c * b.smoothness;
  const double log_coeff = std::log(2.0) + std::log(b.s) + 2.0 * std::log(b.lipschitz) +
                           log_one_plus_k_exp(k, cb) - std::log(n - 1.0) -
                           std::log(b.smoothness);
  const double log_tail = log_coeff + cb / k * (std::log(static_cast<double>(b.T)) - std::log(t));
  return t / n + checked_exp(log_tail, "the t0 trade-off tail");
}

T0Check verify_optimal_t0(const BoundInputs& b, std::size_t grid_points, double decades) {
  if (grid_points < 2) throw ConfigError("verify_optimal_t0: need at least two grid points");
  if (!(decades > 0.0)) throw ConfigError("verify_optimal_t0: decades must be positive");
  if (b.s == 0.0) throw ConfigError("verify_optimal_t0: s = 0 has no interior minimizer");
  T0Check out;
  out.closed_form = optimal_t0(b);
  const double lo = std::log(out.closed_form) - decades * std::log(10.0);
  const double hi = std::log(out.closed_form) + decades * std::log(10.0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double t =
        std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1));
    const double g = t0_tradeoff(b, t);
    if (g < best) {
      best = g;
      out.grid_minimizer = t;
    }
  }
  out.relative_gap = std::abs(out.grid_minimizer - out.closed_form) / out.closed_form;
  out.within_one_percent = out.relative_gap <= 0.01;
  return out;
}

std::vector<BoundRow> bounds_table(const BoundInputs& b) {
  b.validate();
  const double a = b.alpha;
  const double L = b.lipschitz;
  const double T = static_cast<double>(b.T);
  const double k = static_cast<double>(b.k);
  const double n = static_cast<double>(b.n);
  const double tail = T - k / 2.0;

  std::vector<BoundRow> rows;
  rows.push_back({"convex", "SGD", "2*alpha*L*T/n", 2.0 * a * L * T / n, "2*alpha*L^2*T/n",
                  2.0 * a * L * L * T / n, 1.0});
  rows.push_back({"convex", "SWA", "alpha*L*T/n", a * L * T / n, "alpha*L^2*T/n",
                  a * L * L * T / n, 1.0});
  rows.push_back({"convex", "FWA", "2*alpha*L*(T-k/2)/n", 2.0 * a * L * tail / n,
                  "2*alpha*L^2*(T-k/2)/n", 2.0 * a * L * L * tail / n, 1.0});
  rows.push_back({"convex", "EMA", "-", std::nullopt, "-", std::nullopt, std::nullopt});
  rows.push_back({"convex", "SeWA", "2*alpha*L*s*(T-k/2)/n", 2.0 * a * L * b.s * tail / n,
                  "2*alpha*L^2*s*(T-k/2)/n", convex_bound(b), 1.0});

  const double e1 = nonconvex_t_exponent(b.c, b.smoothness, 1.0);
  const double e2 = nonconvex_t_exponent(b.c, b.smoothness, 2.0);
  const double ek = nonconvex_t_exponent(b.c, b.smoothness, k);
  rows.push_back({"nonconvex", "SGD", "O(T^(c*beta/(1+c*beta))/n)", std::pow(T, e1) / n, "-",
                  std::nullopt, e1});
  rows.push_back({"nonconvex", "SWA", "O(T^(c*beta/(2+c*beta))/n)", std::pow(T, e2) / n, "-",
                  std::nullopt, e2});
  rows.push_back({"nonconvex", "FWA", "O(T^(c*beta/(k+c*beta))/n)", std::pow(T, ek) / n, "-",
                  std::nullopt, ek});
  rows.push_back({"nonconvex", "EMA", "-", std::nullopt, "-", std::nullopt, std::nullopt});
  rows.push_back({"nonconvex", "SeWA", "O_s(T^(c*beta/(k+c*beta))/n)", std::pow(T, ek) / n,
                  "((1+1/(c*beta))/(n-1))*(2*c*s*L^2*(1+k*e^(c*beta))/k)^(k/(c*beta+k))"
                  "*T^(c*beta/(c*beta+k))",
                  nonconvex_bound(b), ek});
  return rows;
}

namespace {

std::string opt_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("-");
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::string bounds_table_csv(const std::vector<BoundRow>& rows) {
  std::string out =
      "setting,algorithm,tabulated_formula,tabulated_value,theorem_formula,theorem_value,"
      "t_exponent\n";
  for (const auto& r : rows) {
    out += r.setting + ',' + r.algorithm + ',' + quote(r.tabulated_formula) + ',' +
           opt_text(r.tabulated_value) + ',' + quote(r.theorem_formula) + ',' +
           opt_text(r.theorem_value) + ',' + opt_text(r.t_exponent) + '\n';
  }
  return out;
}

std::string bounds_table_text(const std::vector<BoundRow>& rows) {
  auto short_num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-10s | %-9s | %-30s | %-12s | %-12s\n", "setting",
                "algorithm", "bound (as tabulated, L)", "value", "value (L^2)");
  out += line;
  out += std::string(86, '-') + '\n';
  std::string last_setting;
  for (const auto& r : rows) {
    if (!last_setting.empty() && r.setting != last_setting) out += std::string(86, '-') + '\n';
    last_setting = r.setting;
    std::snprintf(line, sizeof line, "%-10s | %-9s | %-30s | %-12s | %-12s\n", r.setting.c_str(),
                  r.algorithm.c_str(), r.tabulated_formula.c_str(),
                  short_num(r.tabulated_value).c_str(), short_num(r.theorem_value).c_str());
    out += line;
  }
  return out;
}

}  // namespace sewa
