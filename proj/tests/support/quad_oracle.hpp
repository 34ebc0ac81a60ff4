#pragma once

// Independent reference implementation in binary128 arithmetic, used only by
// tests. Naive loops, no code shared with the library beyond input types.

#include <quadmath.h>

#include <cstddef>
#include <functional>
#include <vector>

#include "sewa/mask_learning.hpp"
#include "sewa/nn.hpp"

namespace quad_oracle {

__extension__ typedef __float128 quad;

inline quad q_exp(quad x) { return expq(x); }
inline quad q_log(quad x) { return logq(x); }
inline quad q_log1p(quad x) { return log1pq(x); }
inline quad q_abs(quad x) { return fabsq(x); }

inline quad activate(quad z, sewa::Activation a) {
  switch (a) {
    case sewa::Activation::relu: return z > 0 ? z : quad(0);
    case sewa::Activation::tanh: return tanhq(z);
    case sewa::Activation::identity: return z;
  }
  return z;
}

// softplus(z) = log(1 + e^z), stable for both signs.
inline quad softplus(quad z) {
  return z > 0 ? z + q_log1p(q_exp(-z)) : q_log1p(q_exp(z));
}

inline quad row_loss(const std::vector<quad>& z, std::span<const double> y, sewa::LossKind kind) {
  switch (kind) {
    case sewa::LossKind::mse: {
      quad acc = 0;
      for (std::size_t j = 0; j < z.size(); ++j) {
        const quad d = z[j] - quad(y[j]);
        acc += d * d;
      }
      return acc;
    }
    case sewa::LossKind::logistic_binary:
      return softplus(z[0]) - quad(y[0]) * z[0];
    case sewa::LossKind::cross_entropy_softmax: {
      quad m = z[0];
      for (quad v : z) m = v > m ? v : m;
      quad sum = 0;
      for (quad v : z) sum += q_exp(v - m);
      const auto label = static_cast<std::size_t>(y[0]);
      return m + q_log(sum) - z[label];
    }
  }
  return 0;
}

inline quad mean_loss(const std::vector<quad>& w, const sewa::MlpSpec& spec,
                      const sewa::Dataset& data) {
  quad total = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::vector<quad> a(data.x(r).begin(), data.x(r).end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
      const std::size_t in = spec.layer_sizes[l];
      const std::size_t out = spec.layer_sizes[l + 1];
      std::vector<quad> z(out, quad(0));
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) z[o] += w[offset + o * in + i] * a[i];
      }
      offset += out * in;
      if (spec.bias) {
        for (std::size_t o = 0; o < out; ++o) z[o] += w[offset + o];
        offset += out;
      }
      const bool last = l + 2 == spec.layer_sizes.size();
      if (!last) {
        for (auto& v : z) v = activate(v, spec.activation);
      }
      a = std::move(z);
    }
    total += row_loss(a, data.y(r), spec.loss);
  }
  return total / quad(data.size());
}

inline std::vector<quad> to_quad(std::span<const double> v) {
  return std::vector<quad>(v.begin(), v.end());
}

// One relaxed-objective sample with Gumbel values recomputed from the uniforms.
inline quad relaxed_sample(const sewa::TrajectoryWindow& window, const sewa::MlpSpec& spec,
                           const sewa::Dataset& data, const std::vector<quad>& s, quad t,
                           const sewa::GumbelDraws& draws) {
  const std::size_t k = window.size();
  std::vector<quad> m(k);
  quad total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const quad g0 = -q_log(-q_log(quad(draws[i].u0)));
    const quad g1 = -q_log(-q_log(quad(draws[i].u1)));
    const quad gap = (q_log(s[i]) + g1 - q_log(1 - s[i]) - g0) / t;
    m[i] = 1 / (1 + q_exp(-gap));
    total += m[i];
  }
  // The last checkpoint carries an extra weight of 1e-12.
  const quad floor = 1e-12;
  const auto last = window[k - 1].weights.values();
  std::vector<quad> w(window.dim(), quad(0));
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = floor * quad(last[j]);
  for (std::size_t i = 0; i < k; ++i) {
    const auto wi = window[i].weights.values();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += m[i] * quad(wi[j]);
  }
  for (auto& v : w) v /= total + floor;
  return mean_loss(w, spec, data);
}

// Monte Carlo objective with the library's draw schedule.
inline quad objective(const sewa::TrajectoryWindow& window, const sewa::MlpSpec& spec,
                      const sewa::Dataset& data, const std::vector<quad>& s, quad t,
                      std::size_t samples, std::uint64_t seed) {
  quad acc = 0;
  for (std::size_t m = 0; m < samples; ++m) {
    acc += relaxed_sample(window, spec, data, s, t, sewa::gumbel_draws(seed, m, s.size()));
  }
  return acc / quad(samples);
}

// Central differences in binary128; truncation error is O(h^2).
inline std::vector<double> central_difference(
    const std::function<quad(const std::vector<quad>&)>& f, std::vector<quad> x, quad h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const quad xi = x[i];
    x[i] = xi + h;
    const quad fp = f(x);
    x[i] = xi - h;
    const quad fm = f(x);
    x[i] = xi;
    g[i] = static_cast<double>((fp - fm) / (2 * h));
  }
  return g;
}

}  // namespace quad_oracle
