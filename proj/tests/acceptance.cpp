// Acceptance suite: one PASS/FAIL line per criterion. Every criterion writes
// its measurements as CSV under <workdir>/run1; the determinism criterion
// reruns the rest into <workdir>/run2 and compares the files byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracle_values.hpp"
#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"
#include "sewa/rng.hpp"
#include "support/quad_oracle.hpp"

namespace fs = std::filesystem;
using namespace sewa;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome(const fs::path&)> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out + '\n';
}

Dataset random_data(const MlpSpec& spec, std::size_t rows, std::uint64_t seed) {
  rng::Stream st(seed);
  const std::size_t p = spec.input_dim();
  std::vector<double> x(rows * p), y(rows);
  for (auto& v : x) v = st.uniform(-1.0, 1.0);
  const std::size_t classes = spec.loss == LossKind::logistic_binary ? 2 : spec.output_dim();
  for (auto& v : y) v = static_cast<double>(st.below(classes));
  return Dataset(std::move(x), p, std::move(y), 1);
}

TrajectoryWindow random_window(const MlpSpec& spec, std::size_t k, double spread,
                               std::uint64_t seed) {
  const WeightVector center = mlp_init(spec, seed);
  rng::Stream st(rng::derive(seed, 1));
  TrajectoryWindow window(k);
  for (std::size_t i = 0; i < k; ++i) {
    WeightVector w = center;
    for (std::size_t j = 0; j < w.dim(); ++j) w[j] += spread * st.normal();
    window.push({(i + 1) * 10, std::move(w), 0.0});
  }
  return window;
}

MlpSpec random_mlp(rng::Stream& st) {
  MlpSpec spec;
  spec.layer_sizes = {1 + st.below(8), 1 + st.below(8), 2};
  spec.activation = Activation::tanh;
  spec.loss = LossKind::cross_entropy_softmax;
  return spec;
}

std::vector<double> random_probs(rng::Stream& st, std::size_t k, double lo, double hi) {
  std::vector<double> s(k);
  for (auto& v : s) v = st.uniform(lo, hi);
  return s;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator
  double std_error = 0.0;
};

Moments column_moments(const std::vector<std::vector<double>>& rows, std::size_t col) {
  const double n = static_cast<double>(rows.size());
  Moments m;
  for (const auto& r : rows) m.mean += r[col];
  m.mean /= n;
  for (const auto& r : rows) m.variance += (r[col] - m.mean) * (r[col] - m.mean);
  m.variance /= n - 1;
  m.std_error = std::sqrt(m.variance / n);
  return m;
}

// 1. objective_grad against central differences of the objective in binary128.
Outcome gradient_correctness(const fs::path& dir) {
  rng::Stream st(101);
  std::string csv = "instance,k,coordinate,analytic,finite_difference,relative_error\n";
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto spec = random_mlp(st);
    const std::size_t k = 2 + st.below(7);
    const auto data = random_data(spec, 12, st.next());
    const auto window = random_window(spec, k, 0.5, st.next());
    const auto s = random_probs(st, k, 0.1, 0.9);
    const double t = st.uniform(0.3, 2.0);
    const std::uint64_t seed = st.next();
    const auto g = objective_grad(MaskProblem{window, spec, data}, s, t, 4, seed);
    const auto fd = quad_oracle::central_difference(
        [&](const std::vector<quad_oracle::quad>& x) {
          return quad_oracle::objective(window, spec, data, x, t, 4, seed);
        },
        quad_oracle::to_quad(s), quad_oracle::quad(1e-12));
    for (std::size_t i = 0; i < k; ++i) {
      const double err = std::fabs(g.grad[i] - fd[i]) / std::max(std::fabs(fd[i]), 1e-12);
      worst = std::max(worst, err);
      csv += csv_join({std::to_string(inst), std::to_string(k), std::to_string(i),
                       format_double(g.grad[i]), format_double(fd[i]), format_double(err)});
    }
  }
  atomic_write(dir / "c1_gradient.csv", csv);
  return {worst <= 1e-6, "max relative error " + fmt(worst) + " (limit 1e-6)"};
}

// 2. Monte Carlo objective at low temperature against exhaustive enumeration.
Outcome enumeration_oracle(const fs::path& dir) {
  rng::Stream st(202);
  std::string csv = "instance,k,mc_mean,mc_std_error,exact,z\n";
  double worst_z = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto spec = random_mlp(st);
    const std::size_t k = 2 + st.below(9);
    const auto data = random_data(spec, 12, st.next());
    const auto window = random_window(spec, k, 0.5, st.next());
    const auto s = random_probs(st, k, 0.1, 0.9);
    const MaskProblem problem{window, spec, data};
    const auto mc = objective_mc_estimate(problem, s, 0.01, 10000, st.next());
    const double exact = exact_expected_loss(problem, s);
    const double z = std::fabs(mc.mean - exact) / mc.std_error;
    worst_z = std::max(worst_z, z);
    csv += csv_join({std::to_string(inst), std::to_string(k), format_double(mc.mean),
                     format_double(mc.std_error), format_double(exact), format_double(z)});
  }
  atomic_write(dir / "c2_enumeration.csv", csv);
  return {worst_z <= 3.0, "max deviation " + fmt(worst_z) + " standard errors (limit 3)"};
}

// 3. Score-function versus pathwise estimator variance on a fixed k = 8 instance.
Outcome estimator_comparison(const fs::path& dir) {
  MlpSpec spec;
  spec.layer_sizes = {2, 4, 2};
  spec.activation = Activation::tanh;
  spec.loss = LossKind::cross_entropy_softmax;
  const auto data = random_data(spec, 16, 3);
  const auto window = random_window(spec, 8, 1.0, 8);
  const std::vector<double> s{0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85};
  const double t = 0.5;
  const MaskProblem problem{window, spec, data};
  const auto exact = exact_expected_grad(problem, s);
  const auto pathwise = pathwise_grad_samples(problem, s, t, 10000, 31);
  const auto pge = pge_grad_samples(problem, s, 10000, 32);
  std::string csv = "coordinate,pge_variance,pathwise_variance,pge_mean,pge_std_error,exact\n";
  bool variance_ok = true;
  bool mean_ok = true;
  double min_ratio = 1e300;
  double worst_z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto a = column_moments(pge, i);
    const auto b = column_moments(pathwise, i);
    variance_ok = variance_ok && a.variance > b.variance;
    min_ratio = std::min(min_ratio, a.variance / b.variance);
    const double z = std::fabs(a.mean - exact[i]) / a.std_error;
    worst_z = std::max(worst_z, z);
    mean_ok = mean_ok && z <= 3.0;
    csv += csv_join({std::to_string(i), format_double(a.variance), format_double(b.variance),
                     format_double(a.mean), format_double(a.std_error), format_double(exact[i])});
  }
  atomic_write(dir / "c3_estimators.csv", csv);
  return {variance_ok && mean_ok, "min variance ratio pge/pathwise " + fmt(min_ratio) +
                                      ", pge mean within " + fmt(worst_z) + " standard errors"};
}

// 4. Relaxed-mask selection frequency and the Gumbel mean.
Outcome gumbel_distribution(const fs::path& dir) {
  const std::size_t draws = 100000;
  std::string csv = "s,frequency\n";
  bool ok = true;
  double worst = 0.0;
  double g_sum = 0.0;
  std::uint64_t seed = 404;
  for (double s : {0.1, 0.5, 0.9}) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const auto g = gumbel_sample(seed, i);
      g_sum += g.g0 + g.g1;
      hits += relaxed_entry(s, g, 0.05) > 0.5 ? 1 : 0;
    }
    ++seed;
    const double freq = static_cast<double>(hits) / static_cast<double>(draws);
    worst = std::max(worst, std::fabs(freq - s));
    ok = ok && std::fabs(freq - s) <= 0.01;
    csv += csv_join({format_double(s), format_double(freq)});
  }
  const double g_mean = g_sum / static_cast<double>(6 * draws);
  csv += csv_join({"gumbel_mean", format_double(g_mean)});
  atomic_write(dir / "c4_gumbel.csv", csv);
  ok = ok && std::fabs(g_mean - 0.5772) <= 0.01;
  return {ok, "max frequency gap " + fmt(worst) + ", Gumbel mean " + fmt(g_mean)};
}

// 5. Growth ratios of coupled gradient steps.
Outcome expansiveness(const fs::path& dir) {
  std::string csv = "problem,alpha,seed,max_ratio,ceiling\n";
  bool ok = true;
  double worst_excess = -1e300;
  auto record = [&](const std::string& name, double alpha, std::uint64_t seed,
                    const ProbeResult& r, double ceiling) {
    worst_excess = std::max(worst_excess, r.max - ceiling);
    ok = ok && r.max <= ceiling + 1e-9;
    csv += csv_join({name, format_double(alpha), std::to_string(seed), format_double(r.max),
                     format_double(ceiling)});
  };

  rng::Stream st(505);
  const std::size_t n = 200, p = 5;
  std::vector<double> x(n * p), y(n);
  for (auto& v : x) v = st.normal();
  for (auto& v : y) v = static_cast<double>(st.below(2));
  const Dataset logistic(std::move(x), p, std::move(y), 1);
  const double beta_logistic = logistic_constants(logistic).smoothness;

  MlpSpec mlp;
  mlp.layer_sizes = {2, 8, 2};
  mlp.activation = Activation::tanh;
  mlp.loss = LossKind::cross_entropy_softmax;
  const NonconvexMlp mlp_problem{mlp, random_data(mlp, 40, 5), 50, 10};

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double scale : {1.0, 2.0}) {
      const double beta_q = 1.5;
      record("quadratic", scale / beta_q, seed,
             expansiveness_probe(ConvexQuadratic{beta_q, 10}, scale / beta_q, 1000, seed), 1.0);
      const double alpha = scale / beta_logistic;
      record("logistic", alpha, seed,
             expansiveness_probe(ConvexLogistic{logistic}, alpha, 1000, seed), 1.0);
    }
    const auto r = expansiveness_probe(mlp_problem, 0.5, 1000, seed);
    record("mlp", 0.5, seed, r, r.bound_value.value_or(-1.0));
  }
  atomic_write(dir / "c5_expansiveness.csv", csv);
  return {ok, "largest excess over ceiling " + fmt(worst_excess) + " (limit 1e-9)"};
}

// 6. Mean parameter divergence against the convex ceiling.
Outcome divergence_ceiling(const fs::path& dir) {
  const std::size_t n = 200;
  BlobsParams blobs;
  blobs.n = n + 1;
  blobs.p = 2;
  blobs.classes = 2;
  blobs.noise = 1.5;
  blobs.seed = 606;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const double beta = logistic_constants(make_blobs(blobs).subset(rows)).smoothness;

  DivergenceProbeConfig cfg;
  cfg.dataset = blobs;
  cfg.train.steps = 2000;
  cfg.train.schedule = ConstantRate{1.0 / beta};
  cfg.k = 50;
  cfg.perturb_index = 0;
  cfg.seeds.resize(20);
  std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{0});
  const auto results = run_divergence_probes(cfg);

  std::string csv = "seed,final_divergence,ceiling\n";
  double total = 0.0;
  double ceiling = -1.0;
  for (const auto& [seed, r] : results) {
    total += r.series.back().value;
    ceiling = r.bound_value.value_or(-1.0);
    csv += csv_join({std::to_string(seed), format_double(r.series.back().value),
                     format_double(ceiling)});
  }
  const double mean = total / static_cast<double>(results.size());
  csv += csv_join({"mean", format_double(mean), format_double(ceiling)});
  atomic_write(dir / "c6_divergence.csv", csv);
  return {ceiling > 0.0 && mean <= ceiling,
          "mean " + fmt(mean) + " vs ceiling " + fmt(ceiling)};
}

// 7. Bound calculators against 50-digit reference values and the table relationships.
Outcome bound_calculators(const fs::path& dir) {
  std::string csv =
      "case,convex,convex_ref,nonconvex,nonconvex_ref,t0,t0_ref,grid_gap,factor_gap\n";
  bool digits_ok = true;
  bool grid_ok = true;
  bool table_ok = true;
  double worst_rel = 0.0;
  double worst_gap = 0.0;
  double worst_factor_mismatch = 0.0;
  auto rel = [](double a, double b) { return std::fabs(a - b) / std::fabs(b); };
  std::size_t index = 0;
  for (const auto& c : oracle::kBoundCases) {
    BoundInputs b;
    b.alpha = c.alpha;
    b.lipschitz = c.L;
    b.smoothness = c.beta;
    b.c = c.c;
    b.n = c.n;
    b.T = c.T;
    b.k = c.k;
    b.s = c.s;
    const double cv = convex_bound(b);
    const double nc = nonconvex_bound(b);
    const double t0 = optimal_t0(b);
    for (double e : {rel(cv, c.convex), rel(nc, c.nonconvex), rel(t0, c.t0)}) {
      worst_rel = std::max(worst_rel, e);
      digits_ok = digits_ok && e <= 1e-12;
    }
    const auto check = verify_optimal_t0(b);
    worst_gap = std::max(worst_gap, check.relative_gap);
    grid_ok = grid_ok && check.within_one_percent;
    // Exact minimizer of the tradeoff differs from the closed form by (n/(n-1))^(k/(c beta + k)).
    const double kk = static_cast<double>(b.k);
    const double nn = static_cast<double>(b.n);
    const double factor_gap = std::pow(nn / (nn - 1.0), kk / (b.c * b.smoothness + kk)) - 1.0;
    worst_factor_mismatch =
        std::max(worst_factor_mismatch, std::fabs(check.relative_gap - factor_gap));

    const auto rows = bounds_table(b);
    auto value = [&](const std::string& setting, const std::string& algo) -> const BoundRow& {
      for (const auto& r : rows) {
        if (r.setting == setting && r.algorithm == algo) return r;
      }
      return rows.front();
    };
    table_ok = table_ok && rows.size() == 10 &&
               rel(*value("convex", "SeWA").tabulated_value,
                   b.s * *value("convex", "FWA").tabulated_value) <= 1e-14;
    if (b.k > 2) {
      const double e_sgd = *value("nonconvex", "SGD").t_exponent;
      const double e_swa = *value("nonconvex", "SWA").t_exponent;
      const double e_sewa = *value("nonconvex", "SeWA").t_exponent;
      table_ok = table_ok && e_sgd > e_swa && e_swa > e_sewa;
    }
    if (index == 0) atomic_write(dir / "c7_table.csv", bounds_table_csv(rows));
    csv += csv_join({std::to_string(index++), format_double(cv), format_double(c.convex),
                     format_double(nc), format_double(c.nonconvex), format_double(t0),
                     format_double(c.t0), format_double(check.relative_gap),
                     format_double(factor_gap)});
  }
  atomic_write(dir / "c7_bounds.csv", csv);
  return {digits_ok && grid_ok && table_ok,
          "max relative error " + fmt(worst_rel) + ", max t0 grid gap " + fmt(100 * worst_gap) +
              "% (n/(n-1) factor explains it to " + fmt(100 * worst_factor_mismatch) +
              "%), table relationships " + (table_ok ? "hold" : "violated")};
}

// 8. Canonical noisy-tail benchmark ordering.
Outcome benchmark_trend(const fs::path& dir) {
  const std::string config = R"({
    "dataset": {"kind": "spirals", "n": 1000, "noise": 0.1, "seed": 7},
    "model": {"layer_sizes": [2, 16, 16, 2], "activation": "relu",
              "loss": "cross_entropy_softmax"},
    "train": {"steps": 5000, "batch_size": 16, "capture_every": 10,
              "schedule": {"kind": "constant", "alpha": 0.6}},
    "window_k": 100,
    "methods": [
      {"name": "sgd_final"},
      {"name": "uniform"},
      {"name": "lawa", "K": 5},
      {"name": "random", "K": 5, "draws": 5},
      {"name": "ema", "decay": 0.95},
      {"name": "swa", "start_fraction": 0.8},
      {"name": "sewa", "K": 5, "gs": {"samples": 8, "iterations": 100, "step_size": 0.1}}
    ],
    "seeds": [1, 2, 3, 4, 5],
    "output_dir": "bench"
  })";
  const auto cfg = parse_experiment_config(config, dir);
  const auto result = run_experiment(cfg);
  std::map<std::string, const MethodReport*> by_name;
  for (const auto& r : result.reports) by_name[r.method] = &r;
  const auto& sewa = *by_name.at("sewa");
  const auto& random = *by_name.at("random");
  const auto& final = *by_name.at("sgd_final");
  const auto& uniform = *by_name.at("uniform");
  const bool ok = result.ok() && sewa.mean_loss <= random.mean_loss &&
                  sewa.mean_loss <= final.mean_loss &&
                  sewa.mean_loss <= uniform.mean_loss + uniform.stderr_loss;
  return {ok, "mean test loss sewa " + fmt(sewa.mean_loss) + ", random " +
                  fmt(random.mean_loss) + ", sgd_final " + fmt(final.mean_loss) + ", uniform " +
                  fmt(uniform.mean_loss) + " +- " + fmt(uniform.stderr_loss)};
}

std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      out[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
  }
  return out;
}

Outcome run_guarded(const Criterion& c, const fs::path& dir) {
  try {
    return c.run(dir);
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string workdir = "acceptance_run";
  app.add_option("--workdir", workdir, "Directory for CSV outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "enumeration oracle", enumeration_oracle},
      {3, "estimator comparison", estimator_comparison},
      {4, "Gumbel distribution", gumbel_distribution},
      {5, "expansiveness", expansiveness},
      {6, "divergence ceiling", divergence_ceiling},
      {7, "bound calculators", bound_calculators},
      {8, "benchmark trend", benchmark_trend},
  };

  const fs::path root(workdir);
  fs::remove_all(root);
  const fs::path first = root / "run1";
  const fs::path second = root / "run2";
  fs::create_directories(first);
  fs::create_directories(second);

  bool all = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    const Outcome o = run_guarded(c, first);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }

  const auto start = std::chrono::steady_clock::now();
  for (const auto& c : criteria) run_guarded(c, second);
  const auto a = csv_files(first);
  const auto b = csv_files(second);
  std::size_t differing = 0;
  for (const auto& [name, text] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != text) {
      ++differing;
      std::printf("  differs: %s\n", name.c_str());
    }
  }
  const bool same = !a.empty() && a.size() == b.size() && differing == 0;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  all = all && same;
  std::printf("%s 9 determinism: %zu CSV files compared, %zu differ [%.1fs]\n",
              same ? "PASS" : "FAIL", a.size(), differing + (a.size() == b.size() ? 0 : 1), secs);
  return all ? 0 : 1;
}
