// sewa: command-line front end for training, averaging, mask learning,
// bound evaluation, probes and full benchmark runs.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sewa/error.hpp"
#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"
#include "sewa/rng.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct AverageArgs {
  std::string window;
  std::string method;
  std::size_t K = 1;
  double decay = 0.99;
  std::size_t every = 1;
  double start_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct SewaArgs {
  std::string window;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct BoundsArgs {
  sewa::BoundInputs b;
  bool table = false;
  std::string csv;
};

struct ProbeArgs {
  std::string kind;
  std::string config;
};

std::uint64_t run_seed(const sewa::ExperimentConfig& cfg, const std::optional<std::uint64_t>& s) {
  return s ? *s : cfg.seeds.front();
}

int cmd_train(const TrainArgs& a) {
  const auto cfg = sewa::load_experiment_config(a.config);
  const auto data = sewa::prepare_data(cfg);
  sewa::SgdConfig train = cfg.train;
  train.seed = run_seed(cfg, a.seed);
  const auto result = sewa::sgd_train(cfg.model, data.fit, train);
  const auto window = sewa::window_collect(result.stream, cfg.window_k);
  sewa::save_window(window, a.out);
  const auto eval = sewa::evaluate(result.final_weights, cfg.model, data.test);
  std::printf("trained %zu steps, saved %zu checkpoints (steps %zu..%zu) to %s\n", train.steps,
              window.size(), window[0].step, window.back().step, a.out.c_str());
  std::printf("final test loss %.6g, accuracy %.4f\n", eval.loss, eval.accuracy);
  return 0;
}

int cmd_average(const AverageArgs& a) {
  const auto window = sewa::load_window(a.window);
  const auto stream = window.checkpoints();
  sewa::AveragedWeights avg;
  if (a.method == "uniform") {
    avg = sewa::uniform_average(window);
  } else if (a.method == "swa") {
    avg = sewa::swa_average(stream, a.start_fraction, a.every);
  } else if (a.method == "ema") {
    avg = sewa::ema_average(stream, a.decay, a.every);
  } else if (a.method == "lawa") {
    avg = sewa::apply_mask(window, sewa::lawa_select(window.size(), a.K));
  } else if (a.method == "random") {
    avg = sewa::apply_mask(window, sewa::random_select(window.size(), a.K, a.seed));
  } else {
    throw sewa::ConfigError("unknown method '" + a.method + "'");
  }
  sewa::write_checkpoint_file(a.out, window.back().step, avg.weights);
  std::printf("%s average of %zu checkpoints written to %s\n", a.method.c_str(), window.size(),
              a.out.c_str());
  if (avg.mask) {
    std::printf("selected:");
    for (std::size_t i : avg.mask->selected_indices()) std::printf(" %zu", i);
    std::printf("\n");
  }
  return 0;
}

int cmd_sewa(const SewaArgs& a) {
  const auto cfg = sewa::load_experiment_config(a.config);
  const sewa::MethodSpec* method = nullptr;
  for (const auto& m : cfg.methods) {
    if (m.kind == sewa::MethodKind::sewa) {
      method = &m;
      break;
    }
  }
  if (method == nullptr) throw sewa::ConfigError("config has no sewa method");
  const auto window = sewa::load_window(a.window);
  if (method->K > window.size()) {
    throw sewa::ConfigError("K=" + std::to_string(method->K) + " exceeds the window length " +
                            std::to_string(window.size()));
  }
  const auto data = sewa::prepare_data(cfg);
  sewa::GsConfig gs = method->gs;
  gs.budget = method->K;
  gs.seed = sewa::rng::derive(run_seed(cfg, a.seed), 0x53455741u, method->gs.seed);
  const auto& rows =
      method->mask_data == sewa::MaskData::train ? data.fit : data.validation;
  const auto opt = sewa::optimize_mask(window, cfg.model, rows, gs);
  const auto probs = opt.final_probs.values();
  const auto mask = method->inference == sewa::MaskInference::topk
                        ? sewa::extract_topk(probs, method->K)
                        : sewa::bernoulli_select(probs, gs.seed);
  const auto avg = sewa::apply_mask(window, mask);
  const fs::path out(a.out);
  sewa::atomic_write(out / "history.csv", sewa::history_csv(opt.history));
  std::string mask_text = "index,step,probability,selected\n";
  for (std::size_t i = 0; i < window.size(); ++i) {
    mask_text += std::to_string(i) + ',' + std::to_string(window[i].step) + ',' +
                 sewa::format_double(probs[i]) + ',' + (mask[i] ? "1" : "0") + '\n';
  }
  sewa::atomic_write(out / "mask.csv", mask_text);
  sewa::write_checkpoint_file(out / "averaged.bin", window.back().step, avg.weights);
  const auto eval = sewa::evaluate(avg.weights, cfg.model, data.test);
  std::printf("selected %zu of %zu checkpoints after %zu iterations; test loss %.6g, "
              "accuracy %.4f\n",
              mask.selected_count(), window.size(), opt.history.size(), eval.loss, eval.accuracy);
  return 0;
}

int cmd_bounds(const BoundsArgs& a) {
  const auto& b = a.b;
  b.validate();
  std::printf("convex_bound      %.12g\n", sewa::convex_bound(b));
  std::printf("sgd_convex_bound  %.12g\n", sewa::sgd_convex_bound(b));
  std::printf("nonconvex_bound   %.12g\n", sewa::nonconvex_bound(b));
  if (b.s > 0.0) {
    const auto check = sewa::verify_optimal_t0(b);
    std::printf("optimal_t0        %.12g (grid minimizer %.12g, gap %.3g%%)\n", check.closed_form,
                check.grid_minimizer, 100.0 * check.relative_gap);
  }
  const auto rows = sewa::bounds_table(b);
  if (a.table) std::printf("\n%s", sewa::bounds_table_text(rows).c_str());
  if (!a.csv.empty()) sewa::atomic_write(a.csv, sewa::bounds_table_csv(rows));
  return 0;
}

int cmd_probe(const ProbeArgs& a) {
  std::string csv = "seed,step,value\n";
  fs::path output;
  if (a.kind == "expansive") {
    const auto cfg = sewa::load_expansiveness_probe_config(a.config);
    output = cfg.output;
    for (std::uint64_t seed : cfg.seeds) {
      const auto r = sewa::expansiveness_probe(cfg.problem, cfg.alpha, cfg.steps, seed);
      for (const auto& p : r.series) {
        csv += std::to_string(seed) + ',' + std::to_string(p.step) + ',' +
               sewa::format_double(p.value) + '\n';
      }
      std::printf("seed %llu: max ratio %.12g, ceiling %.12g [%s], curvature %.6g\n",
                  static_cast<unsigned long long>(seed), r.max, r.bound_value.value_or(0.0),
                  r.bound_label.c_str(), r.curvature);
    }
  } else if (a.kind == "divergence") {
    const auto cfg = sewa::load_divergence_probe_config(a.config);
    output = cfg.output;
    for (const auto& [seed, r] : sewa::run_divergence_probes(cfg)) {
      for (const auto& p : r.series) {
        csv += std::to_string(seed) + ',' + std::to_string(p.step) + ',' +
               sewa::format_double(p.value) + '\n';
      }
      std::printf("seed %llu: final delta %.6g", static_cast<unsigned long long>(seed),
                  r.series.empty() ? 0.0 : r.series.back().value);
      if (r.bound_value) std::printf(", ceiling %.6g", *r.bound_value);
      std::printf("\n");
    }
  } else {
    throw sewa::ConfigError("unknown probe kind '" + a.kind + "' (expansive, divergence)");
  }
  sewa::atomic_write(output, csv);
  return 0;
}

int cmd_bench(const std::string& config) {
  const auto cfg = sewa::load_experiment_config(config);
  const auto result = sewa::run_experiment(cfg);
  std::printf("%s", sewa::emit_summary(result.reports).table.c_str());
  for (const auto& f : result.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
  return result.ok() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective checkpoint averaging toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train and persist the checkpoint window");
  c_train->add_option("--config", train.config, "Experiment JSON")->required();
  c_train->add_option("--out", train.out, "Window directory")->required();
  c_train->add_option("--seed", train.seed, "Run seed (default: first config seed)");

  AverageArgs avg;
  auto* c_avg = app.add_subcommand("average", "Average a persisted window");
  c_avg->add_option("--window", avg.window, "Window directory")->required();
  c_avg->add_option("--method", avg.method, "uniform|swa|ema|lawa|random")
      ->required()
      ->check(CLI::IsMember({"uniform", "swa", "ema", "lawa", "random"}));
  c_avg->add_option("--K", avg.K, "Budget for lawa and random");
  c_avg->add_option("--decay", avg.decay, "EMA decay");
  c_avg->add_option("--every", avg.every, "EMA / SWA cadence in checkpoints");
  c_avg->add_option("--start-fraction", avg.start_fraction, "SWA start as a fraction of steps");
  c_avg->add_option("--seed", avg.seed, "Random selection seed");
  c_avg->add_option("--out", avg.out, "Output checkpoint file")->required();

  SewaArgs sw;
  auto* c_sewa = app.add_subcommand("sewa", "Learn a selection mask over a persisted window");
  c_sewa->add_option("--window", sw.window, "Window directory")->required();
  c_sewa->add_option("--config", sw.config, "Experiment JSON with a sewa method")->required();
  c_sewa->add_option("--out", sw.out, "Output directory")->required();
  c_sewa->add_option("--seed", sw.seed, "Run seed (default: first config seed)");

  BoundsArgs bounds;
  auto* c_bounds = app.add_subcommand("bounds", "Evaluate stability bounds");
  c_bounds->add_option("--alpha", bounds.b.alpha)->required();
  c_bounds->add_option("--L", bounds.b.lipschitz)->required();
  c_bounds->add_option("--beta", bounds.b.smoothness)->required();
  c_bounds->add_option("--c", bounds.b.c)->required();
  c_bounds->add_option("--n", bounds.b.n)->required();
  c_bounds->add_option("--T", bounds.b.T)->required();
  c_bounds->add_option("--k", bounds.b.k)->required();
  c_bounds->add_option("--s", bounds.b.s)->required();
  c_bounds->add_flag("--table", bounds.table, "Print the comparison table");
  c_bounds->add_option("--csv", bounds.csv, "Write the comparison table as CSV");

  ProbeArgs probe;
  auto* c_probe = app.add_subcommand("probe", "Run stability probes");
  c_probe->add_option("--kind", probe.kind, "expansive|divergence")
      ->required()
      ->check(CLI::IsMember({"expansive", "divergence"}));
  c_probe->add_option("--config", probe.config, "Probe JSON")->required();

  std::string bench_config;
  auto* c_bench = app.add_subcommand("bench", "Run a full experiment");
  c_bench->add_option("--config", bench_config, "Experiment JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_train) return cmd_train(train);
    if (*c_avg) return cmd_average(avg);
    if (*c_sewa) return cmd_sewa(sw);
    if (*c_bounds) return cmd_bounds(bounds);
    if (*c_probe) return cmd_probe(probe);
    if (*c_bench) return cmd_bench(bench_config);
  } catch (const sewa::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}
