#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include "sewa/error.hpp"
#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {

constexpr std::uint64_t kValidationTag = 0x56414c44u;  // "VALD"
constexpr std::uint64_t kRandomTag = 0x524e444du;      // "RNDM"
constexpr std::uint64_t kSewaTag = 0x53455741u;        // "SEWA"

struct MethodOutcome {
  std::size_t K = 0;
  Evaluation eval;
  std::optional<BinaryMask> mask;
};

std::string mask_json(const BinaryMask& mask, const TrajectoryWindow& window,
                      std::span<const double> probs) {
  std::string out = "{\n  \"bits\": [";
  for (std::size_t i = 0; i < mask.size(); ++i) out += (i ? "," : "") + std::to_string(mask[i]);
  out += "],\n  \"selected\": [";
  const auto idx = mask.selected_indices();
  for (std::size_t i = 0; i < idx.size(); ++i) out += (i ? "," : "") + std::to_string(idx[i]);
  out += "],\n  \"selected_steps\": [";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out += (i ? "," : "") + std::to_string(window[idx[i]].step);
  }
  out += "],\n  \"probabilities\": [";
  for (std::size_t i = 0; i < probs.size(); ++i) out += (i ? "," : "") + format_double(probs[i]);
  out += "]\n}\n";
  return out;
}

class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& cfg, const Dataset& fit, const Dataset& validation,
             const Dataset& test, std::uint64_t seed)
      : cfg_(cfg), fit_(fit), validation_(validation), test_(test), seed_(seed),
        dir_(cfg.output_dir / ("seed_" + std::to_string(seed))) {}

  std::vector<MethodOutcome> run() {
    SgdConfig train = cfg_.train;
    train.seed = seed_;
    trained_ = sgd_train(cfg_.model, fit_, train);
    window_ = window_collect(trained_.stream, cfg_.window_k);
    save_window(window_, dir_ / "window");
    std::vector<MethodOutcome> out;
    out.reserve(cfg_.methods.size());
    for (const auto& m : cfg_.methods) out.push_back(run_method(m));
    return out;
  }

 private:
  Evaluation emit(const std::string& name, const WeightVector& w) {
    write_checkpoint_file(dir_ / (name + ".bin"), window_.back().step, w);
    return evaluate(w, cfg_.model, test_);
  }

  MethodOutcome run_method(const MethodSpec& m) {
    MethodOutcome out;
    switch (m.kind) {
      case MethodKind::sgd_final:
        out.K = 1;
        out.eval = emit(m.label, trained_.final_weights);
        break;
      case MethodKind::uniform:
        out.K = window_.size();
        out.eval = emit(m.label, uniform_average(window_).weights);
        break;
      case MethodKind::ema: {
        const auto avg = ema_average(trained_.stream, m.decay, m.every);
        out.K = (trained_.stream.size() - 1) / m.every + 1;
        out.eval = emit(m.label, avg.weights);
        break;
      }
      case MethodKind::swa: {
        std::vector<Checkpoint> annealed;
        std::span<const Checkpoint> stream = trained_.stream;
        if (m.anneal_to) {
          SgdConfig retrain = cfg_.train;
          retrain.seed = seed_;
          const double alpha = learning_rate(cfg_.train.schedule, 0, cfg_.train.steps);
          retrain.schedule = CosineRate{
              alpha, *m.anneal_to,
              static_cast<std::size_t>(m.start_fraction * static_cast<double>(cfg_.train.steps))};
          annealed = sgd_train(cfg_.model, fit_, retrain).stream;
          stream = annealed;
        }
        const auto threshold = static_cast<std::size_t>(
            std::floor(m.start_fraction * static_cast<double>(stream.back().step)));
        std::size_t qualifying = 0;
        for (const auto& c : stream) qualifying += c.step >= threshold ? 1 : 0;
        out.K = (qualifying + m.every - 1) / m.every;
        out.eval = emit(m.label, swa_average(stream, m.start_fraction, m.every).weights);
        break;
      }
      case MethodKind::lawa: {
        const BinaryMask mask = lawa_select(window_.size(), m.K);
        out.K = m.K;
        out.mask = mask;
        out.eval = emit(m.label, apply_mask(window_, mask).weights);
        break;
      }
      case MethodKind::random: {
        out.K = m.K;
        double loss = 0.0;
        double acc = 0.0;
        for (std::size_t d = 0; d < m.draws; ++d) {
          const BinaryMask mask =
              random_select(window_.size(), m.K, rng::derive(seed_, kRandomTag, d));
          const Evaluation e = emit(m.label + "_draw" + std::to_string(d),
                                    apply_mask(window_, mask).weights);
          loss += e.loss;
          acc += e.accuracy;
          if (d == 0) out.mask = mask;
        }
        out.eval = {loss / static_cast<double>(m.draws), acc / static_cast<double>(m.draws)};
        break;
      }
      case MethodKind::sewa: {
        GsConfig gs = m.gs;
        gs.budget = m.K;
        gs.seed = rng::derive(seed_, kSewaTag, m.gs.seed);
        const Dataset& rows = m.mask_data == MaskData::train ? fit_ : validation_;
        const MaskOptimization opt = optimize_mask(window_, cfg_.model, rows, gs);
        const auto probs = opt.final_probs.values();
        const BinaryMask mask = m.inference == MaskInference::topk
                                    ? extract_topk(probs, m.K)
                                    : bernoulli_select(probs, gs.seed);
        atomic_write(dir_ / (m.label + "_history.csv"), history_csv(opt.history));
        atomic_write(dir_ / (m.label + "_mask.json"), mask_json(mask, window_, probs));
        out.K = mask.selected_count();
        out.mask = mask;
        out.eval = emit(m.label, apply_mask(window_, mask).weights);
        break;
      }
    }
    return out;
  }

  const ExperimentConfig& cfg_;
  const Dataset& fit_;
  const Dataset& validation_;
  const Dataset& test_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  TrainResult trained_;
  TrajectoryWindow window_;
};

}  // namespace

std::size_t resolve_workers(std::size_t configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("SEWA_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ConfigError(std::string("SEWA_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  DatasetSplit split = gen_dataset(cfg.dataset);
  DatasetSplit fit_val = split_dataset(split.train, cfg.validation_fraction,
                                       rng::derive(dataset_seed(cfg.dataset), kValidationTag));
  check_compatible(cfg.model, split.train);
  return {std::move(fit_val.train), std::move(fit_val.test), std::move(split.test)};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedData data = prepare_data(cfg);

  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::vector<MethodOutcome>> outcomes(n_seeds);
  std::vector<std::string> errors(n_seeds);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      try {
        SeedRunner runner(cfg, data.fit, data.validation, data.test, cfg.seeds[i]);
        outcomes[i] = runner.run();
      } catch (const std::exception& e) {
        errors[i] = e.what();
        const std::lock_guard lock(log_mutex);
        std::fprintf(stderr, "seed %llu failed: %s\n",
                     static_cast<unsigned long long>(cfg.seeds[i]), e.what());
      }
    }
  };
  const std::size_t workers = std::min(resolve_workers(cfg.workers), n_seeds);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    MethodReport report;
    report.method = cfg.methods[m].label;
    report.K = cfg.methods[m].K;
    for (std::size_t i = 0; i < n_seeds; ++i) {
      SeedResult r;
      r.seed = cfg.seeds[i];
      if (errors[i].empty()) {
        r.ok = true;
        r.eval = outcomes[i][m].eval;
        r.mask = outcomes[i][m].mask;
        report.K = outcomes[i][m].K;
      } else {
        r.error = errors[i];
        r.eval = {std::nan(""), std::nan("")};
      }
      report.per_seed.push_back(std::move(r));
    }
    finalize_report(report);
    result.reports.push_back(std::move(report));
  }
  for (std::size_t i = 0; i < n_seeds; ++i) {
    if (!errors[i].empty()) {
      result.failures.push_back("seed " + std::to_string(cfg.seeds[i]) + ": " + errors[i]);
    }
  }
  const SummaryFiles files = emit_summary(result.reports);
  atomic_write(cfg.output_dir / "summary.csv", files.csv);
  atomic_write(cfg.output_dir / "table.txt", files.table);
  return result;
}

std::vector<DivergenceResult> run_divergence_probes(const DivergenceProbeConfig& cfg) {
  const Dataset all = make_dataset(cfg.dataset);
  if (all.size() < 3) throw ConfigError("divergence probe: need at least 3 generated rows");
  std::vector<std::size_t> rows(all.size() - 1);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const Dataset data = all.subset(rows);
  MlpSpec spec = cfg.model;
  if (spec.layer_sizes.empty()) {
    spec.layer_sizes = {data.feature_dim(), 1};
    spec.activation = Activation::identity;
    spec.loss = LossKind::logistic_binary;
    spec.bias = false;
  }
  std::vector<DivergenceResult> out;
  for (std::uint64_t seed : cfg.seeds) {
    SgdConfig train = cfg.train;
    train.seed = seed;
    out.push_back({seed, divergence_probe(spec, data, cfg.perturb_index, all.x(all.size() - 1),
                                          all.y(all.size() - 1), train, cfg.k)});
  }
  return out;
}

}  // namespace sewa
