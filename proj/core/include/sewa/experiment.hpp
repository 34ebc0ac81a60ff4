#pragma once

// Dataset synthesis, experiment configuration and the end-to-end pipeline
// train -> window -> average / optimize -> evaluate -> report.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sewa/averagers.hpp"
#include "sewa/mask_learning.hpp"
#include "sewa/nn.hpp"
#include "sewa/stability.hpp"
#include "sewa/trajectory.hpp"

namespace sewa {

// ---- datasets ----

// Class means equally spaced on a circle of radius `separation` in the first
// two coordinates (on a line when p = 1); labels uniform over classes.
struct BlobsParams {
  std::size_t n = 1000;
  std::size_t p = 2;
  std::size_t classes = 3;
  double noise = 1.0;
  double separation = 3.0;
  std::uint64_t seed = 0;
};

// Two interleaved spirals; the second is the first rotated by pi.
struct SpiralsParams {
  std::size_t n = 1000;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

// Header row required. Every column except label_column is a numeric feature.
struct CsvParams {
  std::filesystem::path path;
  std::string label_column = "label";
  std::uint64_t seed = 0;  // split shuffle
};

using DatasetSource = std::variant<BlobsParams, SpiralsParams, CsvParams>;

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

Dataset make_blobs(const BlobsParams& p);
Dataset make_spirals(const SpiralsParams& p);
Dataset load_csv_dataset(const CsvParams& p);
// All rows of the source, before splitting.
Dataset make_dataset(const DatasetSource& source);
std::uint64_t dataset_seed(const DatasetSource& source);

// Seeded shuffle, then the first round(test_fraction * n) rows form the second part.
DatasetSplit split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed);

// make_dataset followed by an 80/20 split.
DatasetSplit gen_dataset(const DatasetSource& source);

// ---- configuration ----

enum class MethodKind { sgd_final, uniform, swa, ema, lawa, random, sewa };

std::string_view to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view name);

enum class MaskInference { topk, bernoulli };

// Rows whose loss the sewa mask is learned against.
enum class MaskData { validation, train };

struct MethodSpec {
  MethodKind kind = MethodKind::uniform;
  std::string label;          // defaults to the method name
  std::size_t K = 0;          // lawa / random / sewa budget
  double decay = 0.99;        // ema
  std::size_t every = 1;      // ema / swa cadence in checkpoints
  double start_fraction = 0.5;  // swa
  std::optional<double> anneal_to;  // swa: retrain with cosine decay to this rate
  std::size_t draws = 1;      // random: independent masks averaged in the report
  GsConfig gs;                // sewa; seed is derived from the run seed
  MaskInference inference = MaskInference::topk;
  MaskData mask_data = MaskData::validation;
};

struct ExperimentConfig {
  DatasetSource dataset;
  MlpSpec model;
  SgdConfig train;  // seed is overridden per run
  std::size_t window_k = 1;
  double validation_fraction = 0.2;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::size_t workers = 0;  // 0: SEWA_WORKERS or hardware concurrency

  // Throws ConfigError.
  void validate() const;
};

// Unknown keys, missing keys and wrong types are ConfigErrors. Relative
// paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Reads one "gs" JSON object (the sewa method parameters) from a file.
GsConfig load_gs_config(const std::filesystem::path& path);

// ---- results ----

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  Evaluation eval;
  std::optional<BinaryMask> mask;
  std::string error;
};

struct MethodReport {
  std::string method;
  std::size_t K = 0;  // checkpoints averaged
  std::vector<SeedResult> per_seed;
  double mean_loss = 0.0;
  double stderr_loss = 0.0;  // sample sd (n - 1 denominator) / sqrt(n); 0 for one seed
  double mean_acc = 0.0;
  double stderr_acc = 0.0;
};

// Mean and standard error over successful seeds.
void finalize_report(MethodReport& report);

struct SummaryFiles {
  std::string csv;    // method,K,seed,eval_loss,eval_acc
  std::string table;  // sorted by mean eval_loss ascending
};

SummaryFiles emit_summary(const std::vector<MethodReport>& reports);

struct ExperimentResult {
  std::vector<MethodReport> reports;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Test split from gen_dataset; the training split is divided again into the
// rows SGD fits and the validation rows that drive mask learning.
struct PreparedData {
  Dataset fit;
  Dataset validation;
  Dataset test;
};
PreparedData prepare_data(const ExperimentConfig& cfg);

// Per seed, under output_dir/seed_<s>/: window/, <label>.bin averaged weights
// (random: <label>_draw<d>.bin), and for sewa <label>_history.csv and
// <label>_mask.json. Then summary.csv and table.txt in output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Worker count: cfg value, else SEWA_WORKERS, else hardware concurrency.
std::size_t resolve_workers(std::size_t configured);

// ---- probe configuration ----

struct ExpansivenessProbeConfig {
  ExpansivenessProblem problem;
  double alpha = 0.1;
  std::size_t steps = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output;
};

struct DivergenceProbeConfig {
  DatasetSource dataset;  // last generated row is held out as the replacement sample
  MlpSpec model;
  SgdConfig train;
  std::size_t k = 1;
  std::size_t perturb_index = 0;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output;
};

struct DivergenceResult {
  std::uint64_t seed = 0;
  ProbeResult probe;
};

// One divergence probe per seed; the seed drives both coupled runs. A model
// without layer sizes becomes a single bias-free logistic layer.
std::vector<DivergenceResult> run_divergence_probes(const DivergenceProbeConfig& cfg);

ExpansivenessProbeConfig load_expansiveness_probe_config(const std::filesystem::path& path);
DivergenceProbeConfig load_divergence_probe_config(const std::filesystem::path& path);

}  // namespace sewa
