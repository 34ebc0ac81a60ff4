#include <cmath>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sewa/error.hpp"
#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"

namespace sewa {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects any key left unread.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    used_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path(key) + ": must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(path(key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::size_t size(const std::string& key) { return static_cast<std::size_t>(unsigned_int(key)); }
  std::size_t size(const std::string& key, std::size_t fallback) {
    return has(key) ? size(key) : fallback;
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::vector<std::uint64_t> unsigned_list(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(path(key) + ": expected an array");
    std::vector<std::uint64_t> out;
    for (const auto& e : v) {
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0)) {
        throw ConfigError(path(key) + ": expected non-negative integers");
      }
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

DatasetSource parse_dataset(const json& j, const std::filesystem::path& base) {
  Fields f(j, "dataset");
  const std::string kind = f.string("kind");
  DatasetSource out;
  if (kind == "blobs") {
    BlobsParams p;
    p.n = f.size("n", p.n);
    p.p = f.size("p", p.p);
    p.classes = f.size("classes", p.classes);
    p.noise = f.number("noise", p.noise);
    p.separation = f.number("separation", p.separation);
    p.seed = f.has("seed") ? f.unsigned_int("seed") : p.seed;
    out = p;
  } else if (kind == "spirals") {
    SpiralsParams p;
    p.n = f.size("n", p.n);
    p.noise = f.number("noise", p.noise);
    p.seed = f.has("seed") ? f.unsigned_int("seed") : p.seed;
    out = p;
  } else if (kind == "csv") {
    CsvParams p;
    p.path = resolve(base, f.string("path"));
    p.label_column = f.string("label_column", p.label_column);
    p.seed = f.has("seed") ? f.unsigned_int("seed") : p.seed;
    if (!std::filesystem::exists(p.path)) {
      throw ConfigError("dataset.path: file not found: " + p.path.string());
    }
    out = p;
  } else {
    throw ConfigError("dataset.kind: unknown kind '" + kind + "' (blobs, spirals, csv)");
  }
  f.finish();
  return out;
}

MlpSpec parse_model(const json& j) {
  Fields f(j, "model");
  MlpSpec spec;
  const json& sizes = f.at("layer_sizes");
  if (!sizes.is_array()) throw ConfigError("model.layer_sizes: expected an array");
  for (const auto& v : sizes) {
    if (!v.is_number_unsigned()) throw ConfigError("model.layer_sizes: expected positive integers");
    spec.layer_sizes.push_back(v.get<std::size_t>());
  }
  spec.activation = parse_activation(f.string("activation", "relu"));
  spec.loss = parse_loss_kind(f.string("loss", "cross_entropy_softmax"));
  spec.bias = f.boolean("bias", true);
  f.finish();
  spec.validate();
  return spec;
}

LrSchedule parse_schedule(const json& j) {
  Fields f(j, "train.schedule");
  const std::string kind = f.string("kind");
  LrSchedule out;
  if (kind == "constant") {
    out = ConstantRate{f.number("alpha")};
  } else if (kind == "cosine") {
    CosineRate c;
    c.alpha_max = f.number("alpha_max");
    c.alpha_min = f.number("alpha_min", 0.0);
    c.start_step = f.size("start_step", 0);
    out = c;
  } else {
    throw ConfigError("train.schedule.kind: unknown kind '" + kind + "' (constant, cosine)");
  }
  f.finish();
  return out;
}

SgdConfig parse_train(const json& j) {
  Fields f(j, "train");
  SgdConfig cfg;
  cfg.steps = f.size("steps");
  cfg.batch_size = f.size("batch_size", 1);
  cfg.capture_every = f.size("capture_every", 1);
  cfg.schedule = parse_schedule(f.at("schedule"));
  cfg.seed = f.has("seed") ? f.unsigned_int("seed") : 0;
  cfg.full_batch = f.boolean("full_batch", false);
  f.finish();
  cfg.validate();
  return cfg;
}

TemperatureSchedule parse_temperature(const json& j) {
  Fields f(j, "gs.temperature");
  const std::string kind = f.string("kind");
  TemperatureSchedule out;
  if (kind == "constant") {
    out = ConstantTemperature{f.number("t")};
  } else if (kind == "geometric") {
    GeometricTemperature g;
    g.t0 = f.number("t0", g.t0);
    g.t_min = f.number("t_min", g.t_min);
    g.factor = f.number("factor", g.factor);
    out = g;
  } else {
    throw ConfigError("gs.temperature.kind: unknown kind '" + kind + "' (constant, geometric)");
  }
  f.finish();
  return out;
}

GsConfig parse_gs(const json& j, MaskInference* inference) {
  Fields f(j, "gs");
  GsConfig gs;
  if (f.has("temperature")) gs.temperature = parse_temperature(f.at("temperature"));
  gs.samples = f.size("samples", gs.samples);
  gs.step_size = f.number("step_size", gs.step_size);
  gs.iterations = f.size("iterations", gs.iterations);
  gs.eval_batch = f.size("eval_batch", gs.eval_batch);
  gs.eps = f.number("eps", gs.eps);
  gs.budget = f.size("K", gs.budget);
  gs.seed = f.has("seed") ? f.unsigned_int("seed") : gs.seed;
  if (inference != nullptr) {
    const std::string mode = f.string("inference", "topk");
    if (mode == "topk") {
      *inference = MaskInference::topk;
    } else if (mode == "bernoulli") {
      *inference = MaskInference::bernoulli;
    } else {
      throw ConfigError("gs.inference: expected 'topk' or 'bernoulli'");
    }
  }
  f.finish();
  return gs;
}

MethodSpec parse_method(const json& j, std::size_t index) {
  Fields f(j, "methods[" + std::to_string(index) + "]");
  MethodSpec m;
  const std::string name = f.string("name");
  m.kind = parse_method_kind(name);
  m.label = f.string("label", name);
  switch (m.kind) {
    case MethodKind::sgd_final:
    case MethodKind::uniform:
      break;
    case MethodKind::swa:
      m.start_fraction = f.number("start_fraction", m.start_fraction);
      m.every = f.size("every", m.every);
      if (f.has("anneal_to")) m.anneal_to = f.number("anneal_to");
      break;
    case MethodKind::ema:
      m.decay = f.number("decay", m.decay);
      m.every = f.size("every", m.every);
      break;
    case MethodKind::lawa:
      m.K = f.size("K");
      break;
    case MethodKind::random:
      m.K = f.size("K");
      m.draws = f.size("draws", m.draws);
      if (m.draws == 0) throw ConfigError("methods: random draws must be >= 1");
      break;
    case MethodKind::sewa:
      m.K = f.size("K");
      if (f.has("gs")) m.gs = parse_gs(f.at("gs"), &m.inference);
      if (f.has("mask_data")) {
        const std::string d = f.string("mask_data");
        if (d == "validation") {
          m.mask_data = MaskData::validation;
        } else if (d == "train") {
          m.mask_data = MaskData::train;
        } else {
          throw ConfigError("methods: mask_data must be 'validation' or 'train'");
        }
      }
      m.gs.budget = m.K;
      break;
  }
  f.finish();
  return m;
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(where + ": invalid JSON: " + e.what());
  }
}

std::filesystem::path base_of(const std::filesystem::path& path) {
  return path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
}

std::string read_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  return read_file(path);
}

}  // namespace

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::sgd_final: return "sgd_final";
    case MethodKind::uniform: return "uniform";
    case MethodKind::swa: return "swa";
    case MethodKind::ema: return "ema";
    case MethodKind::lawa: return "lawa";
    case MethodKind::random: return "random";
    case MethodKind::sewa: return "sewa";
  }
  return "?";
}

MethodKind parse_method_kind(std::string_view name) {
  for (MethodKind k : {MethodKind::sgd_final, MethodKind::uniform, MethodKind::swa,
                       MethodKind::ema, MethodKind::lawa, MethodKind::random, MethodKind::sewa}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (sgd_final, uniform, swa, ema, lawa, random, sewa)");
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (output_dir.empty()) throw ConfigError("config: output_dir is required");
  if (window_k == 0) throw ConfigError("config: window_k must be positive");
  const std::size_t captures = train.steps / train.capture_every;
  if (window_k > captures) {
    throw ConfigError("config: window_k=" + std::to_string(window_k) +
                      " exceeds steps/capture_every=" + std::to_string(captures));
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("config: validation_fraction must lie in (0, 1)");
  }
  std::set<std::string> labels;
  for (const auto& m : methods) {
    if (!labels.insert(m.label).second) {
      throw ConfigError("config: duplicate method label '" + m.label + "'; set distinct labels");
    }
    const bool budgeted =
        m.kind == MethodKind::lawa || m.kind == MethodKind::random || m.kind == MethodKind::sewa;
    if (budgeted && (m.K == 0 || m.K > window_k)) {
      throw ConfigError("config: method '" + m.label + "' needs 1 <= K <= window_k");
    }
    if ((m.kind == MethodKind::ema || m.kind == MethodKind::swa) && m.every == 0) {
      throw ConfigError("config: method '" + m.label + "' needs every >= 1");
    }
    if (m.kind == MethodKind::ema && !(m.decay >= 0.0 && m.decay < 1.0)) {
      throw ConfigError("config: ema decay must lie in [0, 1)");
    }
    if (m.kind == MethodKind::swa && !(m.start_fraction >= 0.0 && m.start_fraction <= 1.0)) {
      throw ConfigError("config: swa start_fraction must lie in [0, 1]");
    }
    if (m.kind == MethodKind::sewa) m.gs.validate();
  }
  if (const auto* c = std::get_if<CsvParams>(&dataset)) {
    if (!std::filesystem::exists(c->path)) {
      throw ConfigError("config: dataset file not found: " + c->path.string());
    }
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir) {
  const json j = parse_json(json_text, "config");
  Fields f(j, "config");
  ExperimentConfig cfg;
  cfg.dataset = parse_dataset(f.at("dataset"), base_dir);
  cfg.model = parse_model(f.at("model"));
  cfg.train = parse_train(f.at("train"));
  cfg.window_k = f.size("window_k");
  cfg.validation_fraction = f.number("validation_fraction", cfg.validation_fraction);
  const json& methods = f.at("methods");
  if (!methods.is_array()) throw ConfigError("config.methods: expected an array");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    cfg.methods.push_back(parse_method(methods[i], i));
  }
  cfg.seeds = f.unsigned_list("seeds");
  cfg.output_dir = resolve(base_dir, f.string("output_dir"));
  cfg.workers = f.size("workers", 0);
  f.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_config(path), base_of(path));
}

GsConfig load_gs_config(const std::filesystem::path& path) {
  const json j = parse_json(read_config(path), path.string());
  GsConfig gs = parse_gs(j, nullptr);
  gs.validate();
  return gs;
}

ExpansivenessProbeConfig load_expansiveness_probe_config(const std::filesystem::path& path) {
  const json j = parse_json(read_config(path), path.string());
  Fields f(j, "probe");
  ExpansivenessProbeConfig cfg;
  const std::string problem = f.string("problem");
  if (problem == "quadratic") {
    ConvexQuadratic q;
    q.beta = f.number("beta", q.beta);
    q.dim = f.size("dim", q.dim);
    cfg.problem = q;
  } else if (problem == "logistic") {
    cfg.problem = ConvexLogistic{make_dataset(parse_dataset(f.at("dataset"), base_of(path)))};
  } else if (problem == "mlp") {
    NonconvexMlp m;
    m.data = make_dataset(parse_dataset(f.at("dataset"), base_of(path)));
    m.spec = parse_model(f.at("model"));
    m.curvature_points = f.size("curvature_points", m.curvature_points);
    m.power_iterations = f.size("power_iterations", m.power_iterations);
    cfg.problem = std::move(m);
  } else {
    throw ConfigError("probe.problem: expected quadratic, logistic or mlp");
  }
  cfg.alpha = f.number("alpha");
  cfg.steps = f.size("steps", cfg.steps);
  if (f.has("seeds")) cfg.seeds = f.unsigned_list("seeds");
  cfg.output = resolve(base_of(path), f.string("output"));
  f.finish();
  return cfg;
}

DivergenceProbeConfig load_divergence_probe_config(const std::filesystem::path& path) {
  const json j = parse_json(read_config(path), path.string());
  Fields f(j, "probe");
  DivergenceProbeConfig cfg;
  cfg.dataset = parse_dataset(f.at("dataset"), base_of(path));
  if (f.has("model")) {
    cfg.model = parse_model(f.at("model"));
  } else {
    cfg.model.activation = Activation::identity;
    cfg.model.loss = LossKind::logistic_binary;
    cfg.model.bias = false;
  }
  cfg.train = parse_train(f.at("train"));
  cfg.k = f.size("k");
  cfg.perturb_index = f.size("perturb_index", 0);
  if (f.has("seeds")) cfg.seeds = f.unsigned_list("seeds");
  cfg.output = resolve(base_of(path), f.string("output"));
  f.finish();
  return cfg;
}

}  // namespace sewa
