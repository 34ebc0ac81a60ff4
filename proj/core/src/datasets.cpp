#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "sewa/error.hpp"
#include "sewa/experiment.hpp"
#include "sewa/io_util.hpp"
#include "sewa/rng.hpp"

namespace sewa {

namespace {

constexpr std::uint64_t kBlobTag = 0x424c4f42u;    // "BLOB"
constexpr std::uint64_t kSpiralTag = 0x53504952u;  // "SPIR"
constexpr std::uint64_t kSplitTag = 0x53504c54u;   // "SPLT"

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& path) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": '" + cell + "' is not a number");
  }
  return v;
}

}  // namespace

Dataset make_blobs(const BlobsParams& p) {
  if (p.classes < 2) throw ConfigError("blobs: classes must be >= 2");
  if (p.n < p.classes) throw ConfigError("blobs: n must be >= classes");
  if (p.p == 0) throw ConfigError("blobs: p must be positive");
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) throw ConfigError("blobs: noise must be >= 0");
  if (!(p.separation > 0.0)) throw ConfigError("blobs: separation must be positive");

  std::vector<double> means(p.classes * p.p, 0.0);
  for (std::size_t c = 0; c < p.classes; ++c) {
    if (p.p == 1) {
      means[c] = (static_cast<double>(c) - 0.5 * static_cast<double>(p.classes - 1)) * p.separation;
    } else {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(p.classes);
      means[c * p.p] = p.separation * std::cos(angle);
      means[c * p.p + 1] = p.separation * std::sin(angle);
    }
  }
  std::vector<double> x(p.n * p.p), y(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    rng::Stream stream(rng::derive(p.seed, kBlobTag, i));
    const std::size_t c = static_cast<std::size_t>(stream.below(p.classes));
    y[i] = static_cast<double>(c);
    for (std::size_t j = 0; j < p.p; ++j) {
      x[i * p.p + j] = means[c * p.p + j] + p.noise * stream.normal();
    }
  }
  return Dataset(std::move(x), p.p, std::move(y));
}

Dataset make_spirals(const SpiralsParams& p) {
  if (p.n < 2) throw ConfigError("spirals: n must be >= 2");
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) {
    throw ConfigError("spirals: noise must be >= 0");
  }
  std::vector<double> x(p.n * 2), y(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    rng::Stream stream(rng::derive(p.seed, kSpiralTag, i));
    const std::size_t c = static_cast<std::size_t>(stream.below(2));
    const double theta = 3.0 * std::numbers::pi * std::sqrt(stream.uniform());
    const double r = theta / (3.0 * std::numbers::pi);
    const double sign = c == 0 ? 1.0 : -1.0;
    x[2 * i] = sign * r * std::cos(theta) + p.noise * stream.normal();
    x[2 * i + 1] = sign * r * std::sin(theta) + p.noise * stream.normal();
    y[i] = static_cast<double>(c);
  }
  return Dataset(std::move(x), 2, std::move(y));
}

Dataset load_csv_dataset(const CsvParams& p) {
  if (!std::filesystem::exists(p.path)) {
    throw ConfigError("csv dataset: file not found: " + p.path.string());
  }
  std::istringstream in(read_file(p.path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv dataset: empty file " + p.path.string());
  const auto header = split_csv_line(line);
  std::size_t label = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == p.label_column) label = j;
  }
  if (label == header.size()) {
    throw ConfigError("csv dataset: no column named '" + p.label_column + "'");
  }
  if (header.size() < 2) throw ConfigError("csv dataset: need at least one feature column");
  std::vector<double> x, y;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError(p.path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double v = parse_number(cells[j], line_no, p.path.string());
      if (j == label) {
        y.push_back(v);
      } else {
        x.push_back(v);
      }
    }
  }
  if (y.empty()) throw ConfigError("csv dataset: no data rows in " + p.path.string());
  return Dataset(std::move(x), header.size() - 1, std::move(y));
}

Dataset make_dataset(const DatasetSource& source) {
  if (const auto* b = std::get_if<BlobsParams>(&source)) return make_blobs(*b);
  if (const auto* s = std::get_if<SpiralsParams>(&source)) return make_spirals(*s);
  return load_csv_dataset(std::get<CsvParams>(source));
}

std::uint64_t dataset_seed(const DatasetSource& source) {
  return std::visit([](const auto& p) { return p.seed; }, source);
}

DatasetSplit split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split_dataset: fraction must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) {
    throw ConfigError("split_dataset: " + std::to_string(n) + " rows cannot be split with fraction " +
                      std::to_string(test_fraction));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Stream stream(rng::derive(seed, kSplitTag));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[static_cast<std::size_t>(stream.below(i + 1))]);
  }
  const std::span<const std::size_t> all(perm);
  return {data.subset(all.subspan(n_test)), data.subset(all.first(n_test))};
}

DatasetSplit gen_dataset(const DatasetSource& source) {
  return split_dataset(make_dataset(source), 0.2, dataset_seed(source));
}

}  // namespace sewa
