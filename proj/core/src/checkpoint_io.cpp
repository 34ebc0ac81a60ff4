#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

#include "sewa/error.hpp"
#include "sewa/io_util.hpp"
#include "sewa/trajectory.hpp"

namespace sewa {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'E', 'W', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8;

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
  }
}

template <class U>
U get_le(const std::string& in, std::size_t pos) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return value;
}

std::string checkpoint_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06zu.bin", index);
  return buf;
}

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, std::size_t step,
                           const WeightVector& weights) {
  std::string bytes;
  bytes.reserve(kHeaderBytes + weights.dim() * 8);
  bytes.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(bytes, kFormatVersion);
  put_le<std::uint64_t>(bytes, step);
  put_le<std::uint64_t>(bytes, weights.dim());
  for (double v : weights.values()) put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
  atomic_write(path, bytes);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string name = path.filename().string();
  if (bytes.size() < kMagic.size()) {
    throw TruncatedFileError(name + ": file shorter than the magic header");
  }
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw MagicMismatchError(name + ": magic bytes are not SEWACKPT");
  }
  if (bytes.size() < kHeaderBytes) {
    throw TruncatedFileError(name + ": header truncated");
  }
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kFormatVersion) {
    throw VersionMismatchError(name + ": format version " + std::to_string(version) +
                               ", expected " + std::to_string(kFormatVersion));
  }
  CheckpointFile out;
  out.step = get_le<std::uint64_t>(bytes, 12);
  const auto dim = get_le<std::uint64_t>(bytes, 20);
  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (payload / 8 < dim || payload < dim * 8) {
    throw TruncatedFileError(name + ": header declares " + std::to_string(dim) +
                             " values but the payload holds " + std::to_string(payload / 8));
  }
  if (payload != dim * 8) {
    throw FormatError(name + ": " + std::to_string(payload - dim * 8) + " trailing bytes");
  }
  std::vector<double> values(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, kHeaderBytes + 8 * i));
  }
  out.weights = WeightVector(std::move(values));
  return out;
}

void save_window(const TrajectoryWindow& window, const std::filesystem::path& dir) {
  if (window.empty()) throw ConfigError("save_window: window is empty");
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["version"] = kFormatVersion;
  manifest["dim"] = window.dim();
  manifest["k"] = window.capacity();
  auto steps = nlohmann::ordered_json::array();
  auto losses = nlohmann::ordered_json::array();
  auto files = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& c = window[i];
    const std::string file = checkpoint_name(i);
    write_checkpoint_file(dir / file, c.step, c.weights);
    steps.push_back(c.step);
    losses.push_back(c.train_loss);
    files.push_back(file);
  }
  manifest["steps"] = std::move(steps);
  manifest["train_losses"] = std::move(losses);
  manifest["files"] = std::move(files);
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

TrajectoryWindow load_window(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  try {
    const auto version = manifest.at("version").get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw VersionMismatchError("manifest.json: version " + std::to_string(version) +
                                 ", expected " + std::to_string(kFormatVersion));
    }
    const auto dim = manifest.at("dim").get<std::size_t>();
    const auto k = manifest.at("k").get<std::size_t>();
    const auto steps = manifest.at("steps").get<std::vector<std::size_t>>();
    const auto losses = manifest.at("train_losses").get<std::vector<double>>();
    const auto files = manifest.at("files").get<std::vector<std::string>>();
    if (steps.size() != files.size() || losses.size() != files.size()) {
      throw FormatError("manifest.json: steps, train_losses and files differ in length");
    }
    if (files.size() > k) {
      throw FormatError("manifest.json: " + std::to_string(files.size()) +
                        " checkpoints exceed k = " + std::to_string(k));
    }
    TrajectoryWindow window(k);
    for (std::size_t i = 0; i < files.size(); ++i) {
      auto file = read_checkpoint_file(dir / files[i]);
      if (file.weights.dim() != dim) {
        throw ManifestMismatchError(files[i] + ": dimension " +
                                    std::to_string(file.weights.dim()) +
                                    " disagrees with manifest dim " + std::to_string(dim));
      }
      if (file.step != steps[i]) {
        throw FormatError(files[i] + ": step " + std::to_string(file.step) +
                          " disagrees with manifest step " + std::to_string(steps[i]));
      }
      window.push({file.step, std::move(file.weights), losses[i]});
    }
    return window;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
}

}  // namespace sewa
