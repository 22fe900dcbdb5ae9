#include "fedperi/riskmodel/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fedperi/common/errors.hpp"

namespace fedperi::riskmodel {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'F', 'P', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const ModelConfig& config, const ModelParams& params, const std::string& path) {
  const std::vector<double> flat = params.flatten();
  if (flat.size() != zero_params(config).size())
    throw DimensionError("save_checkpoint: parameters do not match config");
  const std::string cfg = config.to_json().dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  const std::uint64_t p = flat.size(), len = cfg.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&p), sizeof p);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(cfg.data(), static_cast<std::streamsize>(len));
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(p * sizeof(double)));
  if (!out) throw FormatError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t p = 0, len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&p), sizeof p);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path + ": not an FPSM checkpoint");
  if (version != kVersion) throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  if (len > (1u << 24)) throw FormatError(path + ": implausible config length");
  std::string cfg(len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError(path + ": truncated header");

  Checkpoint ck;
  try {
    ck.config = ModelConfig::from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad config JSON: " + e.what());
  }
  ck.params = zero_params(ck.config);
  if (ck.params.size() != p) throw FormatError(path + ": parameter count disagrees with config");
  std::vector<double> flat(p);
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(p * sizeof(double)));
  if (!in) throw FormatError(path + ": truncated parameters");
  ck.params.unflatten(flat);
  return ck;
}

}  // namespace fedperi::riskmodel
