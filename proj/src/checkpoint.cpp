#include "ssrl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ssrl::checkpoint {

using nn::Tensor;

namespace {
constexpr char kMagic[8] = {'S', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void wr_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t rd_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write " + path);
  f.write(kMagic, 8);
  wr_u32(f, kVersion);
  std::string cfg = config.dump();
  wr_u32(f, static_cast<std::uint32_t>(cfg.size()));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  wr_u32(f, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    wr_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    wr_u32(f, static_cast<std::uint32_t>(t.rows));
    wr_u32(f, static_cast<std::uint32_t>(t.cols));
    for (double v : t.data) {
      float fv = static_cast<float>(v);
      f.write(reinterpret_cast<const char*>(&fv), sizeof(float));
    }
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("bad magic in " + path);
  std::uint32_t version = rd_u32(f);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::uint32_t cfg_len = rd_u32(f);
  std::string cfg(cfg_len, '\0');
  f.read(cfg.data(), cfg_len);
  if (!f) throw CheckpointError("truncated checkpoint " + path);
  Checkpoint ck;
  try {
    ck.config = nlohmann::json::parse(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt config block: ") + e.what());
  }
  std::uint32_t n = rd_u32(f);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t name_len = rd_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    std::uint32_t rows = rd_u32(f);
    std::uint32_t cols = rd_u32(f);
    Tensor t(rows, cols);
    for (std::size_t j = 0; j < t.size(); ++j) {
      float fv;
      f.read(reinterpret_cast<char*>(&fv), sizeof(float));
      if (!f) throw CheckpointError("truncated array " + name + " in " + path);
      t.data[j] = fv;
    }
    ck.arrays.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void Checkpoint::put_component(models::Component& comp) {
  for (const auto& p : comp.params()) arrays[p.name] = p.var->value;
  for (const auto& b : comp.buffers()) arrays[b.name] = *b.tensor;
}

void Checkpoint::load_component(models::Component& comp, const std::string& prefix) const {
  for (auto& p : comp.params()) {
    auto it = arrays.find(p.name);
    if (it == arrays.end())
      throw CheckpointError("missing array '" + p.name + "' (prefix " + prefix + ")");
    if (!it->second.same_shape(p.var->value))
      throw CheckpointError("shape mismatch for '" + p.name + "'");
    p.var->value = it->second;
  }
  for (auto& b : comp.buffers()) {
    auto it = arrays.find(b.name);
    if (it == arrays.end()) throw CheckpointError("missing buffer '" + b.name + "'");
    *b.tensor = it->second;
  }
}

nlohmann::json config_to_json(const models::ModelConfig& cfg) {
  nlohmann::json j;
  j["mel_bins"] = cfg.mel_bins;
  j["encoder_hidden"] = cfg.encoder_hidden;
  j["encoder_layers"] = cfg.encoder_layers;
  j["feature_dim"] = cfg.feature_dim;
  j["identity_dim"] = cfg.identity_dim;
  j["conv_channels"] = cfg.conv_channels;
  j["img_h"] = cfg.img_h;
  j["img_w"] = cfg.img_w;
  j["img_c"] = cfg.img_c;
  j["noise_dim"] = cfg.noise_dim;
  j["noise_variance"] = cfg.noise_variance;
  j["scorer_hidden"] = cfg.scorer_hidden;
  j["bgru_hidden"] = cfg.bgru_hidden;
  j["bgru_layers"] = cfg.bgru_layers;
  return j;
}

models::ModelConfig config_from_json(const nlohmann::json& j) {
  models::ModelConfig cfg;
  cfg.mel_bins = j.value("mel_bins", cfg.mel_bins);
  cfg.encoder_hidden = j.value("encoder_hidden", cfg.encoder_hidden);
  cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.identity_dim = j.value("identity_dim", cfg.identity_dim);
  if (j.contains("conv_channels"))
    cfg.conv_channels = j["conv_channels"].get<std::vector<std::size_t>>();
  cfg.img_h = j.value("img_h", cfg.img_h);
  cfg.img_w = j.value("img_w", cfg.img_w);
  cfg.img_c = j.value("img_c", cfg.img_c);
  cfg.noise_dim = j.value("noise_dim", cfg.noise_dim);
  cfg.noise_variance = j.value("noise_variance", cfg.noise_variance);
  cfg.scorer_hidden = j.value("scorer_hidden", cfg.scorer_hidden);
  cfg.bgru_hidden = j.value("bgru_hidden", cfg.bgru_hidden);
  cfg.bgru_layers = j.value("bgru_layers", cfg.bgru_layers);
  return cfg;
}

}  // namespace ssrl::checkpoint
