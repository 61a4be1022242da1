#pragma once

// Neural building blocks: audio encoder (3-layer GRU + FC), identity encoder
// (6 Conv-BN-ReLU blocks), temporally coherent noise generator, U-Net style
// frame decoder with skip connections, odd-one-out scorer and the BGRU
// downstream heads. All components are composed from the autodiff primitives
// so analytic gradients are available everywhere.

#include <cstdint>
#include <string>
#include <vector>

#include "ssrl/autodiff.hpp"
#include "ssrl/common.hpp"
#include "ssrl/signal.hpp"

namespace ssrl::models {

using nn::Tensor;
using nn::VarPtr;

struct Param {
  std::string name;
  VarPtr var;
};

// named non-trainable buffer (batch-norm running statistics)
struct Buffer {
  std::string name;
  Tensor* tensor;
};

struct ModelConfig {
  // audio encoder
  std::size_t mel_bins = 80;
  std::size_t encoder_hidden = 512;
  std::size_t encoder_layers = 3;
  std::size_t feature_dim = 512;
  // identity encoder / frame decoder
  std::size_t identity_dim = 64;
  std::vector<std::size_t> conv_channels = {32, 64, 128, 256, 512, 512};
  std::size_t img_h = 64;
  std::size_t img_w = 128;
  std::size_t img_c = 3;
  // noise generator
  std::size_t noise_dim = 10;
  double noise_variance = 0.33;
  // odd-one-out scorer
  std::size_t scorer_hidden = 128;
  // downstream BGRU heads
  std::size_t bgru_hidden = 256;
  std::size_t bgru_layers = 2;

  std::size_t latent_dim() const { return feature_dim + identity_dim + noise_dim; }

  static ModelConfig canonical() { return ModelConfig{}; }
  // desk-scale configuration used by the synthetic end-to-end experiments
  static ModelConfig toy();
  // shrunken variant for finite-difference gradient checks
  static ModelConfig tiny();
};

// base for parameter-owning components
class Component {
 public:
  virtual ~Component() = default;
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  // computed on demand so components stay safely movable
  virtual std::vector<Buffer> buffers() { return {}; }
  std::size_t param_count() const;
  void set_trainable(bool trainable);
  std::uint64_t param_digest() const;  // FNV-1a over parameter bytes

 protected:
  VarPtr add_param(const std::string& name, Tensor init);
  std::vector<Param> params_;
};

// fills with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
Tensor init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

// Single GRU layer operating on row vectors.
class GruLayer : public Component {
 public:
  GruLayer() = default;
  GruLayer(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
           Rng& rng);
  // returns per-timestep hidden states [t x H]; reverse=true processes the
  // sequence back-to-front (states still returned in input order)
  VarPtr forward(const VarPtr& x, bool reverse = false) const;
  std::size_t hidden_dim() const { return hidden_dim_; }

 private:
  std::size_t input_dim_ = 0, hidden_dim_ = 0;
  VarPtr wz_, uz_, bz_, wr_, ur_, br_, wn_, un_, bn_;
};

class AudioEncoder : public Component {
 public:
  AudioEncoder(const ModelConfig& cfg, Rng& rng);
  // [t x mel_bins] -> [t x feature_dim]; causal in time
  VarPtr forward(const VarPtr& x) const;
  Tensor forward_tensor(const Tensor& x) const;  // inference convenience
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::vector<GruLayer> layers_;
  VarPtr fc_w_, fc_b_;
};

struct IdentityOutput {
  VarPtr embedding;            // [1 x identity_dim]
  std::vector<VarPtr> skips;   // 6 maps, strictly decreasing spatial size
  std::vector<std::pair<std::size_t, std::size_t>> skip_geometry;  // (h, w)
};

class IdentityEncoder : public Component {
 public:
  IdentityEncoder(const ModelConfig& cfg, Rng& rng);
  // frame: [img_c x img_h*img_w]
  IdentityOutput forward(const VarPtr& frame, bool training);
  std::vector<Buffer> buffers() override;

 private:
  ModelConfig cfg_;
  struct Block {
    VarPtr w, b, gamma, beta;
    Tensor run_mean, run_var;
  };
  std::vector<Block> blocks_;
  VarPtr fc_w_, fc_b_;
};

struct NoiseOutput {
  Tensor raw;    // [T_v x noise_dim] i.i.d. Gaussian(0, noise_variance) draws
  VarPtr code;   // raw passed through a 1-layer GRU
};

class NoiseGenerator : public Component {
 public:
  NoiseGenerator(const ModelConfig& cfg, Rng& rng);
  NoiseOutput forward(std::size_t t_video, std::uint64_t seed) const;

 private:
  ModelConfig cfg_;
  GruLayer gru_;
};

// [T_v x 586] = [z_aud stride-4 subsample | z_id broadcast | z_n]
VarPtr assemble_latent(const VarPtr& z_aud, const VarPtr& z_id, const VarPtr& z_n);

class FrameDecoder : public Component {
 public:
  FrameDecoder(const ModelConfig& cfg, Rng& rng);
  // decode one video frame from one latent row [1 x latent_dim];
  // output [img_c x img_h*img_w] in [-1, 1]
  VarPtr forward_frame(const VarPtr& code_row, const IdentityOutput& identity,
                       bool training, bool zero_skips = false);
  // full video [T_v x img_c*img_h*img_w]
  VarPtr forward(const VarPtr& code, const IdentityOutput& identity, bool training);
  std::vector<Buffer> buffers() override;

 private:
  ModelConfig cfg_;
  VarPtr fc_w_, fc_b_;
  struct Block {
    VarPtr w, b, gamma, beta;
    Tensor run_mean, run_var;
  };
  std::vector<Block> blocks_;
  VarPtr out_w_, out_b_;
};

class OddScorer : public Component {
 public:
  OddScorer(const ModelConfig& cfg, Rng& rng);
  // one score per clip; each clip summarized by its final-timestep feature
  VarPtr forward(const std::vector<VarPtr>& clip_features) const;  // [1 x K]

 private:
  ModelConfig cfg_;
  VarPtr w1_, b1_, w2_, b2_;
};

class BgruClassifier : public Component {
 public:
  BgruClassifier(std::size_t input_dim, std::size_t hidden, std::size_t layers,
                 std::size_t n_classes, Rng& rng);
  VarPtr forward(const VarPtr& x) const;  // [t x d] -> logits [1 x C]
  std::size_t n_classes() const { return n_classes_; }

 private:
  std::size_t input_dim_, n_classes_;
  std::vector<GruLayer> fwd_, bwd_;
  VarPtr fc_w_, fc_b_;
};

class BgruRegressor : public Component {
 public:
  BgruRegressor(std::size_t input_dim, std::size_t hidden, std::size_t layers, Rng& rng);
  VarPtr forward(const VarPtr& x) const;  // [t x d] -> [t x 1]

 private:
  std::size_t input_dim_;
  std::vector<GruLayer> fwd_, bwd_;
  VarPtr fc_w_, fc_b_;
};

// the full pretraining network
struct PretextModel {
  ModelConfig cfg;
  AudioEncoder encoder;
  IdentityEncoder identity;
  NoiseGenerator noise;
  FrameDecoder decoder;
  OddScorer scorer;

  PretextModel(const ModelConfig& c, std::uint64_t seed);
  std::vector<Param> all_params();
  std::vector<Buffer> all_buffers();
};

}  // namespace ssrl::models
