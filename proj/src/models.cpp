#include "ssrl/models.hpp"

#include <cmath>
#include <cstring>

namespace ssrl::models {

using namespace nn;

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.encoder_hidden = 48;
  c.feature_dim = 48;
  c.identity_dim = 16;
  c.conv_channels = {8, 12, 16, 24, 32, 32};
  c.scorer_hidden = 32;
  c.bgru_hidden = 32;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.mel_bins = 5;
  c.encoder_hidden = 4;
  c.feature_dim = 4;
  c.identity_dim = 3;
  c.conv_channels = {2, 2, 3, 3, 4, 4};
  c.img_h = 64;
  c.img_w = 128;
  c.scorer_hidden = 4;
  c.bgru_hidden = 4;
  return c;
}

std::size_t Component::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var->value.size();
  return n;
}

void Component::set_trainable(bool trainable) {
  for (auto& p : params_) p.var->requires_grad = trainable;
}

std::uint64_t Component::param_digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const Tensor& t) {
    for (double v : t.data) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
  };
  for (const auto& p : params_) mix(p.var->value);
  return h;
}

VarPtr Component::add_param(const std::string& name, Tensor init) {
  VarPtr v = make_var(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

Tensor init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  double k = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  Tensor t(rows, cols);
  for (double& v : t.data) v = rng.uniform(-k, k);
  return t;
}

// --- GRU ---------------------------------------------------------------------

GruLayer::GruLayer(const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  auto mk = [&](const std::string& n, std::size_t r, std::size_t c, std::size_t fan) {
    return add_param(prefix + "." + n, init_uniform(r, c, fan, rng));
  };
  wz_ = mk("w_z", input_dim, hidden_dim, input_dim);
  uz_ = mk("u_z", hidden_dim, hidden_dim, hidden_dim);
  bz_ = mk("b_z", 1, hidden_dim, hidden_dim);
  wr_ = mk("w_r", input_dim, hidden_dim, input_dim);
  ur_ = mk("u_r", hidden_dim, hidden_dim, hidden_dim);
  br_ = mk("b_r", 1, hidden_dim, hidden_dim);
  wn_ = mk("w_n", input_dim, hidden_dim, input_dim);
  un_ = mk("u_n", hidden_dim, hidden_dim, hidden_dim);
  bn_ = mk("b_n", 1, hidden_dim, hidden_dim);
}

VarPtr GruLayer::forward(const VarPtr& x, bool reverse) const {
  if (x->value.cols != input_dim_)
    throw ShapeError("GruLayer: expected input dim " + std::to_string(input_dim_) +
                     ", got " + std::to_string(x->value.cols));
  std::size_t t = x->value.rows;
  VarPtr h = constant(Tensor::zeros(1, hidden_dim_));
  std::vector<VarPtr> states(t);
  for (std::size_t step = 0; step < t; ++step) {
    std::size_t i = reverse ? t - 1 - step : step;
    VarPtr xi = slice_rows(x, i, i + 1);
    VarPtr z = sigmoid(add(add_rowvec(matmul(xi, wz_), bz_), matmul(h, uz_)));
    VarPtr r = sigmoid(add(add_rowvec(matmul(xi, wr_), br_), matmul(h, ur_)));
    VarPtr n = tanh_act(
        add(add_rowvec(matmul(xi, wn_), bn_), mul(r, matmul(h, un_))));
    // h' = (1 - z) * n + z * h
    VarPtr one_minus_z = add_const(scale(z, -1.0), 1.0);
    h = add(mul(one_minus_z, n), mul(z, h));
    states[i] = h;
  }
  return concat_rows(states);
}

// --- audio encoder -------------------------------------------------------------

AudioEncoder::AudioEncoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  std::size_t in = cfg.mel_bins;
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    layers_.emplace_back("encoder.gru" + std::to_string(l), in, cfg.encoder_hidden, rng);
    in = cfg.encoder_hidden;
  }
  for (auto& l : layers_)
    for (auto& p : l.params()) params_.push_back(p);
  fc_w_ = add_param("encoder.fc.w",
                    init_uniform(cfg.encoder_hidden, cfg.feature_dim, cfg.encoder_hidden, rng));
  fc_b_ = add_param("encoder.fc.b", Tensor::zeros(1, cfg.feature_dim));
}

VarPtr AudioEncoder::forward(const VarPtr& x) const {
  if (x->value.cols != cfg_.mel_bins)
    throw ShapeError("AudioEncoder: expected " + std::to_string(cfg_.mel_bins) +
                     " input columns, got " + std::to_string(x->value.cols));
  VarPtr h = x;
  for (const auto& l : layers_) h = l.forward(h);
  return add_rowvec(matmul(h, fc_w_), fc_b_);
}

Tensor AudioEncoder::forward_tensor(const Tensor& x) const {
  return forward(constant(x))->value;
}

// --- identity encoder ----------------------------------------------------------

IdentityEncoder::IdentityEncoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  std::size_t cin = cfg.img_c;
  const std::size_t kh = 4, kw = 4;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    std::size_t cout = cfg.conv_channels[i];
    Block b;
    std::string pre = "identity.block" + std::to_string(i);
    b.w = add_param(pre + ".w", init_uniform(cout, cin * kh * kw, cin * kh * kw, rng));
    b.b = add_param(pre + ".b", Tensor::zeros(1, cout));
    b.gamma = add_param(pre + ".gamma", Tensor::full(1, cout, 1.0));
    b.beta = add_param(pre + ".beta", Tensor::zeros(1, cout));
    b.run_mean = Tensor::zeros(1, cout);
    b.run_var = Tensor::full(1, cout, 1.0);
    blocks_.push_back(std::move(b));
    cin = cout;
  }
  std::size_t sh = cfg.img_h >> cfg.conv_channels.size();
  std::size_t sw = cfg.img_w >> cfg.conv_channels.size();
  if (sh == 0) sh = 1;
  if (sw == 0) sw = 1;
  std::size_t flat = cfg.conv_channels.back() * sh * sw;
  fc_w_ = add_param("identity.fc.w", init_uniform(flat, cfg.identity_dim, flat, rng));
  fc_b_ = add_param("identity.fc.b", Tensor::zeros(1, cfg.identity_dim));
}

std::vector<Buffer> IdentityEncoder::buffers() {
  std::vector<Buffer> bs;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    std::string pre = "identity.block" + std::to_string(i);
    bs.push_back({pre + ".run_mean", &blocks_[i].run_mean});
    bs.push_back({pre + ".run_var", &blocks_[i].run_var});
  }
  return bs;
}

IdentityOutput IdentityEncoder::forward(const VarPtr& frame, bool training) {
  if (frame->value.rows != cfg_.img_c || frame->value.cols != cfg_.img_h * cfg_.img_w)
    throw ShapeError("IdentityEncoder: expected [" + std::to_string(cfg_.img_c) + " x " +
                     std::to_string(cfg_.img_h * cfg_.img_w) + "] frame");
  IdentityOutput out;
  VarPtr h = frame;
  std::size_t cin = cfg_.img_c, hh = cfg_.img_h, ww = cfg_.img_w;
  for (auto& b : blocks_) {
    h = conv2d(h, b.w, b.b, cin, hh, ww, 4, 4, 2, 1);
    hh /= 2;
    ww /= 2;
    cin = b.w->value.rows;
    h = batchnorm(h, b.gamma, b.beta, b.run_mean, b.run_var, training);
    h = relu(h);
    out.skips.push_back(h);
    out.skip_geometry.emplace_back(hh, ww);
  }
  // flatten [C x S] to [1 x C*S]
  VarPtr flat_v = reshape(h, 1, h->value.size());
  out.embedding = add_rowvec(matmul(flat_v, fc_w_), fc_b_);
  return out;
}

// --- noise generator -----------------------------------------------------------

NoiseGenerator::NoiseGenerator(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg), gru_("noise.gru", cfg.noise_dim, cfg.noise_dim, rng) {
  for (auto& p : gru_.params()) params_.push_back(p);
}

NoiseOutput NoiseGenerator::forward(std::size_t t_video, std::uint64_t seed) const {
  if (t_video < 1) throw ShapeError("NoiseGenerator: t_video must be >= 1");
  Rng rng(seed);
  NoiseOutput out;
  out.raw = Tensor(t_video, cfg_.noise_dim);
  double sigma = std::sqrt(cfg_.noise_variance);
  for (double& v : out.raw.data) v = rng.gaussian(0.0, sigma);
  out.code = gru_.forward(constant(out.raw));
  return out;
}

// --- latent assembly -----------------------------------------------------------

VarPtr assemble_latent(const VarPtr& z_aud, const VarPtr& z_id, const VarPtr& z_n) {
  std::size_t t = z_aud->value.rows;
  std::size_t t_video = (t + 3) / 4;  // 100 Hz audio -> 25 fps video
  if (z_n->value.rows != t_video)
    throw AlignmentError("assemble_latent: z_n has " + std::to_string(z_n->value.rows) +
                         " rows, expected " + std::to_string(t_video));
  if (z_id->value.rows != 1) throw ShapeError("assemble_latent: z_id must be [1 x d]");
  std::vector<VarPtr> rows;
  rows.reserve(t_video);
  for (std::size_t i = 0; i < t_video; ++i) {
    VarPtr aud_row = slice_rows(z_aud, i * 4, i * 4 + 1);
    VarPtr n_row = slice_rows(z_n, i, i + 1);
    rows.push_back(concat_cols(concat_cols(aud_row, z_id), n_row));
  }
  return concat_rows(rows);
}

// --- frame decoder ---------------------------------------------------------------

FrameDecoder::FrameDecoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  std::size_t n_blocks = cfg.conv_channels.size();
  std::size_t sh = cfg.img_h >> n_blocks;
  std::size_t sw = cfg.img_w >> n_blocks;
  if (sh == 0) sh = 1;
  if (sw == 0) sw = 1;
  std::size_t c_top = cfg.conv_channels.back();
  fc_w_ = add_param("decoder.fc.w",
                    init_uniform(cfg.latent_dim(), c_top * sh * sw, cfg.latent_dim(), rng));
  fc_b_ = add_param("decoder.fc.b", Tensor::zeros(1, c_top * sh * sw));
  // blocks mirror the identity encoder; block j consumes the decoder state
  // concatenated with the encoder skip map at the same resolution
  const std::size_t kh = 4, kw = 4;
  std::size_t cur = c_top;
  for (std::size_t j = 0; j < n_blocks; ++j) {
    std::size_t skip_c = cfg.conv_channels[n_blocks - 1 - j];
    std::size_t cin = cur + skip_c;
    std::size_t cout = j + 1 < n_blocks ? cfg.conv_channels[n_blocks - 2 - j]
                                        : cfg.conv_channels[0];
    Block b;
    std::string pre = "decoder.block" + std::to_string(j);
    b.w = add_param(pre + ".w", init_uniform(cin, cout * kh * kw, cin * kh * kw, rng));
    b.b = add_param(pre + ".b", Tensor::zeros(1, cout));
    b.gamma = add_param(pre + ".gamma", Tensor::full(1, cout, 1.0));
    b.beta = add_param(pre + ".beta", Tensor::zeros(1, cout));
    b.run_mean = Tensor::zeros(1, cout);
    b.run_var = Tensor::full(1, cout, 1.0);
    blocks_.push_back(std::move(b));
    cur = cout;
  }
  // final 3x3 conv to image channels
  out_w_ = add_param("decoder.out.w", init_uniform(cfg.img_c, cur * 9, cur * 9, rng));
  out_b_ = add_param("decoder.out.b", Tensor::zeros(1, cfg.img_c));
}

std::vector<Buffer> FrameDecoder::buffers() {
  std::vector<Buffer> bs;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    std::string pre = "decoder.block" + std::to_string(j);
    bs.push_back({pre + ".run_mean", &blocks_[j].run_mean});
    bs.push_back({pre + ".run_var", &blocks_[j].run_var});
  }
  return bs;
}

VarPtr FrameDecoder::forward_frame(const VarPtr& code_row, const IdentityOutput& identity,
                                   bool training, bool zero_skips) {
  if (code_row->value.rows != 1 || code_row->value.cols != cfg_.latent_dim())
    throw ShapeError("FrameDecoder: expected [1 x " + std::to_string(cfg_.latent_dim()) +
                     "] latent row");
  if (identity.skips.size() != blocks_.size())
    throw ShapeError("FrameDecoder: skip map count mismatch");
  std::size_t n_blocks = blocks_.size();
  std::size_t sh = cfg_.img_h >> n_blocks;
  std::size_t sw = cfg_.img_w >> n_blocks;
  if (sh == 0) sh = 1;
  if (sw == 0) sw = 1;
  std::size_t c_top = cfg_.conv_channels.back();
  // scale-invariant latent read-in (RMS normalization): reconstruction can
  // only demand a direction from the audio features, not a magnitude, which
  // keeps the encoder's bounded activations out of saturation when the
  // reconstruction loss is trained jointly with other objectives
  VarPtr ms = mean_all(mul(code_row, code_row));
  VarPtr inv = divide(constant(Tensor::full(1, 1, 1.0)), sqrt_act(add_const(ms, 1e-8)));
  VarPtr normed = mul_scalar(code_row, inv);
  VarPtr h = add_rowvec(matmul(normed, fc_w_), fc_b_);
  h = reshape(h, c_top, sh * sw);
  std::size_t cur_c = c_top, cur_h = sh, cur_w = sw;
  for (std::size_t j = 0; j < n_blocks; ++j) {
    VarPtr skip = identity.skips[n_blocks - 1 - j];
    if (zero_skips) skip = constant(Tensor::zeros(skip->value.rows, skip->value.cols));
    auto [skh, skw] = identity.skip_geometry[n_blocks - 1 - j];
    if (skh != cur_h || skw != cur_w)
      throw ShapeError("FrameDecoder: skip geometry mismatch at block " + std::to_string(j));
    VarPtr merged = concat_rows({h, skip});  // channel-wise concat: [C1+C2 x S]
    std::size_t cin = cur_c + skip->value.rows;
    h = conv_transpose2d(merged, blocks_[j].w, blocks_[j].b, cin, cur_h, cur_w, 4, 4, 2, 1);
    cur_h *= 2;
    cur_w *= 2;
    cur_c = blocks_[j].b->value.cols;
    h = batchnorm(h, blocks_[j].gamma, blocks_[j].beta, blocks_[j].run_mean,
                  blocks_[j].run_var, training);
    h = relu(h);
  }
  if (cur_h != cfg_.img_h || cur_w != cfg_.img_w)
    throw ShapeError("FrameDecoder: output geometry mismatch");
  h = conv2d(h, out_w_, out_b_, cur_c, cur_h, cur_w, 3, 3, 1, 1);
  return tanh_act(h);
}

VarPtr FrameDecoder::forward(const VarPtr& code, const IdentityOutput& identity,
                             bool training) {
  std::vector<VarPtr> frames;
  frames.reserve(code->value.rows);
  for (std::size_t i = 0; i < code->value.rows; ++i) {
    VarPtr row = slice_rows(code, i, i + 1);
    VarPtr img = forward_frame(row, identity, training);
    frames.push_back(reshape(img, 1, img->value.size()));
  }
  return concat_rows(frames);
}

// --- odd-one-out scorer -----------------------------------------------------------

OddScorer::OddScorer(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  w1_ = add_param("scorer.w1",
                  init_uniform(cfg.feature_dim, cfg.scorer_hidden, cfg.feature_dim, rng));
  b1_ = add_param("scorer.b1", Tensor::zeros(1, cfg.scorer_hidden));
  w2_ = add_param("scorer.w2", init_uniform(cfg.scorer_hidden, 1, cfg.scorer_hidden, rng));
  b2_ = add_param("scorer.b2", Tensor::zeros(1, 1));
}

VarPtr OddScorer::forward(const std::vector<VarPtr>& clip_features) const {
  if (clip_features.size() < 2) throw GroupTooSmall("need at least 2 clips");
  std::vector<VarPtr> scores;
  scores.reserve(clip_features.size());
  for (const auto& feat : clip_features) {
    if (feat->value.cols != cfg_.feature_dim)
      throw ShapeError("OddScorer: feature dim mismatch");
    std::size_t t = feat->value.rows;
    VarPtr last = slice_rows(feat, t - 1, t);
    VarPtr h = relu(add_rowvec(matmul(last, w1_), b1_));
    scores.push_back(add_rowvec(matmul(h, w2_), b2_));
  }
  // [K x 1] -> [1 x K]
  VarPtr col = concat_rows(scores);
  return reshape(col, 1, col->value.rows);
}

// --- BGRU heads --------------------------------------------------------------------

namespace {
// shared bidirectional stack: returns per-timestep concat outputs and the
// final forward/backward states
struct BgruOut {
  VarPtr sequence;   // [t x 2H]
  VarPtr last_fwd;   // [1 x H]
  VarPtr last_bwd;   // [1 x H]
};

BgruOut run_bgru(const std::vector<GruLayer>& fwd, const std::vector<GruLayer>& bwd,
                 const VarPtr& x) {
  VarPtr h = x;
  VarPtr f, b;
  for (std::size_t l = 0; l < fwd.size(); ++l) {
    f = fwd[l].forward(h, false);
    b = bwd[l].forward(h, true);
    h = concat_cols(f, b);
  }
  std::size_t t = h->value.rows;
  BgruOut out;
  out.sequence = h;
  out.last_fwd = slice_rows(f, t - 1, t);
  out.last_bwd = slice_rows(b, 0, 1);  // backward direction ends at row 0
  return out;
}
}  // namespace

BgruClassifier::BgruClassifier(std::size_t input_dim, std::size_t hidden,
                               std::size_t layers, std::size_t n_classes, Rng& rng)
    : input_dim_(input_dim), n_classes_(n_classes) {
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    fwd_.emplace_back("bgru.fwd" + std::to_string(l), in, hidden, rng);
    bwd_.emplace_back("bgru.bwd" + std::to_string(l), in, hidden, rng);
    in = 2 * hidden;
  }
  for (auto& g : fwd_)
    for (auto& p : g.params()) params_.push_back(p);
  for (auto& g : bwd_)
    for (auto& p : g.params()) params_.push_back(p);
  fc_w_ = add_param("bgru.fc.w", init_uniform(2 * hidden, n_classes, 2 * hidden, rng));
  fc_b_ = add_param("bgru.fc.b", Tensor::zeros(1, n_classes));
}

VarPtr BgruClassifier::forward(const VarPtr& x) const {
  if (x->value.cols != input_dim_)
    throw ShapeError("BgruClassifier: expected input dim " + std::to_string(input_dim_));
  BgruOut out = run_bgru(fwd_, bwd_, x);
  VarPtr state = concat_cols(out.last_fwd, out.last_bwd);
  return add_rowvec(matmul(state, fc_w_), fc_b_);
}

BgruRegressor::BgruRegressor(std::size_t input_dim, std::size_t hidden,
                             std::size_t layers, Rng& rng)
    : input_dim_(input_dim) {
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    fwd_.emplace_back("bgru.fwd" + std::to_string(l), in, hidden, rng);
    bwd_.emplace_back("bgru.bwd" + std::to_string(l), in, hidden, rng);
    in = 2 * hidden;
  }
  for (auto& g : fwd_)
    for (auto& p : g.params()) params_.push_back(p);
  for (auto& g : bwd_)
    for (auto& p : g.params()) params_.push_back(p);
  fc_w_ = add_param("bgru.fc.w", init_uniform(2 * hidden, 1, 2 * hidden, rng));
  fc_b_ = add_param("bgru.fc.b", Tensor::zeros(1, 1));
}

VarPtr BgruRegressor::forward(const VarPtr& x) const {
  if (x->value.cols != input_dim_)
    throw ShapeError("BgruRegressor: expected input dim " + std::to_string(input_dim_));
  BgruOut out = run_bgru(fwd_, bwd_, x);
  return add_rowvec(matmul(out.sequence, fc_w_), fc_b_);
}

// --- pretext model container ---------------------------------------------------------

namespace {
template <class T>
T seeded(const ModelConfig& c, std::uint64_t seed, std::uint64_t salt) {
  Rng rng(derive_seed(seed, salt));
  return T(c, rng);
}
}  // namespace

PretextModel::PretextModel(const ModelConfig& c, std::uint64_t seed)
    : cfg(c),
      encoder(seeded<AudioEncoder>(c, seed, 1)),
      identity(seeded<IdentityEncoder>(c, seed, 2)),
      noise(seeded<NoiseGenerator>(c, seed, 3)),
      decoder(seeded<FrameDecoder>(c, seed, 4)),
      scorer(seeded<OddScorer>(c, seed, 5)) {}

std::vector<Param> PretextModel::all_params() {
  std::vector<Param> ps;
  for (auto* comp : std::initializer_list<Component*>{&encoder, &identity, &noise,
                                                      &decoder, &scorer})
    for (auto& p : comp->params()) ps.push_back(p);
  return ps;
}

std::vector<Buffer> PretextModel::all_buffers() {
  std::vector<Buffer> bs;
  for (auto* comp : std::initializer_list<Component*>{&encoder, &identity, &noise,
                                                      &decoder, &scorer})
    for (auto& b : comp->buffers()) bs.push_back(b);
  return bs;
}

}  // namespace ssrl::models
