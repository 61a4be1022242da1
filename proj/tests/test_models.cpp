#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ssrl/common.hpp"
#include "ssrl/models.hpp"
#include "testutil.hpp"

using namespace ssrl;
using models::ModelConfig;
using nn::Tensor;
using nn::VarPtr;
using testutil::grad_check;
using testutil::random_var;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(r, c);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("audio encoder shape contract over sampled lengths") {
  Rng rng(301);
  ModelConfig cfg = ModelConfig::canonical();
  models::AudioEncoder enc(cfg, rng);
  for (std::size_t t : {std::size_t{1}, std::size_t{7}, std::size_t{98}, std::size_t{512}}) {
    VarPtr y = enc.forward(nn::constant(random_tensor(t, 80, rng)));
    CHECK(y->value.rows == t);
    CHECK(y->value.cols == 512);
  }
  CHECK_THROWS_AS((void)enc.forward(nn::constant(Tensor(4, 40))), ShapeError);
}

TEST_CASE("audio encoder causality: prefix consistency bitwise") {
  Rng rng(302);
  ModelConfig cfg = ModelConfig::toy();
  models::AudioEncoder enc(cfg, rng);
  Tensor full = random_tensor(20, 80, rng);
  Tensor prefix(12, 80);
  std::copy(full.data.begin(), full.data.begin() + 12 * 80, prefix.data.begin());
  Tensor y_full = enc.forward_tensor(full);
  Tensor y_pre = enc.forward_tensor(prefix);
  for (std::size_t i = 0; i < y_pre.size(); ++i) CHECK(y_full.data[i] == y_pre.data[i]);
}

TEST_CASE("identity encoder: 64-d embedding, 6 strictly shrinking skip maps") {
  Rng rng(303);
  ModelConfig cfg = ModelConfig::canonical();
  models::IdentityEncoder ident(cfg, rng);
  VarPtr frame = nn::constant(random_tensor(3, 64 * 128, rng));
  auto out = ident.forward(frame, false);
  CHECK(out.embedding->value.rows == 1);
  CHECK(out.embedding->value.cols == 64);
  REQUIRE(out.skips.size() == 6);
  REQUIRE(out.skip_geometry.size() == 6);
  for (std::size_t i = 1; i < 6; ++i) {
    CHECK(out.skip_geometry[i].first < out.skip_geometry[i - 1].first);
    CHECK(out.skip_geometry[i].second < out.skip_geometry[i - 1].second);
  }

  // distinct frames give distinct embeddings under random init
  auto out2 = ident.forward(nn::constant(random_tensor(3, 64 * 128, rng)), false);
  CHECK(out.embedding->value.data != out2.embedding->value.data);

  // all-zero frame stays finite in inference mode
  auto z = ident.forward(nn::constant(Tensor(3, 64 * 128)), false);
  for (double v : z.embedding->value.data) CHECK(std::isfinite(v));

  CHECK_THROWS_AS((void)ident.forward(nn::constant(Tensor(3, 32 * 32)), false), ShapeError);
}

TEST_CASE("noise generator: determinism and raw moment contract") {
  Rng rng(304);
  ModelConfig cfg = ModelConfig::canonical();
  models::NoiseGenerator gen(cfg, rng);

  auto a = gen.forward(25, 77);
  auto b = gen.forward(25, 77);
  CHECK(a.code->value.rows == 25);
  CHECK(a.code->value.cols == 10);
  CHECK(a.code->value.data == b.code->value.data);
  CHECK(a.raw.data == b.raw.data);

  auto c = gen.forward(25, 78);
  CHECK(a.code->value.data != c.code->value.data);

  // 10^5 raw pre-recurrence draws: mean ~ 0, variance ~ 0.33
  auto big = gen.forward(10000, 5);  // 10000 x 10 = 1e5 draws
  double mean = 0;
  for (double v : big.raw.data) mean += v;
  mean /= static_cast<double>(big.raw.size());
  double var = 0;
  for (double v : big.raw.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(big.raw.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 0.33) < 0.02);
}

TEST_CASE("assemble_latent: stride-4 subsample, 586 layout, slice recovery") {
  Rng rng(305);
  Tensor z_aud_t = random_tensor(100, 512, rng);
  Tensor z_id_t = random_tensor(1, 64, rng);
  Tensor z_n_t = random_tensor(25, 10, rng);
  VarPtr z_aud = nn::constant(z_aud_t), z_id = nn::constant(z_id_t),
         z_n = nn::constant(z_n_t);

  VarPtr code = models::assemble_latent(z_aud, z_id, z_n);
  CHECK(code->value.rows == 25);
  CHECK(code->value.cols == 586);
  for (std::size_t r = 0; r < 25; ++r) {
    for (std::size_t c = 0; c < 512; ++c)
      CHECK(code->value.at(r, c) == z_aud_t.at(r * 4, c));
    for (std::size_t c = 0; c < 64; ++c)
      CHECK(code->value.at(r, 512 + c) == z_id_t.at(0, c));
    for (std::size_t c = 0; c < 10; ++c)
      CHECK(code->value.at(r, 576 + c) == z_n_t.at(r, c));
  }
  // identity slice constant across rows
  for (std::size_t c = 512; c < 576; ++c)
    CHECK(code->value.at(0, c) == code->value.at(24, c));

  VarPtr z_n_bad = nn::constant(random_tensor(24, 10, rng));
  CHECK_THROWS_AS((void)models::assemble_latent(z_aud, z_id, z_n_bad), AlignmentError);
}

TEST_CASE("frame decoder: geometry, output bound, skip ablation") {
  Rng rng(306);
  ModelConfig cfg = ModelConfig::toy();
  models::IdentityEncoder ident(cfg, rng);
  models::FrameDecoder dec(cfg, rng);
  auto id_out = ident.forward(nn::constant(random_tensor(3, 64 * 128, rng)), false);

  VarPtr code = nn::constant(random_tensor(5, cfg.latent_dim(), rng));
  VarPtr video = dec.forward(code, id_out, false);
  CHECK(video->value.rows == 5);
  CHECK(video->value.cols == 3 * 64 * 128);
  for (double v : video->value.data) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  // zeroing skip connections changes the generated frame
  VarPtr row = nn::constant(random_tensor(1, cfg.latent_dim(), rng));
  VarPtr with_skips = dec.forward_frame(row, id_out, false, false);
  VarPtr no_skips = dec.forward_frame(row, id_out, false, true);
  double linf = 0;
  for (std::size_t i = 0; i < with_skips->value.size(); ++i)
    linf = std::max(linf, std::abs(with_skips->value.data[i] - no_skips->value.data[i]));
  CHECK(linf > 0.0);
}

TEST_CASE("odd scorer: K scores, permutation equivariance, shared map") {
  Rng rng(307);
  ModelConfig cfg = ModelConfig::toy();
  models::OddScorer scorer(cfg, rng);

  std::vector<VarPtr> feats;
  for (int i = 0; i < 4; ++i)
    feats.push_back(nn::constant(random_tensor(6, cfg.feature_dim, rng)));
  VarPtr scores = scorer.forward(feats);
  CHECK(scores->value.rows == 1);
  CHECK(scores->value.cols == 4);

  std::vector<VarPtr> permuted = {feats[2], feats[0], feats[3], feats[1]};
  VarPtr ps = scorer.forward(permuted);
  CHECK(ps->value.data[0] == scores->value.data[2]);
  CHECK(ps->value.data[1] == scores->value.data[0]);
  CHECK(ps->value.data[2] == scores->value.data[3]);
  CHECK(ps->value.data[3] == scores->value.data[1]);

  std::vector<VarPtr> same = {feats[0], feats[0], feats[0]};
  VarPtr ss = scorer.forward(same);
  CHECK(ss->value.data[0] == ss->value.data[1]);
  CHECK(ss->value.data[1] == ss->value.data[2]);

  CHECK_THROWS_AS((void)scorer.forward({feats[0]}), GroupTooSmall);
}

TEST_CASE("bgru heads: shape contracts") {
  Rng rng(308);
  models::BgruClassifier cls(512, 256, 2, 6, rng);
  VarPtr logits = cls.forward(nn::constant(random_tensor(98, 512, rng)));
  CHECK(logits->value.rows == 1);
  CHECK(logits->value.cols == 6);

  models::BgruClassifier mfcc_cls(39, 64, 2, 30, rng);
  CHECK(mfcc_cls.forward(nn::constant(random_tensor(98, 39, rng)))->value.cols == 30);
  CHECK(mfcc_cls.forward(nn::constant(random_tensor(1, 39, rng)))->value.cols == 30);

  models::BgruRegressor reg(64, 32, 2, rng);
  VarPtr y = reg.forward(nn::constant(random_tensor(300, 64, rng)));
  CHECK(y->value.rows == 300);
  CHECK(y->value.cols == 1);
  for (double v : y->value.data) CHECK(std::isfinite(v));

  CHECK_THROWS_AS((void)reg.forward(nn::constant(random_tensor(5, 7, rng))), ShapeError);
}

TEST_CASE("randomized shape property over t in [1, 512]") {
  Rng rng(309);
  ModelConfig cfg = ModelConfig::toy();
  models::AudioEncoder enc(cfg, rng);
  models::BgruRegressor reg(cfg.feature_dim, 8, 1, rng);
  for (int trial = 0; trial < 12; ++trial) {
    std::size_t t = 1 + rng.uniform_int(512);
    VarPtr f = enc.forward(nn::constant(random_tensor(t, 80, rng)));
    CHECK(f->value.rows == t);
    CHECK(f->value.cols == cfg.feature_dim);
    CHECK(reg.forward(f)->value.rows == t);
  }
}

TEST_CASE("gradient check: tiny audio encoder") {
  Rng rng(310);
  ModelConfig cfg = ModelConfig::tiny();
  models::AudioEncoder enc(cfg, rng);
  CHECK(enc.param_count() <= 2000);
  VarPtr x = nn::constant(random_tensor(3, cfg.mel_bins, rng));
  std::vector<VarPtr> vars;
  for (auto& p : enc.params()) vars.push_back(p.var);
  auto loss = [&] { return nn::mean_all(nn::mul(enc.forward(x), enc.forward(x))); };
  CHECK(grad_check(vars, loss) < 1e-3);
}

TEST_CASE("gradient check: tiny bgru classifier and regressor") {
  Rng rng(311);
  models::BgruClassifier cls(5, 3, 2, 3, rng);
  CHECK(cls.param_count() <= 2000);
  VarPtr x = nn::constant(random_tensor(4, 5, rng));
  std::vector<VarPtr> vars;
  for (auto& p : cls.params()) vars.push_back(p.var);
  auto loss = [&] { return nn::softmax_cross_entropy(cls.forward(x), 1); };
  CHECK(grad_check(vars, loss) < 1e-3);

  models::BgruRegressor reg(5, 3, 1, rng);
  std::vector<VarPtr> rvars;
  for (auto& p : reg.params()) rvars.push_back(p.var);
  auto rloss = [&] {
    VarPtr y = reg.forward(x);
    return nn::mean_all(nn::mul(y, y));
  };
  CHECK(grad_check(rvars, rloss) < 1e-3);
}

TEST_CASE("gradient check: tiny identity encoder (training-mode batchnorm)") {
  Rng rng(312);
  ModelConfig cfg = ModelConfig::tiny();
  models::IdentityEncoder ident(cfg, rng);
  CHECK(ident.param_count() <= 2000);
  VarPtr frame = nn::constant(random_tensor(3, 64 * 128, rng));
  std::vector<VarPtr> vars;
  for (auto& p : ident.params()) vars.push_back(p.var);
  auto loss = [&] {
    auto out = ident.forward(frame, false);  // inference BN: pure forward
    return nn::mean_all(nn::mul(out.embedding, out.embedding));
  };
  CHECK(grad_check(vars, loss) < 1e-3);
}

TEST_CASE("component utilities: digest, trainable flag") {
  Rng rng(313);
  models::BgruClassifier cls(4, 3, 1, 2, rng);
  std::uint64_t d1 = cls.param_digest();
  CHECK(d1 == cls.param_digest());
  cls.params()[0].var->value.data[0] += 1.0;
  CHECK(cls.param_digest() != d1);

  cls.set_trainable(false);
  for (auto& p : cls.params()) CHECK(!p.var->requires_grad);
  cls.set_trainable(true);
  for (auto& p : cls.params()) CHECK(p.var->requires_grad);
}

TEST_CASE("canonical parameter counts match the golden file") {
  std::ifstream f(std::string(SSRL_SOURCE_DIR) + "/tests/golden/param_counts.txt");
  REQUIRE(f.good());
  std::map<std::string, std::size_t> golden;
  std::string name;
  std::size_t count;
  while (f >> name >> count) golden[name] = count;
  REQUIRE(golden.size() == 5);

  models::PretextModel model(ModelConfig::canonical(), 1);
  CHECK(model.encoder.param_count() == golden.at("encoder"));
  CHECK(model.identity.param_count() == golden.at("identity"));
  CHECK(model.noise.param_count() == golden.at("noise"));
  CHECK(model.decoder.param_count() == golden.at("decoder"));
  CHECK(model.scorer.param_count() == golden.at("scorer"));
}
