#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ssrl/common.hpp"
#include "ssrl/data.hpp"
#include "ssrl/pretext.hpp"
#include "testutil.hpp"

using namespace ssrl;
using models::ModelConfig;
using nn::Tensor;
using nn::VarPtr;

namespace {

signal::LogMelSpectrogram random_mel(std::size_t t, Rng& rng) {
  signal::LogMelSpectrogram m;
  m.frames = Tensor(t, 80);
  for (auto& v : m.frames.data) v = rng.uniform(-5, 5);
  return m;
}

signal::LogMelSpectrogram random_mel_cols(std::size_t t, std::size_t cols, Rng& rng) {
  signal::LogMelSpectrogram m;
  m.frames = Tensor(t, cols);
  for (auto& v : m.frames.data) v = rng.uniform(-5, 5);
  return m;
}

}  // namespace

TEST_CASE("build_odd_groups: grouping, jumble fraction, remainder drop") {
  Rng rng(401);
  std::vector<signal::LogMelSpectrogram> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(random_mel(40, rng));

  auto groups = pretext::build_odd_groups(batch, 4, 5);
  REQUIRE(groups.size() == 2);  // remainder of 2 dropped
  for (const auto& g : groups) {
    REQUIRE(g.clips.size() == 4);
    CHECK(g.odd_index < 4);
  }

  // exactly one clip per group differs from its source; the rest bitwise equal
  std::size_t jumbled_total = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& orig = batch[gi * 4 + k].frames.data;
      bool same = groups[gi].clips[k].frames.data == orig;
      if (!same) ++jumbled_total;
      if (k != groups[gi].odd_index) CHECK(same);
    }
  CHECK(jumbled_total == groups.size());  // 1/K of clips jumbled, exactly

  CHECK_THROWS_AS((void)pretext::build_odd_groups(
                      std::vector<signal::LogMelSpectrogram>{random_mel(40, rng)}, 4, 1),
                  BatchTooSmall);
}

TEST_CASE("build_odd_groups: deterministic under a fixed seed") {
  Rng rng(402);
  std::vector<signal::LogMelSpectrogram> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_mel(30, rng));
  auto a = pretext::build_odd_groups(batch, 4, 123);
  auto b = pretext::build_odd_groups(batch, 4, 123);
  CHECK(a[0].odd_index == b[0].odd_index);
  CHECK(a[0].jumble_spec.start_a == b[0].jumble_spec.start_a);
  CHECK(a[0].jumble_spec.start_b == b[0].jumble_spec.start_b);
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(a[0].clips[k].frames.data == b[0].clips[k].frames.data);
}

TEST_CASE("build_odd_groups: odd index uniform within 3-sigma over 1e4 groups") {
  Rng rng(403);
  std::vector<signal::LogMelSpectrogram> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_mel(30, rng));
  const int n = 10000;
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    auto g = pretext::build_odd_groups(batch, 4, 1000 + static_cast<std::uint64_t>(i));
    ++counts[g[0].odd_index];
  }
  double expect = n / 4.0;
  double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(counts[k] - expect) <= 3.0 * sigma);
}

TEST_CASE("odd_one_out_loss: uniform-score and bound contracts") {
  Rng rng(404);
  ModelConfig cfg = ModelConfig::tiny();
  models::AudioEncoder enc(cfg, rng);
  models::OddScorer scorer(cfg, rng);

  std::vector<signal::LogMelSpectrogram> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_mel_cols(20, cfg.mel_bins, rng));
  auto groups = pretext::build_odd_groups(batch, 4, 9);

  // zeroed scorer output layer -> identical scores -> loss = ln 4 exactly
  models::OddScorer uniform_scorer(cfg, rng);
  for (auto& p : uniform_scorer.params())
    std::fill(p.var->value.data.begin(), p.var->value.data.end(), 0.0);
  VarPtr lu = pretext::odd_one_out_loss(groups, enc, uniform_scorer);
  CHECK(std::abs(lu->value.item() - std::log(4.0)) < 1e-9);

  VarPtr l = pretext::odd_one_out_loss(groups, enc, scorer);
  CHECK(l->value.item() >= 0.0);
}

TEST_CASE("odd_one_out_loss: gradients match finite differences") {
  Rng rng(405);
  ModelConfig cfg = ModelConfig::tiny();
  models::AudioEncoder enc(cfg, rng);
  models::OddScorer scorer(cfg, rng);
  std::vector<signal::LogMelSpectrogram> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_mel_cols(8, cfg.mel_bins, rng));
  auto groups = pretext::build_odd_groups(batch, 4, 11);

  std::vector<VarPtr> vars;
  for (auto& p : enc.params()) vars.push_back(p.var);
  for (auto& p : scorer.params()) vars.push_back(p.var);
  auto loss = [&] { return pretext::odd_one_out_loss(groups, enc, scorer); };
  CHECK(testutil::grad_check(vars, loss) < 1e-3);
}

TEST_CASE("l1_reconstruction_loss: value oracle and non-negativity") {
  Rng rng(406);
  ModelConfig cfg = ModelConfig::tiny();
  models::PretextModel model(cfg, 99);

  pretext::ReconBatch rb;
  rb.audio = random_mel_cols(16, cfg.mel_bins, rng);  // T_v = (16+3)/4 = 4
  data::VideoData video;
  video.t = 4;
  video.pixels.resize(4 * 3 * 64 * 128);
  for (auto& p : video.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(256));
  rb.still_frame = video.frame(0);
  rb.target_video = video.all_frames();
  rb.sampled_frame_index = 2;

  VarPtr loss = pretext::l1_reconstruction_loss(rb, model, 7, false);
  CHECK(loss->value.item() >= 0.0);

  // oracle: regenerate the same frame and re-sum |a - b| independently
  auto id_out = model.identity.forward(nn::constant(rb.still_frame), false);
  VarPtr z_aud = model.encoder.forward(nn::constant(rb.audio.frames));
  auto z_n = model.noise.forward(4, 7);
  VarPtr code = models::assemble_latent(z_aud, id_out.embedding, z_n.code);
  VarPtr row = nn::slice_rows(code, 2, 3);
  VarPtr gen = model.decoder.forward_frame(row, id_out, false);
  double acc = 0;
  for (std::size_t i = 0; i < gen->value.size(); ++i)
    acc += std::abs(gen->value.data[i] - rb.target_video.at(2, i));
  acc /= static_cast<double>(gen->value.size());
  CHECK(std::abs(loss->value.item() - acc) < 1e-6);

  // audio/video rate mismatch
  rb.audio = random_mel_cols(40, cfg.mel_bins, rng);  // implies T_v = 10 != 4
  CHECK_THROWS_AS(
      (void)pretext::l1_reconstruction_loss(rb, model, 7, false), AlignmentError);
}

TEST_CASE("l1_reconstruction_loss: gradients through the full model") {
  Rng rng(407);
  ModelConfig cfg = ModelConfig::tiny();
  models::PretextModel model(cfg, 5);

  pretext::ReconBatch rb;
  rb.audio = random_mel_cols(4, cfg.mel_bins, rng);  // T_v = 1
  data::VideoData video;
  video.t = 1;
  // saturated target keeps every |generated - target| term away from the
  // absolute-value kink, where finite differences are meaningless
  video.pixels.assign(3 * 64 * 128, 255);
  rb.still_frame = video.frame(0);
  rb.target_video = video.all_frames();
  rb.sampled_frame_index = 0;

  // check a representative parameter tensor from each subnetwork (full tiny
  // model finite differences over 64x128 decodes would dominate test runtime)
  std::vector<VarPtr> vars = {model.encoder.params()[0].var,
                              model.encoder.params().back().var,
                              model.identity.params()[0].var,
                              model.identity.params().back().var,
                              model.decoder.params()[0].var,
                              model.decoder.params().back().var};
  auto loss = [&] { return pretext::l1_reconstruction_loss(rb, model, 3, false); };
  // h = 1e-4 with a 1e-6 denominator floor: the loss is a mean over 24576
  // pixels, so FD resolves gradients only above ~1e-10 per entry
  CHECK(testutil::grad_check(vars, loss, 1e-4, 1e-6) < 1e-3);
}

TEST_CASE("multitask_loss: scalar arithmetic and contract errors") {
  pretext::MultiTaskWeights w;
  w.alpha = 0.67;
  CHECK(pretext::multitask_loss(1.0, 2.0, w) == doctest::Approx(1.33).epsilon(1e-12));
  w.alpha = 1.0;
  CHECK(pretext::multitask_loss(3.5, 9.0, w) == 3.5);
  w.alpha = 0.0;
  CHECK(pretext::multitask_loss(3.5, 9.0, w) == 9.0);
  w.alpha = 1.2;
  CHECK_THROWS_AS((void)pretext::multitask_loss(1.0, 1.0, w), InvalidWeight);
  w.alpha = -0.1;
  CHECK_THROWS_AS((void)pretext::multitask_loss(1.0, 1.0, w), InvalidWeight);
}

TEST_CASE("multitask_loss: graph endpoints bitwise, linear in alpha") {
  VarPtr lv = nn::make_var(Tensor::scalar(1.7), true);
  VarPtr la = nn::make_var(Tensor::scalar(0.4), true);

  pretext::MultiTaskWeights w;
  w.alpha = 1.0;
  CHECK(pretext::multitask_loss(lv, la, w) == lv);  // identical node
  w.alpha = 0.0;
  CHECK(pretext::multitask_loss(lv, la, w) == la);

  // linearity: L(alpha) is affine, slope = lv - la
  auto at = [&](double alpha) {
    pretext::MultiTaskWeights ww;
    ww.alpha = alpha;
    return pretext::multitask_loss(lv, la, ww)->value.item();
  };
  double slope = (at(0.8) - at(0.2)) / 0.6;
  CHECK(slope == doctest::Approx(1.7 - 0.4).epsilon(1e-9));
  CHECK(at(0.5) == doctest::Approx((at(0.2) + at(0.8)) / 2.0).epsilon(1e-12));

  // composite gradient flows to both branches
  pretext::MultiTaskWeights mid;
  mid.alpha = 0.67;
  auto loss = [&] { return pretext::multitask_loss(lv, la, mid); };
  CHECK(testutil::grad_check({lv, la}, loss) < 1e-6);
}
