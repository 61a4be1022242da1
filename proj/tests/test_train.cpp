#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ssrl/checkpoint.hpp"
#include "ssrl/common.hpp"
#include "ssrl/train.hpp"

using namespace ssrl;
using namespace ssrl::traindown;
namespace fs = std::filesystem;

namespace {

data::Dataset small_corpus(const std::string& task = "classify") {
  data::SyntheticSpec spec;
  spec.n_speakers = 6;
  spec.clips_per_speaker = 4;
  spec.clip_seconds = 0.5;
  spec.task = task;
  return data::generate_synthetic(spec);
}

PretrainOptions fast_pretrain(PretextTask task) {
  PretrainOptions opt;
  opt.task = task;
  opt.model = models::ModelConfig::toy();
  opt.schedule.epochs = 2;
  opt.schedule.batch_size = 8;
  opt.seed = 11;
  return opt;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path p;
  explicit TempDir(const std::string& name) : p(fs::temp_directory_path() / name) {
    fs::remove_all(p);
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
};

}  // namespace

TEST_CASE("learning-rate schedules match closed forms") {
  PretrainSchedule p;
  CHECK(p.lr_at(0) == 0.06);
  CHECK(p.lr_at(9) == 0.06);
  CHECK(p.lr_at(10) == doctest::Approx(0.06 * 0.98).epsilon(1e-15));
  CHECK(p.lr_at(40) == doctest::Approx(0.06 * std::pow(0.98, 4)).epsilon(1e-15));
  CHECK(p.lr_at(99) == doctest::Approx(0.06 * std::pow(0.98, 9)).epsilon(1e-15));

  DownstreamSchedule d;
  CHECK(d.lr_at(0) == 1e-4);
  CHECK(d.lr_at(10) == 1e-4);
  CHECK(d.lr_at(40) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(d.lr_at(99) == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("adam minimizes a quadratic") {
  nn::VarPtr x = nn::make_var(nn::Tensor::full(1, 3, 5.0), true);
  Adam adam({models::Param{"x", x}});
  for (int i = 0; i < 400; ++i) {
    adam.zero_grad();
    nn::VarPtr loss = nn::sum_all(nn::mul(x, x));
    nn::backward(loss);
    adam.step(0.1);
  }
  for (double v : x->value.data) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("pretrain: odd task records losses and held-out accuracy") {
  TempDir tmp("ssrl_train_odd");
  auto ds = small_corpus();
  auto opt = fast_pretrain(PretextTask::Odd);
  std::string ckpt = (tmp.p / "odd.ckpt").string();
  auto result = pretrain(ds, opt, ckpt);
  CHECK(result.total_loss.size() == 2);
  for (double v : result.total_loss) CHECK(std::isfinite(v));
  REQUIRE(result.val_odd_accuracy.has_value());
  CHECK(*result.val_odd_accuracy >= 0.0);
  CHECK(fs::exists(ckpt));

  auto ck = checkpoint::Checkpoint::load(ckpt);
  CHECK(ck.config.at("task") == "Odd");
  models::ModelConfig cfg = checkpoint::config_from_json(ck.config.at("model"));
  Rng rng(0);
  models::AudioEncoder enc(cfg, rng);
  ck.load_component(enc, "encoder");  // by-name extraction works
}

TEST_CASE("pretrain: L1+Odd at alpha=1 matches an L1 run bitwise") {
  TempDir tmp("ssrl_train_alpha1");
  auto ds = small_corpus();

  auto l1 = fast_pretrain(PretextTask::L1);
  auto combo = fast_pretrain(PretextTask::L1Odd);
  combo.weights.alpha = 1.0;

  auto r1 = pretrain(ds, l1, (tmp.p / "a.ckpt").string());
  auto r2 = pretrain(ds, combo, (tmp.p / "b.ckpt").string());
  REQUIRE(r1.total_loss.size() == r2.total_loss.size());
  for (std::size_t i = 0; i < r1.total_loss.size(); ++i) {
    CHECK(r1.total_loss[i] == r2.total_loss[i]);  // bitwise
    CHECK(r1.video_loss[i] == r2.video_loss[i]);
  }
}

TEST_CASE("pretrain: L1 without video raises MissingModality") {
  auto ds = small_corpus();
  for (auto& c : ds.clips) c.video.reset();
  auto opt = fast_pretrain(PretextTask::L1);
  CHECK_THROWS_AS((void)pretrain(ds, opt, ""), MissingModality);
}

TEST_CASE("pretrain: epochs=0 saves a loadable initialization") {
  TempDir tmp("ssrl_train_init");
  auto ds = small_corpus();
  auto opt = fast_pretrain(PretextTask::Odd);
  opt.schedule.epochs = 0;
  std::string ckpt = (tmp.p / "init.ckpt").string();
  auto r = pretrain(ds, opt, ckpt);
  CHECK(r.total_loss.empty());
  auto ck = checkpoint::Checkpoint::load(ckpt);
  CHECK(!ck.arrays.empty());
}

TEST_CASE("extract_features: shape, determinism, corrupt checkpoint") {
  TempDir tmp("ssrl_train_extract");
  auto ds = small_corpus();
  auto opt = fast_pretrain(PretextTask::Odd);
  opt.schedule.epochs = 0;
  std::string ckpt = (tmp.p / "m.ckpt").string();
  pretrain(ds, opt, ckpt);

  std::string s1 = (tmp.p / "store1").string(), s2 = (tmp.p / "store2").string();
  extract_features(ckpt, ds, s1);
  extract_features(ckpt, ds, s2);

  auto store = FeatureStore::open(s1);
  CHECK(store.index.size() == ds.clips.size());
  CHECK(store.feature_dim() == opt.model.feature_dim);
  nn::Tensor f = store.load(ds.clips[0].rec.clip_id);
  CHECK(f.rows == 48);  // 0.5 s at 100 Hz framing

  // byte-identical stores
  for (const auto& [clip_id, entry] : store.index) {
    CHECK(slurp((fs::path(s1) / entry.file).string()) ==
          slurp((fs::path(s2) / entry.file).string()));
  }
  CHECK(slurp(s1 + "/index.json") == slurp(s2 + "/index.json"));

  std::string bad = (tmp.p / "bad.ckpt").string();
  std::ofstream(bad) << "not a checkpoint";
  CHECK_THROWS_AS(extract_features(bad, ds, (tmp.p / "s3").string()), CheckpointError);
}

TEST_CASE("extract_mfcc_features: 39-dim baseline store") {
  TempDir tmp("ssrl_train_mfcc");
  auto ds = small_corpus();
  std::string dir = (tmp.p / "mfcc").string();
  extract_mfcc_features(ds, dir);
  auto store = FeatureStore::open(dir);
  CHECK(store.feature_dim() == 39);
}

TEST_CASE("downstream frozen: best-validation selection from a feature store") {
  TempDir tmp("ssrl_train_frozen");
  auto ds = small_corpus();
  std::string dir = (tmp.p / "mfcc").string();
  extract_mfcc_features(ds, dir);
  auto store = FeatureStore::open(dir);

  DownstreamOptions opt;
  opt.task = DownstreamTask::Classify;
  opt.mode = Mode::Frozen;
  opt.schedule.epochs = 3;
  opt.schedule.batch_size = 8;
  opt.bgru_hidden = 8;
  opt.seed = 2;
  auto result = train_downstream(store, opt);
  REQUIRE(result.val_curve.size() == 3);
  double best = *std::max_element(result.val_curve.begin(), result.val_curve.end());
  CHECK(result.best_val_metric == best);
  CHECK(result.val_curve[static_cast<std::size_t>(result.best_epoch)] == best);
  CHECK(std::isfinite(result.test_metric));
  CHECK(result.test_metric >= 0.0);
  CHECK(result.test_metric <= 1.0);
}

TEST_CASE("downstream end-to-end: mode contracts on the encoder digest") {
  TempDir tmp("ssrl_train_modes");
  auto ds = small_corpus();
  auto popt = fast_pretrain(PretextTask::Odd);
  popt.schedule.epochs = 0;
  std::string ckpt = (tmp.p / "enc.ckpt").string();
  pretrain(ds, popt, ckpt);

  DownstreamOptions opt;
  opt.task = DownstreamTask::Classify;
  opt.schedule.epochs = 1;
  opt.schedule.batch_size = 8;
  opt.bgru_hidden = 8;
  opt.seed = 3;
  opt.encoder_ckpt = ckpt;
  opt.scratch_model = models::ModelConfig::toy();

  opt.mode = Mode::Frozen;
  auto frozen = train_downstream(ds, opt);
  CHECK(frozen.encoder_digest_before == frozen.encoder_digest_after);

  opt.mode = Mode::Finetune;
  auto tuned = train_downstream(ds, opt);
  CHECK(tuned.encoder_digest_before != tuned.encoder_digest_after);

  // scratch never touches a checkpoint: a nonexistent path must be fine
  opt.mode = Mode::Scratch;
  opt.encoder_ckpt = (tmp.p / "does_not_exist.ckpt").string();
  auto scratch = train_downstream(ds, opt);
  CHECK(std::isfinite(scratch.test_metric));
}

TEST_CASE("downstream regression: CCC metric path") {
  TempDir tmp("ssrl_train_reg");
  auto ds = small_corpus("regress");
  std::string dir = (tmp.p / "mfcc").string();
  extract_mfcc_features(ds, dir);
  auto store = FeatureStore::open(dir);

  DownstreamOptions opt;
  opt.task = DownstreamTask::Regress;
  opt.mode = Mode::Frozen;
  opt.schedule.epochs = 2;
  opt.schedule.batch_size = 8;
  opt.bgru_hidden = 8;
  opt.seed = 4;
  auto result = train_downstream(store, opt);
  CHECK(result.test_metric >= -1.0);
  CHECK(result.test_metric <= 1.0);
}

TEST_CASE("run_repeated: determinism and degenerate cases") {
  auto exp = [](std::uint64_t seed) {
    Rng rng(seed);
    return rng.uniform();
  };
  auto a = run_repeated("metric", 5, 77, exp);
  auto b = run_repeated("metric", 5, 77, exp);
  CHECK(a.values == b.values);
  CHECK(a.mean == b.mean);

  auto one = run_repeated("metric", 1, 3, exp);
  CHECK(one.stddev == 0.0);

  auto flat = run_repeated("metric", 10, 3, [](std::uint64_t) { return 0.5; });
  CHECK(flat.mean == doctest::Approx(0.5));
  CHECK(flat.stddev == doctest::Approx(0.0));
}
