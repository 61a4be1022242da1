#include "ssrl/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ssrl/checkpoint.hpp"
#include "ssrl/signal.hpp"

namespace ssrl::traindown {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;
using nn::VarPtr;

double PretrainSchedule::lr_at(int epoch) const {
  return lr0 * std::pow(decay, static_cast<double>(epoch / decay_every));
}

double DownstreamSchedule::lr_at(int epoch) const {
  return lr0 * std::pow(decay, static_cast<double>(epoch / decay_every));
}

PretextTask pretext_task_from_string(const std::string& s) {
  if (s == "L1" || s == "l1") return PretextTask::L1;
  if (s == "Odd" || s == "odd") return PretextTask::Odd;
  if (s == "L1+Odd" || s == "l1+odd" || s == "L1Odd") return PretextTask::L1Odd;
  throw ConfigError("unknown pretext task '" + s + "'");
}

std::string to_string(PretextTask t) {
  switch (t) {
    case PretextTask::L1: return "L1";
    case PretextTask::Odd: return "Odd";
    default: return "L1+Odd";
  }
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Frozen: return "frozen";
    case Mode::Finetune: return "finetune";
    default: return "scratch";
  }
}

// --- Adam ---------------------------------------------------------------------

Adam::Adam(std::vector<models::Param> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.var->value.rows, p.var->value.cols));
    v_.push_back(Tensor::zeros(p.var->value.rows, p.var->value.cols));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    p.var->ensure_grad();
    std::fill(p.var->grad.data.begin(), p.var->grad.data.end(), 0.0);
  }
}

void Adam::step(double lr, double weight_decay) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.var->requires_grad) continue;
    p.var->ensure_grad();
    for (std::size_t j = 0; j < p.var->value.size(); ++j) {
      double g = p.var->grad.data[j];
      m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
      v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
      double mhat = m_[i].data[j] / bc1;
      double vhat = v_[i].data[j] / bc2;
      p.var->value.data[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) +
                                    weight_decay * p.var->value.data[j]);
    }
  }
}

// --- pretraining -----------------------------------------------------------------

namespace {

void check_finite_loss(double loss, const std::string& where) {
  if (!std::isfinite(loss))
    throw Error("training aborted: non-finite loss (" + std::to_string(loss) + ") in " +
                where);
}

std::vector<signal::LogMelSpectrogram> mels_for(
    const std::vector<const data::Clip*>& clips) {
  std::vector<signal::LogMelSpectrogram> out;
  out.reserve(clips.size());
  for (const auto* clip : clips) out.push_back(signal::compute_log_mel(clip->audio));
  return out;
}

}  // namespace

double odd_accuracy(const models::AudioEncoder& encoder, const models::OddScorer& scorer,
                    const std::vector<pretext::OddGroup>& groups) {
  if (groups.empty()) throw BatchTooSmall("no groups");
  std::size_t hit = 0;
  for (const auto& group : groups) {
    std::vector<VarPtr> feats;
    for (const auto& clip : group.clips)
      feats.push_back(encoder.forward(nn::constant(clip.frames)));
    VarPtr scores = scorer.forward(feats);
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores->value.cols; ++j)
      if (scores->value.data[j] > scores->value.data[best]) best = j;
    if (best == group.odd_index) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(groups.size());
}

PretrainResult pretrain(const data::Dataset& ds, const PretrainOptions& opt,
                        const std::string& ckpt_path) {
  const bool use_video = opt.task != PretextTask::Odd && opt.weights.alpha > 0.0;
  const bool use_audio = opt.task != PretextTask::L1 &&
                         (opt.task == PretextTask::Odd || opt.weights.alpha < 1.0);
  if (opt.task != PretextTask::Odd) {
    for (const auto& clip : ds.clips)
      if (clip.rec.split == "train" && !clip.video)
        throw MissingModality("clip " + clip.rec.clip_id +
                              " has no video but task " + to_string(opt.task) +
                              " requires it");
  }

  models::PretextModel model(opt.model, derive_seed(opt.seed, 0xA11));
  Adam adam(model.all_params());

  auto train_clips = ds.split("train");
  if (train_clips.empty()) throw BatchTooSmall("no training clips");
  auto train_mels = mels_for(train_clips);

  PretrainResult result;
  Rng shuffle_rng(derive_seed(opt.seed, 0x5F));
  std::uint64_t frame_ctr = 0, jumble_ctr = 0, noise_ctr = 0;

  for (int epoch = 0; epoch < opt.schedule.epochs; ++epoch) {
    double lr = opt.schedule.lr_at(epoch);
    std::vector<std::size_t> order(train_clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double ep_total = 0, ep_video = 0, ep_audio = 0;
    std::size_t n_batches = 0;
    std::size_t bs = static_cast<std::size_t>(opt.schedule.batch_size);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      std::size_t b1 = std::min(order.size(), b0 + bs);
      adam.zero_grad();

      VarPtr l_video, l_audio;
      if (use_video) {
        Rng frame_rng(derive_seed(opt.seed, 0xF0000 + frame_ctr++));
        VarPtr acc;
        for (std::size_t i = b0; i < b1; ++i) {
          const data::Clip* clip = train_clips[order[i]];
          pretext::ReconBatch rb;
          rb.audio = train_mels[order[i]];
          rb.still_frame = clip->video->frame(0);
          rb.target_video = clip->video->all_frames();
          rb.sampled_frame_index = frame_rng.uniform_int(clip->video->t);
          VarPtr l = pretext::l1_reconstruction_loss(
              rb, model, derive_seed(opt.seed, 0xE0000 + noise_ctr++), true);
          acc = acc ? nn::add(acc, l) : l;
        }
        l_video = nn::scale(acc, 1.0 / static_cast<double>(b1 - b0));
      }
      if (use_audio) {
        std::vector<signal::LogMelSpectrogram> batch_mels;
        for (std::size_t i = b0; i < b1; ++i) batch_mels.push_back(train_mels[order[i]]);
        if (batch_mels.size() >= opt.odd_group_size) {
          auto groups = pretext::build_odd_groups(
              batch_mels, opt.odd_group_size,
              derive_seed(opt.seed, 0xD0000 + jumble_ctr++));
          l_audio = pretext::odd_one_out_loss(groups, model.encoder, model.scorer);
        }
      }

      VarPtr total;
      if (opt.task == PretextTask::L1) {
        total = l_video;
      } else if (opt.task == PretextTask::Odd) {
        total = l_audio;
      } else {
        if (l_video && l_audio)
          total = pretext::multitask_loss(l_video, l_audio, opt.weights);
        else
          total = l_video ? l_video : l_audio;
      }
      if (!total) continue;  // leftover batch too small for any loss

      nn::backward(total);
      check_finite_loss(total->value.item(), "pretrain epoch " + std::to_string(epoch));
      adam.step(lr, opt.weight_decay);

      ep_total += total->value.item();
      if (l_video) ep_video += l_video->value.item();
      if (l_audio) ep_audio += l_audio->value.item();
      ++n_batches;
    }
    if (n_batches > 0) {
      result.total_loss.push_back(ep_total / n_batches);
      result.video_loss.push_back(use_video ? ep_video / n_batches : 0.0);
      result.audio_loss.push_back(use_audio ? ep_audio / n_batches : 0.0);
    }
  }

  if (use_audio) {
    auto val_clips = ds.split("val");
    if (val_clips.size() >= opt.odd_group_size) {
      auto val_mels = mels_for(val_clips);
      auto groups = pretext::build_odd_groups(val_mels, opt.odd_group_size,
                                              derive_seed(opt.seed, 0xCAFE));
      result.val_odd_accuracy = odd_accuracy(model.encoder, model.scorer, groups);
    }
  }

  checkpoint::Checkpoint ck;
  ck.config["format"] = "ssrl-checkpoint";
  ck.config["model"] = checkpoint::config_to_json(opt.model);
  ck.config["task"] = to_string(opt.task);
  ck.config["alpha"] = opt.weights.alpha;
  ck.config["seed"] = opt.seed;
  ck.config["epochs"] = opt.schedule.epochs;
  ck.config["lr0"] = opt.schedule.lr0;
  ck.config["total_loss"] = result.total_loss;
  ck.config["video_loss"] = result.video_loss;
  ck.config["audio_loss"] = result.audio_loss;
  if (result.val_odd_accuracy) ck.config["val_odd_accuracy"] = *result.val_odd_accuracy;
  ck.put_component(model.encoder);
  ck.put_component(model.identity);
  ck.put_component(model.noise);
  ck.put_component(model.decoder);
  ck.put_component(model.scorer);
  if (!ckpt_path.empty()) ck.save(ckpt_path);
  return result;
}

// --- feature stores -----------------------------------------------------------------

FeatureStore FeatureStore::open(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "index.json");
  if (!f) throw IoError("missing feature store index in " + dir);
  json idx = json::parse(f);
  FeatureStore store;
  store.dir = dir;
  for (auto& [clip_id, e] : idx.items()) {
    StoreEntry entry;
    entry.file = e.at("file").get<std::string>();
    entry.split = e.at("split").get<std::string>();
    if (e.contains("label") && !e["label"].is_null())
      entry.label = e["label"].get<int>();
    if (e.contains("affect") && !e["affect"].is_null())
      entry.affect = e["affect"].get<std::vector<double>>();
    store.index.emplace(clip_id, std::move(entry));
  }
  return store;
}

Tensor FeatureStore::load(const std::string& clip_id) const {
  auto it = index.find(clip_id);
  if (it == index.end()) throw IoError("clip " + clip_id + " not in feature store");
  return signal::read_feature_array((fs::path(dir) / it->second.file).string());
}

std::size_t FeatureStore::feature_dim() const {
  if (index.empty()) throw IoError("empty feature store");
  return load(index.begin()->first).cols;
}

namespace {
void write_store(const std::string& store_dir, const data::Dataset& ds,
                 const std::function<Tensor(const data::Clip&)>& featurize) {
  fs::create_directories(store_dir);
  json idx;
  for (const auto& clip : ds.clips) {
    Tensor feats = featurize(clip);
    std::string file = clip.rec.clip_id + ".f32";
    signal::write_feature_array((fs::path(store_dir) / file).string(), feats, 100);
    json e;
    e["file"] = file;
    e["shape"] = {feats.rows, feats.cols};
    e["split"] = clip.rec.split;
    if (clip.rec.label) e["label"] = *clip.rec.label;
    if (clip.rec.affect_track) e["affect"] = *clip.rec.affect_track;
    idx[clip.rec.clip_id] = e;
  }
  std::string tmp = (fs::path(store_dir) / "index.json.tmp").string();
  {
    std::ofstream f(tmp);
    f << idx.dump(2) << "\n";
  }
  fs::rename(tmp, fs::path(store_dir) / "index.json");
}
}  // namespace

void extract_features(const std::string& ckpt_path, const data::Dataset& ds,
                      const std::string& store_dir) {
  checkpoint::Checkpoint ck = checkpoint::Checkpoint::load(ckpt_path);
  if (!ck.config.contains("model")) throw CheckpointError("checkpoint lacks model config");
  models::ModelConfig cfg = checkpoint::config_from_json(ck.config["model"]);
  Rng rng(0);
  models::AudioEncoder encoder(cfg, rng);
  ck.load_component(encoder, "encoder");
  write_store(store_dir, ds, [&](const data::Clip& clip) {
    return encoder.forward_tensor(signal::compute_log_mel(clip.audio).frames);
  });
}

void extract_mfcc_features(const data::Dataset& ds, const std::string& store_dir) {
  write_store(store_dir, ds, [](const data::Clip& clip) {
    return signal::compute_mfcc(clip.audio).frames;
  });
}

// --- downstream ------------------------------------------------------------------------

namespace {

// linear interpolation of a 25 Hz affect track onto t feature frames
std::vector<double> resample_track(const std::vector<double>& track, std::size_t t) {
  if (track.empty()) throw MissingLabels("empty affect track");
  std::vector<double> out(t);
  for (std::size_t i = 0; i < t; ++i) {
    double pos = t > 1 ? static_cast<double>(i) / (t - 1) * (track.size() - 1) : 0.0;
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, track.size() - 1);
    double frac = pos - lo;
    out[i] = (1.0 - frac) * track[lo] + frac * track[hi];
  }
  return out;
}

struct Sample {
  Tensor features;  // [t x d]
  std::optional<int> label;
  std::optional<std::vector<double>> affect;
};

struct SampleSet {
  std::vector<Sample> train, val, test;
  std::size_t input_dim = 0;
  int n_classes = 0;
};

void push_sample(SampleSet& set, const std::string& split, Sample s) {
  if (split == "train") set.train.push_back(std::move(s));
  else if (split == "val") set.val.push_back(std::move(s));
  else if (split == "test") set.test.push_back(std::move(s));
}

// Per-dimension z-scoring with train-split statistics so head optimization
// sees comparably scaled inputs regardless of the upstream feature extractor.
void standardize(SampleSet& set) {
  if (set.train.empty() || set.input_dim == 0) return;
  std::vector<double> mean(set.input_dim, 0.0), var(set.input_dim, 0.0);
  std::size_t n = 0;
  for (const auto& s : set.train) {
    for (std::size_t r = 0; r < s.features.rows; ++r)
      for (std::size_t c = 0; c < s.features.cols; ++c) mean[c] += s.features.at(r, c);
    n += s.features.rows;
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& s : set.train)
    for (std::size_t r = 0; r < s.features.rows; ++r)
      for (std::size_t c = 0; c < s.features.cols; ++c) {
        double d = s.features.at(r, c) - mean[c];
        var[c] += d * d;
      }
  for (auto& v : var) v /= static_cast<double>(n);
  auto apply = [&](std::vector<Sample>& split) {
    for (auto& s : split)
      for (std::size_t r = 0; r < s.features.rows; ++r)
        for (std::size_t c = 0; c < s.features.cols; ++c)
          s.features.at(r, c) =
              (s.features.at(r, c) - mean[c]) / std::max(std::sqrt(var[c]), 1e-8);
  };
  apply(set.train);
  apply(set.val);
  apply(set.test);
}

SampleSet collect_from_store(const FeatureStore& store, DownstreamTask task) {
  SampleSet set;
  for (const auto& [clip_id, entry] : store.index) {
    Sample s;
    s.features = store.load(clip_id);
    s.label = entry.label;
    s.affect = entry.affect;
    set.input_dim = s.features.cols;
    if (task == DownstreamTask::Classify) {
      if (!s.label) {
        if (entry.split == "train") continue;  // unlabeled train clip
        throw MissingLabels("clip " + clip_id + " has no label");
      }
      set.n_classes = std::max(set.n_classes, *s.label + 1);
    } else if (!s.affect) {
      throw MissingLabels("clip " + clip_id + " has no affect track");
    }
    push_sample(set, entry.split, std::move(s));
  }
  return set;
}

struct Head {
  std::unique_ptr<models::BgruClassifier> classifier;
  std::unique_ptr<models::BgruRegressor> regressor;
  std::vector<models::Param> params() {
    return classifier ? classifier->params() : regressor->params();
  }
};

Head make_head(DownstreamTask task, std::size_t input_dim, const DownstreamOptions& opt,
               int n_classes, Rng& rng) {
  Head h;
  if (task == DownstreamTask::Classify) {
    if (n_classes < 2) throw MissingLabels("need at least 2 classes");
    h.classifier = std::make_unique<models::BgruClassifier>(
        input_dim, opt.bgru_hidden, opt.bgru_layers, n_classes, rng);
  } else {
    h.regressor = std::make_unique<models::BgruRegressor>(input_dim, opt.bgru_hidden,
                                                          opt.bgru_layers, rng);
  }
  return h;
}

// encoder is optional (frozen store protocol passes nullptr)
VarPtr forward_head(Head& head, const models::AudioEncoder* encoder, const Sample& s) {
  VarPtr x = nn::constant(s.features);
  if (encoder) x = encoder->forward(x);
  return head.classifier ? head.classifier->forward(x) : head.regressor->forward(x);
}

double evaluate(Head& head, const models::AudioEncoder* encoder,
                const std::vector<Sample>& samples, DownstreamTask task, int n_classes) {
  if (samples.empty()) throw BatchTooSmall("no samples to evaluate");
  if (task == DownstreamTask::Classify) {
    std::vector<int> pred, truth;
    for (const auto& s : samples) {
      VarPtr logits = forward_head(head, encoder, s);
      std::size_t best = 0;
      for (std::size_t j = 1; j < logits->value.cols; ++j)
        if (logits->value.data[j] > logits->value.data[best]) best = j;
      pred.push_back(static_cast<int>(best));
      truth.push_back(*s.label);
    }
    return metrics::macro_f1(pred, truth, n_classes);
  }
  std::vector<double> y_all, yhat_all;
  for (const auto& s : samples) {
    VarPtr yhat = forward_head(head, encoder, s);
    auto y = resample_track(*s.affect, yhat->value.rows);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y_all.push_back(y[i]);
      yhat_all.push_back(yhat->value.data[i]);
    }
  }
  return metrics::ccc(y_all, yhat_all).ccc;
}

struct Snapshot {
  std::vector<Tensor> values;
};

Snapshot snapshot_params(const std::vector<models::Param>& params) {
  Snapshot s;
  for (const auto& p : params) s.values.push_back(p.var->value);
  return s;
}

void restore_params(const std::vector<models::Param>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].var->value = s.values[i];
}

DownstreamResult train_loop(SampleSet& set, Head& head, models::AudioEncoder* encoder,
                            models::Component* encoder_component,
                            const DownstreamOptions& opt) {
  if (set.train.empty()) throw MissingLabels("no labeled training samples");
  if (set.val.empty()) throw BatchTooSmall("no validation samples");

  std::vector<models::Param> trainable = head.params();
  if (encoder_component && opt.mode == Mode::Finetune)
    for (auto& p : encoder_component->params()) trainable.push_back(p);
  if (encoder_component && opt.mode == Mode::Scratch)
    for (auto& p : encoder_component->params()) trainable.push_back(p);
  Adam adam(trainable);

  DownstreamResult result;
  if (encoder_component) {
    if (opt.mode == Mode::Frozen) encoder_component->set_trainable(false);
    result.encoder_digest_before = encoder_component->param_digest();
  }

  std::vector<models::Param> selectable = trainable;  // snapshot set
  Snapshot best = snapshot_params(selectable);
  Rng shuffle_rng(derive_seed(opt.seed, 0x77));
  std::size_t bs = static_cast<std::size_t>(opt.schedule.batch_size);

  for (int epoch = 0; epoch < opt.schedule.epochs; ++epoch) {
    double lr = opt.schedule.lr_at(epoch);
    std::vector<std::size_t> order(set.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      std::size_t b1 = std::min(order.size(), b0 + bs);
      adam.zero_grad();
      VarPtr acc;
      for (std::size_t i = b0; i < b1; ++i) {
        const Sample& s = set.train[order[i]];
        VarPtr out = forward_head(head, encoder, s);
        VarPtr loss;
        if (opt.task == DownstreamTask::Classify) {
          loss = nn::softmax_cross_entropy(out, static_cast<std::size_t>(*s.label));
        } else {
          loss = metrics::ccc_loss_var(resample_track(*s.affect, out->value.rows), out);
        }
        acc = acc ? nn::add(acc, loss) : loss;
      }
      VarPtr total = nn::scale(acc, 1.0 / static_cast<double>(b1 - b0));
      nn::backward(total);
      check_finite_loss(total->value.item(), "downstream epoch " + std::to_string(epoch));
      adam.step(lr);
    }

    double val = evaluate(head, encoder, set.val, opt.task, set.n_classes);
    result.val_curve.push_back(val);
    if (result.best_epoch < 0 || val > result.best_val_metric) {
      result.best_val_metric = val;
      result.best_epoch = epoch;
      best = snapshot_params(selectable);
    }
  }

  restore_params(selectable, best);
  result.test_metric = set.test.empty()
                           ? result.best_val_metric
                           : evaluate(head, encoder, set.test, opt.task, set.n_classes);
  if (encoder_component) {
    result.encoder_digest_after = encoder_component->param_digest();
    if (opt.mode == Mode::Frozen &&
        result.encoder_digest_after != result.encoder_digest_before)
      throw ModeViolation("frozen encoder parameters changed during training");
    encoder_component->set_trainable(true);
  }
  return result;
}

}  // namespace

DownstreamResult train_downstream(const FeatureStore& store, const DownstreamOptions& opt) {
  if (opt.mode != Mode::Frozen)
    throw ConfigError("feature-store downstream training implies frozen mode");
  if (opt.label_fraction <= 0.0 || opt.label_fraction > 1.0)
    throw ConfigError("label_fraction must be in (0, 1]");
  SampleSet set = collect_from_store(store, opt.task);
  if (opt.label_fraction < 1.0) {
    // deterministic subset, independent of the run seed, so every run and
    // every compared feature extractor trains on the same labeled clips
    std::vector<std::size_t> order(set.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng srng(derive_seed(0x1abe1u, set.train.size()));
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[srng.uniform_int(static_cast<int>(i) + 1)]);
    std::size_t keep = static_cast<std::size_t>(
        std::lround(opt.label_fraction * static_cast<double>(set.train.size())));
    if (keep == 0) throw EmptySubset("label_fraction leaves no labeled train clips");
    std::vector<Sample> kept;
    for (std::size_t i = 0; i < keep; ++i)
      kept.push_back(std::move(set.train[order[i]]));
    set.train = std::move(kept);
  }
  standardize(set);
  Rng rng(derive_seed(opt.seed, 0x3EAD));
  Head head = make_head(opt.task, set.input_dim, opt, set.n_classes, rng);
  return train_loop(set, head, nullptr, nullptr, opt);
}

DownstreamResult train_downstream(const data::Dataset& ds, const DownstreamOptions& opt) {
  models::ModelConfig cfg = opt.scratch_model;
  std::unique_ptr<models::AudioEncoder> encoder;
  if (opt.mode == Mode::Scratch) {
    // never reads a checkpoint
    Rng rng(derive_seed(opt.seed, 0xAB));
    encoder = std::make_unique<models::AudioEncoder>(cfg, rng);
  } else {
    if (opt.encoder_ckpt.empty())
      throw ConfigError("mode " + to_string(opt.mode) + " requires encoder_ckpt");
    checkpoint::Checkpoint ck = checkpoint::Checkpoint::load(opt.encoder_ckpt);
    cfg = checkpoint::config_from_json(ck.config.at("model"));
    Rng rng(derive_seed(opt.seed, 0xAB));
    encoder = std::make_unique<models::AudioEncoder>(cfg, rng);
    ck.load_component(*encoder, "encoder");
  }

  SampleSet set;
  for (const auto& clip : ds.clips) {
    Sample s;
    s.features = signal::compute_log_mel(clip.audio).frames;
    s.label = clip.rec.label;
    s.affect = clip.rec.affect_track;
    set.input_dim = s.features.cols;
    if (opt.task == DownstreamTask::Classify) {
      if (!s.label) {
        if (clip.rec.split == "train") continue;
        throw MissingLabels("clip " + clip.rec.clip_id + " has no label");
      }
      set.n_classes = std::max(set.n_classes, *s.label + 1);
    } else if (!s.affect) {
      throw MissingLabels("clip " + clip.rec.clip_id + " has no affect track");
    }
    push_sample(set, clip.rec.split, std::move(s));
  }

  Rng rng(derive_seed(opt.seed, 0x3EAD));
  Head head = make_head(opt.task, cfg.feature_dim, opt, set.n_classes, rng);
  return train_loop(set, head, encoder.get(), encoder.get(), opt);
}

metrics::RunReport run_repeated(const std::string& metric_name, int n_runs,
                                std::uint64_t master_seed,
                                const std::function<double(std::uint64_t)>& experiment) {
  if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_runs));
  for (int r = 0; r < n_runs; ++r)
    values.push_back(experiment(derive_seed(master_seed, static_cast<std::uint64_t>(r))));
  return metrics::summarize(metric_name, values);
}

}  // namespace ssrl::traindown
