#pragma once

// Training engine: self-supervised pretraining (L1 / Odd / L1+Odd), feature
// extraction, and downstream training in frozen / finetune / scratch modes
// with best-validation checkpoint selection.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssrl/data.hpp"
#include "ssrl/metrics.hpp"
#include "ssrl/models.hpp"
#include "ssrl/pretext.hpp"

namespace ssrl::traindown {

struct PretrainSchedule {
  double lr0 = 0.06;       // decayed by 0.98 every 10 epochs
  double decay = 0.98;
  int decay_every = 10;
  int epochs = 20;
  int batch_size = 32;
  double lr_at(int epoch) const;
};

struct DownstreamSchedule {
  double lr0 = 1e-4;       // decayed by 0.1 every 40 epochs
  double decay = 0.1;
  int decay_every = 40;
  int epochs = 100;
  int batch_size = 64;
  double lr_at(int epoch) const;
};

enum class PretextTask { L1, Odd, L1Odd };
enum class DownstreamTask { Classify, Regress };
enum class Mode { Frozen, Finetune, Scratch };

PretextTask pretext_task_from_string(const std::string& s);
std::string to_string(PretextTask t);
std::string to_string(Mode m);

// Adam over a parameter set
class Adam {
 public:
  explicit Adam(std::vector<models::Param> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void zero_grad();
  // decoupled weight decay (applied directly to the parameters, not the
  // gradient moments); 0 disables it
  void step(double lr, double weight_decay = 0.0);

 private:
  std::vector<models::Param> params_;
  std::vector<nn::Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct PretrainOptions {
  PretextTask task = PretextTask::L1Odd;
  pretext::MultiTaskWeights weights;
  PretrainSchedule schedule;
  models::ModelConfig model = models::ModelConfig::toy();
  std::size_t odd_group_size = 4;
  // decoupled weight decay; keeps the shared encoder out of activation
  // saturation when the two pretext gradients conflict
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  std::vector<double> total_loss;  // per-epoch means
  std::vector<double> video_loss;
  std::vector<double> audio_loss;
  std::optional<double> val_odd_accuracy;  // measured after the last epoch
};

// trains on the train split and writes a checkpoint (all subnetworks +
// config echo + loss curves); epochs == 0 saves the random initialization
PretrainResult pretrain(const data::Dataset& ds, const PretrainOptions& opt,
                        const std::string& ckpt_path);

// odd-one-out accuracy of a trained encoder/scorer on held-out groups
double odd_accuracy(const models::AudioEncoder& encoder, const models::OddScorer& scorer,
                    const std::vector<pretext::OddGroup>& groups);

// --- feature stores -----------------------------------------------------------

struct StoreEntry {
  std::string file;
  std::optional<int> label;
  std::optional<std::vector<double>> affect;
  std::string split;
};

struct FeatureStore {
  std::string dir;
  std::map<std::string, StoreEntry> index;  // clip_id -> entry

  static FeatureStore open(const std::string& dir);
  nn::Tensor load(const std::string& clip_id) const;
  std::size_t feature_dim() const;
};

// deterministic inference-mode extraction of [t x feature_dim] arrays
void extract_features(const std::string& ckpt_path, const data::Dataset& ds,
                      const std::string& store_dir);
// MFCC baseline features ([t x 39])
void extract_mfcc_features(const data::Dataset& ds, const std::string& store_dir);

// --- downstream ------------------------------------------------------------------

struct DownstreamOptions {
  DownstreamTask task = DownstreamTask::Classify;
  Mode mode = Mode::Frozen;
  DownstreamSchedule schedule;
  std::size_t bgru_hidden = 256;
  std::size_t bgru_layers = 2;
  std::uint64_t seed = 1;
  // fraction of labeled train clips available to the head (low-label protocol);
  // the retained subset is deterministic per clip set, shared across runs
  double label_fraction = 1.0;
  std::string encoder_ckpt;  // required for finetune
  models::ModelConfig scratch_model;  // encoder config for scratch mode
};

struct DownstreamResult {
  double test_metric = 0;
  double best_val_metric = 0;
  int best_epoch = -1;
  std::vector<double> val_curve;
  std::uint64_t encoder_digest_before = 0;
  std::uint64_t encoder_digest_after = 0;
};

// frozen protocol: BGRU head on precomputed features
DownstreamResult train_downstream(const FeatureStore& store, const DownstreamOptions& opt);
// finetune / scratch protocols: encoder trained end-to-end with the head
DownstreamResult train_downstream(const data::Dataset& ds, const DownstreamOptions& opt);

// runs an experiment n times with counter-derived seeds
metrics::RunReport run_repeated(const std::string& metric_name, int n_runs,
                                std::uint64_t master_seed,
                                const std::function<double(std::uint64_t)>& experiment);

}  // namespace ssrl::traindown
