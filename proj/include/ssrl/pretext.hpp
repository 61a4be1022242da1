#pragma once

// Pretext-task objectives: odd-one-out group construction and loss,
// L1 face reconstruction loss, and the weighted multi-task combiner.

#include <cstdint>
#include <vector>

#include "ssrl/models.hpp"
#include "ssrl/signal.hpp"

namespace ssrl::pretext {

struct OddGroup {
  std::vector<signal::LogMelSpectrogram> clips;  // exactly one is jumbled
  std::size_t odd_index = 0;
  signal::JumbleSpec jumble_spec;
};

struct MultiTaskWeights {
  double alpha = 0.67;
};

struct ReconBatch {
  nn::Tensor still_frame;        // [C x H*W], video frame 0
  signal::LogMelSpectrogram audio;
  nn::Tensor target_video;       // [T_v x C*H*W]
  std::size_t sampled_frame_index = 0;
};

// Partition a batch into groups of K, jumble exactly one clip per group
// (odd_index uniform); remainder clips that do not fill a group are dropped.
std::vector<OddGroup> build_odd_groups(const std::vector<signal::LogMelSpectrogram>& batch,
                                       std::size_t k, std::uint64_t seed,
                                       double window_fraction = 0.15);

// mean cross-entropy of softmax(scores) against odd_index, over all groups
nn::VarPtr odd_one_out_loss(const std::vector<OddGroup>& groups,
                            const models::AudioEncoder& encoder,
                            const models::OddScorer& scorer);

// mean absolute pixel error between the generated frame at
// batch.sampled_frame_index and the real frame at the same index
nn::VarPtr l1_reconstruction_loss(const ReconBatch& batch, models::PretextModel& model,
                                  std::uint64_t noise_seed, bool training);

// L_total = alpha * l_video + (1 - alpha) * l_audio
double multitask_loss(double l_video, double l_audio, const MultiTaskWeights& w);
nn::VarPtr multitask_loss(const nn::VarPtr& l_video, const nn::VarPtr& l_audio,
                          const MultiTaskWeights& w);

}  // namespace ssrl::pretext
