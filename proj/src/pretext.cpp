#include "ssrl/pretext.hpp"

#include <cmath>

namespace ssrl::pretext {

using namespace nn;

std::vector<OddGroup> build_odd_groups(const std::vector<signal::LogMelSpectrogram>& batch,
                                       std::size_t k, std::uint64_t seed,
                                       double window_fraction) {
  if (k < 2) throw GroupTooSmall("group size must be >= 2");
  if (batch.size() < k)
    throw BatchTooSmall("batch of " + std::to_string(batch.size()) +
                        " cannot fill a group of " + std::to_string(k));
  Rng rng(seed);
  std::size_t n_groups = batch.size() / k;  // remainder dropped
  std::vector<OddGroup> groups;
  groups.reserve(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    OddGroup group;
    group.odd_index = rng.uniform_int(k);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& clip = batch[g * k + j];
      if (j == group.odd_index) {
        auto spec = signal::draw_jumble_spec(clip.frames.rows, window_fraction, rng);
        group.jumble_spec = spec;
        group.clips.push_back(signal::jumble(clip, spec));
      } else {
        group.clips.push_back(clip);
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

VarPtr odd_one_out_loss(const std::vector<OddGroup>& groups,
                        const models::AudioEncoder& encoder,
                        const models::OddScorer& scorer) {
  if (groups.empty()) throw BatchTooSmall("no odd groups");
  VarPtr total;
  for (const auto& group : groups) {
    std::vector<VarPtr> feats;
    feats.reserve(group.clips.size());
    for (const auto& clip : group.clips)
      feats.push_back(encoder.forward(constant(clip.frames)));
    VarPtr scores = scorer.forward(feats);
    VarPtr loss = softmax_cross_entropy(scores, group.odd_index);
    total = total ? add(total, loss) : loss;
  }
  return scale(total, 1.0 / static_cast<double>(groups.size()));
}

VarPtr l1_reconstruction_loss(const ReconBatch& batch, models::PretextModel& model,
                              std::uint64_t noise_seed, bool training) {
  std::size_t t_video = batch.target_video.rows;
  if (t_video == 0) throw ShapeError("empty target video");
  if (batch.sampled_frame_index >= t_video)
    throw ShapeError("sampled_frame_index out of range");
  std::size_t t_audio = batch.audio.frames.rows;
  if ((t_audio + 3) / 4 != t_video)
    throw AlignmentError("audio frames " + std::to_string(t_audio) +
                         " do not align with " + std::to_string(t_video) +
                         " video frames at 100 Hz -> 25 fps");

  VarPtr z_aud = model.encoder.forward(constant(batch.audio.frames));
  auto identity = model.identity.forward(constant(batch.still_frame), training);
  auto noise = model.noise.forward(t_video, noise_seed);
  VarPtr latent = models::assemble_latent(z_aud, identity.embedding, noise.code);

  VarPtr code_row = slice_rows(latent, batch.sampled_frame_index,
                               batch.sampled_frame_index + 1);
  VarPtr generated = model.decoder.forward_frame(code_row, identity, training);

  Tensor target(generated->value.rows, generated->value.cols);
  if (target.size() != batch.target_video.cols)
    throw ShapeError("target frame pixel count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i)
    target.data[i] = batch.target_video.at(batch.sampled_frame_index, i);

  return mean_all(abs_act(sub(generated, constant(target))));
}

double multitask_loss(double l_video, double l_audio, const MultiTaskWeights& w) {
  if (w.alpha < 0.0 || w.alpha > 1.0 || !std::isfinite(w.alpha))
    throw InvalidWeight("alpha must be in [0, 1], got " + std::to_string(w.alpha));
  if (w.alpha == 1.0) return l_video;
  if (w.alpha == 0.0) return l_audio;
  return w.alpha * l_video + (1.0 - w.alpha) * l_audio;
}

VarPtr multitask_loss(const VarPtr& l_video, const VarPtr& l_audio,
                      const MultiTaskWeights& w) {
  if (w.alpha < 0.0 || w.alpha > 1.0 || !std::isfinite(w.alpha))
    throw InvalidWeight("alpha must be in [0, 1], got " + std::to_string(w.alpha));
  // endpoints reduce to the single-task loss exactly
  if (w.alpha == 1.0) return l_video;
  if (w.alpha == 0.0) return l_audio;
  return add(scale(l_video, w.alpha), scale(l_audio, 1.0 - w.alpha));
}

}  // namespace ssrl::pretext
