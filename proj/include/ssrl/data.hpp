#pragma once

// Dataset layer: clip records and manifests, speaker-disjoint splits,
// nested fraction subsetting, and the procedural synthetic audiovisual
// corpus used for desk-scale experiments.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssrl/autodiff.hpp"
#include "ssrl/common.hpp"
#include "ssrl/signal.hpp"

namespace ssrl::data {

struct ClipRecord {
  std::string clip_id;
  std::string speaker_id;
  std::string audio_path;             // empty for in-memory clips
  std::string video_path;
  std::optional<int> label;           // discrete class
  std::optional<std::vector<double>> affect_track;  // continuous, 25 Hz
  std::string split;                  // train / val / test
  bool has_label() const { return label.has_value(); }
};

// uint8-quantized video, [T x C x H x W], pixel 0..255 maps to [-1, 1]
struct VideoData {
  std::size_t t = 0, c = 3, h = 64, w = 128;
  std::vector<std::uint8_t> pixels;

  nn::Tensor frame(std::size_t i) const;        // [C x H*W] in [-1, 1]
  nn::Tensor all_frames() const;                // [T x C*H*W] in [-1, 1]
  std::uint8_t& at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) {
    return pixels[((ti * c + ci) * h + y) * w + x];
  }
  std::uint8_t at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) const {
    return pixels[((ti * c + ci) * h + y) * w + x];
  }
};

struct Clip {
  ClipRecord rec;
  signal::Waveform audio;
  std::optional<VideoData> video;
};

struct Dataset {
  std::vector<Clip> clips;
  int n_classes = 0;
  std::vector<const Clip*> split(const std::string& name) const;
  // throws SplitError if any speaker appears in more than one split
  void assert_speaker_disjoint() const;
};

struct SyntheticSpec {
  int n_speakers = 12;
  int n_classes = 4;
  int clips_per_speaker = 10;
  double clip_seconds = 1.0;
  std::string task = "classify";  // or "regress": records carry affect instead of label
  std::uint64_t seed = 7;
};

// Procedural audiovisual corpus: class-dependent tone + amplitude envelope,
// speaker-dependent timbre; video with envelope-tracking mouth rectangle,
// class-coded corner pattern and per-speaker background texture.
Dataset generate_synthetic(const SyntheticSpec& spec);

// per-clip class-dependent amplitude envelope sampled at 25 fps (the ground
// truth the mouth rectangle and affect track are built from)
std::vector<double> synthetic_envelope(int class_id, std::size_t t_video);

// assigns splits at speaker granularity; ratios are (train, val, test)
void split_speakers(std::vector<Clip>& clips, double train_ratio, double val_ratio,
                    double test_ratio, std::uint64_t seed);

enum class SubsetWhat { PretrainClips, Labels };

// Deterministic, nested subsetting of the train split: clips are ordered by a
// seeded hash of their id and the first round(fraction*n) are kept, so
// subset(0.2) is contained in subset(0.4) under the same seed.
Dataset subset_fraction(const Dataset& ds, double fraction, SubsetWhat what,
                        std::uint64_t seed);

// line-delimited JSON manifest
void write_manifest(const std::string& path, const Dataset& ds);
Dataset read_manifest(const std::string& path);  // loads audio (+video if present)

// persist a dataset (WAV audio, raw-tensor video, manifest) under a directory
void save_dataset(const std::string& dir, const Dataset& ds,
                  const std::string& video_format = "raw");  // "raw" or "png"

// video container formats
void write_video_raw(const std::string& path, const VideoData& v);
VideoData read_video_raw(const std::string& path);
void write_video_png_dir(const std::string& dir, const VideoData& v);
VideoData read_video_png_dir(const std::string& dir);

}  // namespace ssrl::data
