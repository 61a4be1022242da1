#pragma once

// Deterministic audio frontend: log-mel / MFCC extraction, babble synthesis,
// SNR-exact noise mixing and temporal jumbling for the odd-one-out task.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssrl/autodiff.hpp"
#include "ssrl/common.hpp"

namespace ssrl::signal {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr int kNumMelBins = 80;
inline constexpr int kNumMfcc = 39;  // 13 base + 13 delta + 13 delta-delta
inline constexpr double kWindowMs = 25.0;
inline constexpr double kHopMs = 10.0;
inline constexpr int kFftSize = 512;
inline constexpr double kLogFloor = 1e-10;

struct Waveform {
  std::vector<double> samples;  // amplitude in [-1, 1]
  int sample_rate = kCanonicalSampleRate;
};

struct LogMelSpectrogram {
  nn::Tensor frames;  // [t x 80]
  int frame_rate = 100;
};

struct MfccFeatures {
  nn::Tensor frames;  // [t x 39]
};

struct JumbleSpec {
  double window_fraction = 0.15;
  std::size_t start_a = 0;
  std::size_t start_b = 0;
  std::size_t window_len = 0;
};

// number of analysis frames for a signal of `n` samples
std::size_t frame_count(std::size_t n, int sample_rate);

LogMelSpectrogram compute_log_mel(const Waveform& w);
MfccFeatures compute_mfcc(const Waveform& w);

// Multi-talker babble: sum of m randomly chosen, randomly offset pool clips,
// peak-normalized.
Waveform synth_babble(const std::vector<Waveform>& pool, std::size_t m,
                      std::size_t target_len, std::uint64_t seed);

// clean + g*noise with g set so the clean-to-scaled-noise power ratio is
// exactly snr_db; noise is tiled if shorter than clean.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

// Swap two disjoint frame windows of ~15% duration each. The returned spec
// makes the operation reproducible (and self-inverse).
JumbleSpec draw_jumble_spec(std::size_t t, double window_fraction, Rng& rng);
LogMelSpectrogram jumble(const LogMelSpectrogram& x, const JumbleSpec& spec);
std::pair<LogMelSpectrogram, JumbleSpec> jumble(const LogMelSpectrogram& x,
                                                std::uint64_t seed,
                                                double window_fraction = 0.15);

// 16-bit PCM WAV files
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// float32 feature array with a sidecar JSON header {shape, dtype, frame_rate}
void write_feature_array(const std::string& path, const nn::Tensor& t,
                         std::optional<int> frame_rate = std::nullopt);
nn::Tensor read_feature_array(const std::string& path);

}  // namespace ssrl::signal
