#include "ssrl/signal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

namespace ssrl::signal {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t win_samples(int sample_rate) {
  return static_cast<std::size_t>(std::lround(kWindowMs * 1e-3 * sample_rate));
}
std::size_t hop_samples(int sample_rate) {
  return static_cast<std::size_t>(std::lround(kHopMs * 1e-3 * sample_rate));
}

// iterative radix-2 FFT, in place
void fft(std::vector<std::complex<double>>& a) {
  std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// 80 triangular filters, 0 Hz .. Nyquist, over kFftSize/2+1 bins
std::vector<std::vector<double>> mel_filterbank(int sample_rate) {
  const int n_bins = kFftSize / 2 + 1;
  const double f_max = sample_rate / 2.0;
  const double mel_max = hz_to_mel(f_max);
  std::vector<double> centers(kNumMelBins + 2);
  for (int i = 0; i < kNumMelBins + 2; ++i)
    centers[i] = mel_to_hz(mel_max * i / (kNumMelBins + 1));
  std::vector<std::vector<double>> fb(kNumMelBins, std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < kNumMelBins; ++m) {
    double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      double f = b * static_cast<double>(sample_rate) / kFftSize;
      if (f > lo && f < mid)
        fb[m][b] = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb[m][b] = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace

std::size_t frame_count(std::size_t n, int sample_rate) {
  std::size_t win = win_samples(sample_rate);
  if (n < win) throw InputTooShort("signal shorter than one analysis window");
  return 1 + (n - win) / hop_samples(sample_rate);
}

LogMelSpectrogram compute_log_mel(const Waveform& w) {
  if (w.sample_rate <= 0) throw ShapeError("sample_rate must be positive");
  std::size_t win = win_samples(w.sample_rate);
  std::size_t hop = hop_samples(w.sample_rate);
  if (w.samples.size() < win)
    throw InputTooShort("need at least " + std::to_string(win) + " samples, got " +
                        std::to_string(w.samples.size()));
  std::size_t t = 1 + (w.samples.size() - win) / hop;

  static thread_local int fb_rate = -1;
  static thread_local std::vector<std::vector<double>> fb;
  if (fb_rate != w.sample_rate) {
    fb = mel_filterbank(w.sample_rate);
    fb_rate = w.sample_rate;
  }

  std::vector<double> hann(win);
  for (std::size_t i = 0; i < win; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (win - 1));

  LogMelSpectrogram out;
  out.frames = nn::Tensor(t, kNumMelBins);
  std::vector<std::complex<double>> buf(kFftSize);
  const int n_bins = kFftSize / 2 + 1;
  std::vector<double> power(n_bins);
  for (std::size_t fi = 0; fi < t; ++fi) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    std::size_t off = fi * hop;
    for (std::size_t i = 0; i < win && i < kFftSize; ++i)
      buf[i] = w.samples[off + i] * hann[i];
    fft(buf);
    for (int b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);
    for (int m = 0; m < kNumMelBins; ++m) {
      double e = 0;
      for (int b = 0; b < n_bins; ++b) e += fb[m][b] * power[b];
      out.frames.at(fi, m) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

namespace {

// delta with symmetric regression window of +-2 frames, edge-replicated
void append_deltas(const nn::Tensor& base, nn::Tensor& out, std::size_t src_col0,
                   std::size_t dst_col0, std::size_t width) {
  const int nwin = 2;
  double denom = 0;
  for (int k = 1; k <= nwin; ++k) denom += 2.0 * k * k;
  std::size_t t = base.rows;
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0;
      for (int k = 1; k <= nwin; ++k) {
        std::size_t ip = std::min(i + static_cast<std::size_t>(k), t - 1);
        std::size_t im = i >= static_cast<std::size_t>(k) ? i - k : 0;
        acc += k * (out.at(ip, src_col0 + c) - out.at(im, src_col0 + c));
      }
      out.at(i, dst_col0 + c) = acc / denom;
    }
  }
  (void)base;
}

}  // namespace

MfccFeatures compute_mfcc(const Waveform& w) {
  LogMelSpectrogram lm = compute_log_mel(w);
  std::size_t t = lm.frames.rows;
  const int n_ceps = 13;
  MfccFeatures out;
  out.frames = nn::Tensor(t, kNumMfcc);
  // DCT-II (orthonormal) of each log-mel frame, keep 13 coefficients
  for (std::size_t i = 0; i < t; ++i) {
    for (int k = 0; k < n_ceps; ++k) {
      double acc = 0;
      for (int m = 0; m < kNumMelBins; ++m)
        acc += lm.frames.at(i, m) *
               std::cos(kPi * k * (2.0 * m + 1.0) / (2.0 * kNumMelBins));
      double norm = k == 0 ? std::sqrt(1.0 / kNumMelBins) : std::sqrt(2.0 / kNumMelBins);
      out.frames.at(i, k) = norm * acc;
    }
  }
  append_deltas(out.frames, out.frames, 0, 13, 13);
  append_deltas(out.frames, out.frames, 13, 26, 13);
  return out;
}

Waveform synth_babble(const std::vector<Waveform>& pool, std::size_t m,
                      std::size_t target_len, std::uint64_t seed) {
  if (pool.empty()) throw EmptyPool("babble pool is empty");
  if (m == 0) throw EmptyPool("m must be >= 1");
  Rng rng(seed);
  Waveform out;
  out.sample_rate = pool.front().sample_rate;
  out.samples.assign(target_len, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const Waveform& src = pool[rng.uniform_int(pool.size())];
    if (src.samples.empty()) continue;
    std::size_t offset = rng.uniform_int(src.samples.size());
    for (std::size_t i = 0; i < target_len; ++i)
      out.samples[i] += src.samples[(offset + i) % src.samples.size()];
  }
  double peak = 0;
  for (double s : out.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0)
    for (double& s : out.samples) s /= peak;
  return out;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.sample_rate != noise.sample_rate)
    throw ShapeError("mix_at_snr: sample rates differ");
  if (noise.samples.empty()) throw ZeroPowerSignal("noise is empty");
  std::size_t n = clean.samples.size();
  double p_clean = 0, p_noise = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double c = clean.samples[i];
    double v = noise.samples[i % noise.samples.size()];
    p_clean += c * c;
    p_noise += v * v;
  }
  p_clean /= static_cast<double>(n);
  p_noise /= static_cast<double>(n);
  if (p_clean <= 0.0) throw ZeroPowerSignal("clean signal has zero power");
  if (p_noise <= 0.0) throw ZeroPowerSignal("noise signal has zero power");
  // want 10*log10(p_clean / (g^2 p_noise)) = snr_db
  double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = clean.samples[i] + g * noise.samples[i % noise.samples.size()];
  return out;
}

JumbleSpec draw_jumble_spec(std::size_t t, double window_fraction, Rng& rng) {
  if (window_fraction <= 0.0 || window_fraction > 0.5)
    throw ShapeError("window_fraction must be in (0, 0.5]");
  std::size_t wl = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(window_fraction * static_cast<double>(t))));
  if (t < 2 * wl)
    throw TooShortToJumble("t=" + std::to_string(t) + " cannot host two windows of " +
                           std::to_string(wl));
  JumbleSpec spec;
  spec.window_fraction = window_fraction;
  spec.window_len = wl;
  // rejection-sample disjoint windows, deterministic fallback after 1000 tries
  bool found = false;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::size_t a = rng.uniform_int(t - wl + 1);
    std::size_t b = rng.uniform_int(t - wl + 1);
    if (a + wl <= b || b + wl <= a) {
      spec.start_a = std::min(a, b);
      spec.start_b = std::max(a, b);
      found = true;
      break;
    }
  }
  if (!found) {
    spec.start_a = 0;
    spec.start_b = t - wl;
  }
  return spec;
}

LogMelSpectrogram jumble(const LogMelSpectrogram& x, const JumbleSpec& spec) {
  std::size_t t = x.frames.rows;
  std::size_t wl = spec.window_len;
  if (spec.start_a + wl > t || spec.start_b + wl > t)
    throw ShapeError("jumble: window out of range");
  bool disjoint = spec.start_a + wl <= spec.start_b || spec.start_b + wl <= spec.start_a;
  if (!disjoint) throw ShapeError("jumble: windows overlap");
  LogMelSpectrogram out = x;
  for (std::size_t i = 0; i < wl; ++i)
    for (std::size_t c = 0; c < x.frames.cols; ++c)
      std::swap(out.frames.at(spec.start_a + i, c), out.frames.at(spec.start_b + i, c));
  return out;
}

std::pair<LogMelSpectrogram, JumbleSpec> jumble(const LogMelSpectrogram& x,
                                                std::uint64_t seed,
                                                double window_fraction) {
  Rng rng(seed);
  JumbleSpec spec = draw_jumble_spec(x.frames.rows, window_fraction, rng);
  return {jumble(x, spec), spec};
}

// --- WAV / feature array I/O ------------------------------------------------

namespace {
std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ofstream& f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}
}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);
  std::size_t pos = 12;
  int sample_rate = 0, bits = 0, channels = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t chunk_len = rd_u32(bytes.data() + pos + 4);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && pos + 8 + 16 <= bytes.size()) {
      const unsigned char* p = bytes.data() + pos + 8;
      channels = rd_u16(p + 2);
      sample_rate = static_cast<int>(rd_u32(p + 4));
      bits = rd_u16(p + 14);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_ptr = bytes.data() + pos + 8;
      data_len = std::min<std::size_t>(chunk_len, bytes.size() - pos - 8);
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (!data_ptr || bits != 16 || channels < 1)
    throw IoError("expected 16-bit PCM WAV: " + path);
  Waveform w;
  w.sample_rate = sample_rate;
  std::size_t n_frames = data_len / (2 * static_cast<std::size_t>(channels));
  w.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    // average channels to mono
    double acc = 0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data_ptr + 2 * (i * channels + c);
      std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      acc += s / 32768.0;
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 1);  // PCM
  wr_u16(f, 1);  // mono
  wr_u32(f, static_cast<std::uint32_t>(w.sample_rate));
  wr_u32(f, static_cast<std::uint32_t>(w.sample_rate * 2));
  wr_u16(f, 2);
  wr_u16(f, 16);
  f.write("data", 4);
  wr_u32(f, data_len);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    std::int16_t v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    f.write(reinterpret_cast<char*>(b), 2);
  }
}

void write_feature_array(const std::string& path, const nn::Tensor& t,
                         std::optional<int> frame_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (double v : t.data) {
    float fv = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&fv), sizeof(float));
  }
  nlohmann::json hdr;
  hdr["shape"] = {t.rows, t.cols};
  hdr["dtype"] = "float32le";
  if (frame_rate) hdr["frame_rate"] = *frame_rate;
  std::ofstream hf(path + ".json");
  if (!hf) throw IoError("cannot write header for " + path);
  hf << hdr.dump(2) << "\n";
}

nn::Tensor read_feature_array(const std::string& path) {
  std::ifstream hf(path + ".json");
  if (!hf) throw IoError("missing header " + path + ".json");
  nlohmann::json hdr = nlohmann::json::parse(hf);
  std::size_t rows = hdr.at("shape").at(0).get<std::size_t>();
  std::size_t cols = hdr.at("shape").at(1).get<std::size_t>();
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  nn::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) {
    float fv;
    f.read(reinterpret_cast<char*>(&fv), sizeof(float));
    if (!f) throw IoError("truncated feature array " + path);
    t.data[i] = fv;
  }
  return t;
}

}  // namespace ssrl::signal
