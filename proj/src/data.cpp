#include "ssrl/data.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace ssrl::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kPi = 3.14159265358979323846;

double u8_to_signed(std::uint8_t p) { return p / 127.5 - 1.0; }
std::uint8_t signed_to_u8(double v) {
  double q = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::lround(q));
}
}  // namespace

nn::Tensor VideoData::frame(std::size_t i) const {
  if (i >= t) throw ShapeError("VideoData::frame: index out of range");
  nn::Tensor out(c, h * w);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t p = 0; p < h * w; ++p)
      out.at(ci, p) = u8_to_signed(pixels[(i * c + ci) * h * w + p]);
  return out;
}

nn::Tensor VideoData::all_frames() const {
  nn::Tensor out(t, c * h * w);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t p = 0; p < c * h * w; ++p)
      out.at(i, p) = u8_to_signed(pixels[i * c * h * w + p]);
  return out;
}

std::vector<const Clip*> Dataset::split(const std::string& name) const {
  std::vector<const Clip*> out;
  for (const auto& clip : clips)
    if (clip.rec.split == name) out.push_back(&clip);
  return out;
}

void Dataset::assert_speaker_disjoint() const {
  std::map<std::string, std::string> seen;  // speaker -> split
  for (const auto& clip : clips) {
    auto it = seen.find(clip.rec.speaker_id);
    if (it == seen.end()) {
      seen[clip.rec.speaker_id] = clip.rec.split;
    } else if (it->second != clip.rec.split) {
      throw SplitError("speaker " + clip.rec.speaker_id + " appears in splits '" +
                       it->second + "' and '" + clip.rec.split + "'");
    }
  }
}

namespace {

// Class-specific quarter-level sequences for the amplitude envelope. Every
// class uses the same multiset of levels {0.35, 0.55, 0.75, 0.95} in a
// different temporal order, so the global envelope mean and variance are
// identical across classes and only the *order* of the levels carries class
// identity. The orders are additionally paired with the frequency contours
// below so that the energy-weighted average spectrum is the same for every
// class: class identity is invisible to any time-pooled statistic and must be
// read from temporal structure.
constexpr double kEnvLevels[4][4] = {
    {0.75, 0.35, 0.95, 0.55},  // class 0 (pairs with up-glide)
    {0.55, 0.95, 0.35, 0.75},  // class 1 (pairs with down-glide)
    {0.35, 0.55, 0.75, 0.95},  // class 2 (pairs with up-down triangle)
    {0.95, 0.75, 0.55, 0.35},  // class 3 (pairs with down-up triangle)
};

double envelope_at(int class_id, double tau) {
  const double* lv = kEnvLevels[class_id % 4];
  // smooth (cosine) interpolation through the four quarter levels, with the
  // level held at each quarter's center so quarter means stay separable
  double u = tau * 4.0 - 0.5;  // level index coordinate; centers at 0,1,2,3
  if (u <= 0.0) return lv[0];
  if (u >= 3.0) return lv[3];
  int q = static_cast<int>(u);
  double frac = u - q;
  double w = 0.5 - 0.5 * std::cos(kPi * frac);
  return lv[q] * (1.0 - w) + lv[q + 1] * w;
}

}  // namespace

std::vector<double> synthetic_envelope(int class_id, std::size_t t_video) {
  std::vector<double> env(t_video);
  for (std::size_t j = 0; j < t_video; ++j) {
    double tau = t_video > 1 ? static_cast<double>(j) / (t_video - 1) : 0.0;
    env[j] = envelope_at(class_id, tau);
  }
  return env;
}

namespace {

// Class-dependent frequency contour in [-1, 1]. The pitch trajectory makes the
// clip spectrally non-stationary, so swapping temporal windows produces
// frequency discontinuities that are visible in the log-mel frames. All four
// shapes traverse [-1, 1] with uniform occupancy, so the time-averaged
// spectrum is class-independent: only the direction/shape of the traversal
// (a temporal-order property) identifies the class.
double freq_contour_at(int class_id, double tau) {
  switch (class_id % 4) {
    case 0: return 2.0 * tau - 1.0;                                // up-glide
    case 1: return 1.0 - 2.0 * tau;                                // down-glide
    case 2: return tau < 0.5 ? 4.0 * tau - 1.0 : 3.0 - 4.0 * tau;  // up-down
    default: return tau < 0.5 ? 1.0 - 4.0 * tau : 4.0 * tau - 3.0;  // down-up
  }
}

void paint_video(VideoData& v, int class_id, int n_classes, int speaker,
                 const std::vector<double>& env, Rng& rng) {
  // static per-speaker background texture
  Rng srng(derive_seed(0xb06u, static_cast<std::uint64_t>(speaker)));
  double ux = srng.uniform(1.0, 4.0), uy = srng.uniform(1.0, 4.0);
  double phase[3] = {srng.uniform(0, 2 * kPi), srng.uniform(0, 2 * kPi),
                     srng.uniform(0, 2 * kPi)};
  std::vector<std::uint8_t> bg(v.c * v.h * v.w);
  for (std::size_t ci = 0; ci < v.c; ++ci)
    for (std::size_t y = 0; y < v.h; ++y)
      for (std::size_t x = 0; x < v.w; ++x) {
        double s = -0.3 + 0.25 * std::sin(2 * kPi * (ux * x / v.w + uy * y / v.h) +
                                          phase[ci]);
        bg[(ci * v.h + y) * v.w + x] = signed_to_u8(s);
      }
  // class-coded gradient pattern, top-left 16x16 corner
  double theta = kPi * class_id / std::max(1, n_classes);
  for (std::size_t ti = 0; ti < v.t; ++ti) {
    for (std::size_t ci = 0; ci < v.c; ++ci)
      std::memcpy(&v.pixels[(ti * v.c + ci) * v.h * v.w], bg.data() + ci * v.h * v.w,
                  v.h * v.w);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        double proj = (x * std::cos(theta) + y * std::sin(theta)) / 16.0;
        double val = 0.9 * (2.0 * proj - 1.0);
        for (std::size_t ci = 0; ci < v.c; ++ci)
          v.at(ti, ci, y, x) = signed_to_u8(val);
      }
    // mouth rectangle: height tracks the audio envelope
    int mouth_h = 2 + static_cast<int>(std::lround(14.0 * env[ti]));
    std::size_t y0 = 40, x0 = v.w / 2 - 10, x1 = v.w / 2 + 10;
    for (int dy = 0; dy < mouth_h && y0 + dy < v.h; ++dy)
      for (std::size_t x = x0; x < x1; ++x)
        for (std::size_t ci = 0; ci < v.c; ++ci)
          v.at(ti, ci, y0 + dy, x) = 255;
  }
  (void)rng;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_classes < 2) throw ConfigError("synthetic: n_classes must be >= 2");
  if (spec.n_speakers < 3) throw SplitError("synthetic: need at least 3 speakers");
  if (spec.task != "classify" && spec.task != "regress")
    throw ConfigError("synthetic: task must be 'classify' or 'regress'");
  Dataset ds;
  ds.n_classes = spec.n_classes;
  const int sr = signal::kCanonicalSampleRate;
  const std::size_t n_samples = static_cast<std::size_t>(spec.clip_seconds * sr);
  const std::size_t t_video = static_cast<std::size_t>(spec.clip_seconds * 25);

  for (int s = 0; s < spec.n_speakers; ++s) {
    // fixed per-speaker timbre
    Rng srng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(s)));
    double harm_amp = srng.uniform(0.1, 0.4);
    // wide multiplicative per-speaker detune (about +/- half an octave): class
    // pitch bands overlap heavily across speakers, so absolute pitch is a
    // speaker cue and class identity is carried by the temporal contour
    double detune_octaves = srng.uniform(-0.5, 0.5);
    // idiosyncratic per-speaker spectral/temporal texture (harmonic stack and
    // vibrato) so raw spectral features are dominated by speaker identity
    double h3 = srng.uniform(0.0, 0.5);
    double h4 = srng.uniform(0.0, 0.35);
    double vib_rate = srng.uniform(3.0, 7.0);
    double vib_depth = srng.uniform(0.01, 0.04);
    for (int k = 0; k < spec.clips_per_speaker; ++k) {
      int class_id = k % spec.n_classes;
      std::uint64_t clip_seed =
          derive_seed(spec.seed, 7919ULL * static_cast<std::uint64_t>(s) +
                                     static_cast<std::uint64_t>(k));
      Rng rng(clip_seed);
      Clip clip;
      clip.rec.clip_id = "spk" + std::to_string(s) + "_clip" + std::to_string(k);
      clip.rec.speaker_id = "spk" + std::to_string(s);
      if (spec.task == "classify") clip.rec.label = class_id;

      clip.audio.sample_rate = sr;
      clip.audio.samples.resize(n_samples);
      double f0 = (200.0 + 120.0 * class_id) * std::exp2(detune_octaves);
      double phase = rng.uniform(0, 2 * kPi);
      // phase-continuous harmonic stack following the class frequency contour
      double phi[4] = {phase, 2.0 * phase, 3.0 * phase, 4.0 * phase};
      const double amp[4] = {1.0, harm_amp, h3, h4};
      for (std::size_t i = 0; i < n_samples; ++i) {
        double tau = static_cast<double>(i) / (n_samples - 1);
        double tt = static_cast<double>(i) / sr;
        double env = envelope_at(class_id, tau);
        double f = f0 * (1.0 + 0.8 * freq_contour_at(class_id, tau)) *
                   (1.0 + vib_depth * std::sin(2 * kPi * vib_rate * tt));
        double x = 0.0;
        for (int harmonic = 0; harmonic < 4; ++harmonic) {
          phi[harmonic] += 2 * kPi * (harmonic + 1) * f / sr;
          x += amp[harmonic] * std::sin(phi[harmonic]);
        }
        clip.audio.samples[i] = 0.55 * env * x + 0.01 * rng.gaussian(0.0, 1.0);
      }

      std::vector<double> env25 = synthetic_envelope(class_id, t_video);
      if (spec.task == "regress") clip.rec.affect_track = env25;

      VideoData video;
      video.t = t_video;
      video.pixels.assign(video.t * video.c * video.h * video.w, 0);
      paint_video(video, class_id, spec.n_classes, s, env25, rng);
      clip.video = std::move(video);
      ds.clips.push_back(std::move(clip));
    }
  }
  split_speakers(ds.clips, 0.6, 0.2, 0.2, derive_seed(spec.seed, 42));
  ds.assert_speaker_disjoint();
  return ds;
}

void split_speakers(std::vector<Clip>& clips, double train_ratio, double val_ratio,
                    double test_ratio, std::uint64_t seed) {
  double total = train_ratio + val_ratio + test_ratio;
  if (total <= 0) throw SplitError("ratios must be positive");
  std::vector<std::string> speakers;
  for (const auto& clip : clips)
    if (std::find(speakers.begin(), speakers.end(), clip.rec.speaker_id) == speakers.end())
      speakers.push_back(clip.rec.speaker_id);
  std::size_t n = speakers.size();
  if (n < 3) throw SplitError("need at least 3 speakers, got " + std::to_string(n));
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(speakers[i], speakers[rng.uniform_int(i + 1)]);
  std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(val_ratio / total * n)));
  std::size_t n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(test_ratio / total * n)));
  if (n_val + n_test >= n) throw SplitError("split ratios leave no training speakers");
  std::map<std::string, std::string> assign;
  for (std::size_t i = 0; i < n; ++i) {
    std::string split = i < n - n_val - n_test ? "train"
                        : i < n - n_test       ? "val"
                                               : "test";
    assign[speakers[i]] = split;
  }
  for (auto& clip : clips) clip.rec.split = assign[clip.rec.speaker_id];
}

namespace {
std::uint64_t clip_hash(const std::string& id, std::uint64_t seed) {
  std::uint64_t h = derive_seed(seed, 0x5f5e);
  for (char ch : id) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return derive_seed(h, 1);
}
}  // namespace

Dataset subset_fraction(const Dataset& ds, double fraction, SubsetWhat what,
                        std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ConfigError("fraction must be in (0, 1], got " + std::to_string(fraction));
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < ds.clips.size(); ++i)
    if (ds.clips[i].rec.split == "train") train_idx.push_back(i);
  std::size_t keep = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(train_idx.size())));
  if (keep == 0) throw EmptySubset("fraction yields zero train clips");
  // hash-order the train clips; keeping a prefix makes subsets nested
  std::stable_sort(train_idx.begin(), train_idx.end(), [&](std::size_t a, std::size_t b) {
    return clip_hash(ds.clips[a].rec.clip_id, seed) <
           clip_hash(ds.clips[b].rec.clip_id, seed);
  });
  std::set<std::size_t> kept(train_idx.begin(), train_idx.begin() + keep);

  Dataset out;
  out.n_classes = ds.n_classes;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const Clip& clip = ds.clips[i];
    if (clip.rec.split != "train") {
      out.clips.push_back(clip);
      continue;
    }
    if (what == SubsetWhat::PretrainClips) {
      if (kept.count(i)) out.clips.push_back(clip);
    } else {
      Clip c2 = clip;
      if (!kept.count(i)) c2.rec.label.reset();  // unlabeled, excluded downstream
      out.clips.push_back(std::move(c2));
    }
  }
  return out;
}

// --- manifest I/O -------------------------------------------------------------

void write_manifest(const std::string& path, const Dataset& ds) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest " + path);
  for (const auto& clip : ds.clips) {
    json j;
    j["clip_id"] = clip.rec.clip_id;
    j["speaker_id"] = clip.rec.speaker_id;
    j["audio_path"] = clip.rec.audio_path;
    if (!clip.rec.video_path.empty()) j["video_path"] = clip.rec.video_path;
    if (clip.rec.label) j["label"] = *clip.rec.label;
    if (clip.rec.affect_track) j["affect_track"] = *clip.rec.affect_track;
    j["split"] = clip.rec.split;
    f << j.dump() << "\n";
  }
}

Dataset read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path);
  fs::path base = fs::path(path).parent_path();
  Dataset ds;
  std::string line;
  int max_label = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Clip clip;
    clip.rec.clip_id = j.at("clip_id").get<std::string>();
    clip.rec.speaker_id = j.at("speaker_id").get<std::string>();
    clip.rec.audio_path = j.at("audio_path").get<std::string>();
    if (j.contains("video_path")) clip.rec.video_path = j["video_path"].get<std::string>();
    if (j.contains("label")) clip.rec.label = j["label"].get<int>();
    if (j.contains("affect_track"))
      clip.rec.affect_track = j["affect_track"].get<std::vector<double>>();
    clip.rec.split = j.at("split").get<std::string>();
    if (clip.rec.label && clip.rec.affect_track)
      throw ConfigError("record " + clip.rec.clip_id +
                        " carries both a label and an affect track");
    if (clip.rec.audio_path.empty())
      throw ConfigError("record " + clip.rec.clip_id + " has no audio");
    clip.audio = signal::read_wav((base / clip.rec.audio_path).string());
    if (!clip.rec.video_path.empty()) {
      fs::path vp = base / clip.rec.video_path;
      clip.video = fs::is_directory(vp) ? read_video_png_dir(vp.string())
                                        : read_video_raw(vp.string());
    }
    if (clip.rec.label) max_label = std::max(max_label, *clip.rec.label);
    ds.clips.push_back(std::move(clip));
  }
  ds.n_classes = max_label + 1;
  ds.assert_speaker_disjoint();
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds,
                  const std::string& video_format) {
  fs::create_directories(fs::path(dir) / "audio");
  fs::create_directories(fs::path(dir) / "video");
  Dataset copy;
  copy.n_classes = ds.n_classes;
  for (const auto& clip : ds.clips) {
    Clip c2;
    c2.rec = clip.rec;
    c2.rec.audio_path = "audio/" + clip.rec.clip_id + ".wav";
    signal::write_wav((fs::path(dir) / c2.rec.audio_path).string(), clip.audio);
    if (clip.video) {
      if (video_format == "png") {
        c2.rec.video_path = "video/" + clip.rec.clip_id;
        write_video_png_dir((fs::path(dir) / c2.rec.video_path).string(), *clip.video);
      } else {
        c2.rec.video_path = "video/" + clip.rec.clip_id + ".rawvid";
        write_video_raw((fs::path(dir) / c2.rec.video_path).string(), *clip.video);
      }
    }
    copy.clips.push_back(std::move(c2));
  }
  write_manifest((fs::path(dir) / "manifest.jsonl").string(), copy);
}

// --- raw video container -------------------------------------------------------
// layout: magic "SSRLVID1", four little-endian uint32 {t, c, h, w},
// then t*c*h*w uint8 pixels (0..255 maps linearly to [-1, 1])

void write_video_raw(const std::string& path, const VideoData& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write("SSRLVID1", 8);
  std::uint32_t dims[4] = {static_cast<std::uint32_t>(v.t), static_cast<std::uint32_t>(v.c),
                           static_cast<std::uint32_t>(v.h), static_cast<std::uint32_t>(v.w)};
  f.write(reinterpret_cast<char*>(dims), sizeof(dims));
  f.write(reinterpret_cast<const char*>(v.pixels.data()),
          static_cast<std::streamsize>(v.pixels.size()));
}

VideoData read_video_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "SSRLVID1", 8) != 0)
    throw IoError("bad video magic in " + path);
  std::uint32_t dims[4];
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  VideoData v;
  v.t = dims[0];
  v.c = dims[1];
  v.h = dims[2];
  v.w = dims[3];
  v.pixels.resize(v.t * v.c * v.h * v.w);
  f.read(reinterpret_cast<char*>(v.pixels.data()),
         static_cast<std::streamsize>(v.pixels.size()));
  if (!f) throw IoError("truncated video file " + path);
  return v;
}

// --- PNG frame directory ---------------------------------------------------------

namespace png {

void wr_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::string& payload) {
  std::string buf;
  wr_u32be(buf, static_cast<std::uint32_t>(payload.size()));
  buf.append(type, 4);
  buf += payload;
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data() + 4), static_cast<uInt>(buf.size() - 4)));
  wr_u32be(buf, crc);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_rgb(const std::string& path, std::size_t w, std::size_t h,
               const std::vector<std::uint8_t>& rgb) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);
  std::string ihdr;
  wr_u32be(ihdr, static_cast<std::uint32_t>(w));
  wr_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);
  std::string raw;
  raw.reserve(h * (1 + 3 * w));
  for (std::size_t y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    raw.append(reinterpret_cast<const char*>(rgb.data() + y * 3 * w), 3 * w);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::string comp(comp_len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw IoError("zlib compress failed for " + path);
  comp.resize(comp_len);
  write_chunk(f, "IDAT", comp);
  write_chunk(f, "IEND", "");
}

std::uint32_t rd_u32be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

std::vector<std::uint8_t> read_rgb(const std::string& path, std::size_t& w, std::size_t& h) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || bytes[1] != 'P' || bytes[2] != 'N' || bytes[3] != 'G')
    throw IoError("not a PNG: " + path);
  std::size_t pos = 8;
  std::string idat;
  int bit_depth = 0, color_type = -1;
  w = h = 0;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t len = rd_u32be(bytes.data() + pos);
    std::string type(reinterpret_cast<char*>(bytes.data() + pos + 4), 4);
    const unsigned char* payload = bytes.data() + pos + 8;
    if (type == "IHDR") {
      w = rd_u32be(payload);
      h = rd_u32be(payload + 4);
      bit_depth = payload[8];
      color_type = payload[9];
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(payload), len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (bit_depth != 8 || color_type != 2)
    throw IoError("unsupported PNG format (need 8-bit RGB): " + path);
  std::size_t stride = 3 * w;
  uLongf raw_len = static_cast<uLongf>(h * (stride + 1));
  std::vector<std::uint8_t> raw(raw_len);
  if (uncompress(raw.data(), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != h * (stride + 1))
    throw IoError("zlib inflate failed for " + path);
  std::vector<std::uint8_t> out(h * stride);
  for (std::size_t y = 0; y < h; ++y) {
    int filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = out.data() + y * stride;
    const std::uint8_t* up = y > 0 ? out.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= 3 ? dst[i - 3] : 0;
      int b = up ? up[i] : 0;
      int c = (up && i >= 3) ? up[i - 3] : 0;
      int x = src[i];
      switch (filter) {
        case 0: dst[i] = static_cast<std::uint8_t>(x); break;
        case 1: dst[i] = static_cast<std::uint8_t>(x + a); break;
        case 2: dst[i] = static_cast<std::uint8_t>(x + b); break;
        case 3: dst[i] = static_cast<std::uint8_t>(x + (a + b) / 2); break;
        case 4: dst[i] = static_cast<std::uint8_t>(x + paeth(a, b, c)); break;
        default: throw IoError("bad PNG filter in " + path);
      }
    }
  }
  return out;
}

}  // namespace png

void write_video_png_dir(const std::string& dir, const VideoData& v) {
  if (v.c != 3) throw ShapeError("PNG export expects 3-channel video");
  fs::create_directories(dir);
  for (std::size_t ti = 0; ti < v.t; ++ti) {
    std::vector<std::uint8_t> rgb(v.h * v.w * 3);
    for (std::size_t y = 0; y < v.h; ++y)
      for (std::size_t x = 0; x < v.w; ++x)
        for (std::size_t ci = 0; ci < 3; ++ci)
          rgb[(y * v.w + x) * 3 + ci] = v.at(ti, ci, y, x);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", ti);
    png::write_rgb((fs::path(dir) / name).string(), v.w, v.h, rgb);
  }
}

VideoData read_video_png_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".png") files.push_back(entry.path());
  if (files.empty()) throw IoError("no PNG frames in " + dir);
  std::sort(files.begin(), files.end());
  VideoData v;
  v.t = files.size();
  v.c = 3;
  for (std::size_t ti = 0; ti < files.size(); ++ti) {
    std::size_t w = 0, h = 0;
    auto rgb = png::read_rgb(files[ti].string(), w, h);
    if (ti == 0) {
      v.h = h;
      v.w = w;
      v.pixels.assign(v.t * 3 * h * w, 0);
    } else if (h != v.h || w != v.w) {
      throw ShapeError("inconsistent frame sizes in " + dir);
    }
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ci = 0; ci < 3; ++ci)
          v.at(ti, ci, y, x) = rgb[(y * w + x) * 3 + ci];
  }
  return v;
}

}  // namespace ssrl::data
