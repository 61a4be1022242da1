// ssrl command-line surface: dataset synthesis, pretraining, feature
// extraction, downstream evaluation and the ablation sweeps, with
// machine-readable JSON reports, CSV curves and SVG plots.
//
// Exit codes: 0 ok, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssrl/checkpoint.hpp"
#include "ssrl/common.hpp"
#include "ssrl/data.hpp"
#include "ssrl/metrics.hpp"
#include "ssrl/signal.hpp"
#include "ssrl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssrl;
using namespace ssrl::traindown;

#ifndef SSRL_GIT_REV
#define SSRL_GIT_REV "unknown"
#endif

namespace {

// ---- plumbing ---------------------------------------------------------------

fs::path work_relative(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* wd = std::getenv("SSRL_WORK_DIR")) return fs::path(wd) / path;
  return path;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << content;
  }
  fs::rename(tmp, path);
}

void emit_report(const fs::path& path, json report) {
  report["code_version"] = SSRL_GIT_REV;
  write_atomic(path, report.dump(2) + "\n");
  std::cout << "report: " << path.string() << "\n";
}

data::Dataset load_dataset(const std::string& ref) {
  fs::path p = work_relative(ref);
  if (fs::is_directory(p)) p /= "manifest.jsonl";
  if (!fs::exists(p)) throw ConfigError("dataset manifest not found: " + p.string());
  data::Dataset ds = data::read_manifest(p.string());
  ds.assert_speaker_disjoint();
  return ds;
}

models::ModelConfig model_by_name(const std::string& name) {
  if (name == "canonical") return models::ModelConfig::canonical();
  if (name == "toy") return models::ModelConfig::toy();
  if (name == "tiny") return models::ModelConfig::tiny();
  throw ConfigError("unknown model preset '" + name + "' (canonical|toy|tiny)");
}

// simple polyline SVG so sweep curves are auditable without a plotting stack
void write_svg_plot(const fs::path& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::map<std::string, std::vector<std::pair<double, double>>>&
                        series) {
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& [name, pts] : series)
    for (auto [x, y] : pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  double ypad = 0.08 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='"
      << h - mb << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  svg << "<text x='" << w / 2 << "' y='" << h - 12
      << "' text-anchor='middle' font-size='12'>" << xlabel << "</text>\n";
  svg << "<text x='16' y='" << h / 2 << "' font-size='12' transform='rotate(-90 16 "
      << h / 2 << ")' text-anchor='middle'>" << ylabel << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = xmin + i * (xmax - xmin) / 4, yv = ymin + i * (ymax - ymin) / 4;
    svg << "<text x='" << sx(xv) << "' y='" << h - mb + 16
        << "' text-anchor='middle' font-size='10'>" << xv << "</text>\n";
    svg << "<text x='" << ml - 6 << "' y='" << sy(yv) + 3
        << "' text-anchor='end' font-size='10'>" << yv << "</text>\n";
  }
  int ci = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[ci % 5];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (auto [x, y] : pts) svg << sx(x) << "," << sy(y) << " ";
    svg << "'/>\n";
    for (auto [x, y] : pts)
      svg << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='" << color
          << "'/>\n";
    svg << "<text x='" << w - mr - 4 << "' y='" << mt + 14 * ci + 8
        << "' text-anchor='end' font-size='12' fill='" << color << "'>" << name
        << "</text>\n";
    ++ci;
  }
  svg << "</svg>\n";
  write_atomic(path, svg.str());
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  out.precision(12);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
  write_atomic(path, out.str());
}

// ---- config file < flags resolution ------------------------------------------

// Pre-parse --config and seed CLI11 defaults from the JSON file so that
// explicit flags still win (flag > file > default).
json load_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i)
    if (std::string(argv[i]) == "--config") {
      fs::path p = work_relative(argv[i + 1]);
      std::ifstream f(p);
      if (!f) throw ConfigError("config file not found: " + p.string());
      try {
        return json::parse(f);
      } catch (const json::exception& e) {
        throw ConfigError("config file " + p.string() + " is not valid JSON: " + e.what());
      }
    }
  return json::object();
}

template <typename T>
void cfg_default(const json& cfg, const std::string& key, T& target) {
  if (!cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

// ---- shared experiment steps --------------------------------------------------

struct EvalSpec {
  DownstreamTask task = DownstreamTask::Classify;
  double lr0 = 1e-4;
  int epochs = 12;
  int batch_size = 16;
  std::size_t bgru_hidden = 24;
  std::uint64_t seed = 1;
  int n_runs = 1;
  double label_fraction = 1.0;
};

metrics::RunReport eval_store(const FeatureStore& store, const EvalSpec& spec) {
  return run_repeated(
      spec.task == DownstreamTask::Classify ? "macro_f1" : "ccc", spec.n_runs, spec.seed,
      [&](std::uint64_t run_seed) {
        DownstreamOptions opt;
        opt.task = spec.task;
        opt.mode = Mode::Frozen;
        opt.schedule.epochs = spec.epochs;
        opt.schedule.batch_size = spec.batch_size;
        opt.schedule.lr0 = spec.lr0;
        opt.bgru_hidden = spec.bgru_hidden;
        opt.seed = run_seed;
        opt.label_fraction = spec.label_fraction;
        return train_downstream(store, opt).test_metric;
      });
}

json report_of(const metrics::RunReport& rep) {
  return json{{"metric", rep.metric_name},
              {"values", rep.values},
              {"mean", rep.mean},
              {"std", rep.stddev}};
}

data::Dataset with_noisy_audio(const data::Dataset& ds, double snr_db,
                               std::uint64_t seed) {
  // babble pool from the train split, mixed into every clip
  std::vector<signal::Waveform> pool;
  for (const auto* clip : ds.split("train")) pool.push_back(clip->audio);
  if (pool.empty()) throw BatchTooSmall("no train clips to build babble from");
  data::Dataset noisy = ds;
  std::uint64_t ctr = 0;
  for (auto& clip : noisy.clips) {
    signal::Waveform babble = signal::synth_babble(
        pool, std::min<std::size_t>(6, pool.size()), clip.audio.samples.size(),
        derive_seed(seed, ctr++));
    clip.audio = signal::mix_at_snr(clip.audio, babble, snr_db);
  }
  return noisy;
}

// ---- subcommands ---------------------------------------------------------------

struct SynthArgs {
  data::SyntheticSpec spec;
  std::string out = "synthetic";
  std::string video_format = "raw";
};

int cmd_synth_data(const SynthArgs& a) {
  if (a.video_format != "raw" && a.video_format != "png")
    throw ConfigError("synth-data: video-format must be raw or png");
  if (a.spec.n_speakers < 3)
    throw ConfigError("synth-data: need at least 3 speakers for disjoint splits");
  data::Dataset ds = data::generate_synthetic(a.spec);
  fs::path dir = work_relative(a.out);
  data::save_dataset(dir.string(), ds, a.video_format);
  json rep{{"command", "synth-data"},
           {"dataset", dir.string()},
           {"clips", ds.clips.size()},
           {"config",
            {{"n_speakers", a.spec.n_speakers},
             {"n_classes", a.spec.n_classes},
             {"clips_per_speaker", a.spec.clips_per_speaker},
             {"clip_seconds", a.spec.clip_seconds},
             {"task", a.spec.task},
             {"seed", a.spec.seed},
             {"video_format", a.video_format}}}};
  emit_report(dir / "report.json", rep);
  return 0;
}

struct PretrainArgs {
  std::string data, task = "L1+Odd", model = "toy", ckpt = "pretrained.ckpt";
  double alpha = 0.67;
  double lr0 = 0.06;
  double weight_decay = 0.0;
  int epochs = 20, batch_size = 32;
  std::uint64_t seed = 1;
};

int cmd_pretrain(const PretrainArgs& a) {
  if (a.data.empty()) throw ConfigError("pretrain: --data is required");
  data::Dataset ds = load_dataset(a.data);

  PretrainOptions opt;
  opt.task = pretext_task_from_string(a.task);
  opt.weights.alpha = a.alpha;
  opt.model = model_by_name(a.model);
  opt.schedule.epochs = a.epochs;
  opt.schedule.batch_size = a.batch_size;
  opt.schedule.lr0 = a.lr0;
  opt.weight_decay = a.weight_decay;
  opt.seed = a.seed;
  if (opt.weights.alpha < 0.0 || opt.weights.alpha > 1.0)
    throw ConfigError("pretrain: alpha must be in [0, 1]");
  // fail fast, before any training
  if (opt.task != PretextTask::Odd)
    for (const auto& clip : ds.clips)
      if (clip.rec.split == "train" && !clip.video)
        throw MissingModality("pretrain: task " + a.task +
                              " needs video, clip " + clip.rec.clip_id + " has none");

  fs::path ckpt = work_relative(a.ckpt);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  PretrainResult result = pretrain(ds, opt, ckpt.string());

  json rep{{"command", "pretrain"},
           {"checkpoint", ckpt.string()},
           {"total_loss", result.total_loss},
           {"video_loss", result.video_loss},
           {"audio_loss", result.audio_loss},
           {"config",
            {{"data", a.data},
             {"task", a.task},
             {"alpha", a.alpha},
             {"model", a.model},
             {"epochs", a.epochs},
             {"batch_size", a.batch_size},
             {"lr0", a.lr0},
             {"weight_decay", a.weight_decay},
             {"seed", a.seed}}}};
  if (result.val_odd_accuracy) rep["val_odd_accuracy"] = *result.val_odd_accuracy;
  emit_report(ckpt.parent_path() / (ckpt.stem().string() + "_report.json"), rep);
  return 0;
}

struct ExtractArgs {
  std::string data, ckpt, store = "features";
  bool mfcc = false;
};

int cmd_extract(const ExtractArgs& a) {
  if (a.data.empty()) throw ConfigError("extract: --data is required");
  if (!a.mfcc && a.ckpt.empty())
    throw ConfigError("extract: --ckpt is required unless --mfcc is given");
  data::Dataset ds = load_dataset(a.data);
  fs::path dir = work_relative(a.store);
  if (a.mfcc)
    extract_mfcc_features(ds, dir.string());
  else
    extract_features(work_relative(a.ckpt).string(), ds, dir.string());
  std::cout << "store: " << dir.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string store, baseline_store, data, ckpt, mode = "frozen";
  std::string task = "classify", out = "eval_report.json";
  double lr0 = 1e-4;
  double label_fraction = 1.0;
  int n_runs = 1, epochs = 12, batch_size = 16;
  std::size_t bgru_hidden = 24;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& a) {
  DownstreamTask task =
      a.task == "regress" ? DownstreamTask::Regress : DownstreamTask::Classify;
  if (a.task != "classify" && a.task != "regress")
    throw ConfigError("eval: task must be classify or regress");

  json rep{{"command", "eval"},
           {"config",
            {{"task", a.task},
             {"mode", a.mode},
             {"n_runs", a.n_runs},
             {"epochs", a.epochs},
             {"batch_size", a.batch_size},
             {"lr0", a.lr0},
             {"label_fraction", a.label_fraction},
             {"bgru_hidden", a.bgru_hidden},
             {"seed", a.seed}}}};

  metrics::RunReport main_rep;
  if (a.mode == "frozen") {
    if (a.store.empty()) throw ConfigError("eval: frozen mode needs --store");
    EvalSpec spec;
    spec.task = task;
    spec.lr0 = a.lr0;
    spec.epochs = a.epochs;
    spec.batch_size = a.batch_size;
    spec.bgru_hidden = a.bgru_hidden;
    spec.seed = a.seed;
    spec.n_runs = a.n_runs;
    spec.label_fraction = a.label_fraction;
    main_rep = eval_store(FeatureStore::open(work_relative(a.store).string()), spec);
    rep["config"]["store"] = a.store;
  } else if (a.mode == "finetune" || a.mode == "scratch") {
    if (a.data.empty()) throw ConfigError("eval: " + a.mode + " mode needs --data");
    if (a.mode == "finetune" && a.ckpt.empty())
      throw ConfigError("eval: finetune mode needs --ckpt");
    data::Dataset ds = load_dataset(a.data);
    main_rep = run_repeated(
        task == DownstreamTask::Classify ? "macro_f1" : "ccc", a.n_runs, a.seed,
        [&](std::uint64_t run_seed) {
          DownstreamOptions opt;
          opt.task = task;
          opt.mode = a.mode == "finetune" ? Mode::Finetune : Mode::Scratch;
          opt.schedule.epochs = a.epochs;
          opt.schedule.batch_size = a.batch_size;
          opt.schedule.lr0 = a.lr0;
          opt.bgru_hidden = a.bgru_hidden;
          opt.seed = run_seed;
          opt.encoder_ckpt = a.ckpt.empty() ? "" : work_relative(a.ckpt).string();
          opt.scratch_model = models::ModelConfig::toy();
          return train_downstream(ds, opt).test_metric;
        });
    rep["config"]["data"] = a.data;
    rep["config"]["ckpt"] = a.ckpt;
  } else {
    throw ConfigError("eval: mode must be frozen, finetune or scratch");
  }
  rep["result"] = report_of(main_rep);

  if (!a.baseline_store.empty()) {
    EvalSpec spec;
    spec.task = task;
    spec.lr0 = a.lr0;
    spec.epochs = a.epochs;
    spec.batch_size = a.batch_size;
    spec.bgru_hidden = a.bgru_hidden;
    spec.seed = a.seed;
    spec.n_runs = a.n_runs;
    spec.label_fraction = a.label_fraction;
    auto base =
        eval_store(FeatureStore::open(work_relative(a.baseline_store).string()), spec);
    rep["baseline"] = report_of(base);
    if (a.n_runs >= 2) {
      try {
        auto tt = metrics::paired_t_test(main_rep.values, base.values);
        rep["paired_t_test"] = {{"t_stat", tt.t_stat}, {"p_value", tt.p_value}};
      } catch (const DegenerateTest& e) {
        rep["paired_t_test"] = {{"degenerate", e.what()}};
      }
    }
  }
  emit_report(work_relative(a.out), rep);
  return 0;
}

struct SweepArgs {
  std::string data, out = "sweep";
  std::string task = "classify";
  int pretrain_epochs = 6, eval_epochs = 12, batch_size = 16, n_runs = 1;
  int eval_batch_size = 16;
  double pretrain_lr0 = 0.06;
  double eval_lr0 = 1e-4;
  double label_fraction = 1.0;
  std::size_t bgru_hidden = 24;
  std::uint64_t seed = 1;
  std::vector<double> grid;
};

int cmd_ablate_alpha(SweepArgs a) {
  if (a.data.empty()) throw ConfigError("ablate-alpha: --data is required");
  if (a.grid.empty()) a.grid = {0.17, 0.33, 0.50, 0.67, 0.83};
  std::vector<double> grid;
  for (double g : a.grid) {
    if (std::find(grid.begin(), grid.end(), g) != grid.end()) {
      std::cerr << "warning: duplicate alpha " << g << " removed from grid\n";
      continue;
    }
    grid.push_back(g);
  }
  data::Dataset ds = load_dataset(a.data);
  fs::path dir = work_relative(a.out);
  fs::create_directories(dir);

  json rows = json::array();
  std::vector<std::vector<double>> csv_rows;
  double best_alpha = grid.front(), best_metric = -1e300;
  for (double alpha : grid) {
    PretrainOptions popt;
    popt.task = PretextTask::L1Odd;
    popt.weights.alpha = alpha;
    popt.model = models::ModelConfig::toy();
    popt.schedule.epochs = a.pretrain_epochs;
    popt.schedule.batch_size = a.batch_size;
    popt.schedule.lr0 = a.pretrain_lr0;
    popt.seed = derive_seed(a.seed, static_cast<std::uint64_t>(alpha * 1000));
    fs::path ckpt = dir / ("alpha_" + std::to_string(alpha) + ".ckpt");
    pretrain(ds, popt, ckpt.string());

    fs::path store = dir / ("store_" + std::to_string(alpha));
    extract_features(ckpt.string(), ds, store.string());

    EvalSpec spec;
    spec.task = a.task == "regress" ? DownstreamTask::Regress : DownstreamTask::Classify;
    spec.lr0 = a.eval_lr0;
    spec.epochs = a.eval_epochs;
    spec.batch_size = a.eval_batch_size;
    spec.bgru_hidden = a.bgru_hidden;
    spec.seed = a.seed;
    spec.n_runs = a.n_runs;
    spec.label_fraction = a.label_fraction;
    auto rep = eval_store(FeatureStore::open(store.string()), spec);
    rows.push_back({{"alpha", alpha}, {"result", report_of(rep)}});
    csv_rows.push_back({alpha, rep.mean, rep.stddev});
    if (rep.mean > best_metric) {
      best_metric = rep.mean;
      best_alpha = alpha;
    }
  }
  write_csv(dir / "alpha.csv", {"alpha", "mean", "std"}, csv_rows);
  json rep{{"command", "ablate-alpha"},
           {"rows", rows},
           {"best_alpha", best_alpha},
           {"best_metric", best_metric},
           {"config",
            {{"data", a.data},
             {"grid", grid},
             {"pretrain_epochs", a.pretrain_epochs},
             {"eval_epochs", a.eval_epochs},
             {"n_runs", a.n_runs},
             {"seed", a.seed}}}};
  emit_report(dir / "report.json", rep);
  return 0;
}

int cmd_ablate_noise(SweepArgs a, const std::string& ckpt) {
  if (a.data.empty()) throw ConfigError("ablate-noise: --data is required");
  if (ckpt.empty()) throw ConfigError("ablate-noise: --ckpt is required");
  if (a.grid.empty()) a.grid = {-5, 0, 5, 10, 15, 20};
  data::Dataset ds = load_dataset(a.data);
  fs::path dir = work_relative(a.out);
  fs::create_directories(dir);
  std::string ckpt_path = work_relative(ckpt).string();

  EvalSpec spec;
  spec.task = a.task == "regress" ? DownstreamTask::Regress : DownstreamTask::Classify;
  spec.lr0 = a.eval_lr0;
  spec.epochs = a.eval_epochs;
  spec.batch_size = a.eval_batch_size;
  spec.bgru_hidden = a.bgru_hidden;
  spec.seed = a.seed;
  spec.n_runs = a.n_runs;
  spec.label_fraction = a.label_fraction;

  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  std::vector<std::vector<double>> csv_rows;
  json rows = json::array();

  // clean reference row
  for (const std::string method : {"pretrained", "mfcc"}) {
    fs::path store = dir / ("clean_" + method);
    if (method == "mfcc")
      extract_mfcc_features(ds, store.string());
    else
      extract_features(ckpt_path, ds, store.string());
    auto rep = eval_store(FeatureStore::open(store.string()), spec);
    rows.push_back({{"snr_db", nullptr}, {"method", method}, {"result", report_of(rep)}});
  }

  for (double snr : a.grid) {
    data::Dataset noisy = with_noisy_audio(ds, snr, derive_seed(a.seed, 0xA0));
    for (const std::string method : {"pretrained", "mfcc"}) {
      fs::path store = dir / ("snr_" + std::to_string(snr) + "_" + method);
      if (method == "mfcc")
        extract_mfcc_features(noisy, store.string());
      else
        extract_features(ckpt_path, noisy, store.string());
      auto rep = eval_store(FeatureStore::open(store.string()), spec);
      rows.push_back({{"snr_db", snr}, {"method", method}, {"result", report_of(rep)}});
      curves[method].push_back({snr, rep.mean});
      csv_rows.push_back({snr, method == "pretrained" ? 0.0 : 1.0, rep.mean, rep.stddev});
    }
  }
  write_csv(dir / "noise.csv", {"snr_db", "method_id", "mean", "std"}, csv_rows);
  write_svg_plot(dir / "noise.svg", "metric vs SNR", "SNR (dB)", "metric", curves);
  json rep{{"command", "ablate-noise"},
           {"rows", rows},
           {"config",
            {{"data", a.data},
             {"ckpt", ckpt},
             {"grid", a.grid},
             {"eval_epochs", a.eval_epochs},
             {"n_runs", a.n_runs},
             {"seed", a.seed}}}};
  emit_report(dir / "report.json", rep);
  return 0;
}

int cmd_ablate_size(SweepArgs a, double alpha, const std::string& eval_data) {
  if (a.data.empty()) throw ConfigError("ablate-size: --data is required");
  if (a.grid.empty()) a.grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  data::Dataset ds = load_dataset(a.data);
  // downstream evaluation corpus; defaults to the pretraining corpus
  data::Dataset eval_ds = eval_data.empty() ? ds : load_dataset(eval_data);
  fs::path dir = work_relative(a.out);
  fs::create_directories(dir);

  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  std::vector<std::vector<double>> csv_rows;
  json rows = json::array();
  for (double frac : a.grid) {
    data::Dataset sub =
        data::subset_fraction(ds, frac, data::SubsetWhat::PretrainClips, a.seed);
    auto rep = run_repeated(
        "metric", a.n_runs, derive_seed(a.seed, static_cast<std::uint64_t>(frac * 100)),
        [&](std::uint64_t run_seed) {
          PretrainOptions popt;
          popt.task = PretextTask::L1Odd;
          popt.weights.alpha = alpha;
          popt.model = models::ModelConfig::toy();
          popt.schedule.epochs = a.pretrain_epochs;
          popt.schedule.batch_size = a.batch_size;
          popt.schedule.lr0 = a.pretrain_lr0;
          popt.seed = run_seed;
          fs::path ckpt = dir / "size_run.ckpt";
          pretrain(sub, popt, ckpt.string());
          fs::path store = dir / "size_run_store";
          fs::remove_all(store);
          extract_features(ckpt.string(), eval_ds, store.string());

          DownstreamOptions dopt;
          dopt.task = a.task == "regress" ? DownstreamTask::Regress
                                          : DownstreamTask::Classify;
          dopt.mode = Mode::Frozen;
          dopt.schedule.epochs = a.eval_epochs;
          dopt.schedule.batch_size = a.eval_batch_size;
          dopt.schedule.lr0 = a.eval_lr0;
          dopt.bgru_hidden = a.bgru_hidden;
          dopt.seed = run_seed;
          dopt.label_fraction = a.label_fraction;
          return train_downstream(FeatureStore::open(store.string()), dopt).test_metric;
        });
    rows.push_back({{"fraction", frac}, {"result", report_of(rep)}});
    curves["L1+Odd"].push_back({frac, rep.mean});
    csv_rows.push_back({frac, rep.mean, rep.stddev});
  }
  write_csv(dir / "size.csv", {"fraction", "mean", "std"}, csv_rows);
  write_svg_plot(dir / "size.svg", "metric vs pretraining fraction", "fraction",
                 "metric", curves);
  json rep{{"command", "ablate-size"},
           {"rows", rows},
           {"nested_subsets", true},
           {"config",
            {{"data", a.data},
             {"eval_data", eval_data},
             {"grid", a.grid},
             {"alpha", alpha},
             {"pretrain_epochs", a.pretrain_epochs},
             {"eval_epochs", a.eval_epochs},
             {"n_runs", a.n_runs},
             {"seed", a.seed}}}};
  emit_report(dir / "report.json", rep);
  return 0;
}

int cmd_report(const std::string& path) {
  fs::path p = work_relative(path);
  std::ifstream f(p);
  if (!f) throw ConfigError("report file not found: " + p.string());
  json rep = json::parse(f);
  std::cout << "command: " << rep.value("command", "?") << "\n";
  std::cout << "code_version: " << rep.value("code_version", "?") << "\n";
  if (rep.contains("result")) {
    const auto& r = rep["result"];
    std::cout << r.value("metric", "metric") << ": " << r.value("mean", 0.0) << " +/- "
              << r.value("std", 0.0) << " over " << r["values"].size() << " run(s)\n";
  }
  if (rep.contains("baseline")) {
    const auto& r = rep["baseline"];
    std::cout << "baseline: " << r.value("mean", 0.0) << " +/- " << r.value("std", 0.0)
              << "\n";
  }
  if (rep.contains("paired_t_test") && rep["paired_t_test"].contains("p_value"))
    std::cout << "paired t-test p = " << rep["paired_t_test"]["p_value"].get<double>()
              << "\n";
  if (rep.contains("rows"))
    for (const auto& row : rep["rows"]) std::cout << row.dump() << "\n";
  if (rep.contains("total_loss")) {
    std::cout << "loss trace:";
    for (double v : rep["total_loss"]) std::cout << " " << v;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    json cfg = load_config_arg(argc, argv);

    CLI::App app{"self-supervised speech representation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --config appear after the subcommand name
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    // synth-data
    SynthArgs sy;
    cfg_default(cfg, "out", sy.out);
    cfg_default(cfg, "speakers", sy.spec.n_speakers);
    cfg_default(cfg, "classes", sy.spec.n_classes);
    cfg_default(cfg, "clips_per_speaker", sy.spec.clips_per_speaker);
    cfg_default(cfg, "seconds", sy.spec.clip_seconds);
    cfg_default(cfg, "task", sy.spec.task);
    cfg_default(cfg, "seed", sy.spec.seed);
    cfg_default(cfg, "video_format", sy.video_format);
    auto* synth = app.add_subcommand("synth-data", "generate the synthetic corpus");
    synth->add_option("--out", sy.out);
    synth->add_option("--speakers", sy.spec.n_speakers);
    synth->add_option("--classes", sy.spec.n_classes);
    synth->add_option("--clips-per-speaker", sy.spec.clips_per_speaker);
    synth->add_option("--seconds", sy.spec.clip_seconds);
    synth->add_option("--task", sy.spec.task);
    synth->add_option("--seed", sy.spec.seed);
    synth->add_option("--video-format", sy.video_format);

    // pretrain
    PretrainArgs pa;
    cfg_default(cfg, "data", pa.data);
    cfg_default(cfg, "task", pa.task);
    cfg_default(cfg, "model", pa.model);
    cfg_default(cfg, "ckpt", pa.ckpt);
    cfg_default(cfg, "alpha", pa.alpha);
    cfg_default(cfg, "lr0", pa.lr0);
    cfg_default(cfg, "weight_decay", pa.weight_decay);
    cfg_default(cfg, "epochs", pa.epochs);
    cfg_default(cfg, "batch_size", pa.batch_size);
    cfg_default(cfg, "seed", pa.seed);
    auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
    pre->add_option("--data", pa.data);
    pre->add_option("--task", pa.task);
    pre->add_option("--model", pa.model);
    pre->add_option("--ckpt", pa.ckpt);
    pre->add_option("--alpha", pa.alpha);
    pre->add_option("--lr0", pa.lr0);
    pre->add_option("--weight-decay", pa.weight_decay);
    pre->add_option("--epochs", pa.epochs);
    pre->add_option("--batch-size", pa.batch_size);
    pre->add_option("--seed", pa.seed);

    // extract
    ExtractArgs xa;
    cfg_default(cfg, "data", xa.data);
    cfg_default(cfg, "ckpt", xa.ckpt);
    cfg_default(cfg, "store", xa.store);
    auto* ext = app.add_subcommand("extract", "extract features into a store");
    ext->add_option("--data", xa.data);
    ext->add_option("--ckpt", xa.ckpt);
    ext->add_option("--store", xa.store);
    ext->add_flag("--mfcc", xa.mfcc, "MFCC baseline features instead of a checkpoint");

    // eval
    EvalArgs ea;
    cfg_default(cfg, "store", ea.store);
    cfg_default(cfg, "baseline_store", ea.baseline_store);
    cfg_default(cfg, "data", ea.data);
    cfg_default(cfg, "ckpt", ea.ckpt);
    cfg_default(cfg, "mode", ea.mode);
    cfg_default(cfg, "task", ea.task);
    cfg_default(cfg, "out", ea.out);
    cfg_default(cfg, "lr0", ea.lr0);
    cfg_default(cfg, "label_fraction", ea.label_fraction);
    cfg_default(cfg, "n_runs", ea.n_runs);
    cfg_default(cfg, "epochs", ea.epochs);
    cfg_default(cfg, "batch_size", ea.batch_size);
    cfg_default(cfg, "seed", ea.seed);
    auto* ev = app.add_subcommand("eval", "downstream training + evaluation");
    ev->add_option("--store", ea.store);
    ev->add_option("--baseline-store", ea.baseline_store);
    ev->add_option("--data", ea.data);
    ev->add_option("--ckpt", ea.ckpt);
    ev->add_option("--mode", ea.mode);
    ev->add_option("--task", ea.task);
    ev->add_option("--out", ea.out);
    ev->add_option("--lr0", ea.lr0);
    ev->add_option("--label-fraction", ea.label_fraction,
                   "fraction of labeled train clips used (frozen mode)");
    ev->add_option("--n-runs", ea.n_runs);
    ev->add_option("--epochs", ea.epochs);
    ev->add_option("--batch-size", ea.batch_size);
    ev->add_option("--bgru-hidden", ea.bgru_hidden);
    ev->add_option("--seed", ea.seed);

    // sweeps
    SweepArgs swa;
    cfg_default(cfg, "data", swa.data);
    cfg_default(cfg, "out", swa.out);
    cfg_default(cfg, "task", swa.task);
    cfg_default(cfg, "pretrain_epochs", swa.pretrain_epochs);
    cfg_default(cfg, "pretrain_lr0", swa.pretrain_lr0);
    cfg_default(cfg, "eval_lr0", swa.eval_lr0);
    cfg_default(cfg, "eval_epochs", swa.eval_epochs);
    cfg_default(cfg, "batch_size", swa.batch_size);
    cfg_default(cfg, "eval_batch_size", swa.eval_batch_size);
    cfg_default(cfg, "label_fraction", swa.label_fraction);
    cfg_default(cfg, "n_runs", swa.n_runs);
    cfg_default(cfg, "seed", swa.seed);
    cfg_default(cfg, "grid", swa.grid);
    std::string sweep_ckpt;
    double sweep_alpha = 0.67;
    std::string sweep_eval_data;
    cfg_default(cfg, "ckpt", sweep_ckpt);
    cfg_default(cfg, "alpha", sweep_alpha);
    cfg_default(cfg, "eval_data", sweep_eval_data);

    auto add_sweep_opts = [&](CLI::App* c) {
      c->add_option("--data", swa.data);
      c->add_option("--out", swa.out);
      c->add_option("--task", swa.task);
      c->add_option("--pretrain-epochs", swa.pretrain_epochs);
      c->add_option("--pretrain-lr0", swa.pretrain_lr0);
      c->add_option("--eval-lr0", swa.eval_lr0);
      c->add_option("--eval-epochs", swa.eval_epochs);
      c->add_option("--batch-size", swa.batch_size);
      c->add_option("--eval-batch-size", swa.eval_batch_size);
      c->add_option("--label-fraction", swa.label_fraction);
      c->add_option("--n-runs", swa.n_runs);
      c->add_option("--bgru-hidden", swa.bgru_hidden);
      c->add_option("--seed", swa.seed);
      c->add_option("--grid", swa.grid);
    };
    auto* aa = app.add_subcommand("ablate-alpha", "multi-task weight sweep");
    add_sweep_opts(aa);
    auto* an = app.add_subcommand("ablate-noise", "SNR robustness sweep");
    add_sweep_opts(an);
    an->add_option("--ckpt", sweep_ckpt);
    auto* as = app.add_subcommand("ablate-size", "pretraining-set size sweep");
    add_sweep_opts(as);
    as->add_option("--alpha", sweep_alpha);
    as->add_option("--eval-data", sweep_eval_data,
                   "separate downstream corpus (defaults to --data)");

    // report
    std::string report_path;
    auto* rp = app.add_subcommand("report", "pretty-print a report file");
    rp->add_option("path", report_path)->required();

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      int rc = app.exit(e);
      return rc == 0 ? 0 : 2;
    }

    if (synth->parsed()) return cmd_synth_data(sy);
    if (pre->parsed()) return cmd_pretrain(pa);
    if (ext->parsed()) return cmd_extract(xa);
    if (ev->parsed()) return cmd_eval(ea);
    if (aa->parsed()) return cmd_ablate_alpha(swa);
    if (an->parsed()) return cmd_ablate_noise(swa, sweep_ckpt);
    if (as->parsed()) return cmd_ablate_size(swa, sweep_alpha, sweep_eval_data);
    if (rp->parsed()) return cmd_report(report_path);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
