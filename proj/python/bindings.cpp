// Python bindings for the core operations: audio frontend, metrics,
// pretext objectives, synthetic data generation and the training pipeline.
// Feature matrices cross the boundary as numpy float64 arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssrl/checkpoint.hpp"
#include "ssrl/data.hpp"
#include "ssrl/metrics.hpp"
#include "ssrl/models.hpp"
#include "ssrl/pretext.hpp"
#include "ssrl/signal.hpp"
#include "ssrl/train.hpp"

namespace py = pybind11;
using namespace ssrl;

namespace {

nn::Tensor tensor_from_array(const py::array_t<double, py::array::c_style |
                                                           py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  nn::Tensor t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + t.size(), t.data.begin());
  return t;
}

py::array_t<double> array_from_tensor(const nn::Tensor& t) {
  py::array_t<double> a({t.rows, t.cols});
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

signal::Waveform waveform_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D sample array");
  signal::Waveform w;
  w.samples.resize(static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.shape(0), w.samples.begin());
  return w;
}

}  // namespace

PYBIND11_MODULE(_ssrl, m) {
  m.doc() = "audio-visual self-supervised representation learning core";

  m.def("_debug_sum",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
          signal::Waveform w = waveform_from_array(a);
          double s = 0;
          for (double v : w.samples) s += v;
          return py::make_tuple(w.samples.size(), s, a.ndim(), a.shape(0));
        });

  // ---- signal frontend -----------------------------------------------------
  m.def(
      "log_mel",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples) {
        return array_from_tensor(signal::compute_log_mel(waveform_from_array(samples)).frames);
      },
      py::arg("samples"), "log-mel spectrogram [t x 80] of a 16 kHz waveform");
  m.def(
      "mfcc",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples) {
        return array_from_tensor(signal::compute_mfcc(waveform_from_array(samples)).frames);
      },
      py::arg("samples"), "MFCC + deltas [t x 39] of a 16 kHz waveform");
  m.def("frame_count", &signal::frame_count, py::arg("n_samples"), py::arg("sample_rate"),
        "number of 25 ms / 10 ms analysis frames");
  m.def(
      "mix_at_snr",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clean,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& noise,
         double snr_db) {
        signal::Waveform mixed = signal::mix_at_snr(waveform_from_array(clean),
                                                    waveform_from_array(noise), snr_db);
        py::array_t<double> out(mixed.samples.size());
        std::copy(mixed.samples.begin(), mixed.samples.end(), out.mutable_data());
        return out;
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"),
      "mix noise into clean at an exact signal-to-noise ratio");
  m.def(
      "jumble",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frames,
         std::uint64_t seed, double window_fraction) {
        signal::LogMelSpectrogram lm;
        lm.frames = tensor_from_array(frames);
        auto [out, spec] = signal::jumble(lm, seed, window_fraction);
        return py::make_tuple(array_from_tensor(out.frames),
                              py::dict(py::arg("start_a") = spec.start_a,
                                       py::arg("start_b") = spec.start_b,
                                       py::arg("window_len") = spec.window_len));
      },
      py::arg("frames"), py::arg("seed"), py::arg("window_fraction") = 0.15,
      "swap two disjoint temporal windows; returns (frames, spec)");

  // ---- metrics -------------------------------------------------------------
  m.def(
      "ccc",
      [](const std::vector<double>& y, const std::vector<double>& yhat) {
        return metrics::ccc(y, yhat).ccc;
      },
      py::arg("y"), py::arg("yhat"), "concordance correlation coefficient");
  m.def("ccc_loss", &metrics::ccc_loss, py::arg("y"), py::arg("yhat"),
        "1 - (ccc+1)/2, in [0, 1]");
  m.def("macro_f1", &metrics::macro_f1, py::arg("pred"), py::arg("truth"),
        py::arg("n_classes"));
  m.def("accuracy", &metrics::accuracy, py::arg("pred"), py::arg("truth"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        auto r = metrics::paired_t_test(a, b);
        return py::make_tuple(r.t_stat, r.p_value);
      },
      py::arg("a"), py::arg("b"), "two-sided paired t-test -> (t_stat, p_value)");

  // ---- pretext objectives --------------------------------------------------
  m.def(
      "multitask_loss",
      [](double l_video, double l_audio, double alpha) {
        pretext::MultiTaskWeights w;
        w.alpha = alpha;
        return pretext::multitask_loss(l_video, l_audio, w);
      },
      py::arg("l_video"), py::arg("l_audio"), py::arg("alpha"),
      "alpha * l_video + (1 - alpha) * l_audio");

  // ---- synthetic data ------------------------------------------------------
  m.def(
      "synth_dataset",
      [](const std::string& out_dir, int n_speakers, int clips_per_speaker,
         double seconds, const std::string& task, std::uint64_t seed) {
        data::SyntheticSpec spec;
        spec.n_speakers = n_speakers;
        spec.clips_per_speaker = clips_per_speaker;
        spec.clip_seconds = seconds;
        spec.task = task;
        spec.seed = seed;
        data::Dataset ds = data::generate_synthetic(spec);
        data::save_dataset(out_dir, ds);
        return ds.clips.size();
      },
      py::arg("out_dir"), py::arg("n_speakers") = 12, py::arg("clips_per_speaker") = 10,
      py::arg("seconds") = 1.0, py::arg("task") = "classify", py::arg("seed") = 7,
      "generate and persist a synthetic audiovisual corpus; returns clip count");
  m.def("synthetic_envelope", &data::synthetic_envelope, py::arg("class_id"),
        py::arg("t_video"), "class-dependent amplitude envelope at 25 fps");

  // ---- training pipeline ---------------------------------------------------
  m.def(
      "pretrain",
      [](const std::string& data_dir, const std::string& ckpt, const std::string& task,
         double alpha, int epochs, int batch_size, double lr0, std::uint64_t seed) {
        data::Dataset ds = data::read_manifest(data_dir + "/manifest.jsonl");
        traindown::PretrainOptions opt;
        opt.task = traindown::pretext_task_from_string(task);
        opt.weights.alpha = alpha;
        opt.model = models::ModelConfig::toy();
        opt.schedule.epochs = epochs;
        opt.schedule.batch_size = batch_size;
        opt.schedule.lr0 = lr0;
        opt.seed = seed;
        auto r = traindown::pretrain(ds, opt, ckpt);
        py::dict out;
        out["total_loss"] = r.total_loss;
        out["video_loss"] = r.video_loss;
        out["audio_loss"] = r.audio_loss;
        if (r.val_odd_accuracy) out["val_odd_accuracy"] = *r.val_odd_accuracy;
        return out;
      },
      py::arg("data_dir"), py::arg("ckpt"), py::arg("task") = "L1+Odd",
      py::arg("alpha") = 0.67, py::arg("epochs") = 20, py::arg("batch_size") = 32,
      py::arg("lr0") = 0.06, py::arg("seed") = 1,
      "self-supervised pretraining; writes a checkpoint and returns loss curves");
  m.def(
      "extract_features",
      [](const std::string& ckpt, const std::string& data_dir, const std::string& store) {
        data::Dataset ds = data::read_manifest(data_dir + "/manifest.jsonl");
        traindown::extract_features(ckpt, ds, store);
      },
      py::arg("ckpt"), py::arg("data_dir"), py::arg("store_dir"));
  m.def(
      "extract_mfcc_features",
      [](const std::string& data_dir, const std::string& store) {
        data::Dataset ds = data::read_manifest(data_dir + "/manifest.jsonl");
        traindown::extract_mfcc_features(ds, store);
      },
      py::arg("data_dir"), py::arg("store_dir"));
  m.def(
      "encode",
      [](const std::string& ckpt_path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& mel) {
        auto ck = checkpoint::Checkpoint::load(ckpt_path);
        models::ModelConfig cfg = checkpoint::config_from_json(ck.config["model"]);
        Rng rng(0);
        models::AudioEncoder enc(cfg, rng);
        ck.load_component(enc, "encoder");
        return array_from_tensor(enc.forward_tensor(tensor_from_array(mel)));
      },
      py::arg("ckpt"), py::arg("log_mel_frames"),
      "run a checkpointed audio encoder on [t x mel] frames");
  m.def(
      "eval_frozen",
      [](const std::string& store_dir, const std::string& task, int epochs,
         int batch_size, double lr0, std::size_t bgru_hidden, double label_fraction,
         std::uint64_t seed) {
        auto store = traindown::FeatureStore::open(store_dir);
        traindown::DownstreamOptions opt;
        opt.task = task == "regress" ? traindown::DownstreamTask::Regress
                                     : traindown::DownstreamTask::Classify;
        opt.mode = traindown::Mode::Frozen;
        opt.schedule.epochs = epochs;
        opt.schedule.batch_size = batch_size;
        opt.schedule.lr0 = lr0;
        opt.bgru_hidden = bgru_hidden;
        opt.label_fraction = label_fraction;
        opt.seed = seed;
        auto r = traindown::train_downstream(store, opt);
        py::dict out;
        out["test_metric"] = r.test_metric;
        out["best_val_metric"] = r.best_val_metric;
        out["best_epoch"] = r.best_epoch;
        out["val_curve"] = r.val_curve;
        return out;
      },
      py::arg("store_dir"), py::arg("task") = "classify", py::arg("epochs") = 12,
      py::arg("batch_size") = 16, py::arg("lr0") = 1e-4, py::arg("bgru_hidden") = 24,
      py::arg("label_fraction") = 1.0, py::arg("seed") = 1,
      "train a bidirectional-GRU head on a frozen feature store");
}
