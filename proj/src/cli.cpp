#include "rsed/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "rsed/augment.hpp"
#include "rsed/checkpoint.hpp"
#include "rsed/config.hpp"
#include "rsed/csv_io.hpp"
#include "rsed/detector.hpp"
#include "rsed/evaluator.hpp"
#include "rsed/gradcheck.hpp"
#include "rsed/json_conv.hpp"
#include "rsed/synthdata.hpp"
#include "rsed/tensor_io.hpp"

namespace rsed {

namespace {

namespace fs = std::filesystem;

int thread_budget(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ROBUST_SED_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

PipelineConfig load_run_config(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
  PipelineConfig cfg =
      config_path.empty() ? PipelineConfig::full_profile() : load_config(config_path);
  for (const std::string& kv : overrides) apply_override(cfg, kv);
  // every stage draws from the root seed unless overridden explicitly
  cfg.synth.seed = cfg.seed;
  cfg.dataset.seed = cfg.seed;
  cfg.training.seed = cfg.seed;
  return cfg;
}

struct NightOnDisk {
  std::vector<std::string> sensor_ids;
  std::map<std::string, std::string> wav_paths;
  std::map<std::string, std::string> ref_paths;
};

NightOnDisk read_night_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir);
  nlohmann::json j = nlohmann::json::parse(in);
  NightOnDisk night;
  for (const auto& s : j.at("sensors")) {
    const std::string id = s.at("id").get<std::string>();
    night.sensor_ids.push_back(id);
    night.wav_paths[id] = (fs::path(dir) / s.at("audio").get<std::string>()).string();
    night.ref_paths[id] = (fs::path(dir) / s.at("reference").get<std::string>()).string();
  }
  return night;
}

int cmd_synth(const PipelineConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<SensorNight> nights = synth_night(cfg.synth);
  nlohmann::json sensors = nlohmann::json::array();
  for (const SensorNight& night : nights) {
    const std::string wav_name = night.sensor_id + ".wav";
    const std::string ref_name = night.sensor_id + "_reference.csv";
    write_wav((fs::path(out_dir) / wav_name).string(), night.audio);
    write_reference_csv((fs::path(out_dir) / ref_name).string(), night.reference);
    sensors.push_back({{"id", night.sensor_id},
                       {"audio", wav_name},
                       {"reference", ref_name},
                       {"events", night.reference.size()}});
  }
  nlohmann::json manifest = {{"seed", cfg.seed},
                             {"duration_seconds", cfg.synth.duration_seconds},
                             {"call_count", cfg.synth.call_count},
                             {"sample_rate", cfg.synth.sample_rate},
                             {"sensors", sensors}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  std::cout << "wrote " << nights.size() << " sensors to " << out_dir << "\n";
  return 0;
}

int cmd_featurize(const PipelineConfig& cfg, const std::string& in_path,
                  const std::string& out_path, int jobs) {
  const Waveform w = read_wav(in_path);
  const TimeFrequencyMatrix energy =
      melspectrogram(w, cfg.frontend.spectrogram, thread_budget(jobs));
  const TimeFrequencyMatrix features = compress(energy, cfg.frontend);
  TensorFile t = to_tensor(features);
  t.metadata["source"] = fs::path(in_path).filename().string();
  t.metadata["seed"] = cfg.seed;
  write_tensor(out_path, t);
  std::cout << "wrote " << features.n_frames << "x" << features.n_bands << " "
            << frontend_kind_name(cfg.frontend.kind) << " features to " << out_path << "\n";
  return 0;
}

// Clips via standalone 150 ms waveforms, used when augmentation is on so that
// original and augmented clips share one framing path.
TrainExample clip_from_waveform(const Waveform& clip, const SensorFeatures& features,
                                double t, int label, const PipelineConfig& cfg) {
  TimeFrequencyMatrix energy = melspectrogram(clip, cfg.frontend.spectrogram);
  TimeFrequencyMatrix comp = compress(energy, cfg.frontend);
  TrainExample ex;
  const int pf = cfg.geometry.patch_frames;
  int start = (comp.n_frames - pf) / 2;  // center crop or symmetric pad
  ex.patch = extract_patch(comp, start, pf);
  ex.context = context_at(features.context, t).values;
  ex.label = label;
  ex.sensor_id = features.sensor_id;
  ex.time = t;
  return ex;
}

Waveform cut_clip(const Waveform& w, double t, double half_width) {
  const long first = std::llround((t - half_width) * w.sample_rate);
  const long count = std::llround(2 * half_width * w.sample_rate);
  Waveform clip;
  clip.sample_rate = w.sample_rate;
  clip.samples.resize(count, 0.0f);
  for (long i = 0; i < count; ++i) {
    const long j = first + i;
    if (j >= 0 && j < static_cast<long>(w.samples.size())) clip.samples[i] = w.samples[j];
  }
  return clip;
}

std::vector<TrainExample> augmented_trainset(
    const std::vector<std::string>& train_ids, const std::map<std::string, Waveform>& wavs,
    const std::map<std::string, EventList>& refs,
    const std::map<std::string, SensorFeatures>& features, const PipelineConfig& cfg,
    const std::string& mode) {
  const bool gda = mode == "gda" || mode == "both";
  const bool ada = mode == "ada" || mode == "both";
  if (ada && cfg.formulation != Formulation::Static) {
    throw std::runtime_error(
        "adaptive data augmentation is only wired to non-context-adaptive models");
  }

  // noise pool: negative stretches from the other training sensors
  std::vector<NoiseSource> pool;
  if (ada) {
    std::mt19937_64 rng(cfg.seed ^ 0x5EED);
    for (const std::string& id : train_ids) {
      const Waveform& w = wavs.at(id);
      const EventList& ref = refs.at(id);
      // find a 2 s window at least 0.5 s from any event
      for (int tries = 0; tries < 2000; ++tries) {
        std::uniform_real_distribution<double> unif(1.0, w.duration() - 3.0);
        const double t0 = unif(rng);
        bool clean = true;
        for (const Event& e : ref.events) {
          if (e.time > t0 - 0.5 && e.time < t0 + 2.5) {
            clean = false;
            break;
          }
        }
        if (clean) {
          NoiseSource src;
          src.id = id;
          src.subset = "train";
          src.audio = cut_clip(w, t0 + 1.0, 1.0);
          pool.push_back(src);
          break;
        }
      }
    }
  }

  AugmentationSpec spec;
  spec.n_pitch = gda ? 4 : 0;
  spec.n_stretch = gda ? 4 : 0;
  spec.n_noise = ada ? 4 : 0;

  std::vector<TrainExample> out;
  std::mt19937_64 neg_rng(cfg.seed ^ 0xA0);
  for (const std::string& id : train_ids) {
    const Waveform& w = wavs.at(id);
    const SensorFeatures& f = features.at(id);
    std::vector<std::pair<double, int>> anchors;
    for (const Event& e : refs.at(id).events) anchors.push_back({e.time, 1});
    // negatives away from events
    std::vector<double> times;
    for (const Event& e : refs.at(id).events) times.push_back(e.time);
    std::uniform_real_distribution<double> unif(0.2, w.duration() - 0.2);
    long placed = 0, attempts = 0;
    while (placed < static_cast<long>(times.size()) * cfg.dataset.negatives_per_positive) {
      if (++attempts > 100000) throw std::runtime_error("insufficient negative space");
      const double t = unif(neg_rng);
      bool ok = true;
      for (double e : times) {
        if (std::abs(e - t) < cfg.dataset.guard_seconds) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      anchors.push_back({t, 0});
      placed++;
    }

    int clip_idx = 0;
    for (const auto& [t, label] : anchors) {
      const Waveform clip = cut_clip(w, t, kEdfWindowSeconds / 2);
      out.push_back(clip_from_waveform(clip, f, t, label, cfg));
      if (label == 1 && (gda || ada)) {
        AugmentationSpec s = spec;
        s.seed = cfg.seed ^ (std::hash<std::string>{}(id) + clip_idx);
        for (const AugmentedClip& v : augment_set(clip, s, pool)) {
          out.push_back(clip_from_waveform(v.audio, f, t, label, cfg));
        }
      }
      clip_idx++;
    }
  }
  return out;
}

int cmd_train(const PipelineConfig& cfg, const std::string& data_dir, const std::string& out,
              const std::string& fold_arg, int jobs, const std::string& augment_mode) {
  const NightOnDisk night = read_night_manifest(data_dir);
  const std::vector<FoldSpec> folds = make_folds(night.sensor_ids);

  std::vector<int> fold_ids;
  if (fold_arg == "all") {
    for (size_t i = 0; i < folds.size(); ++i) fold_ids.push_back(static_cast<int>(i));
  } else {
    const int f = std::stoi(fold_arg);
    if (f < 0 || f >= static_cast<int>(folds.size())) {
      throw std::runtime_error("fold out of range: " + fold_arg);
    }
    fold_ids.push_back(f);
  }

  std::map<std::string, Waveform> wavs;
  std::map<std::string, EventList> refs;
  for (const std::string& id : night.sensor_ids) {
    wavs[id] = read_wav(night.wav_paths.at(id));
    refs[id] = read_reference_csv(night.ref_paths.at(id));
  }

  const int threads = thread_budget(jobs);
  std::map<std::string, SensorFeatures> features;
  for (const std::string& id : night.sensor_ids) {
    features[id] = featurize_recording(wavs[id], cfg.frontend, cfg.context, threads, id);
  }

  auto run_fold = [&](int fi) {
    const FoldSpec& fold = folds[fi];
    std::vector<TrainExample> train_set, val_set;
    if (augment_mode != "none") {
      train_set = augmented_trainset(fold.train, wavs, refs, features, cfg, augment_mode);
    } else {
      for (const std::string& id : fold.train) {
        auto clips = clips_from_reference(features.at(id), refs.at(id),
                                          cfg.geometry.patch_frames, cfg.dataset);
        train_set.insert(train_set.end(), clips.begin(), clips.end());
      }
    }
    for (const std::string& id : fold.validation) {
      auto clips = clips_from_reference(features.at(id), refs.at(id),
                                        cfg.geometry.patch_frames, cfg.dataset);
      val_set.insert(val_set.end(), clips.begin(), clips.end());
    }

    TrainConfig tc = cfg.training;
    tc.seed = cfg.seed + 1000003ULL * fi;
    const DetectorParams init = init_detector_params(cfg.geometry, cfg.formulation,
                                                     cfg.frontend, cfg.context, tc.seed);
    const TrainResult result = train(train_set, val_set, init, tc);

    std::string path = out;
    if (fold_ids.size() > 1) {
      const fs::path p(out);
      path = (p.parent_path() / (p.stem().string() + "_fold" + std::to_string(fi) +
                                 p.extension().string()))
                 .string();
    }
    save_checkpoint(path, result.params);

    nlohmann::json hist = nlohmann::json::array();
    for (const EpochStats& e : result.history) {
      hist.push_back(
          {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
    }
    nlohmann::json meta = {{"fold", fi},
                           {"test_sensor", fold.test},
                           {"validation_sensors", fold.validation},
                           {"train_sensors", fold.train},
                           {"best_epoch", result.best_epoch},
                           {"seed", tc.seed},
                           {"history", hist}};
    std::ofstream hf(path + ".history.json");
    hf << meta.dump(2) << "\n";
    std::printf("fold %d: best epoch %d, val accuracy %.4f -> %s\n", fi, result.best_epoch,
                result.history.empty() ? 0.0
                                       : result.history[std::max(0, result.best_epoch)]
                                             .val_accuracy,
                path.c_str());
  };

  if (fold_ids.size() == 1 || threads == 1) {
    for (int fi : fold_ids) run_fold(fi);
  } else {
    // independent jobs, capped worker count
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int workers = std::min<int>(threads, static_cast<int>(fold_ids.size()));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < fold_ids.size(); i = next.fetch_add(1)) {
          run_fold(fold_ids[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return 0;
}

int cmd_detect(const PipelineConfig& cfg, const std::string& in_path, const std::string& model,
               const std::string& out_path, double tau, double min_lag, int jobs,
               const std::string& export_dir, const std::string& edf_path) {
  const DetectorParams params = load_checkpoint(model);
  const Waveform w = read_wav(in_path);
  const EventDetectionFunction edf = compute_edf(w, params, thread_budget(jobs));
  const EventList detections = peak_pick(edf, tau > 0 ? tau : cfg.detection.tau,
                                         min_lag >= 0 ? min_lag : cfg.detection.min_lag_seconds);
  write_detections_csv(out_path, detections);
  if (!edf_path.empty()) {
    TensorFile t;
    t.shape = {static_cast<std::int64_t>(edf.values.size())};
    t.axes = {"frame"};
    t.f32 = edf.values;
    t.metadata = {{"kind", "edf"},
                  {"frame_rate", edf.frame_rate},
                  {"start_time", edf.start_time},
                  {"source", fs::path(in_path).filename().string()}};
    write_tensor(edf_path, t);
  }
  if (!export_dir.empty()) export_clips(w, detections, export_dir);
  std::cout << detections.size() << " detections -> " << out_path << "\n";
  return 0;
}

EventDetectionFunction read_edf_tensor(const std::string& path) {
  const TensorFile t = read_tensor(path);
  if (t.shape.size() != 1 || t.metadata.value("kind", "") != "edf") {
    throw std::runtime_error("unsupported format: not an EDF tensor");
  }
  EventDetectionFunction edf;
  edf.values = t.f32;
  edf.frame_rate = t.metadata.value("frame_rate", 20.0);
  edf.start_time = t.metadata.value("start_time", 0.075);
  return edf;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& edf_path,
             const std::string& det_path, const std::string& ref_path,
             const std::string& out_path, double min_lag) {
  const EventList reference = read_reference_csv(ref_path);
  const std::vector<double> thresholds = default_thresholds(cfg.evaluation.n_thresholds);
  PRCurve curve;
  if (!edf_path.empty()) {
    const EventDetectionFunction edf = read_edf_tensor(edf_path);
    curve = pr_curve(edf, reference, min_lag >= 0 ? min_lag : cfg.detection.min_lag_seconds,
                     thresholds);
  } else {
    const EventList detections = read_detections_csv(det_path);
    curve = pr_curve_from_events(detections, reference, thresholds);
  }
  if (!out_path.empty()) write_pr_csv(out_path, curve);
  std::printf("AUPRC %.6f\n", curve.auprc);
  return 0;
}

int cmd_timeline(const std::string& det_path, const std::string& ref_path,
                 const std::string& out_path, double segment, double band_split) {
  const EventList detections = read_detections_csv(det_path);
  const EventList reference = read_reference_csv(ref_path);
  const auto cells = recall_timeline(detections, reference, segment, band_split);
  write_timeline_csv(out_path, cells);
  std::cout << cells.size() << " cells -> " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& which, int instances) {
  std::vector<Formulation> formulations;
  if (which == "all") {
    formulations = {Formulation::Static, Formulation::AdaptiveWeights,
                    Formulation::AdaptiveThreshold, Formulation::MixtureOfExperts};
  } else {
    formulations = {parse_formulation(which)};
  }
  const NetworkGeometry geom = micro_geometry();
  bool ok = true;
  for (Formulation f : formulations) {
    double worst = 0.0;
    long checked = 0, skipped = 0;
    for (int i = 0; i < instances; ++i) {
      std::mt19937_64 rng(7000 + 97 * i);
      const DetectorParams params = random_params(geom, f, 500 + i);
      std::vector<TrainExample> batch_store;
      batch_store.push_back(random_example(geom, 1, rng));
      batch_store.push_back(random_example(geom, 0, rng));
      std::vector<const TrainExample*> batch = {&batch_store[0], &batch_store[1]};
      const GradCheckReport r = gradient_check(params, batch, 1e-3, 1e-5, 0, rng);
      worst = std::max(worst, r.max_rel_err);
      checked += r.checked;
      skipped += r.skipped;
    }
    const bool pass = worst <= 1e-5;
    ok = ok && pass;
    std::printf("%-6s max relative error %.3e over %ld coordinates (%ld skipped): %s\n",
                formulation_name(f).c_str(), worst, checked, skipped,
                pass ? "OK" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_bench(const PipelineConfig& cfg, double seconds, int jobs) {
  Waveform w;
  w.sample_rate = cfg.frontend.spectrogram.sample_rate;
  w.samples.resize(static_cast<size_t>(seconds * w.sample_rate));
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> normal(0.0f, 0.1f);
  for (auto& s : w.samples) s = normal(rng);

  const int threads = thread_budget(jobs);
  const auto t0 = std::chrono::steady_clock::now();
  const TimeFrequencyMatrix energy = melspectrogram(w, cfg.frontend.spectrogram, threads);
  const TimeFrequencyMatrix features = pcen(energy, cfg.frontend.pcen);
  const auto t1 = std::chrono::steady_clock::now();
  const double elapsed = std::chrono::duration<double>(t1 - t0).count();
  std::printf("featurized %.1f s of audio (%d frames x %d bands) in %.2f s: %.1fx real time"
              " (%d threads)\n",
              seconds, features.n_frames, features.n_bands, elapsed, seconds / elapsed,
              threads);
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"robust sound event detection for bioacoustic sensor networks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--set", overrides, "config override, key.path=value");

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-sensor night");
  std::string synth_out = "night";
  synth->add_option("--out", synth_out, "output directory");

  auto* feat = app.add_subcommand("featurize", "audio -> BVTF features");
  std::string feat_in, feat_out = "features.bvtf";
  int feat_jobs = 0;
  feat->add_option("--in", feat_in, "input WAV")->required();
  feat->add_option("--out", feat_out, "output BVTF");
  feat->add_option("--jobs", feat_jobs, "worker threads");

  auto* train_cmd = app.add_subcommand("train", "train a detector on a synth dataset");
  std::string train_data, train_out = "checkpoint.zip", train_fold = "0",
              train_augment = "none";
  int train_jobs = 0;
  train_cmd->add_option("--data", train_data, "synth output directory")->required();
  train_cmd->add_option("--out", train_out, "checkpoint path");
  train_cmd->add_option("--fold", train_fold, "fold index or 'all'");
  train_cmd->add_option("--jobs", train_jobs, "parallel fold workers");
  train_cmd->add_option("--augment", train_augment, "none|gda|ada|both");

  auto* detect = app.add_subcommand("detect", "audio + checkpoint -> detections CSV");
  std::string det_in, det_model, det_out = "detections.csv", det_export, det_edf;
  double det_tau = -1, det_min_lag = -1;
  int det_jobs = 0;
  detect->add_option("--in", det_in, "input WAV")->required();
  detect->add_option("--model", det_model, "checkpoint")->required();
  detect->add_option("--out", det_out, "detections CSV");
  detect->add_option("--tau", det_tau, "detection threshold");
  detect->add_option("--min-lag", det_min_lag, "minimum lag between detections, seconds");
  detect->add_option("--jobs", det_jobs, "worker threads");
  detect->add_option("--export-clips", det_export, "write one WAV per detection here");
  detect->add_option("--save-edf", det_edf, "write the EDF as a BVTF tensor");

  auto* eval = app.add_subcommand("eval", "detections/EDF + reference -> PR curve + AUPRC");
  std::string eval_edf, eval_det, eval_ref, eval_out = "pr.csv";
  double eval_min_lag = -1;
  eval->add_option("--edf", eval_edf, "EDF tensor (exact threshold sweep)");
  eval->add_option("--detections", eval_det, "detections CSV (confidence sweep)");
  eval->add_option("--reference", eval_ref, "reference CSV")->required();
  eval->add_option("--out", eval_out, "PR curve CSV");
  eval->add_option("--min-lag", eval_min_lag, "minimum lag for the EDF sweep");

  auto* timeline = app.add_subcommand("timeline", "recall over time by frequency band");
  std::string tl_det, tl_ref, tl_out = "timeline.csv";
  double tl_segment = 1800.0, tl_split = 5000.0;
  timeline->add_option("--detections", tl_det, "detections CSV")->required();
  timeline->add_option("--reference", tl_ref, "reference CSV")->required();
  timeline->add_option("--out", tl_out, "timeline CSV");
  timeline->add_option("--segment", tl_segment, "segment length, seconds");
  timeline->add_option("--band-split", tl_split, "low/high split, Hz");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference network self-test");
  std::string gc_form = "all";
  int gc_instances = 3;
  gradcheck->add_option("--formulation", gc_form, "STATIC|AW|AT|MOE|all");
  gradcheck->add_option("--instances", gc_instances, "random instances per formulation");

  auto* bench = app.add_subcommand("bench", "featurization throughput report");
  double bench_seconds = 60.0;
  int bench_jobs = 1;
  bench->add_option("--seconds", bench_seconds, "audio length to featurize");
  bench->add_option("--jobs", bench_jobs, "worker threads");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const PipelineConfig cfg = load_run_config(config_path, overrides);
    if (synth->parsed()) return cmd_synth(cfg, synth_out);
    if (feat->parsed()) return cmd_featurize(cfg, feat_in, feat_out, feat_jobs);
    if (train_cmd->parsed()) {
      return cmd_train(cfg, train_data, train_out, train_fold, train_jobs, train_augment);
    }
    if (detect->parsed()) {
      return cmd_detect(cfg, det_in, det_model, det_out, det_tau, det_min_lag, det_jobs,
                        det_export, det_edf);
    }
    if (eval->parsed()) {
      if (eval_edf.empty() == eval_det.empty()) {
        std::cerr << "eval needs exactly one of --edf or --detections\n";
        return 2;
      }
      return cmd_eval(cfg, eval_edf, eval_det, eval_ref, eval_out, eval_min_lag);
    }
    if (timeline->parsed()) return cmd_timeline(tl_det, tl_ref, tl_out, tl_segment, tl_split);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_form, gc_instances);
    if (bench->parsed()) return cmd_bench(cfg, bench_seconds, bench_jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rsed
