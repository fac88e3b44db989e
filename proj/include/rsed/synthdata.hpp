#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsed/audio.hpp"
#include "rsed/context.hpp"
#include "rsed/events.hpp"
#include "rsed/frontend.hpp"
#include "rsed/network.hpp"

namespace rsed {

// Background recipe for one sensor: a colored-noise bed shaped by per-octave
// gains plus amplitude-modulated tonal clusters at the insect band and its
// second harmonic. The overall level decays linearly in dB across the night.
struct SensorProfile {
  std::string id;
  std::vector<double> shape_gains;  // per octave band, centers 125 Hz .. 16 kHz
  double insect_center_hz = 2500.0;
  double insect_level_db = 0.0;  // relative to the noise bed
  double spl0_db = -30.0;        // level at the start (dBFS)
  double decay_db = 10.0;        // drop from start to end
  std::uint64_t noise_seed = 0;
};

enum class CallBand { Low, High };

struct NightSpec {
  double duration_seconds = 1200.0;
  std::vector<SensorProfile> sensors;
  int call_count = 200;           // per sensor
  double density_slope = 3.0;     // event rate grows as 1 + slope * t/T
  double band_low_lo_hz = 2000.0, band_low_hi_hz = 5000.0;
  double band_high_lo_hz = 5000.0, band_high_hi_hz = 10000.0;
  double snr_min_db = -5.0, snr_max_db = 15.0;
  double min_call_gap_seconds = 0.5;
  int sample_rate = 22050;
  std::uint64_t seed = 0;
};

// Six profiles spanning a continuum of insect bands, levels and tilts.
std::vector<SensorProfile> default_sensor_profiles();

Waveform synth_background(const SensorProfile& profile, double duration_seconds,
                          int sample_rate = 22050);

// Windowed FM sweep confined to the band.
Waveform synth_call(CallBand band, double duration_seconds, std::uint64_t seed,
                    int sample_rate = 22050, double lo_hz = 0.0, double hi_hz = 0.0);

struct SensorNight {
  std::string sensor_id;
  Waveform audio;
  EventList reference;  // exact call centers with mean frequencies
};

// One synthetic night per sensor, with calls placed along an increasing
// density profile and mixed at per-call SNRs.
std::vector<SensorNight> synth_night(const NightSpec& spec);

struct ClipDatasetConfig {
  int negatives_per_positive = 1;
  double guard_seconds = 0.5;  // negatives keep this distance from any event
  std::uint64_t seed = 0;
};

// Precomputed per-recording features shared between clip extraction and
// detection.
struct SensorFeatures {
  std::string sensor_id;
  TimeFrequencyMatrix compressed;
  ContextTensor context;
  double duration_seconds = 0.0;
};

SensorFeatures featurize_recording(const Waveform& w, const FrontendConfig& frontend,
                                   const ContextConfig& context, int n_threads = 1,
                                   const std::string& sensor_id = "");

// Positives centered on reference events plus negatives sampled away from
// them, tagged with sensor id and context slice.
std::vector<TrainExample> clips_from_reference(const SensorFeatures& features,
                                               const EventList& reference, int patch_frames,
                                               const ClipDatasetConfig& cfg);

std::vector<TrainExample> build_clip_dataset(const std::vector<SensorNight>& nights,
                                             const FrontendConfig& frontend,
                                             const ContextConfig& context, int patch_frames,
                                             const ClipDatasetConfig& cfg, int n_threads = 1);

}  // namespace rsed
