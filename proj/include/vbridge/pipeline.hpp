#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vbridge/asv_eval.hpp"
#include "vbridge/codec.hpp"
#include "vbridge/denoiser.hpp"
#include "vbridge/purifier.hpp"
#include "vbridge/schedule.hpp"
#include "vbridge/synthkit.hpp"
#include "vbridge/trainer.hpp"

namespace vbridge {

// Everything one experiment needs, read from a "key = value" file.
// Relative paths resolve against the experiment output directory.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  ScheduleParams schedule{200, 0.008, 0.999, 0.5};
  int frame_size = 64;
  int kept_coefficients = 32;
  int sample_rate = 16000;
  // Multiplier applied to codec latents before they enter the bridge.
  double latent_scale = 1.0;
  DenoiserConfig model;
  TrainConfig train;
  PurifyConfig purify;
  bool guidance_enabled = false;
  double gamma = 0.1;
  DatasetSpec dataset;
  std::filesystem::path data_dir = "data";
  std::string purify_manifest = "test.tsv";  // relative to data_dir
  std::filesystem::path calibration;         // frozen calibration file, optional
  std::filesystem::path checkpoint = "model.vbck";
  EmbedderConfig embedder;

  void set_seed(std::uint64_t value);
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key with its current value, parseable by parse_config.
std::string render_config(const ExperimentConfig& config);

NoiseSchedule make_schedule(const ExperimentConfig& config);
OrthonormalCodec make_codec(const ExperimentConfig& config);

// Clean/protected pairs from a manifest, scaled by latent_scale. With
// guidance enabled, tracks come from the decoded clean latent and the
// alignment file.
std::vector<PairedSample> load_pairs(const std::vector<ManifestEntry>& entries,
                                     const ExperimentConfig& config, const Codec& codec);

struct ExperimentPaths {
  std::filesystem::path out;
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path purified;
  std::filesystem::path trials;
  std::filesystem::path metrics;
  std::filesystem::path calibration;
};

ExperimentPaths experiment_paths(const ExperimentConfig& config, const std::filesystem::path& out);

struct TrainSummary {
  TrainReport report;
  LossBreakdown validation;  // held-out speakers, fixed draws
};

struct EvalMetrics {
  double eer = 0.0;
  double tau = 0.0;
  std::optional<double> arr;
  double mean_latent_l2_protected = 0.0;
  double mean_latent_l2_purified = 0.0;
  std::size_t trials = 0;
  std::size_t protected_below_tau = 0;
};

void cmd_gen(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
TrainSummary cmd_train(const ExperimentConfig& config, const std::filesystem::path& out,
                       std::ostream& log);
// Writes purified latents and waveforms plus the trial manifest.
void cmd_purify(const ExperimentConfig& config, const std::filesystem::path& out,
                std::ostream& log);
EvalMetrics cmd_eval(const ExperimentConfig& config, const std::filesystem::path& out,
                     std::ostream& log);
// Prints one PASS/FAIL line per check; true when all pass.
bool cmd_selfcheck(const ExperimentConfig& config, const std::filesystem::path& out,
                   std::ostream& log);

// Trial manifest lines "speaker_id<TAB>protected_path<TAB>purified_path".
struct TrialPaths {
  std::string speaker_id;
  std::filesystem::path protected_latent;
  std::filesystem::path purified_latent;
};
void write_trial_manifest(const std::filesystem::path& path, const std::vector<TrialPaths>& trials);
std::vector<TrialPaths> read_trial_manifest(const std::filesystem::path& path);

// Dataset preconditions measured with the stub embedder on test speakers.
struct DatasetDiagnostics {
  double genuine_mean = 0.0;
  double impostor_mean = 0.0;
  double protected_below_tau = 0.0;  // fraction
  EerResult calibration;
};
DatasetDiagnostics diagnose_dataset(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace vbridge
