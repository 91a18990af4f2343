#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vbridge/codec.hpp"
#include "vbridge/guidance.hpp"
#include "vbridge/latent.hpp"

namespace vbridge {

struct SyntheticSpeaker {
  int speaker_id = 0;
  std::vector<std::pair<double, double>> harmonic_profile;  // (Hz, amplitude)
  double f0_min = 100.0;
  double f0_max = 125.0;
};

SyntheticSpeaker make_speaker(int speaker_id, std::uint64_t seed, int sample_rate = 16000);

struct Utterance {
  Waveform waveform;
  AlignmentMap alignment;
};

// Profile partials under a segment envelope, amplitude-modulated at a
// seeded f0 and shaded per phoneme, plus low-level broadband noise.
Utterance gen_utterance_with_alignment(const SyntheticSpeaker& speaker, double duration_s,
                                       std::uint64_t seed, int sample_rate = 16000);
Waveform gen_utterance(const SyntheticSpeaker& speaker, double duration_s, std::uint64_t seed,
                       int sample_rate = 16000);

enum class PerturbationKind { bandnoise, fixed_direction, sinusoidal_comb };

std::string to_string(PerturbationKind kind);
PerturbationKind parse_perturbation_kind(const std::string& text);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::bandnoise;
  double strength = 0.5;  // |eps_a| / |z_c|
  std::uint64_t seed = 0;
};

struct ProtectedLatent {
  LatentTensor z_a;
  LatentTensor eps_a;  // stored as z_a - z_c in float
};

// Latent-domain protection surrogate. fixed_direction patterns depend only
// on (seed, speaker_id); the others also on utterance_index.
ProtectedLatent protect(const LatentTensor& z_c, const PerturbationSpec& spec, int speaker_id,
                        int utterance_index);

struct ManifestEntry {
  std::string speaker_id;
  std::string utt_id;
  std::filesystem::path clean;
  std::filesystem::path protected_latent;
  std::filesystem::path alignment;
};

// Lines "speaker_id<TAB>utt_id<TAB>clean<TAB>protected<TAB>alignment".
// Relative paths are written against and resolved from the manifest's
// directory.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Residual file stored next to a protected latent: <root>/residual/<name>.
std::filesystem::path residual_path_for(const std::filesystem::path& protected_latent);

struct DatasetSpec {
  int num_speakers = 20;
  int utts_per_speaker = 20;
  double duration_s = 1.0;
  double split_ratio = 0.7;  // fraction of speakers used for training
  int enroll_per_speaker = 5;
  int dev_per_speaker = 5;
  std::vector<PerturbationKind> kinds{PerturbationKind::bandnoise};
  double strength = 0.5;
  std::uint64_t seed = 0;
  void validate() const;
};

// Test-speaker utterances are split by index into enrollment, development
// (threshold calibration) and test trials.
struct DatasetManifests {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> enroll;
  std::vector<ManifestEntry> dev;
  std::vector<ManifestEntry> test;
};

DatasetManifests build_dataset(const DatasetSpec& spec, const Codec& codec,
                               const std::filesystem::path& out_dir);

std::string speaker_name(int speaker_id);
int speaker_index(const std::string& speaker_name);

}  // namespace vbridge
