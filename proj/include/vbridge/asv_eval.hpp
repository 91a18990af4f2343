#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vbridge/codec.hpp"

namespace vbridge {

using EmbeddingVector = Eigen::VectorXf;

// Filterbank statistics embedder standing in for a trained verifier.
struct EmbedderConfig {
  int sample_rate = 16000;
  int fft_size = 512;
  int hop = 256;
  int num_bands = 24;
  double min_hz = 80.0;
  double max_hz = 7600.0;
  // Log floor relative to the utterance's mean band energy.
  double floor_ratio = 1e-3;
  // Frames quieter than this fraction of the loudest frame are skipped.
  double activity_ratio = 0.01;
  // Weight of the per-band standard deviations relative to the means.
  double std_weight = 0.5;
};

class StubEmbedder {
 public:
  explicit StubEmbedder(EmbedderConfig config = {});
  // Unit-norm [mean; std_weight * std] of per-frame log band energies,
  // each frame centered across bands.
  EmbeddingVector embed(const Waveform& waveform) const;
  int dimension() const { return 2 * config_.num_bands; }
  const EmbedderConfig& config() const { return config_; }

 private:
  EmbedderConfig config_;
  Eigen::MatrixXf filterbank_;  // bands x (fft_size / 2 + 1)
  Eigen::VectorXf window_;
};

EmbeddingVector embed(const Waveform& waveform);

// e.c / (|e| |c|).
double cosine_score(const Eigen::VectorXf& e, const Eigen::VectorXf& c);

struct SpeakerCentroid {
  std::string speaker_id;
  Eigen::VectorXf centroid;  // unit-normalized mean of enrollment embeddings
};

SpeakerCentroid make_centroid(const std::string& speaker_id,
                              std::span<const EmbeddingVector> enrollment);

struct TrialRecord {
  std::string speaker_id;
  double s_prot = 0.0;
  double s_pur = 0.0;
};

struct OperatingPoint {
  double tau = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct EerResult {
  double eer = 0.0;
  double tau = 0.0;
  std::vector<OperatingPoint> curve;  // one point per candidate threshold
};

// Sweeps every distinct score and every midpoint between consecutive
// distinct scores. FAR counts impostors >= tau, FRR counts genuine < tau.
// Picks the smallest tau minimizing |FAR - FRR|; EER = (FAR + FRR) / 2 there.
EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);

// Fraction of below-threshold protected trials accepted after purification.
// Empty when no protected trial is below tau.
std::optional<double> compute_arr(std::span<const TrialRecord> trials, double tau);

EerResult calibrate(std::span<const double> dev_genuine, std::span<const double> dev_impostor);

// "EER=0.0486, τ=0.951"
std::string format_operating_point(double eer, double tau);

// Text "eer=<v> tau=<v>".
void write_calibration_file(const std::filesystem::path& path, const EerResult& result);
EerResult read_calibration_file(const std::filesystem::path& path);

// "VBEM", u32 D, D little-endian float32.
void write_embedding_file(const std::filesystem::path& path, const Eigen::VectorXf& embedding);
Eigen::VectorXf read_embedding_file(const std::filesystem::path& path);

// Throws when the two id lists share any entry.
void require_disjoint(std::span<const std::string> dev_ids, std::span<const std::string> test_ids);

}  // namespace vbridge
