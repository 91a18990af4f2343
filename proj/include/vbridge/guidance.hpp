#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "vbridge/codec.hpp"
#include "vbridge/latent.hpp"

namespace vbridge {

struct PhonemeSegment {
  double start = 0.0;  // seconds
  double end = 0.0;
  int phoneme_id = 0;
  bool operator==(const PhonemeSegment&) const = default;
};

// Time-ordered, non-overlapping phoneme segments.
struct AlignmentMap {
  std::vector<PhonemeSegment> segments;
  double duration = 0.0;
  bool empty() const { return segments.empty(); }
  void validate() const;
};

using TrackRow = Eigen::RowVectorXf;

// Bounded per-frame guidance before RMS matching. present == false means
// no alignment was available and the channel is all zeros.
struct GuidanceTrack {
  TrackRow values;
  double gamma = 0.1;
  bool present = false;
};

// Frame k takes the phoneme active at its center time, scaled by id / max_id.
TrackRow rasterize(const AlignmentMap& alignment, int num_frames, double frame_rate);

// tanh(standardize(raster) + standardize(prior)); constant inputs
// standardize to zero.
TrackRow build_guidance(const TrackRow& raster, const TrackRow& acoustic_prior);

// y * gamma * RMS(reference) / RMS(y); zeros when RMS(y) < 1e-8.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> rms_match(
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>& y,
    const Eigen::MatrixBase<Derived>& reference, double gamma) {
  if (gamma < 0.0) throw DomainError("rms_match: gamma must be non-negative");
  const double ry = rms(y);
  if (ry < 1e-8) return Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(y.size());
  return y * static_cast<Scalar>(gamma * rms(reference) / ry);
}

// Per-frame log-RMS energy of consecutive frame_size windows.
TrackRow acoustic_prior(const Waveform& waveform, int frame_size, int num_frames);

GuidanceTrack make_guidance_track(const AlignmentMap* alignment, const Waveform& waveform,
                                  int frame_size, int num_frames, double gamma);

// Text lines "start<TAB>end<TAB>phoneme_id".
AlignmentMap load_alignment_file(const std::filesystem::path& path);
void write_alignment_file(const std::filesystem::path& path, const AlignmentMap& alignment);

}  // namespace vbridge
