#include "vbridge/guidance.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace vbridge {
namespace {

TrackRow standardize(const TrackRow& x) {
  if (x.size() == 0) return x;
  const double mean = x.cast<double>().mean();
  const double var = (x.cast<double>().array() - mean).square().mean();
  const double sd = std::sqrt(var);
  if (sd < 1e-8) return TrackRow::Zero(x.size());
  return ((x.cast<double>().array() - mean) / sd).cast<float>().matrix();
}

}  // namespace

void AlignmentMap::validate() const {
  double prev_start = 0.0;
  double prev_end = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!std::isfinite(s.start) || !std::isfinite(s.end)) {
      throw FormatError("alignment: non-finite segment time");
    }
    if (s.start < 0.0 || s.end < 0.0) throw FormatError("alignment: negative segment time");
    if (s.end <= s.start) throw FormatError("alignment: segment end must exceed start");
    if (s.phoneme_id < 0) throw FormatError("alignment: negative phoneme id");
    if (i > 0) {
      if (s.start < prev_start) throw FormatError("alignment: segments out of order");
      if (s.start < prev_end) throw FormatError("alignment: overlapping segments");
    }
    if (duration > 0.0 && s.end > duration + 1e-9) {
      throw FormatError("alignment: segment past duration");
    }
    prev_start = s.start;
    prev_end = s.end;
  }
}

TrackRow rasterize(const AlignmentMap& alignment, int num_frames, double frame_rate) {
  if (num_frames < 1 || !(frame_rate > 0.0)) {
    throw DomainError("rasterize: need positive frame count and frame rate");
  }
  TrackRow out = TrackRow::Zero(num_frames);
  int max_id = 0;
  for (const auto& s : alignment.segments) max_id = std::max(max_id, s.phoneme_id);
  if (max_id == 0) return out;
  std::size_t seg = 0;
  for (int k = 0; k < num_frames; ++k) {
    const double center = (k + 0.5) / frame_rate;
    while (seg < alignment.segments.size() && alignment.segments[seg].end <= center) ++seg;
    if (seg < alignment.segments.size() && alignment.segments[seg].start <= center) {
      out[k] = static_cast<float>(static_cast<double>(alignment.segments[seg].phoneme_id) /
                                  max_id);
    }
  }
  return out;
}

TrackRow build_guidance(const TrackRow& raster, const TrackRow& acoustic_prior) {
  if (raster.size() != acoustic_prior.size()) {
    throw ShapeError("build_guidance: raster and prior lengths differ");
  }
  const TrackRow sum = standardize(raster) + standardize(acoustic_prior);
  return sum.array().tanh().matrix();
}

TrackRow acoustic_prior(const Waveform& waveform, int frame_size, int num_frames) {
  if (frame_size < 1 || num_frames < 1) throw DomainError("acoustic_prior: bad framing");
  TrackRow out(num_frames);
  const auto n = waveform.samples.size();
  for (int k = 0; k < num_frames; ++k) {
    double energy = 0.0;
    for (int i = 0; i < frame_size; ++i) {
      const Eigen::Index idx = static_cast<Eigen::Index>(k) * frame_size + i;
      if (idx < n) energy += static_cast<double>(waveform.samples[idx]) * waveform.samples[idx];
    }
    out[k] = static_cast<float>(std::log(std::sqrt(energy / frame_size) + 1e-6));
  }
  return out;
}

GuidanceTrack make_guidance_track(const AlignmentMap* alignment, const Waveform& waveform,
                                  int frame_size, int num_frames, double gamma) {
  GuidanceTrack track;
  track.gamma = gamma;
  if (alignment == nullptr || alignment->empty()) {
    track.values = TrackRow::Zero(num_frames);
    track.present = false;
    return track;
  }
  const double frame_rate = static_cast<double>(waveform.sample_rate) / frame_size;
  track.values = build_guidance(rasterize(*alignment, num_frames, frame_rate),
                                acoustic_prior(waveform, frame_size, num_frames));
  track.present = true;
  return track;
}

AlignmentMap load_alignment_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment file: " + path.string());
  AlignmentMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, c, extra;
    if (!std::getline(fields, a, '\t') || !std::getline(fields, b, '\t') ||
        !std::getline(fields, c, '\t') || std::getline(fields, extra, '\t')) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected start<TAB>end<TAB>phoneme_id");
    }
    PhonemeSegment seg;
    try {
      std::size_t used_a = 0, used_b = 0;
      seg.start = std::stod(a, &used_a);
      seg.end = std::stod(b, &used_b);
      if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed time");
    }
    const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), seg.phoneme_id);
    if (ec != std::errc() || ptr != c.data() + c.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed phoneme id");
    }
    map.segments.push_back(seg);
  }
  try {
    map.validate();
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  map.duration = map.segments.empty() ? 0.0 : map.segments.back().end;
  return map;
}

void write_alignment_file(const std::filesystem::path& path, const AlignmentMap& alignment) {
  alignment.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write alignment file: " + path.string());
  out << std::setprecision(17);
  for (const auto& s : alignment.segments) {
    out << s.start << '\t' << s.end << '\t' << s.phoneme_id << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vbridge
