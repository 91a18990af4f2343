#include "vbridge/synthkit.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "vbridge/random.hpp"

namespace vbridge {
namespace {

constexpr double kNoiseLevel = 0.003;
constexpr double kRampSeconds = 0.01;
constexpr int kMaxPhoneme = 40;

std::uint64_t utterance_seed(std::uint64_t seed, int speaker, int utt) {
  return mix_seed(seed, 1000ULL * static_cast<std::uint64_t>(speaker) +
                            static_cast<std::uint64_t>(utt) + 17ULL);
}

}  // namespace

std::string speaker_name(int speaker_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%02d", speaker_id);
  return buf;
}

int speaker_index(const std::string& name) {
  if (name.rfind("spk", 0) != 0) throw FormatError("unrecognized speaker id " + name);
  try {
    return std::stoi(name.substr(3));
  } catch (const std::exception&) {
    throw FormatError("unrecognized speaker id " + name);
  }
}

SyntheticSpeaker make_speaker(int speaker_id, std::uint64_t seed, int sample_rate) {
  Rng rng(mix_seed(seed, 100000ULL + static_cast<std::uint64_t>(speaker_id)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticSpeaker speaker;
  speaker.speaker_id = speaker_id;
  const double nyquist = sample_rate / 2.0;
  const double lo = 200.0;
  const double hi = std::min(3800.0, 0.9 * nyquist);
  const int partials = 5;
  std::vector<double> freqs;
  while (static_cast<int>(freqs.size()) < partials) {
    const double f = lo + (hi - lo) * unit(rng);
    const bool spaced = std::all_of(freqs.begin(), freqs.end(),
                                    [f](double g) { return std::abs(f - g) > 150.0; });
    if (spaced) freqs.push_back(f);
  }
  std::sort(freqs.begin(), freqs.end());
  std::vector<double> amps(partials);
  for (auto& a : amps) a = 0.2 + 0.8 * unit(rng);
  const double total = std::accumulate(amps.begin(), amps.end(), 0.0);
  for (int k = 0; k < partials; ++k) {
    speaker.harmonic_profile.emplace_back(freqs[k], 0.8 * amps[k] / total);
  }
  speaker.f0_min = 90.0 + 130.0 * unit(rng);
  speaker.f0_max = 1.25 * speaker.f0_min;
  return speaker;
}

Utterance gen_utterance_with_alignment(const SyntheticSpeaker& speaker, double duration_s,
                                       std::uint64_t seed, int sample_rate) {
  if (!(duration_s > 0.0)) throw DomainError("gen_utterance: duration must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double f0 = speaker.f0_min + (speaker.f0_max - speaker.f0_min) * unit(rng);

  // Segments tile the utterance with short pauses between them.
  Utterance out;
  out.alignment.duration = duration_s;
  std::vector<double> gains;
  double cursor = 0.02 + 0.03 * unit(rng);
  while (cursor < duration_s - 0.08) {
    const double length = std::min(0.08 + 0.14 * unit(rng), duration_s - 0.02 - cursor);
    if (length < 0.05) break;
    PhonemeSegment seg;
    seg.start = cursor;
    seg.end = cursor + length;
    seg.phoneme_id = 1 + static_cast<int>(unit(rng) * kMaxPhoneme) % kMaxPhoneme;
    out.alignment.segments.push_back(seg);
    gains.push_back(0.6 + 0.4 * unit(rng));
    cursor = seg.end + 0.01 + 0.04 * unit(rng);
  }

  const auto& profile = speaker.harmonic_profile;
  std::vector<double> phases(profile.size());
  for (auto& p : phases) p = 2.0 * std::numbers::pi * unit(rng);
  const double am_phase = 2.0 * std::numbers::pi * unit(rng);

  const int n = static_cast<int>(std::lround(duration_s * sample_rate));
  out.waveform.sample_rate = sample_rate;
  out.waveform.samples.resize(n);
  std::size_t seg = 0;
  for (int i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / sample_rate;
    while (seg < out.alignment.segments.size() && out.alignment.segments[seg].end <= time) ++seg;
    double value = 0.0;
    if (seg < out.alignment.segments.size() && out.alignment.segments[seg].start <= time) {
      const auto& s = out.alignment.segments[seg];
      const double ramp_in = std::min(1.0, (time - s.start) / kRampSeconds);
      const double ramp_out = std::min(1.0, (s.end - time) / kRampSeconds);
      const double env = gains[seg] * 0.5 * (1.0 - std::cos(std::numbers::pi * std::min(ramp_in, ramp_out)));
      const double am = 0.8 + 0.2 * std::sin(2.0 * std::numbers::pi * f0 * time + am_phase);
      double voiced = 0.0;
      for (std::size_t k = 0; k < profile.size(); ++k) {
        // Phoneme shading keeps each partial within [0.7, 1] of its level.
        const double shade = 0.85 + 0.15 * std::cos(s.phoneme_id * (k + 1.0));
        voiced += profile[k].second * shade *
                  std::sin(2.0 * std::numbers::pi * profile[k].first * time + phases[k]);
      }
      value = env * am * voiced;
    }
    value += kNoiseLevel * normal(rng);
    out.waveform.samples[i] = static_cast<float>(std::clamp(value, -1.0, 1.0));
  }
  return out;
}

Waveform gen_utterance(const SyntheticSpeaker& speaker, double duration_s, std::uint64_t seed,
                       int sample_rate) {
  return gen_utterance_with_alignment(speaker, duration_s, seed, sample_rate).waveform;
}

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::bandnoise:
      return "bandnoise";
    case PerturbationKind::fixed_direction:
      return "fixed-direction";
    case PerturbationKind::sinusoidal_comb:
      return "sinusoidal-comb";
  }
  return "unknown";
}

PerturbationKind parse_perturbation_kind(const std::string& text) {
  if (text == "bandnoise") return PerturbationKind::bandnoise;
  if (text == "fixed-direction") return PerturbationKind::fixed_direction;
  if (text == "sinusoidal-comb") return PerturbationKind::sinusoidal_comb;
  throw ConfigError("unknown perturbation kind '" + text + "'");
}

ProtectedLatent protect(const LatentTensor& z_c, const PerturbationSpec& spec, int speaker_id,
                        int utterance_index) {
  if (!(spec.strength > 0.0)) throw DomainError("protect: strength must be positive");
  require_finite(z_c, "protect");
  const Eigen::Index channels = z_c.rows();
  const Eigen::Index frames = z_c.cols();
  Eigen::MatrixXd pattern = Eigen::MatrixXd::Zero(channels, frames);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (spec.kind) {
    case PerturbationKind::bandnoise: {
      // Gaussian noise over the upper half of the latent channels.
      Rng rng(utterance_seed(spec.seed, speaker_id, utterance_index));
      const Eigen::Index lo = channels / 2;
      for (Eigen::Index l = 0; l < frames; ++l) {
        for (Eigen::Index c = lo; c < channels; ++c) pattern(c, l) = normal(rng);
      }
      break;
    }
    case PerturbationKind::fixed_direction: {
      // One channel profile per speaker, repeated in every frame.
      Rng rng(mix_seed(spec.seed, 500000ULL + static_cast<std::uint64_t>(speaker_id)));
      Eigen::VectorXd v(channels);
      for (Eigen::Index c = 0; c < channels; ++c) v[c] = normal(rng);
      pattern = v * Eigen::RowVectorXd::Ones(frames);
      break;
    }
    case PerturbationKind::sinusoidal_comb: {
      // Every fourth channel oscillates across frames.
      Rng rng(utterance_seed(spec.seed, speaker_id, utterance_index));
      for (Eigen::Index c = 1; c < channels; c += 4) {
        const double period = 4.0 + 12.0 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (Eigen::Index l = 0; l < frames; ++l) {
          pattern(c, l) = std::sin(2.0 * std::numbers::pi * l / period + phase);
        }
      }
      break;
    }
  }
  const double pnorm = pattern.norm();
  const double cnorm = z_c.cast<double>().norm();
  if (pnorm == 0.0) throw NumericError("protect: degenerate perturbation pattern");
  const Eigen::MatrixXf eps = (pattern * (spec.strength * cnorm / pnorm)).cast<float>();
  ProtectedLatent out;
  out.z_a = z_c + eps;
  out.eps_a = out.z_a - z_c;
  return out;
}

std::filesystem::path residual_path_for(const std::filesystem::path& protected_latent) {
  return protected_latent.parent_path().parent_path() / "residual" / protected_latent.filename();
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  const auto base = path.parent_path();
  auto rel = [&base](const std::filesystem::path& p) {
    return p.is_absolute() ? p.lexically_relative(std::filesystem::absolute(base)).generic_string()
                           : p.lexically_relative(base).generic_string();
  };
  for (const auto& e : entries) {
    out << e.speaker_id << '\t' << e.utt_id << '\t' << rel(e.clean) << '\t'
        << rel(e.protected_latent) << '\t' << rel(e.alignment) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : (base / fp).lexically_normal();
  };
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 5 tab-separated fields");
    }
    entries.push_back({fields[0], fields[1], resolve(fields[2]), resolve(fields[3]),
                       resolve(fields[4])});
  }
  return entries;
}

void DatasetSpec::validate() const {
  if (num_speakers < 2 || utts_per_speaker < 1 || !(duration_s > 0.0)) {
    throw DomainError("dataset: need >= 2 speakers, >= 1 utterance, positive duration");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw DomainError("dataset: split_ratio must lie in (0, 1)");
  }
  if (enroll_per_speaker < 1 || dev_per_speaker < 1 ||
      enroll_per_speaker + dev_per_speaker >= utts_per_speaker) {
    throw DomainError("dataset: enrollment + development must leave test utterances");
  }
  if (kinds.empty()) throw DomainError("dataset: no perturbation kinds");
  if (!(strength > 0.0)) throw DomainError("dataset: strength must be positive");
}

DatasetManifests build_dataset(const DatasetSpec& spec, const Codec& codec,
                               const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  for (const char* sub : {"clean", "protected", "residual", "align"}) {
    fs::create_directories(out_dir / sub);
  }
  const int num_train = std::clamp(
      static_cast<int>(std::lround(spec.split_ratio * spec.num_speakers)), 1, spec.num_speakers - 1);
  DatasetManifests manifests;
  for (int s = 0; s < spec.num_speakers; ++s) {
    const SyntheticSpeaker speaker = make_speaker(s, spec.seed, codec.sample_rate());
    const std::string spk = speaker_name(s);
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_u%02d", spk.c_str(), u);
      const std::string utt = name;
      const Utterance utterance = gen_utterance_with_alignment(
          speaker, spec.duration_s, utterance_seed(spec.seed, s, u), codec.sample_rate());
      const LatentTensor z_c = codec.encode(utterance.waveform);
      PerturbationSpec pspec;
      pspec.kind = spec.kinds[static_cast<size_t>(u) % spec.kinds.size()];
      pspec.strength = spec.strength;
      pspec.seed = mix_seed(spec.seed, 7);
      const ProtectedLatent prot = protect(z_c, pspec, s, u);
      ManifestEntry entry{spk, utt, out_dir / "clean" / (utt + ".vblt"),
                          out_dir / "protected" / (utt + ".vblt"), out_dir / "align" / (utt + ".tsv")};
      write_latent_file(entry.clean, z_c);
      write_latent_file(entry.protected_latent, prot.z_a);
      write_latent_file(residual_path_for(entry.protected_latent), prot.eps_a);
      write_alignment_file(entry.alignment, utterance.alignment);
      if (s < num_train) {
        manifests.train.push_back(entry);
      } else if (u < spec.enroll_per_speaker) {
        manifests.enroll.push_back(entry);
      } else if (u < spec.enroll_per_speaker + spec.dev_per_speaker) {
        manifests.dev.push_back(entry);
      } else {
        manifests.test.push_back(entry);
      }
    }
  }
  std::set<std::string> train_speakers, test_speakers;
  for (const auto& e : manifests.train) train_speakers.insert(e.speaker_id);
  for (const auto& e : manifests.test) test_speakers.insert(e.speaker_id);
  for (const auto& s : test_speakers) {
    if (train_speakers.count(s) != 0) throw DomainError("dataset: speaker split is not disjoint");
  }
  write_manifest(out_dir / "train.tsv", manifests.train);
  write_manifest(out_dir / "enroll.tsv", manifests.enroll);
  write_manifest(out_dir / "dev.tsv", manifests.dev);
  write_manifest(out_dir / "test.tsv", manifests.test);
  return manifests;
}

}  // namespace vbridge
