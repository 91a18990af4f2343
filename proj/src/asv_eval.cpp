#include "vbridge/asv_eval.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "binio.hpp"

namespace vbridge {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

StubEmbedder::StubEmbedder(EmbedderConfig config) : config_(config) {
  if (config_.fft_size < 8 || config_.hop < 1 || config_.num_bands < 1 ||
      !(config_.min_hz >= 0.0 && config_.max_hz > config_.min_hz) ||
      config_.max_hz > config_.sample_rate / 2.0) {
    throw DomainError("embedder: invalid filterbank configuration");
  }
  const int bins = config_.fft_size / 2 + 1;
  filterbank_ = Eigen::MatrixXf::Zero(config_.num_bands, bins);
  const double lo = hz_to_mel(config_.min_hz);
  const double hi = hz_to_mel(config_.max_hz);
  std::vector<double> edges(static_cast<size_t>(config_.num_bands) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (edges.size() - 1));
  }
  const double bin_hz = static_cast<double>(config_.sample_rate) / config_.fft_size;
  for (int b = 0; b < config_.num_bands; ++b) {
    const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      filterbank_(b, k) = static_cast<float>(w);
    }
  }
  window_.resize(config_.fft_size);
  for (int i = 0; i < config_.fft_size; ++i) {
    window_[i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config_.fft_size));
  }
}

EmbeddingVector StubEmbedder::embed(const Waveform& waveform) const {
  if (waveform.sample_rate != config_.sample_rate) {
    throw DomainError("embedder: sample rate mismatch");
  }
  require_finite(waveform.samples, "embed");
  const int n = config_.fft_size;
  const auto total = waveform.samples.size();
  const int frames = total <= n ? 1 : 1 + static_cast<int>((total - n + config_.hop - 1) / config_.hop);
  Eigen::FFT<float> fft;
  std::vector<float> buf(static_cast<size_t>(n));
  std::vector<std::complex<float>> spec;
  Eigen::MatrixXf energies(config_.num_bands, frames);
  Eigen::VectorXf frame_energy(frames);
  Eigen::VectorXf power(n / 2 + 1);
  for (int f = 0; f < frames; ++f) {
    const Eigen::Index start = static_cast<Eigen::Index>(f) * config_.hop;
    for (int i = 0; i < n; ++i) {
      const Eigen::Index idx = start + i;
      buf[static_cast<size_t>(i)] = idx < total ? waveform.samples[idx] * window_[i] : 0.0f;
    }
    fft.fwd(spec, buf);
    for (int k = 0; k <= n / 2; ++k) power[k] = std::norm(spec[static_cast<size_t>(k)]);
    energies.col(f) = filterbank_ * power;
    frame_energy[f] = energies.col(f).sum();
  }
  const float loudest = frame_energy.maxCoeff();
  std::vector<int> active;
  for (int f = 0; f < frames; ++f) {
    if (frame_energy[f] >= config_.activity_ratio * loudest) active.push_back(f);
  }
  if (active.empty()) active.push_back(0);
  double mean_band = 0.0;
  for (int f : active) mean_band += energies.col(f).cast<double>().mean();
  mean_band /= static_cast<double>(active.size());
  const double floor = std::max(config_.floor_ratio * mean_band, 1e-12);

  Eigen::MatrixXd feats(config_.num_bands, static_cast<Eigen::Index>(active.size()));
  for (size_t j = 0; j < active.size(); ++j) {
    Eigen::VectorXd col = (energies.col(active[j]).cast<double>().array() + floor).log().matrix();
    col.array() -= col.mean();
    feats.col(static_cast<Eigen::Index>(j)) = col;
  }
  const Eigen::VectorXd mean = feats.rowwise().mean();
  const Eigen::VectorXd sd =
      ((feats.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
  Eigen::VectorXd out(dimension());
  out << mean, config_.std_weight * sd;
  const double norm = out.norm();
  if (norm < 1e-12) {
    out.setZero();
    out[0] = 1.0;
    return out.cast<float>();
  }
  return (out / norm).cast<float>();
}

EmbeddingVector embed(const Waveform& waveform) {
  static const StubEmbedder embedder;
  return embedder.embed(waveform);
}

double cosine_score(const Eigen::VectorXf& e, const Eigen::VectorXf& c) {
  if (e.size() != c.size()) throw ShapeError("cosine_score: dimension mismatch");
  const double ne = e.cast<double>().norm();
  const double nc = c.cast<double>().norm();
  if (ne == 0.0 || nc == 0.0) throw NumericError("cosine_score: zero-norm vector");
  const double s = e.cast<double>().dot(c.cast<double>()) / (ne * nc);
  return std::clamp(s, -1.0, 1.0);
}

SpeakerCentroid make_centroid(const std::string& speaker_id,
                              std::span<const EmbeddingVector> enrollment) {
  if (enrollment.empty()) throw DomainError("centroid: no enrollment embeddings for " + speaker_id);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(enrollment.front().size());
  for (const auto& e : enrollment) {
    if (e.size() != sum.size()) throw ShapeError("centroid: embedding dimension mismatch");
    sum += e.cast<double>();
  }
  sum /= static_cast<double>(enrollment.size());
  const double norm = sum.norm();
  if (norm == 0.0) throw NumericError("centroid: zero mean embedding for " + speaker_id);
  return {speaker_id, (sum / norm).cast<float>()};
}

EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw DomainError("compute_eer: genuine and impostor lists must be non-empty");
  }
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> im(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> scores = g;
  scores.insert(scores.end(), im.begin(), im.end());
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> candidates;
  candidates.reserve(scores.size() * 2);
  for (size_t i = 0; i < scores.size(); ++i) {
    if (i > 0) candidates.push_back(0.5 * (scores[i - 1] + scores[i]));
    candidates.push_back(scores[i]);
  }
  const auto ng = static_cast<long long>(g.size());
  const auto ni = static_cast<long long>(im.size());
  EerResult result;
  long long best_num = -1;
  for (double tau : candidates) {
    const auto rejected = static_cast<long long>(std::lower_bound(g.begin(), g.end(), tau) - g.begin());
    const auto accepted =
        ni - static_cast<long long>(std::lower_bound(im.begin(), im.end(), tau) - im.begin());
    const double far = static_cast<double>(accepted) / static_cast<double>(ni);
    const double frr = static_cast<double>(rejected) / static_cast<double>(ng);
    result.curve.push_back({tau, far, frr});
    // |FAR - FRR| compared exactly on a common denominator.
    const long long num = std::llabs(accepted * ng - rejected * ni);
    if (best_num < 0 || num < best_num) {
      best_num = num;
      result.tau = tau;
      result.eer = 0.5 * (far + frr);
    }
  }
  return result;
}

std::optional<double> compute_arr(std::span<const TrialRecord> trials, double tau) {
  if (trials.empty()) throw DomainError("compute_arr: no trials");
  long below = 0;
  long restored = 0;
  for (const auto& trial : trials) {
    if (trial.s_prot < tau) {
      ++below;
      if (trial.s_pur >= tau) ++restored;
    }
  }
  if (below == 0) return std::nullopt;
  return static_cast<double>(restored) / static_cast<double>(below);
}

EerResult calibrate(std::span<const double> dev_genuine, std::span<const double> dev_impostor) {
  return compute_eer(dev_genuine, dev_impostor);
}

std::string format_operating_point(double eer, double tau) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "EER=%.4g, \xcf\x84=%.4g", eer, tau);
  return buf;
}

void write_calibration_file(const std::filesystem::path& path, const EerResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write calibration file: " + path.string());
  char buf[96];
  std::snprintf(buf, sizeof buf, "eer=%.17g tau=%.17g\n", result.eer, result.tau);
  out << buf;
  if (!out) throw IoError("write failed: " + path.string());
}

EerResult read_calibration_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration file: " + path.string());
  std::string a, b, extra;
  if (!(in >> a >> b) || (in >> extra)) {
    throw FormatError(path.string() + ": expected 'eer=<v> tau=<v>'");
  }
  auto value = [&](const std::string& field, const std::string& key) {
    if (field.rfind(key + "=", 0) != 0) {
      throw FormatError(path.string() + ": expected field " + key);
    }
    try {
      std::size_t used = 0;
      const std::string text = field.substr(key.size() + 1);
      const double v = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
      return v;
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed value for " + key);
    }
  };
  EerResult r;
  r.eer = value(a, "eer");
  r.tau = value(b, "tau");
  return r;
}

namespace {
constexpr char kEmbeddingMagic[5] = "VBEM";
}

void write_embedding_file(const std::filesystem::path& path, const Eigen::VectorXf& embedding) {
  require_finite(embedding, "write_embedding_file");
  binio::Writer w;
  w.bytes(kEmbeddingMagic, 4);
  w.u32(static_cast<std::uint32_t>(embedding.size()));
  for (Eigen::Index i = 0; i < embedding.size(); ++i) w.f32(embedding[i]);
  w.save(path);
}

Eigen::VectorXf read_embedding_file(const std::filesystem::path& path) {
  auto r = binio::Reader::load(path);
  r.expect_magic(kEmbeddingMagic);
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw FormatError(path.string() + ": empty embedding");
  if (r.remaining() != static_cast<std::size_t>(dim) * 4) {
    throw FormatError(path.string() + ": payload size does not match dimension");
  }
  Eigen::VectorXf e(dim);
  for (std::uint32_t i = 0; i < dim; ++i) e[i] = r.f32();
  if (!e.allFinite()) throw FormatError(path.string() + ": non-finite embedding values");
  return e;
}

void require_disjoint(std::span<const std::string> dev_ids, std::span<const std::string> test_ids) {
  const std::set<std::string> dev(dev_ids.begin(), dev_ids.end());
  for (const auto& id : test_ids) {
    if (dev.count(id) != 0) {
      throw DomainError("calibration and test sets share utterance " + id);
    }
  }
}

}  // namespace vbridge
