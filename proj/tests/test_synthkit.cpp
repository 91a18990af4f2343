#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <iterator>
#include <numbers>
#include <set>

#include "vbridge/error.hpp"
#include "vbridge/random.hpp"
#include "vbridge/synthkit.hpp"

using namespace vbridge;
namespace fs = std::filesystem;

namespace {

double dft_magnitude(const Eigen::VectorXf& x, double hz, int sample_rate) {
  std::complex<double> acc = 0.0;
  const double w = 2.0 * std::numbers::pi * hz / sample_rate;
  for (Eigen::Index n = 0; n < x.size(); ++n) acc += static_cast<double>(x[n]) * std::polar(1.0, -w * n);
  return std::abs(acc);
}

double column_cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

LatentTensor clean_latent(int speaker, std::uint64_t seed) {
  const OrthonormalCodec codec(make_dct_codec(64, 32));
  return codec.encode(gen_utterance(make_speaker(speaker, 5), 0.5, seed));
}

}  // namespace

TEST_SUITE("synthkit") {

TEST_CASE("speakers and utterances are seeded") {
  const SyntheticSpeaker a = make_speaker(3, 7), b = make_speaker(3, 7), c = make_speaker(4, 7);
  CHECK(a.harmonic_profile == b.harmonic_profile);
  CHECK(a.harmonic_profile != c.harmonic_profile);
  CHECK(a.f0_min < a.f0_max);
  CHECK(gen_utterance(a, 0.3, 9).samples == gen_utterance(b, 0.3, 9).samples);
  CHECK(gen_utterance(a, 0.3, 9).samples != gen_utterance(a, 0.3, 10).samples);
}

TEST_CASE("utterances stay in range with the requested length") {
  for (int s = 0; s < 5; ++s) {
    const Utterance u = gen_utterance_with_alignment(make_speaker(s, 2), 0.75, s);
    CHECK(u.waveform.sample_rate == 16000);
    CHECK(u.waveform.samples.size() == 12000);
    CHECK(u.waveform.samples.cwiseAbs().maxCoeff() <= 1.0f);
    CHECK(u.waveform.samples.cwiseAbs().maxCoeff() > 0.05f);
    CHECK_FALSE(u.alignment.empty());
    CHECK_NOTHROW(u.alignment.validate());
    CHECK(u.alignment.segments.back().end <= 0.75);
  }
}

TEST_CASE("spectral peaks sit at the profile partials") {
  const SyntheticSpeaker spk = make_speaker(2, 13);
  const Waveform w = gen_utterance(spk, 1.0, 4);
  for (const auto& [hz, amp] : spk.harmonic_profile) {
    const int center = static_cast<int>(std::lround(hz));
    int best = center;
    double best_mag = -1.0;
    for (int f = center - 40; f <= center + 40; ++f) {
      const double m = dft_magnitude(w.samples, f, 16000);
      if (m > best_mag) {
        best_mag = m;
        best = f;
      }
    }
    INFO("partial at " << hz << " Hz");
    CHECK(std::abs(best - hz) <= 1.0);
  }
}

TEST_CASE("perturbation kinds parse and print") {
  for (auto k : {PerturbationKind::bandnoise, PerturbationKind::fixed_direction,
                 PerturbationKind::sinusoidal_comb}) {
    CHECK(parse_perturbation_kind(to_string(k)) == k);
  }
  CHECK(to_string(PerturbationKind::fixed_direction) == "fixed-direction");
  CHECK_THROWS_AS(parse_perturbation_kind("gaussian"), ConfigError);
}

TEST_CASE("perturbation energy is the requested fraction of the clean latent") {
  const LatentTensor z = clean_latent(1, 3);
  for (auto k : {PerturbationKind::bandnoise, PerturbationKind::fixed_direction,
                 PerturbationKind::sinusoidal_comb}) {
    for (double rho : {0.1, 0.5, 1.0}) {
      const ProtectedLatent p = protect(z, {k, rho, 8}, 1, 0);
      CHECK(p.eps_a.norm() / z.norm() == doctest::Approx(rho).epsilon(1e-5));
      CHECK(p.z_a - z == p.eps_a);
    }
  }
}

TEST_CASE("vanishing strength approaches the clean latent") {
  const LatentTensor z = clean_latent(1, 4);
  for (auto k : {PerturbationKind::bandnoise, PerturbationKind::fixed_direction,
                 PerturbationKind::sinusoidal_comb}) {
    double prev = INFINITY;
    for (double rho : {1e-1, 1e-3, 1e-6}) {
      const double d = (protect(z, {k, rho, 8}, 1, 0).z_a - z).norm();
      CHECK(d < prev);
      prev = d;
    }
    CHECK(prev <= 2e-6 * z.norm());
    CHECK_THROWS_AS(protect(z, {k, 0.0, 8}, 1, 0), DomainError);
  }
}

TEST_CASE("perturbation supports follow their design") {
  const LatentTensor z = clean_latent(2, 5);
  const ProtectedLatent band = protect(z, {PerturbationKind::bandnoise, 0.5, 1}, 2, 0);
  CHECK(band.eps_a.topRows(16).isZero(0.0f));
  CHECK_FALSE(band.eps_a.bottomRows(16).isZero(0.0f));

  const ProtectedLatent comb = protect(z, {PerturbationKind::sinusoidal_comb, 0.5, 1}, 2, 0);
  for (int c = 0; c < 32; ++c) CHECK(comb.eps_a.row(c).isZero(0.0f) == (c % 4 != 1));
}

TEST_CASE("fixed-direction perturbation shares one direction per speaker") {
  const PerturbationSpec spec{PerturbationKind::fixed_direction, 0.5, 3};
  const ProtectedLatent a = protect(clean_latent(0, 1), spec, 0, 0);
  const ProtectedLatent b = protect(clean_latent(0, 2), spec, 0, 7);
  const ProtectedLatent other = protect(clean_latent(1, 3), spec, 1, 0);
  const Eigen::VectorXf d = a.eps_a.col(0);
  for (Eigen::Index l = 0; l < a.eps_a.cols(); ++l) CHECK(column_cosine(a.eps_a.col(l), d) > 0.99999);
  CHECK(column_cosine(b.eps_a.col(3), d) > 0.99999);
  CHECK(std::abs(column_cosine(other.eps_a.col(0), d)) < 0.9);

  const PerturbationSpec band{PerturbationKind::bandnoise, 0.5, 3};
  CHECK(protect(clean_latent(0, 1), band, 0, 0).eps_a != protect(clean_latent(0, 1), band, 0, 1).eps_a);
}

TEST_CASE("speaker names round trip") {
  CHECK(speaker_name(7) == "spk07");
  CHECK(speaker_index("spk07") == 7);
  CHECK(speaker_index(speaker_name(123)) == 123);
  CHECK_THROWS(speaker_index("speaker7"));
}

TEST_CASE("dataset build keeps train and test speakers apart") {
  const fs::path dir = fs::temp_directory_path() / "vbridge_synthkit_dataset";
  fs::remove_all(dir);
  DatasetSpec spec;
  spec.num_speakers = 4;
  spec.utts_per_speaker = 12;
  spec.duration_s = 0.2;
  spec.split_ratio = 0.5;
  spec.kinds = {PerturbationKind::bandnoise, PerturbationKind::sinusoidal_comb};
  spec.seed = 4;
  const OrthonormalCodec codec(make_dct_codec(64, 32));
  const DatasetManifests m = build_dataset(spec, codec, dir);
  CHECK(m.train.size() == 24);
  CHECK(m.enroll.size() == 10);
  CHECK(m.dev.size() == 10);
  CHECK(m.test.size() == 4);

  std::set<std::string> train_spk, test_spk, utts;
  for (const auto& e : m.train) train_spk.insert(e.speaker_id);
  for (const auto* part : {&m.enroll, &m.dev, &m.test}) {
    for (const auto& e : *part) test_spk.insert(e.speaker_id);
  }
  for (const auto* part : {&m.train, &m.enroll, &m.dev, &m.test}) {
    for (const auto& e : *part) CHECK(utts.insert(e.utt_id).second);
  }
  CHECK(train_spk.size() == 2);
  CHECK(test_spk.size() == 2);
  for (const auto& s : train_spk) CHECK(test_spk.count(s) == 0);

  const auto test = read_manifest(dir / "test.tsv");
  REQUIRE(test.size() == m.test.size());
  for (const auto& e : test) {
    CHECK(fs::exists(e.clean));
    CHECK(fs::exists(e.alignment));
    const LatentTensor zc = read_latent_file(e.clean);
    const LatentTensor za = read_latent_file(e.protected_latent);
    CHECK(read_latent_file(residual_path_for(e.protected_latent)) == za - zc);
  }
  CHECK(read_manifest(dir / "train.tsv").size() == 24);
  for (const char* sub : {"clean", "protected", "residual", "align"}) {
    const auto files = std::distance(fs::directory_iterator(dir / sub), fs::directory_iterator{});
    CHECK(files == spec.num_speakers * spec.utts_per_speaker);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset spec is validated") {
  DatasetSpec spec;
  spec.utts_per_speaker = 10;  // nothing left for test trials
  CHECK_THROWS(spec.validate());
  spec = DatasetSpec{};
  spec.kinds.clear();
  CHECK_THROWS(spec.validate());
  spec = DatasetSpec{};
  spec.split_ratio = 1.0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("manifest round trip resolves relative paths") {
  const fs::path dir = fs::temp_directory_path() / "vbridge_synthkit_manifest";
  fs::create_directories(dir);
  const std::vector<ManifestEntry> entries{
      {"spk01", "u1", dir / "clean/u1.vblt", dir / "protected/u1.vblt", dir / "align/u1.tsv"}};
  write_manifest(dir / "m.tsv", entries);
  const auto back = read_manifest(dir / "m.tsv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].speaker_id == "spk01");
  CHECK(fs::weakly_canonical(back[0].clean) == fs::weakly_canonical(entries[0].clean));
  CHECK(residual_path_for(dir / "protected/u1.vblt") == dir / "residual/u1.vblt");
  fs::remove_all(dir);
}

}
