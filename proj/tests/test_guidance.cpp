#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracle_values.hpp"
#include "vbridge/error.hpp"
#include "vbridge/guidance.hpp"
#include "vbridge/random.hpp"

using namespace vbridge;
namespace fs = std::filesystem;

namespace {

TrackRow row(std::initializer_list<float> v) {
  TrackRow r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (float x : v) r[i++] = x;
  return r;
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("rasterize samples the segment at each frame center") {
  AlignmentMap a;
  a.segments = {{0.12, 0.43, 2}, {0.55, 0.81, 4}};
  const TrackRow r = rasterize(a, 10, 10.0);
  const float expected[] = {0, .5f, .5f, .5f, 0, 1, 1, 1, 0, 0};
  for (int k = 0; k < 10; ++k) CHECK(r[k] == doctest::Approx(expected[k]));
}

TEST_CASE("rasterize edge cases") {
  AlignmentMap full;
  full.segments = {{0.0, 1.0, 7}};
  CHECK(rasterize(full, 16, 16.0).isOnes());
  CHECK(rasterize(AlignmentMap{}, 5, 10.0).isZero());
  AlignmentMap silent;
  silent.segments = {{0.0, 1.0, 0}};
  CHECK(rasterize(silent, 5, 10.0).isZero());
  CHECK_THROWS_AS(rasterize(full, 0, 10.0), DomainError);
  CHECK_THROWS_AS(rasterize(full, 4, 0.0), DomainError);
}

TEST_CASE("guidance combination matches the reference") {
  const TrackRow raster = row({0, 0, .5f, .5f, 1, 1, 0, .25f});
  const TrackRow prior = row({-3, -2, -1, 0, 1, 2, 1, 0});
  const TrackRow g = build_guidance(raster, prior);
  for (int k = 0; k < 8; ++k) CHECK(g[k] == doctest::Approx(oracle::kGuidance8[k]).epsilon(1e-5));
}

TEST_CASE("constant inputs standardize to zero") {
  const TrackRow g = build_guidance(TrackRow::Constant(6, 0.5f), TrackRow::Constant(6, -2.0f));
  CHECK(g.isZero(0.0f));
  const TrackRow prior = row({1, 2, 3, 4});
  const TrackRow only_prior = build_guidance(TrackRow::Zero(4), prior);
  CHECK(only_prior[0] < 0.0f);
  CHECK(only_prior[3] > 0.0f);
  CHECK_THROWS_AS(build_guidance(TrackRow::Zero(3), TrackRow::Zero(4)), ShapeError);
}

TEST_CASE("guidance stays inside the open unit interval") {
  Rng rng(4);
  std::normal_distribution<float> n(0.0f, 5.0f);
  for (int trial = 0; trial < 50; ++trial) {
    TrackRow a(40), b(40);
    for (int i = 0; i < 40; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    const TrackRow g = build_guidance(a, b);
    CHECK(g.cwiseAbs().maxCoeff() <= 1.0f);
  }
}

TEST_CASE("rms matching sets the ratio to gamma") {
  Rng rng(5);
  const Latent<double> ref = gaussian_latent<double>(8, 20, rng);
  const Eigen::RowVectorXd y = gaussian_latent<double>(1, 20, rng);
  for (double gamma : {0.0, 0.05, 0.1, 1.0}) {
    const Eigen::RowVectorXd m = rms_match<double>(y, ref, gamma);
    CHECK(rms(m) == doctest::Approx(gamma * rms(ref)).epsilon(1e-12));
  }
  CHECK(rms_match<double>(Eigen::RowVectorXd::Zero(20), ref, 0.1).isZero(0.0));
  CHECK_THROWS_AS(rms_match<double>(y, ref, -0.1), DomainError);
}

TEST_CASE("acoustic prior follows frame energy") {
  Waveform w;
  w.samples = Eigen::VectorXf::Zero(64 * 3);
  w.samples.segment(64, 64).setConstant(0.5f);
  const TrackRow p = acoustic_prior(w, 64, 3);
  CHECK(p[1] == doctest::Approx(std::log(0.5 + 1e-6)));
  CHECK(p[0] < p[1]);
  CHECK(p[0] == p[2]);
}

TEST_CASE("missing alignment gives an absent all-zero track") {
  Waveform w;
  w.samples = Eigen::VectorXf::Ones(256);
  const GuidanceTrack none = make_guidance_track(nullptr, w, 64, 4, 0.1);
  CHECK_FALSE(none.present);
  CHECK(none.values.isZero(0.0f));
  const AlignmentMap empty;
  CHECK_FALSE(make_guidance_track(&empty, w, 64, 4, 0.1).present);
  AlignmentMap a;
  a.segments = {{0.0, 0.008, 3}};
  const GuidanceTrack some = make_guidance_track(&a, w, 64, 4, 0.1);
  CHECK(some.present);
  CHECK(some.values.size() == 4);
}

TEST_CASE("alignment file round trip and rejection") {
  const fs::path dir = fs::temp_directory_path() / "vbridge_guidance_test";
  fs::create_directories(dir);
  AlignmentMap a;
  a.segments = {{0.1, 0.2, 3}, {0.25, 0.4, 11}};
  write_alignment_file(dir / "ok.tsv", a);
  const AlignmentMap back = load_alignment_file(dir / "ok.tsv");
  CHECK(back.segments == a.segments);
  CHECK(back.duration == 0.4);

  auto bad = [&](const char* text) {
    { std::ofstream(dir / "bad.tsv", std::ios::trunc) << text; }
    return dir / "bad.tsv";
  };
  CHECK_THROWS_AS(load_alignment_file(bad("0.1\t0.2\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("0.1\t0.2\tx\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("0.1\t0.2\t3\t4\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("0.3\t0.2\t3\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("0.1\t0.3\t3\n0.2\t0.4\t5\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("0.5\t0.6\t3\n0.1\t0.2\t5\n")), FormatError);
  CHECK_THROWS_AS(load_alignment_file(bad("-0.1\t0.2\t3\n")), FormatError);
  CHECK(load_alignment_file(bad("")).empty());
  CHECK_THROWS_AS(load_alignment_file(dir / "missing.tsv"), IoError);
  fs::remove_all(dir);
}

}
