#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "vbridge/error.hpp"
#include "vbridge/pipeline.hpp"

using namespace vbridge;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# small end-to-end run
seed = 3
schedule.num_steps = 40
schedule.horizon = 0.1
codec.latent_scale = 5
model.base_width = 8
model.num_levels = 2
model.time_embed_dim = 8
model.time_hidden = 16
model.blocks_per_level = 1
train.batch_size = 8
train.num_epochs = 2
train.crop_frames = 16
purify.num_inference_steps = 4
data.num_speakers = 6
data.utts_per_speaker = 12
data.duration_s = 0.25
data.split_ratio = 0.5
embedder.max_hz = 4000
embedder.floor_ratio = 0.02
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VBRIDGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing applies values and synchronizes modules") {
  const ExperimentConfig c = parse_config(kTinyConfig);
  CHECK(c.seed == 3);
  CHECK(c.schedule.num_steps == 40);
  CHECK(c.model.latent_channels == c.kept_coefficients);
  CHECK(c.train.seed == 3);
  CHECK(c.dataset.seed == 3);
  CHECK(c.embedder.max_hz == 4000.0);
  const ExperimentConfig g = parse_config("guidance.enabled = true\nguidance.gamma = 0.2\n");
  CHECK(g.model.guidance_enabled);
  CHECK(g.train.guidance_enabled);
  CHECK(g.purify.guidance_enabled);
  CHECK(g.gamma == 0.2);
  const ExperimentConfig k = parse_config("data.kinds = bandnoise, sinusoidal-comb\n");
  CHECK(k.dataset.kinds ==
        std::vector<PerturbationKind>{PerturbationKind::bandnoise, PerturbationKind::sinusoidal_comb});
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(parse_config("model.width = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.batch_size = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.batch_size = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("guidance.enabled = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("data.kinds = loud\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("codec.kept_coefficients = 65\n"), ConfigError);
}

TEST_CASE("rendered config parses back to the same settings") {
  const ExperimentConfig a = parse_config(kTinyConfig);
  const std::string text = render_config(a);
  const ExperimentConfig b = parse_config(text);
  CHECK(render_config(b) == text);
  CHECK(b.model == a.model);
}

TEST_CASE("pipeline commands run end to end") {
  TempDir dir("vbridge_cli_pipeline");
  const ExperimentConfig c = parse_config(kTinyConfig);
  std::ostringstream log;
  cmd_gen(c, dir.path, log);
  CHECK(fs::exists(dir.path / "data" / "test.tsv"));
  const TrainSummary t = cmd_train(c, dir.path, log);
  CHECK(t.report.epochs.size() == 2);
  CHECK(std::isfinite(t.validation.bridge_loss));
  CHECK(fs::exists(dir.path / "model.vbck"));
  cmd_purify(c, dir.path, log);
  const auto trials = read_trial_manifest(dir.path / "trials.tsv");
  CHECK(trials.size() == 6);
  for (const auto& tr : trials) CHECK(fs::exists(tr.purified_latent));
  const EvalMetrics m = cmd_eval(c, dir.path, log);
  CHECK(m.trials == 6);
  CHECK(m.eer >= 0.0);
  CHECK(m.eer <= 1.0);
  if (m.arr) {
    CHECK(*m.arr >= 0.0);
    CHECK(*m.arr <= 1.0);
  }
  CHECK(fs::exists(dir.path / "metrics.txt"));
  CHECK(fs::exists(dir.path / "calibration.txt"));
}

TEST_CASE("evaluating an empty trial manifest is a usage error") {
  TempDir dir("vbridge_cli_empty");
  { std::ofstream(dir.path / "trials.tsv"); }
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_eval(parse_config(kTinyConfig), dir.path, log), UsageError);
}

TEST_CASE("command-line exit codes") {
  TempDir dir("vbridge_cli_exit");
  const fs::path good = dir.path / "good.conf";
  { std::ofstream(good) << kTinyConfig; }
  const fs::path bad = dir.path / "bad.conf";
  { std::ofstream(bad) << "no.such.key = 1\n"; }
  const std::string out = " --out " + (dir.path / "run").string();
  CHECK(run_cli("") == 2);
  CHECK(run_cli("--config " + good.string()) == 2);
  CHECK(run_cli("--config " + good.string() + " bogus") == 2);
  CHECK(run_cli("--config " + bad.string() + " gen") == 3);
  CHECK(run_cli("--config " + (dir.path / "missing.conf").string() + " gen") == 4);
  CHECK(run_cli("--config " + good.string() + out + " purify") == 4);
  fs::create_directories(dir.path / "run");
  { std::ofstream(dir.path / "run" / "trials.tsv"); }
  CHECK(run_cli("--config " + good.string() + out + " eval") == 2);
  CHECK(run_cli("--config " + good.string() + out + " gen") == 0);
}

}
