// Command-line entry point: gen | train | purify | eval | selfcheck.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "vbridge/error.hpp"
#include "vbridge/pipeline.hpp"

namespace {

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kNumeric = 6,
  kDomain = 7,
  kSelfcheck = 8,
};

int fail(int code, const char* kind, const std::string& message) {
  std::string flat = message;
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error\t" << kind << '\t' << flat << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent diffusion-bridge purification toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  app.add_option("--config", config_path, "Experiment config file (key = value)")->required();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out_dir, "Experiment output directory");

  auto* gen = app.add_subcommand("gen", "Generate the synthetic dataset");
  auto* train = app.add_subcommand("train", "Train the bridge denoiser");
  auto* purify = app.add_subcommand("purify", "Purify the configured manifest");
  auto* eval = app.add_subcommand("eval", "Calibrate and score the trial manifest");
  auto* selfcheck = app.add_subcommand("selfcheck", "Run invariant and dataset checks");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    vbridge::ExperimentConfig config = vbridge::load_config(config_path);
    if (seed) config.set_seed(*seed);
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    if (gen->parsed()) {
      vbridge::cmd_gen(config, out, std::cout);
    } else if (train->parsed()) {
      vbridge::cmd_train(config, out, std::cout);
    } else if (purify->parsed()) {
      vbridge::cmd_purify(config, out, std::cout);
    } else if (eval->parsed()) {
      vbridge::cmd_eval(config, out, std::cout);
    } else if (selfcheck->parsed()) {
      if (!vbridge::cmd_selfcheck(config, out, std::cout)) {
        return fail(kSelfcheck, "selfcheck", "one or more checks failed");
      }
    }
  } catch (const vbridge::UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const vbridge::ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const vbridge::IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const vbridge::FormatError& e) {
    return fail(kFormat, "format", e.what());
  } catch (const vbridge::NumericError& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const vbridge::ShapeError& e) {
    return fail(kDomain, "shape", e.what());
  } catch (const vbridge::DomainError& e) {
    return fail(kDomain, "domain", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kIo, "io", e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "internal", e.what());
  }
  return kOk;
}
