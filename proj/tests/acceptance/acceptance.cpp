// Acceptance suite: one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vbridge/asv_eval.hpp"
#include "vbridge/bridge.hpp"
#include "vbridge/codec.hpp"
#include "vbridge/denoiser.hpp"
#include "vbridge/pipeline.hpp"
#include "vbridge/purifier.hpp"
#include "vbridge/random.hpp"
#include "vbridge/schedule.hpp"

using namespace vbridge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Returns a copy of the config with one key replaced, through the parser so
// derived settings stay in sync.
ExperimentConfig with(const ExperimentConfig& base, const std::string& key, const std::string& value) {
  std::istringstream in(render_config(base));
  std::string text;
  bool found = false;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key + " = ", 0) == 0) {
      line = key + " = " + value;
      found = true;
    }
    text += line + "\n";
  }
  if (!found) throw ConfigError("unknown key " + key);
  return parse_config(text, "acceptance");
}

Outcome algebraic_identities(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  double worst_identity = 0.0;
  for (const NoiseSchedule& s : {make_schedule(config), make_cosine_schedule(1000),
                                 make_cosine_schedule(ScheduleParams{200, 0.008, 0.999, 0.5})}) {
    for (int t = 1; t <= s.num_steps(); ++t) {
      const double a = s.alpha_bar(t);
      const double lhs = c_in(s, t);
      const double rhs = std::sqrt(1.0 - a) * c_tgt(s, t);
      worst_identity = std::max(worst_identity, std::abs(lhs - rhs) / std::abs(lhs));
    }
  }

  const NoiseSchedule schedule = make_schedule(config);
  const int T = schedule.num_steps();
  Rng rng(mix_seed(config.seed, 31));
  std::uniform_int_distribution<int> step(1, T);
  double worst_endpoint = 0.0;
  double worst_recon = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    const Latent<double> z_c = gaussian_latent<double>(8, 16, rng);
    const Latent<double> eps_a = 0.5 * gaussian_latent<double>(8, 16, rng);
    const Latent<double> eps = gaussian_latent<double>(8, 16, rng);
    if (i < 100) {
      const auto end = make_bridged_sample(z_c, eps_a, T, eps, schedule);
      const Latent<double> ref = forward_diffuse(Latent<double>(z_c + eps_a), T, eps, schedule);
      worst_endpoint = std::max(worst_endpoint, (end.z_t_d - ref).cwiseAbs().maxCoeff());
    }
    const int t = step(rng);
    const auto b = make_bridged_sample(z_c, eps_a, t, eps, schedule);
    const Latent<double> z0 = reconstruct_z0(b.z_t_d, b.eps_eff, eps_a, t, schedule);
    worst_recon = std::max(worst_recon, (z0 - z_c).norm() / z_c.norm());
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = worst_identity <= 1e-12 && worst_endpoint <= 1e-9 && worst_recon <= 1e-6 && elapsed < 10.0;
  o.detail = "coefficient identity " + fmt("%.2e", worst_identity) + ", endpoint " +
             fmt("%.2e", worst_endpoint) + ", reconstruction " + fmt("%.2e", worst_recon) +
             " over " + std::to_string(draws) + " draws, " + fmt("%.2f s", elapsed);
  return o;
}

Outcome gradient_check_tiny() {
  const auto start = std::chrono::steady_clock::now();
  DenoiserConfig c;
  c.latent_channels = 3;
  c.guidance_enabled = true;
  c.base_width = 4;
  c.num_levels = 2;
  c.time_embed_dim = 4;
  c.time_hidden = 8;
  c.blocks_per_level = 1;
  const GradientCheckResult r = gradient_check(c, 7, 6, 37);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = parameter_count(c) <= 5000 && r.checked == parameter_count(c) &&
           r.max_relative_error < 1e-4 && elapsed < 60.0;
  o.detail = std::to_string(r.checked) + " parameters, max relative error " +
             fmt("%.2e", r.max_relative_error) + " (" + r.worst_parameter + "), " +
             fmt("%.2f s", elapsed);
  return o;
}

// Exhaustive threshold sweep; ties on |FAR - FRR| go to the smaller threshold.
EerResult sweep_eer(const std::vector<double>& g, const std::vector<double>& im) {
  std::vector<double> scores(g);
  scores.insert(scores.end(), im.begin(), im.end());
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> cand(scores);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) cand.push_back(0.5 * (scores[i] + scores[i + 1]));
  std::sort(cand.begin(), cand.end());
  const long ng = static_cast<long>(g.size()), ni = static_cast<long>(im.size());
  EerResult best;
  long best_gap = -1;
  for (double tau : cand) {
    long acc = 0, rej = 0;
    for (double s : im) acc += s >= tau;
    for (double s : g) rej += s < tau;
    const long gap = std::labs(acc * ng - rej * ni);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best.tau = tau;
      best.eer = 0.5 * (static_cast<double>(acc) / static_cast<double>(ni) +
                        static_cast<double>(rej) / static_cast<double>(ng));
    }
  }
  return best;
}

Outcome metric_oracles(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 41));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int eer_mismatch = 0, arr_mismatch = 0;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> g(size(rng)), im(size(rng));
    const bool ties = i % 4 == 0;
    for (double& s : g) s = ties ? std::round(4 * (normal(rng) + 1.0)) / 4 : normal(rng) + 1.0;
    for (double& s : im) s = ties ? std::round(4 * normal(rng)) / 4 : normal(rng);
    const EerResult a = compute_eer(g, im);
    const EerResult b = sweep_eer(g, im);
    eer_mismatch += !(a.eer == b.eer && a.tau == b.tau);
  }
  for (int i = 0; i < 500; ++i) {
    std::vector<TrialRecord> trials(size(rng));
    for (auto& t : trials) t = {"s", unit(rng), unit(rng)};
    const double tau = unit(rng);
    long below = 0, recovered = 0;
    for (const auto& t : trials) {
      if (t.s_prot < tau) {
        ++below;
        recovered += t.s_pur >= tau;
      }
    }
    const auto arr = compute_arr(trials, tau);
    const bool same = below == 0 ? !arr.has_value()
                                 : arr.has_value() && *arr == static_cast<double>(recovered) /
                                                                  static_cast<double>(below);
    arr_mismatch += !same;
  }
  Outcome o;
  o.pass = eer_mismatch == 0 && arr_mismatch == 0;
  o.detail = "EER mismatches " + std::to_string(eer_mismatch) + "/500, ARR mismatches " +
             std::to_string(arr_mismatch) + "/500";
  return o;
}

Outcome codec_round_trip(const fs::path& work, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 51));
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  double worst = 0.0;
  for (int w : {16, 64, 256}) {
    const OrthonormalCodec codec(make_dct_codec(w, w));
    for (int trial = 0; trial < 10; ++trial) {
      Waveform x;
      x.samples.resize(w * 37);
      for (Eigen::Index i = 0; i < x.samples.size(); ++i) x.samples[i] = u(rng);
      const Waveform y = codec.decode(codec.encode(x));
      worst = std::max(worst, static_cast<double>((y.samples - x.samples).cwiseAbs().maxCoeff()));
    }
  }
  fs::create_directories(work);
  const LatentTensor z = gaussian_latent<float>(32, 123, rng);
  write_latent_file(work / "z.vblt", z);
  const bool latent_exact = read_latent_file(work / "z.vblt") == z;
  const Eigen::VectorXf e = gaussian_latent<float>(48, 1, rng);
  write_embedding_file(work / "e.vbem", e);
  const bool embedding_exact = read_embedding_file(work / "e.vbem") == e;
  Outcome o;
  o.pass = worst <= 1e-6 && latent_exact && embedding_exact;
  o.detail = "max decode(encode) error " + fmt("%.2e", worst) + ", latent file " +
             (latent_exact ? "exact" : "differs") + ", embedding file " +
             (embedding_exact ? "exact" : "differs");
  return o;
}

Outcome ddim_oracle(const ExperimentConfig& config) {
  const NoiseSchedule schedule = make_schedule(config);
  Rng rng(mix_seed(config.seed, 61));
  const LatentTensor z0 = gaussian_latent<float>(config.kept_coefficients, 50, rng);
  // With eps_a = 0 the protected latent is the clean one and the exact
  // noise is recoverable from z_t.
  const NoisePredictor<float> oracle = [&](const LatentTensor& z, int t) {
    const double a = schedule.alpha_bar(t);
    return LatentTensor((z - static_cast<float>(std::sqrt(a)) * z0) /
                        static_cast<float>(std::sqrt(1.0 - a)));
  };
  std::string detail;
  bool pass = true;
  for (int k : {1, 5, 10}) {
    PurifyConfig pc;
    pc.num_inference_steps = k;
    pc.seed = mix_seed(config.seed, 62 + k);
    const LatentTensor out = purify<float>(z0, oracle, pc, schedule);
    const double err = (out - z0).cwiseAbs().maxCoeff();
    pass = pass && err <= 1e-5;
    detail += (detail.empty() ? "" : ", ") + std::string("K=") + std::to_string(k) + " " +
              fmt("%.2e", err);
  }
  return {pass, "max |z0_hat - z0|: " + detail};
}

struct RunResult {
  TrainSummary train;
  EvalMetrics metrics;
};

// gen (unless data already exists) -> train -> purify -> eval in dir.
RunResult run_pipeline(const ExperimentConfig& config, const fs::path& dir, bool train_model,
                       bool evaluate, std::ostream& log) {
  fs::create_directories(dir);
  const ExperimentPaths paths = experiment_paths(config, dir);
  if (!fs::exists(paths.data / "test.tsv")) cmd_gen(config, dir, log);
  RunResult r;
  if (train_model) r.train = cmd_train(config, dir, log);
  if (evaluate) {
    cmd_purify(config, dir, log);
    r.metrics = cmd_eval(config, dir, log);
  }
  return r;
}

std::string arr_text(const EvalMetrics& m) {
  return m.arr ? fmt("%.3f", *m.arr) : std::string("undefined");
}

struct EndToEnd {
  Outcome c6;
  Outcome c7;
};

// Runs the matched, guided and cross-kind experiments under root.
EndToEnd end_to_end(const ExperimentConfig& base, const fs::path& root, std::ostream& log) {
  const ExperimentConfig mono = with(base, "data.kinds", "bandnoise");
  const fs::path matched_dir = root / "matched";
  const RunResult matched = run_pipeline(mono, matched_dir, true, true, log);

  ExperimentConfig guided = with(mono, "guidance.enabled", "true");
  guided = with(guided, "data.dir", fs::absolute(matched_dir / mono.data_dir).string());
  const RunResult guided_run = run_pipeline(guided, root / "guided", true, false, log);

  const EvalMetrics& m = matched.metrics;
  const bool a = m.mean_latent_l2_purified < m.mean_latent_l2_protected;
  const bool b = m.arr.has_value() && *m.arr >= 0.5;
  const double loss_off = matched.train.validation.bridge_loss;
  const double loss_on = guided_run.train.validation.bridge_loss;
  const bool c = loss_on <= loss_off;
  const double budget = 30 * 60;
  const bool fast = matched.train.report.wall_seconds <= budget &&
                    guided_run.train.report.wall_seconds <= budget;
  EndToEnd out;
  out.c6.pass = a && b && c && fast;
  out.c6.detail = std::string("(a) latent L2 ") + fmt("%.3f", m.mean_latent_l2_protected) + " -> " +
                  fmt("%.3f", m.mean_latent_l2_purified) + (a ? " ok" : " FAIL") + "; (b) ARR " +
                  arr_text(m) + " (" + std::to_string(m.protected_below_tau) + "/" +
                  std::to_string(m.trials) + " protected below tau=" + fmt("%.4f", m.tau) + ")" +
                  (b ? " ok" : " FAIL") + "; (c) validation bridge loss guided " +
                  fmt("%.4f", loss_on) + " vs unguided " + fmt("%.4f", loss_off) +
                  (c ? " ok" : " FAIL") + "; train " +
                  fmt("%.0f s", matched.train.report.wall_seconds) + " + " +
                  fmt("%.0f s", guided_run.train.report.wall_seconds);

  bool pass7 = m.arr.has_value() && *m.arr > 0.0;
  std::string detail7 = "matched bandnoise ARR " + arr_text(m);
  for (const char* kind : {"fixed-direction", "sinusoidal-comb"}) {
    ExperimentConfig cross = with(mono, "data.kinds", kind);
    cross = with(cross, "purify.checkpoint", fs::absolute(matched_dir / mono.checkpoint).string());
    const RunResult r = run_pipeline(cross, root / kind, false, true, log);
    const bool ok = pass7 && r.metrics.arr.has_value() && *r.metrics.arr >= 0.5 * *m.arr;
    pass7 = pass7 && ok;
    detail7 += std::string("; ") + kind + " ARR " + arr_text(r.metrics) + " (" +
               std::to_string(r.metrics.protected_below_tau) + "/" +
               std::to_string(r.metrics.trials) + " below tau)" + (ok ? " ok" : " FAIL");
  }
  out.c7 = {pass7, detail7};
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome compare_reports(const fs::path& a, const fs::path& b) {
  const std::vector<std::string> reports{"train_report.txt", "metrics.txt", "scores.tsv",
                                         "calibration.txt", "trials.tsv"};
  int compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (std::find(reports.begin(), reports.end(), name) == reports.end()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
      differing.push_back(rel.string());
    }
  }
  Outcome o;
  o.pass = compared > 0 && differing.empty();
  o.detail = std::to_string(compared) + " report files compared";
  for (const auto& d : differing) o.detail += ", differs: " + d;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string config_path;
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--config", config_path, "Experiment config")->required();
  app.add_option("--work", work, "Scratch directory for end-to-end runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  auto selected = [&](int c) { return only.empty() || std::count(only.begin(), only.end(), c) > 0; };
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << o.detail
              << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& f) {
    if (!selected(id)) return;
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  const ExperimentConfig config = load_config(config_path);
  const fs::path root = fs::absolute(work);

  guarded(1, "algebraic identities", [&] { return algebraic_identities(config); });
  guarded(2, "gradient check", [&] { return gradient_check_tiny(); });
  guarded(3, "metric oracles", [&] { return metric_oracles(config.seed); });
  guarded(4, "codec round trip", [&] { return codec_round_trip(root / "codec", config.seed); });
  guarded(5, "DDIM oracle recovery", [&] { return ddim_oracle(config); });

  const bool need_runs = selected(6) || selected(7) || selected(8);
  if (need_runs) {
    fs::create_directories(root);
    fs::remove_all(root / "first");
    fs::remove_all(root / "second");
    std::ofstream run_log(root / "pipeline.log");
    EndToEnd first;
    bool ok = true;
    try {
      first = end_to_end(config, root / "first", run_log);
    } catch (const std::exception& e) {
      ok = false;
      first.c6 = first.c7 = {false, std::string("error: ") + e.what()};
    }
    if (selected(6)) report(6, "end-to-end purification", first.c6);
    if (selected(7)) report(7, "cross-perturbation generalization", first.c7);
    guarded(8, "determinism", [&] {
      if (!ok) return Outcome{false, "first run did not complete"};
      end_to_end(config, root / "second", run_log);
      return compare_reports(root / "first", root / "second");
    });
  }
  return failures == 0 ? 0 : 1;
}
