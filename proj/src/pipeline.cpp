#include "vbridge/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "vbridge/bridge.hpp"
#include "vbridge/guidance.hpp"
#include "vbridge/random.hpp"

namespace vbridge {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field number_field(const std::string& key, T ExperimentConfig::*outer) {
  return {[key, outer](ExperimentConfig& c, const std::string& v) {
            c.*outer = parse_number<T>(key, v);
          },
          [outer](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*outer);
            else return std::to_string(c.*outer);
          }};
}

template <typename S, typename T>
Field nested_field(const std::string& key, S ExperimentConfig::*outer, T S::*inner) {
  return {[key, outer, inner](ExperimentConfig& c, const std::string& v) {
            (c.*outer).*inner = parse_number<T>(key, v);
          },
          [outer, inner](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double((c.*outer).*inner);
            else return std::to_string((c.*outer).*inner);
          }};
}

const std::map<std::string, Field>& fields() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> m;
    m["seed"] = number_field("seed", &C::seed);
    m["schedule.num_steps"] = nested_field("schedule.num_steps", &C::schedule, &ScheduleParams::num_steps);
    m["schedule.offset"] = nested_field("schedule.offset", &C::schedule, &ScheduleParams::offset);
    m["schedule.max_beta"] = nested_field("schedule.max_beta", &C::schedule, &ScheduleParams::max_beta);
    m["schedule.horizon"] = nested_field("schedule.horizon", &C::schedule, &ScheduleParams::horizon);
    m["codec.frame_size"] = number_field("codec.frame_size", &C::frame_size);
    m["codec.kept_coefficients"] = number_field("codec.kept_coefficients", &C::kept_coefficients);
    m["codec.sample_rate"] = number_field("codec.sample_rate", &C::sample_rate);
    m["codec.latent_scale"] = number_field("codec.latent_scale", &C::latent_scale);
    m["model.base_width"] = nested_field("model.base_width", &C::model, &DenoiserConfig::base_width);
    m["model.num_levels"] = nested_field("model.num_levels", &C::model, &DenoiserConfig::num_levels);
    m["model.time_embed_dim"] =
        nested_field("model.time_embed_dim", &C::model, &DenoiserConfig::time_embed_dim);
    m["model.time_hidden"] = nested_field("model.time_hidden", &C::model, &DenoiserConfig::time_hidden);
    m["model.blocks_per_level"] =
        nested_field("model.blocks_per_level", &C::model, &DenoiserConfig::blocks_per_level);
    m["model.kernel_size"] = nested_field("model.kernel_size", &C::model, &DenoiserConfig::kernel_size);
    m["train.batch_size"] = nested_field("train.batch_size", &C::train, &TrainConfig::batch_size);
    m["train.num_epochs"] = nested_field("train.num_epochs", &C::train, &TrainConfig::num_epochs);
    m["train.base_lr"] = nested_field("train.base_lr", &C::train, &TrainConfig::base_lr);
    m["train.weight_decay"] = nested_field("train.weight_decay", &C::train, &TrainConfig::weight_decay);
    m["train.grad_clip_norm"] =
        nested_field("train.grad_clip_norm", &C::train, &TrainConfig::grad_clip_norm);
    m["train.lambda_z0"] = nested_field("train.lambda_z0", &C::train, &TrainConfig::lambda_z0);
    m["train.beta1"] = nested_field("train.beta1", &C::train, &TrainConfig::beta1);
    m["train.beta2"] = nested_field("train.beta2", &C::train, &TrainConfig::beta2);
    m["train.adam_epsilon"] = nested_field("train.adam_epsilon", &C::train, &TrainConfig::adam_epsilon);
    m["train.crop_frames"] = nested_field("train.crop_frames", &C::train, &TrainConfig::crop_frames);
    m["train.channel_shift"] = nested_field("train.channel_shift", &C::train, &TrainConfig::channel_shift);
    m["train.mix_prob"] = nested_field("train.mix_prob", &C::train, &TrainConfig::mix_prob);
    m["train.residual_swap_prob"] =
        nested_field("train.residual_swap_prob", &C::train, &TrainConfig::residual_swap_prob);
    m["purify.num_inference_steps"] =
        nested_field("purify.num_inference_steps", &C::purify, &PurifyConfig::num_inference_steps);
    m["purify.terminal_step"] =
        nested_field("purify.terminal_step", &C::purify, &PurifyConfig::terminal_step);
    m["purify.manifest"] = {[](C& c, const std::string& v) { c.purify_manifest = v; },
                            [](const C& c) { return c.purify_manifest; }};
    m["purify.checkpoint"] = {[](C& c, const std::string& v) { c.checkpoint = v; },
                              [](const C& c) { return c.checkpoint.string(); }};
    m["guidance.enabled"] = {
        [](C& c, const std::string& v) { c.guidance_enabled = parse_bool("guidance.enabled", v); },
        [](const C& c) { return std::string(c.guidance_enabled ? "true" : "false"); }};
    m["guidance.gamma"] = number_field("guidance.gamma", &C::gamma);
    m["data.dir"] = {[](C& c, const std::string& v) { c.data_dir = v; },
                     [](const C& c) { return c.data_dir.string(); }};
    m["data.num_speakers"] = nested_field("data.num_speakers", &C::dataset, &DatasetSpec::num_speakers);
    m["data.utts_per_speaker"] =
        nested_field("data.utts_per_speaker", &C::dataset, &DatasetSpec::utts_per_speaker);
    m["data.duration_s"] = nested_field("data.duration_s", &C::dataset, &DatasetSpec::duration_s);
    m["data.split_ratio"] = nested_field("data.split_ratio", &C::dataset, &DatasetSpec::split_ratio);
    m["data.enroll_per_speaker"] =
        nested_field("data.enroll_per_speaker", &C::dataset, &DatasetSpec::enroll_per_speaker);
    m["data.dev_per_speaker"] =
        nested_field("data.dev_per_speaker", &C::dataset, &DatasetSpec::dev_per_speaker);
    m["data.strength"] = nested_field("data.strength", &C::dataset, &DatasetSpec::strength);
    m["data.kinds"] = {[](C& c, const std::string& v) {
                         c.dataset.kinds.clear();
                         std::istringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ',')) {
                           c.dataset.kinds.push_back(parse_perturbation_kind(trim(item)));
                         }
                       },
                       [](const C& c) {
                         std::string out;
                         for (auto k : c.dataset.kinds) out += (out.empty() ? "" : ",") + to_string(k);
                         return out;
                       }};
    m["eval.calibration"] = {[](C& c, const std::string& v) { c.calibration = v; },
                             [](const C& c) { return c.calibration.string(); }};
    m["embedder.fft_size"] = nested_field("embedder.fft_size", &C::embedder, &EmbedderConfig::fft_size);
    m["embedder.hop"] = nested_field("embedder.hop", &C::embedder, &EmbedderConfig::hop);
    m["embedder.num_bands"] = nested_field("embedder.num_bands", &C::embedder, &EmbedderConfig::num_bands);
    m["embedder.min_hz"] = nested_field("embedder.min_hz", &C::embedder, &EmbedderConfig::min_hz);
    m["embedder.max_hz"] = nested_field("embedder.max_hz", &C::embedder, &EmbedderConfig::max_hz);
    m["embedder.floor_ratio"] =
        nested_field("embedder.floor_ratio", &C::embedder, &EmbedderConfig::floor_ratio);
    m["embedder.activity_ratio"] =
        nested_field("embedder.activity_ratio", &C::embedder, &EmbedderConfig::activity_ratio);
    m["embedder.std_weight"] = nested_field("embedder.std_weight", &C::embedder, &EmbedderConfig::std_weight);
    return m;
  }();
  return table;
}

// Copies the shared settings into the per-module configs.
void sync(ExperimentConfig& c) {
  c.model.latent_channels = c.kept_coefficients;
  c.model.guidance_enabled = c.guidance_enabled;
  c.train.guidance_enabled = c.guidance_enabled;
  c.purify.guidance_enabled = c.guidance_enabled;
  c.embedder.sample_rate = c.sample_rate;
  c.set_seed(c.seed);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

LatentTensor scaled(const LatentTensor& z, double s) { return z * static_cast<float>(s); }

GuidanceTrack guidance_for(const ManifestEntry& entry, const LatentTensor& latent_unscaled,
                           const ExperimentConfig& config, const Codec& codec) {
  const AlignmentMap alignment = load_alignment_file(entry.alignment);
  const Waveform wf = codec.decode(latent_unscaled);
  return make_guidance_track(&alignment, wf, codec.frame_size(),
                             static_cast<int>(latent_unscaled.cols()), config.gamma);
}

std::vector<ManifestEntry> require_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing manifest: " + path.string());
  auto entries = read_manifest(path);
  if (entries.empty()) throw UsageError("manifest is empty: " + path.string());
  return entries;
}

struct Centroids {
  std::vector<SpeakerCentroid> list;
  const SpeakerCentroid& find(const std::string& id) const {
    for (const auto& c : list) {
      if (c.speaker_id == id) return c;
    }
    throw UsageError("no enrollment centroid for speaker " + id);
  }
};

Centroids enroll(const std::vector<ManifestEntry>& entries, const Codec& codec,
                 const StubEmbedder& embedder) {
  std::map<std::string, std::vector<EmbeddingVector>> by_speaker;
  for (const auto& e : entries) {
    by_speaker[e.speaker_id].push_back(embedder.embed(codec.decode(read_latent_file(e.clean))));
  }
  Centroids out;
  for (const auto& [id, embs] : by_speaker) out.list.push_back(make_centroid(id, embs));
  return out;
}

// Genuine: utterance vs own centroid. Impostor: vs every other centroid.
EerResult calibrate_on(const std::vector<ManifestEntry>& dev, const Centroids& centroids,
                       const Codec& codec, const StubEmbedder& embedder) {
  std::vector<double> genuine, impostor;
  for (const auto& e : dev) {
    const EmbeddingVector emb = embedder.embed(codec.decode(read_latent_file(e.clean)));
    for (const auto& c : centroids.list) {
      const double s = cosine_score(emb, c.centroid);
      (c.speaker_id == e.speaker_id ? genuine : impostor).push_back(s);
    }
  }
  if (genuine.empty() || impostor.empty()) {
    throw UsageError("calibration needs genuine and impostor development trials");
  }
  return calibrate(genuine, impostor);
}

std::vector<std::string> utt_ids(const std::vector<ManifestEntry>& entries) {
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.utt_id);
  return ids;
}

// Brute-force EER: every candidate threshold counted directly.
EerResult brute_force_eer(const std::vector<double>& g, const std::vector<double>& im) {
  std::vector<double> all = g;
  all.insert(all.end(), im.begin(), im.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> cands = all;
  for (std::size_t i = 1; i < all.size(); ++i) cands.push_back(0.5 * (all[i - 1] + all[i]));
  std::sort(cands.begin(), cands.end());
  EerResult best;
  long best_gap = -1;
  const long ng = static_cast<long>(g.size());
  const long ni = static_cast<long>(im.size());
  for (double tau : cands) {
    long acc = 0, rej = 0;
    for (double s : im) acc += s >= tau;
    for (double s : g) rej += s < tau;
    const long gap = std::labs(acc * ng - rej * ni);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best.tau = tau;
      best.eer = 0.5 * (static_cast<double>(acc) / ni + static_cast<double>(rej) / ng);
    }
  }
  return best;
}

std::string check_line(bool ok, const std::string& name, const std::string& detail) {
  return std::string(ok ? "PASS " : "FAIL ") + name + " (" + detail + ")";
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t value) {
  seed = value;
  dataset.seed = value;
  train.seed = value;
  purify.seed = value;
}

void ExperimentConfig::validate() const {
  if (!(latent_scale > 0.0)) throw ConfigError("codec.latent_scale must be positive");
  if (frame_size < 1 || kept_coefficients < 1 || kept_coefficients > frame_size ||
      sample_rate < 1) {
    throw ConfigError("codec: need 1 <= kept_coefficients <= frame_size and sample_rate > 0");
  }
  if (!(gamma >= 0.0)) throw ConfigError("guidance.gamma must be non-negative");
  if (!(schedule.horizon > 0.0 && schedule.horizon <= 1.0)) {
    throw ConfigError("schedule.horizon must lie in (0, 1]");
  }
  if (purify_manifest.empty()) throw ConfigError("purify.manifest must be set");
  try {
    model.validate();
    train.validate();
    dataset.validate();
    make_cosine_schedule(schedule);
    if (purify.terminal_step < 0 || purify.terminal_step > schedule.num_steps) {
      throw ConfigError("purify.terminal_step outside [0, schedule.num_steps]");
    }
    const int terminal = purify.terminal_step == 0 ? schedule.num_steps : purify.terminal_step;
    ddim_timesteps(terminal, purify.num_inference_steps);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    try {
      it->second.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  sync(config);
  config.validate();
  return config;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string render_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

NoiseSchedule make_schedule(const ExperimentConfig& config) {
  return make_cosine_schedule(config.schedule);
}

OrthonormalCodec make_codec(const ExperimentConfig& config) {
  return OrthonormalCodec(
      make_dct_codec(config.frame_size, config.kept_coefficients, config.sample_rate));
}

std::vector<PairedSample> load_pairs(const std::vector<ManifestEntry>& entries,
                                     const ExperimentConfig& config, const Codec& codec) {
  std::vector<PairedSample> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) {
    const LatentTensor z_c = read_latent_file(e.clean);
    const fs::path residual = residual_path_for(e.protected_latent);
    const LatentTensor eps_a = fs::exists(residual)
                                   ? read_latent_file(residual)
                                   : LatentTensor(read_latent_file(e.protected_latent) - z_c);
    require_same_shape(z_c, eps_a, ("paired sample " + e.utt_id).c_str());
    PairedSample s{e.utt_id, scaled(z_c, config.latent_scale), scaled(eps_a, config.latent_scale),
                   std::nullopt};
    if (config.guidance_enabled) s.guidance = guidance_for(e, z_c, config, codec);
    pairs.push_back(std::move(s));
  }
  return pairs;
}

ExperimentPaths experiment_paths(const ExperimentConfig& config, const fs::path& out) {
  ExperimentPaths p;
  p.out = out;
  p.data = resolve(out, config.data_dir);
  p.checkpoint = resolve(out, config.checkpoint);
  p.purified = out / "purified";
  p.trials = out / "trials.tsv";
  p.metrics = out / "metrics.txt";
  p.calibration = config.calibration.empty() ? out / "calibration.txt"
                                             : resolve(out, config.calibration);
  return p;
}

void cmd_gen(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentPaths paths = experiment_paths(config, out);
  const OrthonormalCodec codec = make_codec(config);
  const DatasetManifests m = build_dataset(config.dataset, codec, paths.data);
  log << "gen\tdir=" << paths.data.string() << "\ttrain=" << m.train.size()
      << "\tenroll=" << m.enroll.size() << "\tdev=" << m.dev.size() << "\ttest=" << m.test.size()
      << '\n';
}

TrainSummary cmd_train(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentPaths paths = experiment_paths(config, out);
  fs::create_directories(out);
  const OrthonormalCodec codec = make_codec(config);
  const NoiseSchedule schedule = make_schedule(config);
  const auto train_pairs = load_pairs(require_manifest(paths.data / "train.tsv"), config, codec);
  const auto val_pairs = load_pairs(require_manifest(paths.data / "test.tsv"), config, codec);

  std::ofstream step_log(out / "train_log.tsv", std::ios::trunc);
  if (!step_log) throw IoError("cannot write " + (out / "train_log.tsv").string());
  TrainOptions options;
  options.log = &step_log;
  options.checkpoint_path = paths.checkpoint.string();
  TrainResult result = train(train_pairs, config.train, config.model, schedule, options);

  TrainSummary summary;
  summary.report = result.report;
  summary.validation = evaluate_loss(result.params, val_pairs, schedule, config.train.lambda_z0,
                                     mix_seed(config.seed, 99));
  std::ofstream report(out / "train_report.txt", std::ios::trunc);
  for (std::size_t e = 0; e < summary.report.epochs.size(); ++e) {
    const auto& l = summary.report.epochs[e];
    report << "epoch=" << e << "\tbridge_loss=" << fmt_double(l.bridge_loss)
           << "\tz0_l1=" << fmt_double(l.z0_l1) << "\ttotal=" << fmt_double(l.total) << '\n';
  }
  report << "val_bridge_loss=" << fmt_double(summary.validation.bridge_loss) << '\n'
         << "val_total=" << fmt_double(summary.validation.total) << '\n';
  if (!report) throw IoError("cannot write train report");
  log << "train\tsteps=" << summary.report.steps << "\tparams=" << result.params.size()
      << "\tfinal_total=" << summary.report.epochs.back().total
      << "\tval_bridge_loss=" << summary.validation.bridge_loss
      << "\tseconds=" << summary.report.wall_seconds << '\n';
  return summary;
}

void cmd_purify(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentPaths paths = experiment_paths(config, out);
  const auto entries = require_manifest(paths.data / config.purify_manifest);
  if (!fs::exists(paths.checkpoint)) throw IoError("missing checkpoint: " + paths.checkpoint.string());
  const DenoiserParams<float> params = read_checkpoint(paths.checkpoint);
  if (params.config() != config.model) {
    throw ConfigError("checkpoint model configuration differs from the experiment config");
  }
  const OrthonormalCodec codec = make_codec(config);
  const NoiseSchedule schedule = make_schedule(config);
  fs::create_directories(paths.purified);
  std::vector<TrialPaths> trials;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const LatentTensor z_a = read_latent_file(e.protected_latent);
    std::optional<GuidanceTrack> track;
    if (config.guidance_enabled) track = guidance_for(e, z_a, config, codec);
    PurifyConfig pc = config.purify;
    pc.seed = mix_seed(config.purify.seed, 1000 + i);
    const LatentTensor purified =
        scaled(purify(scaled(z_a, config.latent_scale), params, pc, schedule,
                      track ? &*track : nullptr),
               1.0 / config.latent_scale);
    const fs::path latent_path = paths.purified / (e.utt_id + ".vblt");
    write_latent_file(latent_path, purified);
    Waveform wf = codec.decode(purified);
    wf.samples = wf.samples.cwiseMax(-1.0f).cwiseMin(1.0f);
    write_wav(paths.purified / (e.utt_id + ".wav"), wf);
    trials.push_back({e.speaker_id, e.protected_latent, latent_path});
  }
  write_trial_manifest(paths.trials, trials);
  log << "purify\tutterances=" << trials.size() << "\tsteps=" << config.purify.num_inference_steps
      << "\ttrials=" << paths.trials.string() << '\n';
}

EvalMetrics cmd_eval(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const ExperimentPaths paths = experiment_paths(config, out);
  if (!fs::exists(paths.trials)) throw IoError("missing trial manifest: " + paths.trials.string());
  const auto trials = read_trial_manifest(paths.trials);
  if (trials.empty()) throw UsageError("trial manifest is empty: " + paths.trials.string());
  const auto test = require_manifest(paths.data / config.purify_manifest);
  const auto enroll_entries = require_manifest(paths.data / "enroll.tsv");
  const auto dev = require_manifest(paths.data / "dev.tsv");
  const auto dev_ids = utt_ids(dev);
  const auto test_ids = utt_ids(test);
  require_disjoint(dev_ids, test_ids);

  const OrthonormalCodec codec = make_codec(config);
  const StubEmbedder embedder(config.embedder);
  const Centroids centroids = enroll(enroll_entries, codec, embedder);
  fs::create_directories(out / "centroids");
  for (const auto& c : centroids.list) {
    write_embedding_file(out / "centroids" / (c.speaker_id + ".vbem"), c.centroid);
  }

  EerResult cal;
  if (!config.calibration.empty() && fs::exists(paths.calibration)) {
    cal = read_calibration_file(paths.calibration);
  } else {
    cal = calibrate_on(dev, centroids, codec, embedder);
    write_calibration_file(paths.calibration, cal);
  }

  std::map<fs::path, fs::path> clean_of;
  for (const auto& e : test) clean_of[fs::absolute(e.protected_latent).lexically_normal()] = e.clean;

  EvalMetrics m;
  m.eer = cal.eer;
  m.tau = cal.tau;
  std::vector<TrialRecord> records;
  std::ofstream scores(out / "scores.tsv", std::ios::trunc);
  double l2_prot = 0.0, l2_pur = 0.0;
  for (const auto& t : trials) {
    const auto it = clean_of.find(fs::absolute(t.protected_latent).lexically_normal());
    if (it == clean_of.end()) {
      throw UsageError("trial " + t.protected_latent.string() + " is not in the test manifest");
    }
    const LatentTensor z_c = read_latent_file(it->second);
    const LatentTensor z_a = read_latent_file(t.protected_latent);
    const LatentTensor z_p = read_latent_file(t.purified_latent);
    require_same_shape(z_c, z_a, "eval protected");
    require_same_shape(z_c, z_p, "eval purified");
    l2_prot += (z_a - z_c).cast<double>().norm();
    l2_pur += (z_p - z_c).cast<double>().norm();
    const auto& centroid = centroids.find(t.speaker_id).centroid;
    TrialRecord r;
    r.speaker_id = t.speaker_id;
    r.s_prot = cosine_score(embedder.embed(codec.decode(z_a)), centroid);
    r.s_pur = cosine_score(embedder.embed(codec.decode(z_p)), centroid);
    records.push_back(r);
    m.protected_below_tau += r.s_prot < cal.tau;
    scores << r.speaker_id << '\t' << t.protected_latent.filename().string() << '\t'
           << fmt_double(r.s_prot) << '\t' << fmt_double(r.s_pur) << '\n';
  }
  m.trials = records.size();
  m.mean_latent_l2_protected = l2_prot / static_cast<double>(m.trials);
  m.mean_latent_l2_purified = l2_pur / static_cast<double>(m.trials);
  m.arr = compute_arr(records, cal.tau);

  std::ofstream report(paths.metrics, std::ios::trunc);
  report << "eer=" << fmt_double(m.eer) << '\n'
         << "tau=" << fmt_double(m.tau) << '\n'
         << "arr=" << (m.arr ? fmt_double(*m.arr) : std::string("undefined")) << '\n'
         << "mean_latent_l2_protected=" << fmt_double(m.mean_latent_l2_protected) << '\n'
         << "mean_latent_l2_purified=" << fmt_double(m.mean_latent_l2_purified) << '\n'
         << "trials=" << m.trials << '\n'
         << "protected_below_tau=" << m.protected_below_tau << '\n';
  if (!report) throw IoError("cannot write " + paths.metrics.string());
  log << format_operating_point(m.eer, m.tau) << ", ARR="
      << (m.arr ? fmt_double(*m.arr) : std::string("undefined")) << " ("
      << m.protected_below_tau << " of " << m.trials << " protected trials below threshold)\n"
      << "mean latent L2 to clean: protected " << m.mean_latent_l2_protected << ", purified "
      << m.mean_latent_l2_purified << '\n';
  return m;
}

DatasetDiagnostics diagnose_dataset(const ExperimentConfig& config, const fs::path& out) {
  const ExperimentPaths paths = experiment_paths(config, out);
  const auto test = require_manifest(paths.data / "test.tsv");
  const auto enroll_entries = require_manifest(paths.data / "enroll.tsv");
  const auto dev = require_manifest(paths.data / "dev.tsv");
  const OrthonormalCodec codec = make_codec(config);
  const StubEmbedder embedder(config.embedder);
  const Centroids centroids = enroll(enroll_entries, codec, embedder);
  DatasetDiagnostics d;
  d.calibration = calibrate_on(dev, centroids, codec, embedder);
  double g_sum = 0.0, i_sum = 0.0;
  long g_n = 0, i_n = 0, below = 0;
  for (const auto& e : test) {
    const EmbeddingVector clean = embedder.embed(codec.decode(read_latent_file(e.clean)));
    for (const auto& c : centroids.list) {
      const double s = cosine_score(clean, c.centroid);
      if (c.speaker_id == e.speaker_id) {
        g_sum += s;
        ++g_n;
      } else {
        i_sum += s;
        ++i_n;
      }
    }
    const EmbeddingVector prot =
        embedder.embed(codec.decode(read_latent_file(e.protected_latent)));
    below += cosine_score(prot, centroids.find(e.speaker_id).centroid) < d.calibration.tau;
  }
  d.genuine_mean = g_n > 0 ? g_sum / g_n : 0.0;
  d.impostor_mean = i_n > 0 ? i_sum / i_n : 0.0;
  d.protected_below_tau = static_cast<double>(below) / static_cast<double>(test.size());
  return d;
}

bool cmd_selfcheck(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  bool all = true;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    all = all && ok;
    log << check_line(ok, name, detail) << '\n';
  };
  char buf[160];

  const NoiseSchedule schedule = make_schedule(config);
  double worst = 0.0;
  for (int t = 1; t <= schedule.num_steps(); ++t) {
    const double a = c_in(schedule, t);
    const double b = std::sqrt(1.0 - schedule.alpha_bar(t)) * c_tgt(schedule, t);
    worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
  }
  std::snprintf(buf, sizeof buf, "max relative gap %.3g", worst);
  report(worst <= 1e-12, "schedule-coefficient-identity", buf);

  Rng rng(mix_seed(config.seed, 41));
  double endpoint = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Latent<double> z_c = gaussian_latent<double>(4, 6, rng);
    const Latent<double> eps_a = gaussian_latent<double>(4, 6, rng);
    const Latent<double> eps = gaussian_latent<double>(4, 6, rng);
    const int T = schedule.num_steps();
    const auto s = make_bridged_sample(z_c, eps_a, T, eps, schedule);
    const Latent<double> ref = forward_diffuse(adversarial_init(z_c, eps_a), T, eps, schedule);
    endpoint = std::max(endpoint, (s.z_t_d - ref).cwiseAbs().maxCoeff());
  }
  std::snprintf(buf, sizeof buf, "max abs gap %.3g", endpoint);
  report(endpoint <= 1e-9, "bridge-endpoint", buf);

  {
    const CodecSpec spec = make_dct_codec(config.frame_size, config.frame_size, config.sample_rate);
    Waveform wf;
    wf.sample_rate = config.sample_rate;
    wf.samples = Eigen::VectorXf::Random(config.frame_size * 7 + 3);
    const Waveform back = decode(spec, encode(spec, wf));
    double err = 0.0;
    for (Eigen::Index i = 0; i < back.samples.size(); ++i) {
      const float ref = i < wf.samples.size() ? wf.samples[i] : 0.0f;
      err = std::max(err, static_cast<double>(std::abs(back.samples[i] - ref)));
    }
    std::snprintf(buf, sizeof buf, "max abs error %.3g", err);
    report(err <= 1e-6, "codec-round-trip", buf);
  }

  {
    DenoiserConfig tiny;
    tiny.latent_channels = 3;
    tiny.guidance_enabled = true;
    tiny.base_width = 4;
    tiny.num_levels = 2;
    tiny.time_embed_dim = 4;
    tiny.time_hidden = 8;
    tiny.blocks_per_level = 1;
    const GradientCheckResult g = gradient_check(tiny, config.seed, 6, 17);
    std::snprintf(buf, sizeof buf, "%zu parameters, max relative error %.3g at %s", g.checked,
                  g.max_relative_error, g.worst_parameter.c_str());
    report(g.max_relative_error < 1e-4, "denoiser-gradient", buf);
  }

  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> n(1, 30);
    bool same = true;
    for (int k = 0; k < 50 && same; ++k) {
      std::vector<double> g(n(rng)), im(n(rng));
      for (auto& x : g) x = std::round(u(rng) * 8.0) / 8.0;
      for (auto& x : im) x = std::round(u(rng) * 8.0) / 8.0;
      const EerResult a = compute_eer(g, im);
      const EerResult b = brute_force_eer(g, im);
      same = a.eer == b.eer && a.tau == b.tau;
    }
    report(same, "eer-oracle", "50 random score sets");
  }

  const ExperimentPaths paths = experiment_paths(config, out);
  if (fs::exists(paths.data / "test.tsv")) {
    const DatasetDiagnostics d = diagnose_dataset(config, out);
    std::snprintf(buf, sizeof buf, "genuine mean %.4f, impostor mean %.4f", d.genuine_mean,
                  d.impostor_mean);
    report(d.genuine_mean - d.impostor_mean >= 0.1, "speaker-separability", buf);
    std::snprintf(buf, sizeof buf, "%.3f of protected test utterances below tau %.4f",
                  d.protected_below_tau, d.calibration.tau);
    report(d.protected_below_tau >= 0.7, "protection-effectiveness", buf);
  } else {
    log << "SKIP dataset checks (no dataset at " << paths.data.string() << ")\n";
  }
  return all;
}

void write_trial_manifest(const fs::path& path, const std::vector<TrialPaths>& trials) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trial manifest: " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& t : trials) {
    out << t.speaker_id << '\t'
        << fs::absolute(t.protected_latent).lexically_relative(base).generic_string() << '\t'
        << fs::absolute(t.purified_latent).lexically_relative(base).generic_string() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TrialPaths> read_trial_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trial manifest: " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<TrialPaths> trials;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 3 tab-separated fields");
    }
    trials.push_back({f[0], resolve(base, f[1]), resolve(base, f[2])});
  }
  return trials;
}

}  // namespace vbridge
